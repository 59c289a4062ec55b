"""Numerically stable log expected improvement and its optimizer.

Minimization convention: improvement is ``max(best - Y, 0)`` where best is
the lowest observed target outcome.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.stats import norm, qmc

Z_ASYMPTOTIC = -6.0
N_RAW_DEFAULT = 512
N_RESTARTS_DEFAULT = 8
PATTERN_STEP0 = 0.05
PATTERN_STEP_MIN = 1e-4
PATTERN_MAX_ITERS = 50


@dataclass(frozen=True)
class Incumbent:
    best_value: float


def _log_h(z: np.ndarray) -> np.ndarray:
    """log(phi(z) + z*Phi(z)), switching to an asymptotic tail below -6.

    Tail: log h(z) ~ log phi(z) - log(z^2+1) + log1p(-2/z^2 + 12/z^4),
    a second-order truncation of the standard normal-tail expansion.
    """
    z = np.asarray(z, dtype=float)
    out = np.empty_like(z)
    tail = z < Z_ASYMPTOTIC
    zt = z[tail]
    out[tail] = (
        norm.logpdf(zt)
        - np.log(zt**2 + 1.0)
        + np.log1p(-2.0 / zt**2 + 12.0 / zt**4)
    )
    zh = z[~tail]
    h = norm.pdf(zh) + zh * norm.cdf(zh)
    with np.errstate(divide="ignore"):
        out[~tail] = np.log(h)
    return out


def log_ei(post, best: Incumbent) -> float:
    """log E[max(best - Y, 0)] for Y ~ Normal(post.mean, post.variance)."""
    vals = log_ei_batch(np.array([post.mean]), np.array([post.variance]), best)
    return float(vals[0])


def log_ei_batch(means: np.ndarray, variances: np.ndarray,
                 best: Incumbent) -> np.ndarray:
    means = np.asarray(means, dtype=float)
    variances = np.maximum(np.asarray(variances, dtype=float), 0.0)
    sigma = np.sqrt(variances)
    out = np.full(means.shape, -np.inf)
    zero = sigma == 0.0
    # deterministic prediction: improvement best - mean if positive, else none
    det_gain = best.best_value - means[zero]
    with np.errstate(divide="ignore", invalid="ignore"):
        out[zero] = np.where(det_gain > 0, np.log(det_gain), -np.inf)
    nz = ~zero
    if np.any(nz):
        z = (best.best_value - means[nz]) / sigma[nz]
        out[nz] = np.log(sigma[nz]) + _log_h(z)
    return out


def suggest(model, target_dim: int, seed: int,
            n_raw: int = N_RAW_DEFAULT,
            n_restarts: int = N_RESTARTS_DEFAULT) -> np.ndarray:
    """Maximize log EI over [0,1]^d: quasi-uniform scan, then pattern search.

    Evaluates the acquisition at ``n_raw`` Sobol points, refines the best
    ``n_restarts`` by bounded coordinate-wise pattern search (step halved on
    failure), and returns the best refined point.  Deterministic given
    (model, seed); ties break by candidate index.
    """
    target_obs = model.data.target_observations()
    best = Incumbent(best_value=min(y for _, y in target_obs))

    def acq(X: np.ndarray) -> np.ndarray:
        m, v = model.predict_batch(list(X))
        return log_ei_batch(m, v, best)

    sampler = qmc.Sobol(d=target_dim, scramble=True, seed=seed)
    raw = sampler.random(n_raw)
    raw_vals = acq(raw)
    order = np.argsort(-raw_vals, kind="stable")[:n_restarts]
    starts = raw[order]

    best_x = starts[0].copy()
    best_val = raw_vals[order[0]]
    for x0 in starts:
        x = x0.copy()
        val = acq(x[None, :])[0]
        step = PATTERN_STEP0
        for _ in range(PATTERN_MAX_ITERS):
            cands = []
            for k in range(target_dim):
                for s in (+step, -step):
                    c = x.copy()
                    c[k] = min(max(c[k] + s, 0.0), 1.0)
                    cands.append(c)
            cands = np.asarray(cands)
            vals = acq(cands)
            k_best = int(np.argmax(vals))
            if vals[k_best] > val:
                x = cands[k_best]
                val = vals[k_best]
            else:
                step *= 0.5
                if step < PATTERN_STEP_MIN:
                    break
        if val > best_val:
            best_val = val
            best_x = x
    return np.clip(best_x, 0.0, 1.0)
