"""Exact-GP machinery shared by every model variant.

All trainable quantities live in one flat unconstrained vector with a fixed
packing order: per block [log lengthscales..., log output_scale], then the
task-covariance factor entries, then log noise variance, then logit-imputed
values.  Positive quantities go through log, imputed values through a
sigmoid, and the task-covariance factor is kept lower-triangular with a
positive diagonal by construction.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize

from .errors import FitFailed, NotPositiveDefinite
from .kernels import BlockKernelParams, TaskCovariance, kernel_matrix

# LogNormal prior constants.  Lengthscales get a median that grows with the
# square root of the kernel's dimensionality.
LS_MU0 = math.sqrt(2.0)
LS_SIGMA0 = math.sqrt(3.0)
OUT_MU, OUT_SIGMA = 0.0, 1.0
NOISE_MU, NOISE_SIGMA = -4.0, 1.0

FD_STEP = 1e-4
MAX_ITERS = 200
CONV_TOL = 1e-6
_PENALTY = 1e12
_LOGIT_EPS = 1e-9


def lognormal_logpdf(x: float, mu: float, sigma: float) -> float:
    if x <= 0.0:
        return -math.inf
    lx = math.log(x)
    return -lx - math.log(sigma) - 0.5 * math.log(2 * math.pi) \
        - 0.5 * ((lx - mu) / sigma) ** 2


def softplus(x: float) -> float:
    return float(np.logaddexp(0.0, x))


def inv_softplus(y: float) -> float:
    if y <= 0:
        raise ValueError("softplus inverse needs a positive argument")
    # log(exp(y) - 1), stable for large y
    return y + math.log(-math.expm1(-y))


def _sigmoid(x: float) -> float:
    return 0.5 * (1.0 + math.tanh(0.5 * x))


def _logit(p: float) -> float:
    p = min(max(p, _LOGIT_EPS), 1.0 - _LOGIT_EPS)
    return math.log(p / (1.0 - p))


@dataclass(frozen=True)
class ModelParams:
    """Unpacked trainable quantities of one model."""

    block_params: tuple[BlockKernelParams, ...]
    task_cov: TaskCovariance
    noise_variance: float
    imputed_values: dict = field(default_factory=dict)


@dataclass(frozen=True)
class Posterior:
    mean: float
    variance: float


@dataclass(frozen=True)
class ParamStructure:
    """Shape and packing order of a model's unconstrained parameter vector.

    ``task_cov_mode`` is "correlation" (unit diagonal, free strictly-lower
    entries; used with the conditional kernel) or "full" (free lower triangle
    with softplus diagonal; used with the union kernel).
    """

    block_dims: tuple[int, ...]
    num_tasks: int
    task_cov_mode: str
    imputed_keys: tuple[tuple[int, int], ...] = ()

    def __post_init__(self):
        if self.task_cov_mode not in ("correlation", "full"):
            raise ValueError(f"unknown task_cov_mode {self.task_cov_mode!r}")

    @property
    def n_cov_params(self) -> int:
        t = self.num_tasks
        return t * (t - 1) // 2 if self.task_cov_mode == "correlation" \
            else t * (t + 1) // 2

    @property
    def n_params(self) -> int:
        return (
            sum(d + 1 for d in self.block_dims)
            + self.n_cov_params
            + 1
            + len(self.imputed_keys)
        )

    # -- constrained <-> unconstrained -----------------------------------

    def pack(self, params: ModelParams) -> np.ndarray:
        v = []
        for bp in params.block_params:
            v.extend(np.log(bp.lengthscales))
            v.append(math.log(bp.output_scale))
        L = params.task_cov.factor
        t = self.num_tasks
        if self.task_cov_mode == "correlation":
            for i in range(t):
                for j in range(i):
                    v.append(L[i, j] / L[i, i])
        else:
            for i in range(t):
                for j in range(i):
                    v.append(L[i, j])
                v.append(inv_softplus(L[i, i]))
        v.append(math.log(params.noise_variance))
        for key in self.imputed_keys:
            v.append(_logit(params.imputed_values[key]))
        out = np.asarray(v, dtype=float)
        assert out.shape == (self.n_params,)
        return out

    def unpack(self, v: np.ndarray) -> ModelParams:
        v = np.asarray(v, dtype=float)
        if v.shape != (self.n_params,):
            raise ValueError(f"expected {self.n_params} params, got {v.shape}")
        pos = 0
        blocks = []
        for d in self.block_dims:
            ls = np.exp(v[pos:pos + d])
            scale = math.exp(v[pos + d])
            blocks.append(BlockKernelParams(lengthscales=ls, output_scale=scale))
            pos += d + 1
        t = self.num_tasks
        L = np.zeros((t, t))
        if self.task_cov_mode == "correlation":
            for i in range(t):
                for j in range(i):
                    L[i, j] = v[pos]
                    pos += 1
                L[i, i] = 1.0
                L[i, :i + 1] /= np.linalg.norm(L[i, :i + 1])
        else:
            for i in range(t):
                for j in range(i):
                    L[i, j] = v[pos]
                    pos += 1
                # softplus underflows to exactly 0 for very negative raw
                # values (line-search excursions); keep the factor valid
                L[i, i] = max(softplus(v[pos]), 1e-10)
                pos += 1
        noise = math.exp(v[pos])
        pos += 1
        imputed = {}
        for key in self.imputed_keys:
            imputed[key] = _sigmoid(v[pos])
            pos += 1
        return ModelParams(
            block_params=tuple(blocks),
            task_cov=TaskCovariance(factor=L),
            noise_variance=noise,
            imputed_values=imputed,
        )

    # -- priors -----------------------------------------------------------

    def median_init(self) -> np.ndarray:
        """Prior medians for constrained params; neutral defaults elsewhere."""
        v = []
        for d in self.block_dims:
            v.extend([LS_MU0 + 0.5 * math.log(d)] * d)
            v.append(OUT_MU)
        if self.task_cov_mode == "correlation":
            v.extend([0.0] * self.n_cov_params)
        else:
            t = self.num_tasks
            for i in range(t):
                v.extend([0.0] * i)
                v.append(inv_softplus(1.0))
        v.append(NOISE_MU)
        v.extend([0.0] * len(self.imputed_keys))  # sigmoid(0) = 0.5
        return np.asarray(v, dtype=float)

    def sample_init(self, rng: np.random.Generator) -> np.ndarray:
        """Restart point: constrained params drawn from their priors,
        flat-prior entries kept at their neutral defaults."""
        v = self.median_init()
        pos = 0
        for d in self.block_dims:
            v[pos:pos + d] = rng.normal(LS_MU0 + 0.5 * math.log(d), LS_SIGMA0, size=d)
            v[pos + d] = rng.normal(OUT_MU, OUT_SIGMA)
            pos += d + 1
        pos += self.n_cov_params
        v[pos] = rng.normal(NOISE_MU, NOISE_SIGMA)
        return v


def log_prior(params: ModelParams, structure: ParamStructure) -> float:
    """Sum of LogNormal log-densities; task covariance and imputed values
    carry improper flat priors and contribute zero."""
    total = 0.0
    for bp, d in zip(params.block_params, structure.block_dims):
        mu = LS_MU0 + 0.5 * math.log(d)
        for ls in bp.lengthscales:
            total += lognormal_logpdf(float(ls), mu, LS_SIGMA0)
        total += lognormal_logpdf(bp.output_scale, OUT_MU, OUT_SIGMA)
    total += lognormal_logpdf(params.noise_variance, NOISE_MU, NOISE_SIGMA)
    return total


def _standardize(y: np.ndarray) -> tuple[np.ndarray, float, float]:
    mean = float(np.mean(y))
    std = float(np.std(y, ddof=0))
    if std == 0.0:
        std = 1.0
    return (y - mean) / std, mean, std


def _noisy_cholesky(K0: np.ndarray, noise_variance: float) -> np.ndarray:
    """Lower Cholesky of K0 + (noise + jitter) I, escalating jitter tenfold."""
    from .kernels import JITTER_MAX, JITTER_START

    n = K0.shape[0]
    jitter = JITTER_START
    while jitter <= JITTER_MAX:
        try:
            return np.linalg.cholesky(K0 + (noise_variance + jitter) * np.eye(n))
        except np.linalg.LinAlgError:
            jitter *= 10.0
    raise NotPositiveDefinite("Gram matrix indefinite after jitter escalation")


def _training_gram(params: ModelParams, data, spec) -> tuple[np.ndarray, np.ndarray]:
    """Noise-free training Gram and outcomes, using the spec's cached fast
    path when it provides one."""
    if hasattr(spec, "training_gram"):
        return spec.training_gram(params, data)
    points, tasks_idx, y = spec.training_set(params, data)
    kernel = spec.build_kernel(params)
    K = kernel_matrix(kernel, points, tasks_idx)
    return 0.5 * (K + K.T), y


def log_marginal_likelihood(params: ModelParams, data, spec) -> float:
    """Exact GP log marginal likelihood on the standardized stacked outcomes."""
    K0, y = _training_gram(params, data, spec)
    y_std, _, _ = _standardize(y)
    L = _noisy_cholesky(K0, params.noise_variance)
    alpha = np.linalg.solve(L, y_std)
    n = len(y_std)
    return float(
        -0.5 * alpha @ alpha
        - np.sum(np.log(np.diag(L)))
        - 0.5 * n * math.log(2 * math.pi)
    )


def _central_diff_grad(f, v: np.ndarray, h: float = FD_STEP) -> np.ndarray:
    g = np.empty_like(v)
    for k in range(v.size):
        vp = v.copy()
        vm = v.copy()
        vp[k] += h
        vm[k] -= h
        g[k] = (f(vp) - f(vm)) / (2.0 * h)
    return g


def fit_map(data, spec, seed: int, n_restarts: int = 2) -> ModelParams:
    """MAP estimate of all hyperparameters by multi-restart quasi-Newton ascent.

    The first restart starts at the prior medians; the rest are sampled from
    the priors with the given seed.  Gradients are central finite differences
    on the unconstrained vector.  Returns the restart with the highest
    log marginal likelihood plus log prior.
    """
    structure = spec.structure
    rng = np.random.default_rng(seed)
    starts = [structure.median_init()]
    for _ in range(n_restarts - 1):
        starts.append(structure.sample_init(rng))

    def neg_objective(v: np.ndarray) -> float:
        try:
            params = structure.unpack(v)
            val = log_marginal_likelihood(params, data, spec) \
                + log_prior(params, structure)
        except (NotPositiveDefinite, np.linalg.LinAlgError, OverflowError,
                ValueError):
            return _PENALTY
        if not np.isfinite(val):
            return _PENALTY
        return -val

    best_v = None
    best_obj = math.inf
    any_success = False
    for v0 in starts:
        f0 = neg_objective(v0)
        if f0 >= _PENALTY:
            continue
        any_success = True
        res = minimize(
            neg_objective,
            v0,
            jac=lambda v: _central_diff_grad(neg_objective, v),
            method="L-BFGS-B",
            options={"maxiter": MAX_ITERS, "ftol": CONV_TOL, "gtol": 1e-8},
        )
        # never accept a point worse than the restart's own start
        cand_v, cand_f = (res.x, res.fun) if res.fun <= f0 else (v0, f0)
        if cand_f < best_obj:
            best_obj = cand_f
            best_v = cand_v
    if not any_success:
        raise FitFailed("every restart failed the Cholesky factorization")
    return structure.unpack(best_v)


@dataclass
class GPState:
    """Cached Cholesky factorization of a fitted model's training set."""

    spec: object
    params: ModelParams
    points: list
    tasks_idx: np.ndarray
    chol: np.ndarray
    alpha: np.ndarray
    y_mean: float
    y_scale: float


def make_state(params: ModelParams, data, spec) -> GPState:
    points, tasks_idx, y = spec.training_set(params, data)
    K0, _ = _training_gram(params, data, spec)
    y_std, y_mean, y_scale = _standardize(y)
    L = _noisy_cholesky(K0, params.noise_variance)
    alpha = np.linalg.solve(L.T, np.linalg.solve(L, y_std))
    return GPState(
        spec=spec, params=params, points=points,
        tasks_idx=np.asarray(tasks_idx, dtype=int),
        chol=L, alpha=alpha, y_mean=y_mean, y_scale=y_scale,
    )


def predict_state(state: GPState, x_stars, task_star: int) -> tuple[np.ndarray, np.ndarray]:
    """Batched posterior means and variances, de-standardized."""
    spec = state.spec
    params = state.params
    kernel = spec.build_kernel(params)
    star_points = [spec.predict_input(params, x, task_star) for x in x_stars]
    star_tasks = [task_star] * len(star_points)
    Ks = kernel_matrix(kernel, state.points, state.tasks_idx, star_points, star_tasks)
    means = Ks.T @ state.alpha
    v = np.linalg.solve(state.chol, Ks)
    if hasattr(kernel, "diag"):
        kss = kernel.diag(star_points, star_tasks)
    else:
        kss = np.array([kernel(p, task_star, p, task_star) for p in star_points])
    variances = np.maximum(kss - np.sum(v * v, axis=0), 0.0)
    return state.y_mean + state.y_scale * means, (state.y_scale ** 2) * variances


def posterior(params: ModelParams, data, x_star, task_star: int, spec) -> Posterior:
    """Posterior at a single point (convenience over :func:`predict_state`)."""
    state = make_state(params, data, spec)
    m, v = predict_state(state, [x_star], task_star)
    return Posterior(mean=float(m[0]), variance=float(v[0]))
