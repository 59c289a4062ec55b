"""Tests for log expected improvement and the acquisition optimizer."""

import math

import numpy as np
import pytest

from hetbo import gp, kernels, models
from hetbo.acquisition import Incumbent, log_ei, log_ei_batch, suggest

from conftest import make_task
from mc_oracle import MonteCarloEI


def _log_ei_scalar(mean, sigma, best):
    post = gp.Posterior(mean=float(mean), variance=float(sigma) ** 2)
    return log_ei(post, Incumbent(best_value=float(best)))


# ---------------------------------------------------------------------------
# closed-form and sentinel values


def test_log_ei_at_zero_z_is_log_standard_normal_density():
    # mean == best, sigma == 1: expected improvement is phi(0)
    got = _log_ei_scalar(0.0, 1.0, 0.0)
    assert got == pytest.approx(math.log(0.398942), abs=1e-5)
    assert got == pytest.approx(-0.918939, abs=1e-5)


def test_log_ei_zero_sigma_no_improvement_is_minus_inf():
    assert _log_ei_scalar(1.0, 0.0, 1.0) == -np.inf
    assert _log_ei_scalar(2.0, 0.0, 1.0) == -np.inf


def test_log_ei_zero_sigma_with_gain_is_log_gain():
    assert _log_ei_scalar(0.25, 0.0, 1.0) == pytest.approx(math.log(0.75))


def test_log_ei_scalar_matches_batch():
    means = np.array([0.1, -0.4, 2.0])
    variances = np.array([0.5, 1.3, 0.01])
    batch = log_ei_batch(means, variances, Incumbent(best_value=0.3))
    for m, v, b in zip(means, variances, batch):
        post = gp.Posterior(mean=float(m), variance=float(v))
        assert log_ei(post, Incumbent(best_value=0.3)) == pytest.approx(b)


# ---------------------------------------------------------------------------
# Monte-Carlo oracle (reduced sample count; the acceptance suite scales it up)


def test_log_ei_matches_monte_carlo_oracle():
    oracle = MonteCarloEI(n_samples=10**6, seed=20)
    rng = np.random.default_rng(21)
    for _ in range(60):
        z = rng.uniform(-8.0, 3.0)
        sigma = math.exp(rng.uniform(-2.0, 1.0))
        best = rng.uniform(-2.0, 2.0)
        mean = best - z * sigma
        got = _log_ei_scalar(mean, sigma, best)
        want = oracle.log_ei(mean, sigma, best)
        tol = max(3e-2, 3e-3 * abs(want))
        assert got == pytest.approx(want, abs=tol), f"z={z}"


def test_log_ei_continuous_across_asymptotic_switch():
    # the second-order tail truncation leaves a ~2e-3 step at the switch,
    # well inside the Monte-Carlo tolerance of 1e-2
    lo = _log_ei_scalar(6.0 + 1e-7, 1.0, 0.0)
    hi = _log_ei_scalar(6.0 - 1e-7, 1.0, 0.0)
    assert lo == pytest.approx(hi, abs=5e-3)


# ---------------------------------------------------------------------------
# invariants


def test_log_ei_decreasing_in_mean():
    means = np.linspace(-3.0, 3.0, 200)
    vals = [_log_ei_scalar(m, 0.7, 0.0) for m in means]
    assert all(a > b for a, b in zip(vals, vals[1:]))


def test_log_ei_increasing_in_sigma_when_mean_above_best():
    sigmas = np.linspace(0.05, 3.0, 150)
    vals = [_log_ei_scalar(0.5, s, 0.0) for s in sigmas]
    assert all(a < b for a, b in zip(vals, vals[1:]))


def test_exp_log_ei_finite_and_nonnegative():
    rng = np.random.default_rng(3)
    means = rng.normal(size=500)
    variances = rng.uniform(0.0, 4.0, size=500)
    vals = log_ei_batch(means, variances, Incumbent(best_value=0.0))
    ei = np.exp(vals)
    assert np.all(np.isfinite(ei))
    assert np.all(ei >= 0.0)


def test_argmax_shift_invariance():
    rng = np.random.default_rng(5)
    means = rng.normal(size=64)
    variances = rng.uniform(0.01, 2.0, size=64)
    best = float(means.min())
    base = log_ei_batch(means, variances, Incumbent(best_value=best))
    for c in (-17.3, 0.5, 42.0):
        shifted = log_ei_batch(means + c, variances,
                               Incumbent(best_value=best + c))
        assert np.argmax(shifted) == np.argmax(base)


# ---------------------------------------------------------------------------
# suggest


def _sharp_minimum_model(x0=0.35):
    """1-D interpolating GP whose posterior mean dips sharply at x0."""
    task = make_task(0, [1])
    xs = [0.05, 0.2, x0, 0.5, 0.65, 0.8, 0.95]
    ys = [1.0, 1.0, -1.0, 1.0, 1.0, 1.0, 1.0]
    data = models.ObservationSet(
        observations={0: [(np.array([x]), y) for x, y in zip(xs, ys)]},
        target_task=0,
    )
    structure = gp.ParamStructure(
        block_dims=(1,), num_tasks=1, task_cov_mode="correlation",
        imputed_keys=(),
    )
    params = structure.unpack(structure.median_init())
    params = gp.ModelParams(
        block_params=(kernels.BlockKernelParams(
            lengthscales=np.array([0.04]), output_scale=1.0),),
        task_cov=params.task_cov,
        noise_variance=1e-6,
        imputed_values={},
    )
    return models.build_model(models.ModelKind.VANILLA, [task], data,
                              seed=0, params=params)


def test_suggest_deterministic():
    model = _sharp_minimum_model()
    a = suggest(model, target_dim=1, seed=123)
    b = suggest(model, target_dim=1, seed=123)
    np.testing.assert_array_equal(a, b)


def test_suggest_within_bounds():
    model = _sharp_minimum_model()
    for seed in range(5):
        x = suggest(model, target_dim=1, seed=seed)
        assert x.shape == (1,)
        assert np.all(x >= 0.0) and np.all(x <= 1.0)


def test_suggest_finds_sharp_minimum():
    x0 = 0.35
    model = _sharp_minimum_model(x0)
    best = Incumbent(best_value=-1.0)

    grid = np.linspace(0.0, 1.0, 10_000)[:, None]
    m, v = model.predict_batch(list(grid))
    grid_vals = log_ei_batch(m, v, best)
    grid_opt = float(grid[np.argmax(grid_vals), 0])

    # the acquisition is near-symmetric around the incumbent at x0, so the
    # optimizer may settle on either flank; require proximity to x0 and a
    # value matching the dense grid's maximum
    assert abs(grid_opt - x0) <= 0.02
    x = suggest(model, target_dim=1, seed=7)
    assert abs(x[0] - x0) <= 0.02
    m, v = model.predict_batch([x])
    assert float(log_ei_batch(m, v, best)[0]) >= float(grid_vals.max()) - 1e-3


def test_suggest_different_seeds_agree_on_sharp_minimum():
    model = _sharp_minimum_model()
    points = [suggest(model, target_dim=1, seed=s)[0] for s in range(4)]
    assert max(points) - min(points) <= 0.04
