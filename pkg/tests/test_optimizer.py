import numpy as np
import pytest

from mconcord.core import BlockPrecision, Dataset, NodePartition
from mconcord.modelsel import lambda_max
from mconcord.objective import block_gradient, objective
from mconcord.optimizer import (
    FitConfig,
    block_prox_step,
    fit,
    group_soft_threshold,
    initial_estimate,
    kkt_certificate,
    sigma_update,
)

from conftest import random_data, random_estimate
from oracles import JointProblem, block_subproblem_value, grid_polish_block, random_search_prox


def test_soft_threshold_examples():
    np.testing.assert_array_equal(group_soft_threshold([0.3, 0.4], 1.0), [0.0, 0.0])
    np.testing.assert_allclose(group_soft_threshold([3.0, 4.0], 1.0), [2.4, 3.2], atol=1e-15)
    z = np.array([-1.5, 0.2, 7.0])
    np.testing.assert_array_equal(group_soft_threshold(z, 0.0), z)


def test_soft_threshold_beats_random_search(rng):
    for _ in range(50):
        z = rng.standard_normal(int(rng.integers(1, 5))) * rng.uniform(0.1, 3)
        t = rng.uniform(0, 2)
        x = group_soft_threshold(z, t)
        mine = 0.5 * np.sum((x - z) ** 2) + t * np.linalg.norm(x)
        assert mine <= random_search_prox(z, t, rng, n_cand=2000) + 1e-6


def test_prox_step_keeps_zero_block_when_penalty_dominates(small_problem):
    est, data = small_problem
    bare = BlockPrecision(est.sigma, {}, est.partition)
    lam = 1.01 * max(np.linalg.norm(block_gradient(bare, data, i, j)) for i, j in bare.partition.pairs())
    for i, j in bare.partition.pairs():
        out = block_prox_step(i, j, bare, data, FitConfig(lam=lam))
        assert not out.any()


def test_prox_step_scalar_lasso_closed_form(rng):
    part = NodePartition([1, 1, 1])
    for _ in range(20):
        data = random_data(part, 12, rng)
        est = random_estimate(part, rng, density=1.0)
        lam = rng.uniform(0, 0.5)
        s = data.gram
        w0 = est.block(0, 1)[0, 0]
        g0 = block_gradient(est, data, 0, 1)[0]
        a = s[0, 0] + s[1, 1]
        b = a * w0 - g0
        expect = np.sign(b) * max(abs(b) - lam, 0.0) / a
        got = block_prox_step(0, 1, est, data, FitConfig(lam=lam, tol=1e-12, max_prox_iters=10_000))
        assert abs(got[0, 0] - expect) < 1e-8


def test_prox_step_2x2_matches_grid_oracle(rng):
    part = NodePartition([2, 2])
    for _ in range(3):
        data = random_data(part, 20, rng)
        est = random_estimate(part, rng, density=1.0)
        lam = rng.uniform(0.01, 0.3)
        s = data.gram
        ci, cj = part.columns(0), part.columns(1)
        w0 = est.block(0, 1)
        g0 = block_gradient(est, data, 0, 1).reshape(2, 2)
        got = block_prox_step(0, 1, est, data, FitConfig(lam=lam, tol=1e-12, max_prox_iters=100_000))
        mine = block_subproblem_value(got, g0, w0, s[ci, ci], s[cj, cj], lam)
        best = grid_polish_block(g0, w0, s[ci, ci], s[cj, cj], lam)
        assert mine <= best + 1e-8


def test_sigma_update_examples():
    y = np.tile([1.0, -1.0], 4)[:, None]
    part = NodePartition([1])
    est = BlockPrecision([1.0], {}, part)
    assert sigma_update(0, 0, est, Dataset(y, part)) == pytest.approx(1 / np.sqrt(2), abs=1e-15)
    assert sigma_update(0, 0, est, Dataset(y * np.sqrt(2), part)) == pytest.approx(0.5, abs=1e-15)


def test_fit_large_lambda_gives_empty_graph(small_problem):
    _, data = small_problem
    init = initial_estimate(data)
    lam = 1.01 * max(np.linalg.norm(block_gradient(init, data, i, j)) for i, j in data.partition.pairs())
    res = fit(data, FitConfig(lam=lam))
    assert res.converged
    assert res.sweeps <= 2
    assert res.estimate.blocks == {}
    np.testing.assert_allclose(res.estimate.sigma, 1 / np.sqrt(2 * np.diag(data.gram)), rtol=1e-12)
    assert kkt_certificate(res.estimate, data, lam).satisfied


def _oracle_instance(seed, dims, n, lam):
    rng = np.random.default_rng(seed)
    part = NodePartition(dims)
    data = random_data(part, n, rng, mix=0.6)
    return data, JointProblem(data.values, part, lam)


@pytest.mark.parametrize("seed", [0, 1, 2])
def test_fit_matches_joint_oracle(seed):
    data, prob = _oracle_instance(seed, [1, 1, 2], 40, 0.1)
    theta = prob.solve()
    res = fit(data, FitConfig(lam=0.1, tol=1e-10, max_sweeps=5000))
    assert res.converged
    assert abs(res.objective - prob.total(theta)) < 1e-6
    sigma, blocks = prob.unpack(theta)
    np.testing.assert_allclose(res.estimate.sigma, sigma, atol=1e-4)
    for (i, j), b in blocks.items():
        np.testing.assert_allclose(res.estimate.block(i, j), b, atol=1e-4)


def test_fit_passes_kkt_and_perturbation_breaks_it(rng):
    part = NodePartition([2, 3, 1, 2])
    data = random_data(part, 60, rng, mix=0.8)
    lam = 0.3 * lambda_max(data)
    res = fit(data, FitConfig(lam=lam))
    assert res.converged and res.kkt.satisfied
    assert kkt_certificate(res.estimate, data, lam).satisfied
    (i, j), b = next(iter(res.estimate.blocks.items()))
    bumped = dict(res.estimate.blocks)
    bumped[(i, j)] = b + np.eye(*b.shape) * 0.1
    broken = BlockPrecision(res.estimate.sigma, bumped, part)
    assert not kkt_certificate(broken, data, lam).satisfied


def test_objective_trace_never_increases(rng):
    for dims in ([1, 2, 2], [3, 3, 3, 3], [1] * 6):
        part = NodePartition(dims)
        data = random_data(part, 30, rng, mix=0.8)
        for frac in (0.05, 0.3, 0.8):
            res = fit(data, FitConfig(lam=frac * lambda_max(data)))
            tr = np.asarray(res.objective_trace)
            assert np.all(np.diff(tr) <= 1e-10 * np.abs(tr[:-1]))


def test_trace_starts_at_initial_objective(small_problem):
    _, data = small_problem
    res = fit(data, FitConfig(lam=0.05))
    init = objective(initial_estimate(data), data, 0.05).total
    assert res.objective_trace[0] == pytest.approx(init, rel=1e-12)
    assert res.objective == res.objective_trace[-1]


def test_fit_is_deterministic_and_centers_data(rng):
    part = NodePartition([2, 2, 2])
    raw = random_data(part, 25, rng, center=False)
    shifted = Dataset(raw.values + 5.0, part)
    a = fit(raw, FitConfig(lam=0.05))
    b = fit(raw, FitConfig(lam=0.05))
    c = fit(shifted, FitConfig(lam=0.05))
    np.testing.assert_array_equal(a.estimate.to_dense(), b.estimate.to_dense())
    np.testing.assert_allclose(a.estimate.to_dense(), c.estimate.to_dense(), atol=1e-8)


def test_warm_start_reaches_same_solution(rng):
    part = NodePartition([2, 1, 2, 2])
    data = random_data(part, 40, rng, mix=0.8)
    cfg = FitConfig(lam=0.05, tol=1e-10, max_sweeps=5000)
    cold = fit(data, cfg)
    warm = fit(data, cfg, init=fit(data, FitConfig(lam=0.2)).estimate)
    assert abs(cold.objective - warm.objective) < 1e-9
    np.testing.assert_allclose(cold.estimate.to_dense(), warm.estimate.to_dense(), atol=1e-5)


def test_sweep_cap_reports_nonconvergence(rng):
    part = NodePartition([3, 3, 3, 3])
    data = random_data(part, 8, rng, mix=1.0)
    res = fit(data, FitConfig(lam=0.01 * lambda_max(data), max_sweeps=1))
    assert not res.converged
    assert res.sweeps == 1


def test_fit_config_validation():
    with pytest.raises(ValueError):
        FitConfig(lam=-1.0)
    with pytest.raises(ValueError):
        FitConfig(lam=0.1, tol=0.0)
    with pytest.raises(ValueError):
        FitConfig(lam=0.1, max_sweeps=0)


def test_block_update_satisfies_subproblem_kkt(rng):
    part = NodePartition([2, 3, 1])
    for _ in range(20):
        data = random_data(part, 30, rng, mix=0.8)
        est = random_estimate(part, rng, density=0.6)
        lam = float(rng.uniform(0.01, 0.4))
        s = data.gram
        for i, j in part.pairs():
            ci, cj = part.columns(i), part.columns(j)
            w0 = est.block(i, j)
            g0 = block_gradient(est, data, i, j).reshape(w0.shape)
            x = block_prox_step(i, j, est, data, FitConfig(lam=lam))
            grad = g0 + (x - w0) @ s[cj, cj] + s[ci, ci] @ (x - w0)
            nx = np.linalg.norm(x)
            if nx == 0:
                assert np.linalg.norm(grad) <= lam + 1e-6
            else:
                assert np.max(np.abs(grad + lam * x / nx)) <= 1e-6


def test_rescaling_data_rescales_solution(rng):
    part = NodePartition([2, 2, 1, 3])
    data = random_data(part, 40, rng, mix=0.8)
    c = 3.7
    scaled = Dataset(data.values * c, part)
    cfg = dict(tol=1e-10, max_sweeps=5000)
    a = fit(data, FitConfig(lam=0.1, **cfg))
    b = fit(scaled, FitConfig(lam=0.1 * c, **cfg))
    assert set(a.estimate.blocks) == set(b.estimate.blocks)
    np.testing.assert_allclose(b.estimate.to_dense() * c, a.estimate.to_dense(), atol=1e-7)
