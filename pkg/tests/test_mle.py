import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from csrisk.dataset import Dataset
from csrisk.estimators import SubDistEstimate, loglik, naive, unique_support
from csrisk.exceptions import InfeasibleEstimateError, NonConvergenceError
from csrisk.mle import directional_derivatives, kkt_residual, mle
from csrisk.simulation import ModelSpec, gen_data
from csrisk.stepfn import StepFunction
from oracles import loglik_grid_max


def random_dataset(rng, K, n, ties=False):
    if ties:
        t = rng.integers(0, max(2, n // 3), n).astype(float)
    else:
        t = rng.exponential(size=n)
    return Dataset(K, t, rng.integers(1, K + 2, n))


def test_two_point_example():
    d = Dataset(2, [1.0, 2.0], [1, 3])
    est = mle(d)
    np.testing.assert_allclose(est.components[0]([0.5, 1.0, 5.0]), [0, 0.5, 0.5], atol=1e-9)
    np.testing.assert_allclose(est.components[1]([0.5, 1.0, 5.0]), [0, 0, 0], atol=1e-12)
    assert d.n * est.loglik == pytest.approx(math.log(0.25), abs=1e-9)
    assert est.kkt_residual <= 1e-10
    assert est.converged


def test_single_observation():
    est = mle(Dataset(2, [1.0], [2]))
    assert est.components[1](1.0) == pytest.approx(1.0)
    assert est.loglik == pytest.approx(0.0)


def test_all_survivors_gives_zero():
    est = mle(Dataset(2, [1.0, 2.0, 3.0], [3, 3, 3]))
    np.testing.assert_allclose(est([0.0, 10.0]), 0.0)
    assert est.loglik == 0.0


@pytest.mark.parametrize("seed", range(30))
def test_matches_grid_oracle_small_n(seed):
    rng = np.random.default_rng(seed)
    d = random_dataset(rng, 2, int(rng.integers(1, 7)), ties=seed % 3 == 0)
    est = mle(d)
    best = loglik_grid_max(d.t, d.cause)
    assert est.loglik >= best - 1e-12  # the grid is a subset of the feasible set
    assert est.loglik - best <= 2e-4


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(2, 120), st.booleans())
def test_one_cause_collapses_to_naive(seed, n, ties):
    d = random_dataset(np.random.default_rng(seed), 1, n, ties)
    x = np.unique(np.concatenate([d.t, [-1.0, 1e3]]))
    np.testing.assert_allclose(mle(d)(x), naive(d)(x), atol=1e-8)
    assert kkt_residual(d, naive(d)) <= 1e-10


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(1, 3), st.integers(1, 150), st.booleans())
def test_mle_invariants(seed, K, n, ties):
    d = random_dataset(np.random.default_rng(seed), K, n, ties)
    est = mle(d)
    assert est.kkt_residual <= 1e-10
    x = np.unique(np.concatenate([d.t, [-1.0, 1e3]]))
    vals = est(x)
    assert np.all(np.diff(vals, axis=1) >= -1e-12)
    assert np.all(vals >= 0)
    assert np.all(est.plus(x) <= 1 + 1e-12)
    for k, F in enumerate(est.components, start=1):
        assert np.all(np.isin(F.jumps()[0], unique_support(d, k)))
    # the naive estimator, pulled back to the feasible set, never does better
    tn = naive(d)
    total = max(1.0, float(tn.plus(x).max()))
    scaled = [StepFunction(F.knots, F.levels / total) for F in tn.components]
    assert loglik(d, scaled) <= est.loglik + 1e-12


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(2, 60), st.data())
def test_feasible_perturbations_do_not_increase_loglik(seed, n, data):
    d = random_dataset(np.random.default_rng(seed), 2, n)
    est = mle(d)
    k = data.draw(st.integers(0, 1))
    F = est.components[k]
    support = unique_support(d, k + 1)
    u = data.draw(st.sampled_from(support.tolist()))
    eps = data.draw(st.sampled_from([1e-3, -1e-3, 1e-5, -1e-5]))
    # add eps to F_k on [u, inf), keeping monotonicity, range and F+ <= 1
    knots = np.union1d(F.knots, [u])
    levels = F(knots) + eps * (knots >= u)
    if np.any(levels < 0) or np.any(np.diff(np.concatenate(([0.0], levels))) < 0):
        return
    comps = list(est.components)
    comps[k] = StepFunction(knots, levels)
    x = np.unique(np.concatenate([d.t, knots]))
    if np.any(sum(c(x) for c in comps) > 1):
        return
    assert loglik(d, comps) <= est.loglik + 1e-12


def test_residual_detects_moved_jump():
    d = gen_data(ModelSpec.example(), 300, 11)
    est = mle(d)
    F = est.components[0]
    moved = np.array(F.knots, copy=True)
    j = len(moved) // 2
    moved[j] += 0.1 * (moved[j + 1] - moved[j]) if j + 1 < len(moved) else 0.1
    comps = [StepFunction(moved, F.levels), est.components[1]]
    assert kkt_residual(d, comps) > 1e-4


def test_residual_rejects_infeasible():
    d = Dataset(2, [1.0, 2.0], [1, 2])
    with pytest.raises(InfeasibleEstimateError):
        kkt_residual(d, [StepFunction([1.0], [0.7]), StepFunction([1.0], [0.7])])
    with pytest.raises(InfeasibleEstimateError):
        kkt_residual(d, [StepFunction([1.0, 2.0], [0.5, 0.2]), StepFunction.constant(0.0)])
    with pytest.raises(InfeasibleEstimateError):
        kkt_residual(d, [StepFunction.constant(0.0), StepFunction.constant(0.0)])


def test_directional_derivatives_vanish_at_interior_optimum():
    fits = ((d, mle(d)) for d in (gen_data(ModelSpec.example(), 200, s) for s in range(50)))
    d, est = next((d, e) for d, e in fits if not e.info["boundary"])
    dd = directional_derivatives(d, est)
    assert dd["inf"] == pytest.approx(1.0, abs=1e-10)
    for k in (1, 2):
        cand, D = dd[k]
        assert np.all(D <= 1 + 1e-10)
        jt = est.components[k - 1].jumps()[0]
        np.testing.assert_allclose(D[np.searchsorted(cand, jt)], 1.0, atol=1e-10)


def test_boundary_optimum_certifies():
    # the last observation is a failure, so F+ reaches one at the optimum
    d = Dataset(2, [1.0, 2.0, 3.0], [3, 1, 2])
    est = mle(d)
    assert est.info["boundary"]
    assert est.plus(3.0)[0] == pytest.approx(1.0)
    assert est.kkt_residual <= 1e-10


def test_nonconvergence_is_an_error():
    d = gen_data(ModelSpec.example(), 500, 5)
    with pytest.raises(NonConvergenceError) as info:
        mle(d, max_iter=1)
    assert isinstance(info.value.best, SubDistEstimate)
    assert info.value.best.converged is False
    assert info.value.residual > 1e-10
