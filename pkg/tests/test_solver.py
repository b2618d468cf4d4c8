import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from rankdesign.combinatorics import unrank_many, unrank_subset
from rankdesign.design import (
    DesignDistribution,
    ItemFeatureMatrix,
    design_matrix_sum,
    information_matrix,
    subset_matrix,
)
from rankdesign.errors import SingularDesignError, ValidationError
from rankdesign.solver import (
    SolverConfig,
    golden_search,
    golden_section_max,
    initial_design,
    optimality_gap,
    solve,
    update_inverse,
    update_log_det,
)

from conftest import random_features


def spd(d, seed):
    M = np.random.default_rng(seed).standard_normal((d, d + 2))
    return M @ M.T + 0.1 * np.eye(d)


def test_update_log_det_examples():
    assert update_log_det(np.eye(3), np.ones((3, 1)), 0.0) == 0.0
    # d = 1, V = 1, A = 1: (1 - a) + a = 1
    assert update_log_det(np.eye(1), np.ones((1, 1)), 0.4) == pytest.approx(0.0, abs=1e-15)
    np.testing.assert_allclose(update_inverse(np.eye(1), np.ones((1, 1)), 0.4), [[1.0]])
    np.testing.assert_array_equal(update_inverse(np.eye(2), np.ones((2, 1)), 0.0), np.eye(2))


@pytest.mark.parametrize("seed", range(6))
@pytest.mark.parametrize("alpha", [1e-6, 0.1, 0.5, 0.9, 0.999])
def test_low_rank_updates_match_dense(seed, alpha):
    d, r = 5, 3
    V = spd(d, seed)
    A = np.random.default_rng(seed + 50).standard_normal((d, r))
    V_new = (1 - alpha) * V + alpha * A @ A.T
    V_inv = np.linalg.inv(V)
    expected = np.linalg.slogdet(V_new)[1] - np.linalg.slogdet(V)[1]
    assert update_log_det(V_inv, A, alpha) == pytest.approx(expected, abs=1e-9)
    inv = update_inverse(V_inv, A, alpha)
    np.testing.assert_allclose(inv, np.linalg.inv(V_new), rtol=1e-8, atol=1e-10)
    assert np.linalg.norm(inv @ V_new - np.eye(d)) < 1e-8


@pytest.mark.parametrize("alpha", [1.0, -0.1, 1.5])
def test_alpha_outside_half_open_interval(alpha):
    with pytest.raises(ValidationError):
        update_log_det(np.eye(2), np.ones((2, 1)), alpha)
    with pytest.raises(ValidationError):
        update_inverse(np.eye(2), np.ones((2, 1)), alpha)


def test_golden_iteration_count():
    res = golden_section_max(lambda a: -(a - 0.3) ** 2, 1e-16)
    expected = math.ceil(math.log(1e-16) / math.log((math.sqrt(5) - 1) / 2))
    assert abs(res.iterations - expected) <= 1
    assert res.evaluations == res.iterations + 2
    assert res.alpha == pytest.approx(0.3, abs=1e-8)


@pytest.mark.parametrize("tol", [1e-2, 1e-4, 1e-8])
def test_golden_bracket_width(tol):
    res = golden_section_max(lambda a: -abs(a - 0.71), tol)
    assert abs(res.alpha - 0.71) <= tol
    with pytest.raises(ValidationError):
        golden_section_max(lambda a: a, 0.0)


def grid_oracle(V_inv, A, lo=0.0, hi=1 - 1e-9, n=200_001, rounds=3):
    # dense grid, then refine around the best cell
    for _ in range(rounds):
        grid = np.linspace(lo, hi, n)
        values = np.array([update_log_det(V_inv, A, a) for a in grid])
        i = int(np.argmax(values))
        lo, hi = grid[max(i - 1, 0)], grid[min(i + 1, n - 1)]
        n = 2001
    return grid[i], values[i]


def test_golden_matches_grid_for_diag4():
    V_inv = np.linalg.inv(np.diag([4.0, 4.0]))
    A = np.array([[1.0], [0.0]])
    best, _ = grid_oracle(V_inv, A)
    tol = 1e-10
    assert abs(golden_search(V_inv, A, tol) - best) <= 10 * tol


def test_golden_interior_maximizer():
    # V = I/4: delta(a) = log(1 - a) + log(1 + 3a), maximized at a = 1/3
    V_inv = np.linalg.inv(np.diag([0.25, 0.25]))
    A = np.array([[1.0], [0.0]])
    best, _ = grid_oracle(V_inv, A)
    assert best == pytest.approx(1 / 3, abs=1e-7)
    tol = 1e-6
    assert abs(golden_search(V_inv, A, tol) - best) <= 10 * tol
    # below ~sqrt(machine eps) the objective is flat in floating point
    assert golden_search(V_inv, A, 1e-16) == pytest.approx(1 / 3, abs=1e-7)


def test_golden_at_fixed_point_returns_zero():
    # A A^T = V: delta is identically zero
    A = np.eye(2)
    tol = 1e-12
    assert golden_search(np.linalg.inv(A @ A.T), A, tol) <= 10 * tol


@pytest.fixture(scope="module")
def small_problem():
    f = ItemFeatureMatrix(np.random.default_rng(0).normal(size=(6, 3)))
    return f, f.collection(2)


def test_objective_nondecreasing_and_sparse(small_problem):
    f, coll = small_problem
    pi0 = initial_design(f, coll, 0.0, np.random.default_rng(1))
    pi, trace = solve(f, coll, pi0, SolverConfig(T_od=50, lmo_mode="full", gamma=0.0))
    obj = trace.objectives
    assert np.all(np.diff(obj) >= -1e-12)
    assert pi.nnz <= pi0.nnz + len(trace)
    assert pi.weights().keys() <= set(pi0.weights()) | set(trace.chosen)
    pi.validate()
    state = information_matrix(pi, f, 0.0)
    assert obj[-1] == pytest.approx(state.log_det, abs=1e-8)


def test_gap_shrinks(small_problem):
    f, coll = small_problem
    pi, _ = solve(f, coll, config=SolverConfig(T_od=300, lmo_mode="full", gamma=0.0))
    gap = optimality_gap(pi, f)
    assert -1e-9 <= gap <= 0.05


def test_randomized_equals_full_when_batch_covers_collection():
    f = random_features(9, 3, seed=5)
    coll = f.collection(3)
    pi0 = DesignDistribution.point_mass(0, coll)
    common = dict(T_od=30, gamma=1e-3)
    p_full, t_full = solve(f, coll, pi0, SolverConfig(lmo_mode="full", **common))
    p_rand, t_rand = solve(f, coll, pi0, SolverConfig(lmo_mode="randomized", R=coll.cardinality, **common))
    assert t_full.chosen == t_rand.chosen
    np.testing.assert_allclose(t_full.objectives, t_rand.objectives, rtol=1e-12)
    assert p_full.weights().keys() == p_rand.weights().keys()


def test_batch_larger_than_collection_is_clipped():
    f = random_features(5, 2, seed=1)
    coll = f.collection(2)
    _, trace = solve(f, coll, config=SolverConfig(T_od=5, R=10_000))
    assert len(trace) == 5


def test_inverse_drift_stays_small():
    f = random_features(20, 6, seed=3)
    coll = f.collection(3)
    pi, trace = solve(f, coll, config=SolverConfig(T_od=200, R=500, gamma=1e-4, seed=2))
    idx, w = pi.arrays()
    items, lists = unrank_many(idx, coll)
    V = design_matrix_sum(f, items, lists, w) + trace.gamma_effective * np.eye(f.d)
    assert np.linalg.norm(V @ trace.V_inv - np.eye(f.d)) < 1e-6


def test_periodic_refresh():
    f = random_features(12, 4, seed=4)
    coll = f.collection(2)
    for refresh_gamma in (False, True):
        cfg = SolverConfig(T_od=40, R=30, gamma=1e-3, inverse_refresh_period=7, refresh_gamma=refresh_gamma)
        pi, trace = solve(f, coll, config=cfg)
        idx, w = pi.arrays()
        items, lists = unrank_many(idx, coll)
        V = design_matrix_sum(f, items, lists, w) + trace.gamma_effective * np.eye(f.d)
        assert trace.objectives[-1] == pytest.approx(np.linalg.slogdet(V)[1], abs=1e-8)
        if refresh_gamma:
            assert trace.gamma_effective < 1e-3 or len(trace) % 7 == 0


def test_default_initial_design_without_ridge_is_full_rank():
    f = random_features(10, 5, seed=7)
    coll = f.collection(2)
    pi0 = initial_design(f, coll, 0.0, np.random.default_rng(0))
    assert pi0.nnz >= math.ceil(f.d / 1)
    information_matrix(pi0, f, 0.0)  # does not raise


def test_rank_deficient_features_raise():
    X = np.zeros((5, 3))
    X[:, 0] = np.arange(5)
    f = ItemFeatureMatrix(X)
    with pytest.raises(SingularDesignError):
        solve(f, f.collection(2), config=SolverConfig(gamma=0.0, T_od=3))
    # a ridge makes it solvable
    solve(f, f.collection(2), config=SolverConfig(gamma=1e-3, T_od=3))


def test_stop_gap_ends_early(small_problem):
    f, coll = small_problem
    _, trace = solve(f, coll, config=SolverConfig(T_od=2000, lmo_mode="full", gamma=0.0, stop_gap=0.05))
    assert trace.stopped_early
    assert len(trace) < 2000


def test_config_validation():
    for bad in (dict(R=0), dict(T_od=0), dict(alpha_tol=0.0), dict(gamma=-1.0), dict(lmo_mode="greedy"),
                dict(inverse_refresh_period=-1)):
        with pytest.raises(ValidationError):
            SolverConfig(**bad)


def test_full_mode_limit():
    f = random_features(200, 3, seed=0)
    with pytest.raises(ValidationError):
        solve(f, f.collection(5), config=SolverConfig(lmo_mode="full", T_od=1))


def test_multi_list_design_is_valid():
    f = random_features(11, 3, seed=9, list_sizes=(5, 6))
    coll = f.collection(3)
    pi, trace = solve(f, coll, config=SolverConfig(T_od=40, R=50))
    pi.validate()
    assert np.all(np.diff(trace.objectives) >= -1e-10)


def test_mixing_matches_dense_objective():
    f = random_features(7, 3, seed=2)
    coll = f.collection(3)
    pi, trace = solve(f, coll, config=SolverConfig(T_od=15, R=coll.cardinality, gamma=0.01))
    idx, w = pi.arrays()
    V = trace.gamma_effective * np.eye(3)
    for wi, i in zip(w, idx):
        A = subset_matrix(f, unrank_subset(int(i), coll))
        V = V + wi * A @ A.T
    assert trace.objectives[-1] == pytest.approx(np.linalg.slogdet(V)[1], abs=1e-9)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 10_000), st.floats(0.01, 0.99))
def test_update_inverse_property(seed, alpha):
    V = spd(4, seed)
    A = np.random.default_rng(seed).standard_normal((4, 1))
    inv = update_inverse(np.linalg.inv(V), A, alpha)
    V_new = (1 - alpha) * V + alpha * A @ A.T
    assert np.linalg.norm(inv @ V_new - np.eye(4)) < 1e-7


@pytest.mark.slow
def test_randomized_objective_close_to_full_on_average(small_problem):
    f, coll = small_problem
    pi0 = initial_design(f, coll, 0.0, np.random.default_rng(0))
    _, full = solve(f, coll, pi0, SolverConfig(T_od=300, lmo_mode="full", gamma=0.0))
    R = max(1, coll.cardinality // 5)
    finals = [solve(f, coll, pi0, SolverConfig(T_od=1500, R=R, gamma=0.0, seed=s))[1].objectives[-1]
              for s in range(20)]
    assert abs(np.mean(finals) - full.objectives[-1]) <= 1e-2
