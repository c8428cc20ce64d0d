import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import random_feasible, vertex_max, vertices
from smoothnash.core import Game, SmoothParams, is_smooth, random_game, verify
from smoothnash.enumeration import iter_k_uniform_weak
from smoothnash.errors import NotFoundError, ResourceLimitError
from smoothnash.sampling import make_rng
from smoothnash.strong import (
    FeasibilityProblem, LinearCut, bimatrix_constraint_gap, bimatrix_strong, general_constraint_gap,
    general_strong, hybrid_constraint_matrices, separation_bimatrix, separation_general,
    solve_feasibility)

BIMATRIX_C1 = 0.001
GENERAL_C = 0.0003


def vertex_constraint_gap(x, y, anchor, payoffs, sigma):
    """All anchored two-player constraints, re-evaluated over polytope vertices."""
    xh, yh = anchor
    A, B = payoffs
    n = len(x)
    verts = vertices(n, sigma)
    vals = [abs(x @ A @ yh - xh @ A @ yh), abs(xh @ B @ y - xh @ B @ yh)]
    vals += [abs(v @ A @ (y - yh)) for v in verts]
    vals += [abs((x - xh) @ B @ v) for v in verts]
    return max(vals)


def joint_vertex_gap(G, diff_vec, sigma, n, free):
    """sup over smooth joint deviations by enumeration of vertices of the flattened polytope."""
    d = G @ diff_vec
    s = sigma**free
    return max(vertex_max(d, s), vertex_max(-d, s))


# ---- LinearCut and solve_feasibility -------------------------------------------------

def test_linear_cut_violation():
    cut = LinearCut(np.array([1.0, -1.0]), 0.25)
    assert cut.violation(np.array([1.0, 0.0])) == pytest.approx(0.75)


def test_feasibility_no_cuts_returns_first_point():
    smooth = SmoothParams(0.5, 4)
    problem = FeasibilityProblem([smooth], 0.1)
    result = solve_feasibility(problem, lambda z: None)
    assert result.status == "feasible" and result.rounds == 1
    assert is_smooth(result.point, smooth) and result.point.sum() == pytest.approx(1.0)


def test_feasibility_sigma_one_box():
    problem = FeasibilityProblem([SmoothParams(1.0, 5)], 0.1)
    result = solve_feasibility(problem, lambda z: None)
    assert np.allclose(result.point, 0.2)


def test_feasibility_infeasible():
    # Forces x_0 >= 0.9 while the cap is 0.5.
    smooth = SmoothParams(0.5, 4)
    problem = FeasibilityProblem([smooth], 0.1)
    cut = LinearCut(np.array([-1.0, 0, 0, 0]), -0.9)
    result = solve_feasibility(problem, lambda z: cut if cut.violation(z) > 1e-9 else None)
    assert result.status == "infeasible" and result.point is None


def test_feasibility_round_limit():
    smooth = SmoothParams(0.5, 4)
    problem = FeasibilityProblem([smooth], 0.1)
    # An oracle that never accepts and only repeats a satisfied cut.
    result = solve_feasibility(problem, lambda z: LinearCut(np.zeros(4), 1.0), max_rounds=3)
    assert result.status == "round_limit"


# ---- separation_bimatrix -------------------------------------------------------------

def test_separation_anchor_feasible():
    rng = make_rng(0)
    g = random_game(2, 5, rng)
    smooth = SmoothParams(0.5, 5)
    anchor = tuple(random_feasible(5, 0.5, rng, 2))
    assert separation_bimatrix(anchor, anchor, tuple(g.payoffs), smooth, 0.05) is None


@pytest.mark.parametrize("seed", range(5))
def test_separation_violation_matches_vertex_search(seed):
    rng = make_rng(seed)
    n, sigma, eps0 = 6, 0.5, 0.02
    A = rng.random((n, n))
    B = np.zeros((n, n))
    xh = yh = np.full(n, 1 / n)
    y = rng.dirichlet(np.ones(n))
    g = max(abs(v @ A @ (y - yh)) for v in vertices(n, sigma))
    assert g > eps0
    cut = separation_bimatrix((xh, y), (xh, yh), (A, B), SmoothParams(sigma, n), eps0)
    assert cut.violation(np.concatenate([xh, y])) == pytest.approx(g - eps0, abs=1e-12)


def test_separation_sigma_one_single_row():
    rng = make_rng(5)
    n = 4
    A = rng.random((n, n))
    xh = yh = np.full(n, 0.25)
    y = np.array([0.7, 0.1, 0.1, 0.1])
    cut = separation_bimatrix((xh, y), (xh, yh), (A, np.zeros((n, n))), SmoothParams(1.0, n), 0.0)
    coef = cut.coefficients[n:]
    assert np.allclose(np.abs(coef), np.abs(A.mean(axis=0)))


@given(seed=st.integers(0, 2**32 - 1))
@settings(max_examples=25, deadline=None)
def test_cuts_are_valid_for_feasible_points(seed):
    rng = make_rng(seed)
    n, sigma, eps0 = 4, 0.5, 0.1
    A, B = rng.random((n, n)), rng.random((n, n))
    anchor = tuple(random_feasible(n, sigma, rng, 2))
    smooth = SmoothParams(sigma, n)
    candidate = tuple(random_feasible(n, sigma, rng, 2))
    cut = separation_bimatrix(candidate, anchor, (A, B), smooth, eps0)
    gap = vertex_constraint_gap(*candidate, anchor, (A, B), sigma)
    if cut is None:
        assert gap <= eps0 + 1e-9
        return
    assert cut.violation(np.concatenate(candidate)) > 0
    # Every polytope point satisfying the constraint family satisfies the cut.
    xs = random_feasible(n, sigma, rng, 300)
    ys = random_feasible(n, sigma, rng, 300)
    for x, y in zip(xs, ys):
        if vertex_constraint_gap(x, y, anchor, (A, B), sigma) <= eps0:
            assert cut.violation(np.concatenate([x, y])) <= 1e-9


def test_small_anchored_instance_converges():
    rng = make_rng(1)
    n, sigma, eps0 = 4, 0.5, 0.1
    g = random_game(2, n, rng)
    smooth = SmoothParams(sigma, n)
    anchor, _ = next(iter_k_uniform_weak(g, smooth, eps0, 2))
    problem = FeasibilityProblem([smooth, smooth], eps0)
    A, B = g.payoffs
    result = solve_feasibility(
        problem, lambda z: separation_bimatrix(problem.split(z), anchor, (A, B), smooth, eps0),
        max_rounds=200)
    assert result.status == "feasible" and result.rounds <= 200
    x, y = problem.split(result.point)
    assert vertex_constraint_gap(x, y, anchor, (A, B), sigma) <= eps0 + 1e-6
    assert bimatrix_constraint_gap(x, y, anchor, (A, B), smooth) <= eps0 + 1e-6


# ---- bimatrix_strong -----------------------------------------------------------------

def test_bimatrix_sigma_one_uniform():
    rng = make_rng(2)
    A, B = rng.random((4, 4)), rng.random((4, 4))
    sol = bimatrix_strong(A, B, SmoothParams(1.0, 4), 0.1)
    assert np.allclose(sol.x, 0.25) and np.allclose(sol.y, 0.25)
    assert sol.report.max_gain == pytest.approx(0.0, abs=1e-12)


def test_bimatrix_matching_pennies():
    A = np.eye(2)
    sol = bimatrix_strong(A, 1 - A, SmoothParams(0.5, 2), 0.2, c1=BIMATRIX_C1)
    assert np.allclose(sol.x, 0.5, atol=1e-6) and np.allclose(sol.y, 0.5, atol=1e-6)
    assert sol.report.strong_ok


@pytest.mark.parametrize("seed", range(8))
def test_bimatrix_random_strong_ok(seed):
    rng = make_rng(seed)
    A, B = rng.random((8, 8)), rng.random((8, 8))
    smooth = SmoothParams(0.25, 8)
    sol = bimatrix_strong(A, B, smooth, 0.25, c1=BIMATRIX_C1)
    assert sol.report.strong_ok
    assert all(is_smooth(x, smooth) for x in sol.profile)
    assert sol.report.max_gain <= 4 * sol.eps0 + 1e-6
    assert vertex_constraint_gap(sol.x, sol.y, sol.anchor, (A, B), 0.25) <= sol.eps0 + 1e-6


def test_bimatrix_resource_limit():
    rng = make_rng(3)
    with pytest.raises(ResourceLimitError):
        bimatrix_strong(rng.random((8, 8)), rng.random((8, 8)), SmoothParams(0.25, 8), 0.25)


def test_bimatrix_not_found_when_rounds_exhausted():
    rng = make_rng(4)
    A, B = rng.random((5, 5)), rng.random((5, 5))
    with pytest.raises(NotFoundError):
        bimatrix_strong(A, B, SmoothParams(0.4, 5), 0.05, k_override=1, max_rounds=1,
                        max_search=10**3)


# ---- general_strong ------------------------------------------------------------------

def test_hybrid_matrices_shapes():
    g = random_game(3, 4, make_rng(5))
    anchor = [np.full(4, 0.25)] * 3
    mats = hybrid_constraint_matrices(g, anchor, 1)
    assert [(G.shape, free) for G, free in mats] == [((4, 4), 1)] * 3 + [((16, 4), 2)]


def test_hybrid_matrices_evaluate_payoffs():
    rng = make_rng(6)
    g = random_game(3, 3, rng)
    anchor = [rng.dirichlet(np.ones(3)) for _ in range(3)]
    v = rng.dirichlet(np.ones(3))
    lead = rng.dirichlet(np.ones(3))
    G0, free = hybrid_constraint_matrices(g, anchor, 1)[0]
    assert free == 1
    direct = np.einsum("abc,a,b,c->", g.payoffs[0], lead, v, anchor[2])
    assert lead @ (G0 @ v) == pytest.approx(direct)


def test_separation_general_matches_enumeration():
    rng = make_rng(7)
    n, sigma, eps0 = 3, 0.5, 0.01
    g = random_game(3, n, rng)
    anchor = [rng.dirichlet(np.ones(n)) for _ in range(3)]
    cand = rng.dirichlet(np.ones(n))
    mats = hybrid_constraint_matrices(g, anchor, 1)
    cut = separation_general(cand, anchor[1], mats, sigma, n, eps0)
    worst = max(joint_vertex_gap(G, cand - anchor[1], sigma, n, free) for G, free in mats)
    assert general_constraint_gap(cand, anchor[1], mats, sigma, n) == pytest.approx(worst, abs=1e-12)
    assert cut.violation(cand) == pytest.approx(worst - eps0, abs=1e-12)


def test_general_sigma_one_uniform():
    g = random_game(3, 3, make_rng(8))
    sol = general_strong(g, SmoothParams(1.0, 3), 0.1)
    assert all(np.allclose(x, 1 / 3) for x in sol.profile)


@pytest.mark.parametrize("seed", range(4))
def test_general_three_players(seed):
    g = random_game(3, 4, make_rng(seed))
    smooth = SmoothParams(0.5, 4)
    sol = general_strong(g, smooth, 0.4, c=GENERAL_C)
    assert sol.report.strong_ok
    for position in range(3):
        mats = hybrid_constraint_matrices(g, sol.anchor, position)
        gap = general_constraint_gap(sol.profile[position], sol.anchor[position], mats, 0.5, 4)
        assert gap <= sol.eps0 + 1e-6


@pytest.mark.parametrize("seed", range(4))
def test_general_agrees_with_bimatrix(seed):
    rng = make_rng(seed + 100)
    A, B = rng.random((5, 5)), rng.random((5, 5))
    smooth = SmoothParams(0.4, 5)
    a = bimatrix_strong(A, B, smooth, 0.3, k_override=2)
    b = general_strong(Game.from_matrices(A, B), smooth, 0.3, k_override=2)
    assert a.report.strong_ok == b.report.strong_ok == True  # noqa: E712
    assert verify(Game.from_matrices(A, B), b.profile, smooth, 0.3).strong_ok


def test_general_resource_guard(monkeypatch):
    monkeypatch.setattr("smoothnash.strong.MAX_HYBRID_ENTRIES", 10)
    with pytest.raises(ResourceLimitError):
        general_strong(random_game(3, 4, make_rng(9)), SmoothParams(0.5, 4), 0.4)


def test_every_hybrid_constraint_holds_under_vertex_recheck():
    g = random_game(3, 3, make_rng(10))
    smooth = SmoothParams(0.5, 3)
    sol = general_strong(g, smooth, 0.4, c=GENERAL_C)
    for position in range(3):
        for G, free in hybrid_constraint_matrices(g, sol.anchor, position):
            diff = sol.profile[position] - sol.anchor[position]
            assert joint_vertex_gap(G, diff, 0.5, 3, free) <= sol.eps0 + 1e-6
    assert sol.report.smooth_member == [True] * 3
