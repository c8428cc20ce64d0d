"""Strong smooth equilibria via anchored LP feasibility with exact separation.

An anchor is a sparse weak equilibrium. Around it we look for smooth
strategies whose payoffs against every smooth deviation stay within ``eps0``
of the anchor's. Such strategies form a polytope described by one linear
constraint per vertex of a smooth polytope. The polytope is searched with a
cutting-plane loop whose separation step is a single top-s average.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np
from scipy.optimize import linprog

from smoothnash.core import (
    EquilibriumReport, Game, SmoothParams, StrategyProfile, as_profile, contract,
    euclidean_project, top_smooth_average, verify)
from smoothnash.enumeration import MAX_SEARCH_SPACE, iter_k_uniform_weak
from smoothnash.errors import NotFoundError, ResourceLimitError, SolverFailureError

BOX_SLACK = 1e-7
CUT_TOLERANCE = 1e-9
MAX_HYBRID_ENTRIES = 10**7


@dataclass(frozen=True)
class LinearCut:
    """The constraint ``coefficients @ z <= bound``."""

    coefficients: np.ndarray
    bound: float

    def violation(self, z: np.ndarray) -> float:
        return float(self.coefficients @ z - self.bound)


@dataclass
class FeasibilityProblem:
    """Variables split into blocks, each constrained to a relaxed smooth polytope.

    Attributes:
      blocks: Smoothness parameters of each variable block, in order.
      eps0: Tolerance of the anchored constraints (kept for reporting).
      cuts: Cuts accumulated so far.
      slack: Additive relaxation of the caps and of the simplex sum.
    """

    blocks: List[SmoothParams]
    eps0: float
    cuts: List[LinearCut] = field(default_factory=list)
    slack: float = BOX_SLACK

    @property
    def dim(self) -> int:
        return sum(b.n for b in self.blocks)

    def split(self, z: np.ndarray) -> List[np.ndarray]:
        return np.split(np.asarray(z), np.cumsum([b.n for b in self.blocks])[:-1])


@dataclass
class FeasibilityResult:
    point: Optional[np.ndarray]
    rounds: int
    status: str  # "feasible", "infeasible" or "round_limit"


SeparationOracle = Callable[[np.ndarray], Optional[LinearCut]]


def _center_lp(problem: FeasibilityProblem, rounds: int) -> Tuple[Optional[np.ndarray], float]:
    """Point of the relaxed box maximizing the normalized slack of every cut."""
    dim = problem.dim
    bounds = [(0.0, c + problem.slack) for b in problem.blocks for c in b.caps] + [(None, 1.0)]
    a_ub, b_ub = [], []
    offset = 0
    for b in problem.blocks:
        row = np.zeros(dim + 1)
        row[offset:offset + b.n] = 1.0
        a_ub.append(row)
        b_ub.append(1.0 + problem.slack)
        a_ub.append(-row)
        b_ub.append(-(1.0 - problem.slack))
        offset += b.n
    for cut in problem.cuts:
        norm = float(np.linalg.norm(cut.coefficients))
        a_ub.append(np.append(cut.coefficients, norm))
        b_ub.append(cut.bound)
    objective = np.zeros(dim + 1)
    objective[-1] = -1.0
    result = linprog(objective, A_ub=np.array(a_ub), b_ub=np.array(b_ub), bounds=bounds,
                     method="highs")
    if result.status == 2:
        return None, -math.inf
    if result.status != 0:
        raise SolverFailureError(f"LP failed in round {rounds}: {result.message}")
    return result.x[:dim], float(result.x[-1])


def solve_feasibility(problem: FeasibilityProblem, oracle: SeparationOracle,
                      max_rounds: Optional[int] = None) -> FeasibilityResult:
    """Cutting-plane search for a point accepted by ``oracle``.

    Each round solves an LP for the point of the relaxed box that satisfies the
    accumulated cuts with the largest margin, then asks the oracle for a
    violated cut. Once the oracle accepts, every block is projected onto its
    exact smooth polytope.

    Args:
      problem: Variable blocks and accumulated cuts (extended in place).
      oracle: Returns a violated cut or None.
      max_rounds: Round cap; defaults to 10 * (block size) * (number of blocks).

    Raises:
      SolverFailureError: The LP solver failed numerically.
    """
    if max_rounds is None:
        max_rounds = 10 * max(b.n for b in problem.blocks) * len(problem.blocks)
    for rounds in range(1, max_rounds + 1):
        z, margin = _center_lp(problem, rounds)
        if z is None or margin < -CUT_TOLERANCE:
            return FeasibilityResult(None, rounds, "infeasible")
        cut = oracle(z)
        if cut is None:
            parts = [euclidean_project(part, b) for part, b in zip(problem.split(z), problem.blocks)]
            return FeasibilityResult(np.concatenate(parts), rounds, "feasible")
        problem.cuts.append(cut)
    return FeasibilityResult(None, max_rounds, "round_limit")


def _most_violated(cuts: Sequence[LinearCut], z: np.ndarray,
                   tolerance: float = CUT_TOLERANCE) -> Optional[LinearCut]:
    worst = max(cuts, key=lambda c: c.violation(z))
    return worst if worst.violation(z) > tolerance else None


def _deviation_cuts(matrix: np.ndarray, point: np.ndarray, anchor: np.ndarray,
                    smooth: SmoothParams, eps0: float) -> List[LinearCut]:
    """Cuts for ``|<w, matrix @ (point - anchor)>| <= eps0`` at the two extreme smooth w."""
    diff = matrix @ (point - anchor)
    cuts = []
    for sign in (1.0, -1.0):
        _, w = top_smooth_average(sign * diff, smooth)
        coef = sign * (w @ matrix)
        cuts.append(LinearCut(coef, eps0 + float(coef @ anchor)))
    return cuts


def _pad(coef: np.ndarray, offset: int, dim: int) -> np.ndarray:
    out = np.zeros(dim)
    out[offset:offset + coef.size] = coef
    return out


def separation_bimatrix(candidate: Tuple[np.ndarray, np.ndarray],
                        anchor: Tuple[np.ndarray, np.ndarray],
                        payoffs: Tuple[np.ndarray, np.ndarray],
                        smooth: SmoothParams, eps0: float) -> Optional[LinearCut]:
    """Most violated anchored constraint for a two-player candidate, or None.

    Variables are ``z = (x, y)``. The constraints keep, within ``eps0``:
    the row payoff ``x^T A yh`` near ``xh^T A yh``; every smooth row
    deviation's payoff against y near its payoff against ``yh``; every smooth
    column deviation's payoff against x near its payoff against ``xh``; and
    the column payoff ``xh^T B y`` near ``xh^T B yh``.
    """
    x, y = (np.asarray(v, dtype=float) for v in candidate)
    xh, yh = (np.asarray(v, dtype=float) for v in anchor)
    A, B = (np.asarray(v, dtype=float) for v in payoffs)
    n = x.size
    z = np.concatenate([x, y])
    cuts = []
    row_value, col_value = float(xh @ A @ yh), float(xh @ B @ yh)
    for sign in (1.0, -1.0):
        cuts.append(LinearCut(_pad(sign * (A @ yh), 0, 2 * n), eps0 + sign * row_value))
        cuts.append(LinearCut(_pad(sign * (B.T @ xh), n, 2 * n), eps0 + sign * col_value))
    for cut in _deviation_cuts(A, y, yh, smooth, eps0):
        cuts.append(LinearCut(_pad(cut.coefficients, n, 2 * n), cut.bound))
    for cut in _deviation_cuts(B.T, x, xh, smooth, eps0):
        cuts.append(LinearCut(_pad(cut.coefficients, 0, 2 * n), cut.bound))
    return _most_violated(cuts, z)


def bimatrix_constraint_gap(x, y, anchor, payoffs, smooth: SmoothParams) -> float:
    """Largest left-hand side over all anchored two-player constraints."""
    xh, yh = anchor
    A, B = payoffs
    values = [abs(x @ A @ yh - xh @ A @ yh), abs(xh @ B @ y - xh @ B @ yh)]
    for diff in (A @ (y - yh), B.T @ (x - xh)):
        values.append(top_smooth_average(diff, smooth)[0])
        values.append(top_smooth_average(-diff, smooth)[0])
    return float(max(values))


@dataclass
class StrongSolution:
    """A strong smooth equilibrium with the anchor it was derived from."""

    profile: List[np.ndarray]
    report: EquilibriumReport
    anchor: List[np.ndarray]
    k: int
    eps0: float
    lp_rounds: int

    @property
    def x(self) -> np.ndarray:
        return self.profile[0]

    @property
    def y(self) -> np.ndarray:
        return self.profile[1]


def _anchor_k(default: float, k_override: Optional[int]) -> int:
    return k_override if k_override is not None else max(1, math.ceil(default))


def _search_anchors(game: Game, smooth: SmoothParams, epsilon: float, eps0: float, k: int,
                    solve_anchor, max_search: int, threads: int) -> StrongSolution:
    """Tries weak-eps0 anchors in lexicographic order, doubling k once on exhaustion."""
    if smooth.support_size >= smooth.n:
        uniform = [np.full(smooth.n, 1.0 / smooth.n) for _ in range(game.num_players)]
        return StrongSolution(uniform, verify(game, uniform, smooth, epsilon), uniform, k, eps0, 0)
    tried = []
    for attempt in range(2):
        try:
            for anchor, _ in iter_k_uniform_weak(game, smooth, eps0, k, max_search, threads):
                solved = solve_anchor(anchor)
                if solved is not None:
                    profile, rounds = solved
                    return StrongSolution(profile, verify(game, profile, smooth, epsilon),
                                          anchor, k, eps0, rounds)
        except ResourceLimitError:
            if attempt == 0:
                raise
            break
        tried.append(k)
        k *= 2
    raise NotFoundError(f"no anchor admitted a strong equilibrium for k in {tried}")


def bimatrix_strong(A, B, smooth: SmoothParams, epsilon: float, c1: float = 1.0,
                    k_override: Optional[int] = None, max_rounds: Optional[int] = None,
                    max_search: int = MAX_SEARCH_SPACE, threads: int = 1) -> StrongSolution:
    """Strong epsilon-approximate smooth equilibrium of a two-player game.

    Args:
      A, B: Row and column payoff matrices with entries in [0, 1].
      smooth: Smoothness of strategies and deviations.
      epsilon: Target gain; anchors must be weak ``epsilon / 4`` equilibria.
      c1: Constant in the anchor sparsity ``2 c1 log(2/sigma) / (epsilon/4)^2``.
      k_override: Anchor sparsity to use instead.
      max_rounds: Cutting-plane round cap per anchor.
      max_search: Anchor search-space limit.
      threads: Worker threads for anchor screening.

    Raises:
      NotFoundError: No anchor worked, even after doubling k once.
      ResourceLimitError: The anchor space exceeds ``max_search``.
    """
    game = Game.from_matrices(A, B)
    A, B = game.payoffs
    eps0 = epsilon / 4
    k = _anchor_k(2 * c1 * math.log(2 / smooth.sigma) / eps0**2, k_override)

    def solve_anchor(anchor):
        xh, yh = anchor
        problem = FeasibilityProblem([smooth, smooth], eps0)
        oracle = lambda z: separation_bimatrix(problem.split(z), (xh, yh), (A, B), smooth, eps0)
        result = solve_feasibility(problem, oracle, max_rounds)
        if result.point is None:
            return None
        return problem.split(result.point), result.rounds

    return _search_anchors(game, smooth, epsilon, eps0, k, solve_anchor, max_search, threads)


def hybrid_constraint_matrices(game: Game, anchor: StrategyProfile, position: int
                               ) -> List[Tuple[np.ndarray, int]]:
    """Constraint matrices for the LP in player ``position``'s strategy.

    Returns pairs ``(G, free)``: ``G`` has one row per joint action of the
    ``free`` leading players (plus, for later players j, player j itself),
    and ``G @ v`` evaluates player payoffs with ``v`` in slot ``position`` and
    the anchor in all later slots.
    """
    m, n = game.num_players, game.num_actions
    xh = as_profile(game, anchor)
    mats = []
    for j in range(m):
        later = {i: xh[i] for i in range(position + 1, m)}
        tensor = contract(game.payoffs[j], later)
        mats.append((tensor.reshape(-1, n), position))
    for j in range(position + 1, m):
        later = {i: xh[i] for i in range(position + 1, m) if i != j}
        tensor = contract(game.payoffs[j], later)
        # Remaining axes: 0..position-1, position, j. Move the variable axis last.
        tensor = np.moveaxis(tensor, position, -1)
        mats.append((tensor.reshape(-1, n), position + 1))
    return mats


def separation_general(candidate: np.ndarray, anchor_strategy: np.ndarray,
                       matrices: Sequence[Tuple[np.ndarray, int]], sigma: float, n: int,
                       eps0: float) -> Optional[LinearCut]:
    """Most violated hybrid constraint for one player's strategy, or None."""
    cuts = []
    for G, free in matrices:
        smooth = SmoothParams.for_tuples(sigma, n, free)
        cuts.extend(_deviation_cuts(G, candidate, anchor_strategy, smooth, eps0))
    return _most_violated(cuts, candidate)


def general_constraint_gap(candidate, anchor_strategy, matrices, sigma: float, n: int) -> float:
    """Largest left-hand side over the hybrid constraints of one player."""
    worst = 0.0
    for G, free in matrices:
        smooth = SmoothParams.for_tuples(sigma, n, free)
        diff = G @ (candidate - anchor_strategy)
        worst = max(worst, top_smooth_average(diff, smooth)[0],
                    top_smooth_average(-diff, smooth)[0])
    return worst


def general_strong(game: Game, smooth: SmoothParams, epsilon: float, c: float = 1.0,
                   k_override: Optional[int] = None, max_rounds: Optional[int] = None,
                   max_search: int = MAX_SEARCH_SPACE, threads: int = 1) -> StrongSolution:
    """Strong epsilon-approximate smooth equilibrium of an m-player game.

    Anchors are weak ``epsilon / (2m)`` equilibria with sparsity
    ``4 c m log(m/sigma) / (epsilon/(2m))^2`` unless ``k_override`` is given.
    For each anchor one LP per player is solved; the constraints for player l
    range over smooth joint deviations of the players before l (and of each
    later player), flattened into a single axis.
    """
    m, n = game.num_players, game.num_actions
    if float(n) ** (m - 1) > MAX_HYBRID_ENTRIES:
        raise ResourceLimitError(f"n^(m-1) = {n}^{m - 1} exceeds {MAX_HYBRID_ENTRIES}")
    eps0 = epsilon / (2 * m)
    k = _anchor_k(4 * c * m * math.log(max(m, 1) / smooth.sigma) / eps0**2, k_override)

    def solve_anchor(anchor):
        profile, total = [], 0
        for position in range(m):
            matrices = hybrid_constraint_matrices(game, anchor, position)
            problem = FeasibilityProblem([smooth], eps0)
            xh = anchor[position]
            oracle = lambda z: separation_general(z, xh, matrices, smooth.sigma, n, eps0)
            result = solve_feasibility(problem, oracle, max_rounds)
            total += result.rounds
            if result.point is None:
                return None
            profile.append(result.point)
        return profile, total

    return _search_anchors(game, smooth, epsilon, eps0, k, solve_anchor, max_search, threads)
