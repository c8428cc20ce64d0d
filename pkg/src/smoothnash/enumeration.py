"""Full-information weak smooth equilibria by enumerating sparse profiles."""

from __future__ import annotations

import math
from typing import Iterator, List, Optional, Tuple

import numpy as np

from smoothnash.core import EquilibriumReport, Game, SmoothParams, verify
from smoothnash.errors import InvalidArgumentError, NotFoundError, ResourceLimitError
from smoothnash.query import QueryCountingOracle, QueryParams, query_equilibrium
from smoothnash.search import count_k_uniform, k_uniform_counts, scan_profiles

MAX_SEARCH_SPACE = 10**8
ESCALATION_ROUNDS = 4


def enumerate_k_uniform(n: int, k: int) -> Iterator[Tuple[int, ...]]:
    """Yields every length-n count vector summing to k, lexicographically decreasing."""
    if n < 1 or k < 1:
        raise InvalidArgumentError("n and k must be at least 1")

    def rec(prefix: Tuple[int, ...], remaining: int, slots: int):
        if slots == 1:
            yield prefix + (remaining,)
            return
        for first in range(remaining, -1, -1):
            yield from rec(prefix + (first,), remaining - first, slots - 1)

    yield from rec((), k, n)


def default_k(num_players: int, sigma: float, epsilon: float, c1: float = 1.0) -> int:
    """Sparsity that suffices for a weak equilibrium, up to the constant ``c1``."""
    return max(1, math.ceil(c1 * num_players * math.log(8 * num_players / sigma) / epsilon**2))


def iter_k_uniform_weak(game: Game, smooth: SmoothParams, epsilon: float, k: int,
                        max_search: int = MAX_SEARCH_SPACE, threads: int = 1,
                        ) -> Iterator[Tuple[List[np.ndarray], EquilibriumReport]]:
    """Yields every k-uniform weak equilibrium in lexicographic order.

    Candidate blocks are screened with vectorized gains; each hit is then
    confirmed by ``verify`` before it is yielded.
    """
    m, n = game.num_players, game.num_actions
    space = count_k_uniform(n, k) ** m
    if space > max_search:
        raise ResourceLimitError(
            f"k={k} gives {space} profiles, above the limit of {max_search}")
    strategies = k_uniform_counts(n, k) / k
    tensors = list(game.payoffs)
    for idx, _ in scan_profiles(tensors, tensors, [strategies] * m, smooth, epsilon + 1e-9,
                                threads):
        profile = [strategies[i].copy() for i in idx]
        report = verify(game, profile, smooth, epsilon)
        if report.weak_ok:
            yield profile, report


def find_weak(game: Game, smooth: SmoothParams, epsilon: float,
              k_override: Optional[int] = None, c1: float = 1.0,
              max_search: int = MAX_SEARCH_SPACE, threads: int = 1
              ) -> Tuple[List[np.ndarray], EquilibriumReport]:
    """Returns the lexicographically first k-uniform weak equilibrium.

    Args:
      game: The game.
      smooth: Smoothness of deviations.
      epsilon: Allowed deviation gain.
      k_override: Starting sparsity; defaults to ``default_k`` with ``c1``.
      c1: Constant in the default sparsity.
      max_search: Largest number of profiles examined for one k.
      threads: Worker threads for block evaluation.

    If no profile qualifies, k is doubled up to four times before giving up.

    Raises:
      ResourceLimitError: The first k already exceeds ``max_search``.
      NotFoundError: Escalation was exhausted or hit the search limit.
    """
    if epsilon < 0:
        raise InvalidArgumentError("epsilon must be non-negative")
    k = k_override if k_override is not None else default_k(
        game.num_players, smooth.sigma, epsilon, c1)
    tried = []
    for round_ in range(ESCALATION_ROUNDS + 1):
        try:
            for profile, report in iter_k_uniform_weak(game, smooth, epsilon, k, max_search,
                                                       threads):
                return profile, report
        except ResourceLimitError:
            if round_ == 0:
                raise
            break
        tried.append(k)
        k *= 2
    raise NotFoundError(f"no k-uniform weak equilibrium for k in {tried}")


def find_weak_randomized(game: Game, smooth: SmoothParams, epsilon: float, delta: float,
                         rng: np.random.Generator, c1: float = 1.0, c2: float = 1.0,
                         threads: int = 1
                         ) -> Tuple[List[np.ndarray], EquilibriumReport]:
    """Runs the query-based solver on an in-memory game and re-verifies its output.

    Raises:
      NotFoundError: The query-based search accepted no profile.
    """
    oracle = QueryCountingOracle(game)
    params = QueryParams(epsilon, smooth.sigma, delta, game.num_players, c1, c2)
    profile, found = query_equilibrium(oracle, params, rng, threads=threads)
    if not found:
        raise NotFoundError("query-based search accepted no profile")
    return profile, verify(game, profile, smooth, epsilon)
