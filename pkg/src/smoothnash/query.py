"""Query-efficient weak smooth equilibria with exact query accounting.

The solver only touches payoffs through ``QueryCountingOracle``. Entries are
fetched in product blocks; every fetched entry counts as one query (repeated
draws are queried again, so the count does not depend on the number of
actions). Later reads go through ``lookup_block``, which fails on any entry
that was never queried.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np

from smoothnash.core import (
    Game, SmoothParams, StrategyProfile, as_profile, contract, deviation_payoffs,
    top_smooth_values)
from smoothnash.errors import InternalConsistencyError, InvalidArgumentError, ResourceLimitError
from smoothnash.search import count_k_uniform, k_uniform_counts, scan_profiles

PayoffFn = Callable[[int, Tuple[np.ndarray, ...]], np.ndarray]

MAX_QUERIES = 5 * 10**7
MAX_PROFILES = 10**8


class QueryCountingOracle:
    """Counts single-entry payoff lookups and caches what was fetched.

    Args:
      game: A dense game. Alternatively pass ``payoff_fn`` with
        ``num_players`` and ``num_actions`` for games too large to store;
        ``payoff_fn(player, index_arrays)`` returns payoffs elementwise.
      log_access: Keep a log of ``(player, flat_indices)`` per block.
    """

    def __init__(self, game: Optional[Game] = None, *, payoff_fn: Optional[PayoffFn] = None,
                 num_players: Optional[int] = None, num_actions: Optional[int] = None,
                 log_access: bool = False):
        if game is not None:
            tensors = game.payoffs
            payoff_fn = lambda j, idx: tensors[j][idx]
            num_players, num_actions = game.num_players, game.num_actions
        if payoff_fn is None or num_players is None or num_actions is None:
            raise InvalidArgumentError("pass a game or payoff_fn with num_players and num_actions")
        self._payoff_fn = payoff_fn
        self.num_players = int(num_players)
        self.num_actions = int(num_actions)
        self.query_count = 0
        self.access_log: Optional[list] = [] if log_access else None
        self._pending = [[] for _ in range(self.num_players)]
        self._keys = [np.empty(0, dtype=np.int64) for _ in range(self.num_players)]
        self._values = [np.empty(0) for _ in range(self.num_players)]

    def _flat(self, axes: Sequence[np.ndarray]) -> Tuple[Tuple[np.ndarray, ...], np.ndarray]:
        if len(axes) != self.num_players:
            raise InvalidArgumentError("need one index array per player")
        grids = np.meshgrid(*[np.asarray(a, dtype=np.int64) for a in axes], indexing="ij")
        shape = (self.num_actions,) * self.num_players
        return tuple(grids), np.ravel_multi_index(tuple(g.ravel() for g in grids), shape)

    def query(self, player: int, actions: Sequence[int]) -> float:
        """Looks up a single payoff entry ``A_player(actions)``."""
        self.query_block(player, [np.array([a]) for a in actions])
        return float(self.lookup_block(player, [np.array([a]) for a in actions]).ravel()[0])

    def query_block(self, player: int, axes: Sequence[np.ndarray]) -> None:
        """Queries every entry of the product of ``axes``, one query per tuple."""
        grids, keys = self._flat(axes)
        values = np.asarray(self._payoff_fn(player, grids), dtype=float).ravel()
        self.query_count += keys.size
        if self.access_log is not None:
            self.access_log.append((player, keys))
        self._pending[player].append((keys, values))

    def lookup_block(self, player: int, axes: Sequence[np.ndarray]) -> np.ndarray:
        """Reads an already-queried product block without issuing queries."""
        self._consolidate(player)
        grids, keys = self._flat(axes)
        stored = self._keys[player]
        pos = np.searchsorted(stored, keys)
        pos_clipped = np.minimum(pos, max(stored.size - 1, 0))
        if stored.size == 0 or not np.array_equal(stored[pos_clipped], keys):
            raise InternalConsistencyError(
                f"payoff entries for player {player} were read before being queried")
        return self._values[player][pos_clipped].reshape(grids[0].shape)

    def _consolidate(self, player: int) -> None:
        if not self._pending[player]:
            return
        keys = np.concatenate([self._keys[player]] + [k for k, _ in self._pending[player]])
        values = np.concatenate([self._values[player]] + [v for _, v in self._pending[player]])
        self._keys[player], first = np.unique(keys, return_index=True)
        self._values[player] = values[first]
        self._pending[player] = []


@dataclass(frozen=True)
class QueryParams:
    """Accuracy targets and the sample sizes they imply for the query solver.

    ``t`` is the sparsity of candidate strategies, ``l`` the number of uniform
    draws covering each sample, ``k = t * l`` the support draws per player and
    ``N`` the deviation sample size per player.
    """

    epsilon: float
    sigma: float
    delta: float
    num_players: int
    c1: float = 1.0
    c2: float = 1.0

    def __post_init__(self):
        if not (0 < self.epsilon < 1 and 0 < self.sigma <= 1 and 0 < self.delta < 1):
            raise InvalidArgumentError("need epsilon, delta in (0, 1) and sigma in (0, 1]")
        if self.num_players < 1 or self.c1 <= 0 or self.c2 <= 0:
            raise InvalidArgumentError("num_players, c1 and c2 must be positive")

    @property
    def t(self) -> int:
        m = self.num_players
        raw = self.c1 * m * math.log(32 * m / (self.delta * self.sigma)) / (self.epsilon / 4) ** 2
        return max(1, math.ceil(raw))

    @property
    def l(self) -> int:
        return max(1, math.ceil(math.log(4 * self.t * self.num_players / self.delta) / self.sigma))

    @property
    def k(self) -> int:
        return self.t * self.l

    @property
    def N(self) -> int:
        m, eps, sigma = self.num_players, self.epsilon, self.sigma
        raw = 16 * self.c2 * self.t * m * math.log(self.k / self.delta) / (eps**2 * sigma**2)
        return max(1, math.ceil(raw))

    def query_count(self) -> int:
        """Exact number of queries issued by ``query_equilibrium``."""
        m, k = self.num_players, self.k
        return m * self.N * k ** (m - 1) + m * k**m


def _strategy_support(x: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    support = np.flatnonzero(x > 0)
    return support, x[support]


def optimize_deviation(sample_set, oracle: QueryCountingOracle, player: int,
                       profile: StrategyProfile, smooth: SmoothParams) -> float:
    """Estimates the best smooth deviation value from sampled actions.

    Averages the top ``sigma`` fraction of ``A_player(r, x_-player)`` over
    the sampled actions ``r`` (fractionally when ``sigma * N`` is not an
    integer), reading payoffs only from the oracle's cache.
    """
    sample_set = np.asarray(sample_set, dtype=np.int64)
    axes, weights = [], {}
    for j, x in enumerate(profile):
        if j == player:
            axes.append(sample_set)
        else:
            support, w = _strategy_support(np.asarray(x, dtype=float))
            axes.append(support)
            weights[j] = w
    block = oracle.lookup_block(player, axes)
    values = contract(block, weights)
    return float(top_smooth_values(values, SmoothParams(smooth.sigma, sample_set.size)))


def query_equilibrium(oracle: QueryCountingOracle, params: QueryParams, rng: np.random.Generator,
                      max_profiles: int = MAX_PROFILES, threads: int = 1
                      ) -> Tuple[List[np.ndarray], bool]:
    """Searches sparse profiles for a weak smooth equilibrium using few queries.

    Draws ``k`` uniform support actions and ``N`` uniform deviation actions per
    player, queries payoffs on the sampled blocks, then tests every
    ``t``-uniform profile on the supports in lexicographic order. A profile is
    accepted when each player's estimated deviation gain is at most
    ``epsilon / 2``.

    Returns:
      The accepted profile and True, or the uniform profile and False.
    """
    m, n = oracle.num_players, oracle.num_actions
    if m != params.num_players:
        raise InvalidArgumentError("params.num_players does not match the oracle")
    t, k, N = params.t, params.k, params.N
    if params.query_count() > MAX_QUERIES:
        raise ResourceLimitError(
            f"{params.query_count()} queries exceed the limit of {MAX_QUERIES}; "
            "lower the constants or raise epsilon")

    draws = [rng.integers(n, size=k) for _ in range(m)]
    deviations = [rng.integers(n, size=N) for _ in range(m)]
    for j in range(m):
        oracle.query_block(j, [deviations[j] if i == j else draws[i] for i in range(m)])
    for j in range(m):
        oracle.query_block(j, draws)

    supports = [np.unique(d) for d in draws]
    num_profiles = math.prod(count_k_uniform(s.size, t) for s in supports)
    if num_profiles > max_profiles:
        raise ResourceLimitError(
            f"{num_profiles} candidate profiles exceed the limit of {max_profiles}; "
            "lower the constants or raise epsilon")
    candidates = [k_uniform_counts(s.size, t) / t for s in supports]
    dev_tensors = [oracle.lookup_block(j, [deviations[j] if i == j else supports[i]
                                           for i in range(m)]) for j in range(m)]
    cur_tensors = [oracle.lookup_block(j, supports) for j in range(m)]
    smooth = SmoothParams(params.sigma, N)
    for idx, _ in scan_profiles(dev_tensors, cur_tensors, candidates, smooth,
                                params.epsilon / 2, threads):
        profile = []
        for j in range(m):
            x = np.zeros(n)
            x[supports[j]] = candidates[j][idx[j]]
            profile.append(x)
        return profile, True
    return [np.full(n, 1.0 / n) for _ in range(m)], False


def check_good_collection(game: Game, deviation_sets: Sequence[Sequence[int]],
                          profile: StrategyProfile, smooth: SmoothParams,
                          epsilon: float) -> List[bool]:
    """Checks whether deviation samples represent each player's top actions.

    For player j, the top set holds the actions that receive weight in the
    best smooth response to ``x_-j`` (the top ``sigma * n`` actions, lowest
    index first on ties). The samples are good when the number ``T`` of
    sampled actions in the top set satisfies ``|T - sigma N| <= epsilon sigma N``
    and the mean payoff of those samples is within ``epsilon`` of the best
    smooth response value.
    """
    xs = as_profile(game, profile)
    verdicts = []
    for j in range(game.num_players):
        sample = np.asarray(deviation_sets[j], dtype=np.int64)
        N = sample.size
        u = deviation_payoffs(game, xs, j)
        order = np.argsort(-u, kind="stable")
        top_count = int(np.count_nonzero(smooth.sorted_weights))
        in_top = np.isin(sample, order[:top_count])
        T = int(in_top.sum())
        size_ok = abs(T - smooth.sigma * N) <= epsilon * smooth.sigma * N
        best = float(smooth.sorted_weights @ u[order])
        mean_ok = T > 0 and abs(u[sample[in_top]].mean() - best) <= epsilon
        verdicts.append(bool(size_ok and mean_ok))
    return verdicts
