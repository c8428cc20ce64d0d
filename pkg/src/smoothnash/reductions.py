"""Game constructions: action padding and generalized matching pennies."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np

from smoothnash.core import MAX_GAME_ENTRIES, AffineTransform, Game, as_strategy
from smoothnash.errors import InvalidArgumentError, ResourceLimitError


def pad_game(game: Game, k: int) -> Game:
    """Replicates every action ``k`` times.

    For two players this is ``A' = kron(J_k, A)``: action ``i + l * n`` of the
    padded game is copy ``l`` of action ``i``.
    """
    if k < 1:
        raise InvalidArgumentError("k must be at least 1")
    m, n = game.num_players, game.num_actions
    if float(n * k) ** m > MAX_GAME_ENTRIES:
        raise ResourceLimitError(f"padded game with {n * k}^{m} entries is too large")
    payoffs = np.tile(game.payoffs, (1,) + (k,) * m)
    metadata = {**game.metadata, "padded_from": n, "pad_factor": k}
    return Game(payoffs, transform=game.transform, metadata=metadata)


def unpad_profile(x, n: int, k: int) -> np.ndarray:
    """Merges the ``k`` copies of each action: ``x'_i = sum_l x[i + l * n]``."""
    x = np.asarray(x, dtype=float).reshape(-1)
    if x.size != n * k:
        raise InvalidArgumentError(f"strategy of length {x.size} does not match n*k = {n * k}")
    return as_strategy(x.reshape(k, n).sum(axis=0))


def lift_profile(z, k: int) -> np.ndarray:
    """Spreads each action's mass evenly over its ``k`` copies."""
    z = as_strategy(z)
    return np.tile(z / k, k)


@dataclass(frozen=True)
class GMPParams:
    """Size of a generalized matching pennies game: ``K`` blocks of two actions."""

    K: int

    def __post_init__(self):
        if self.K < 2:
            raise InvalidArgumentError("K must be at least 2")

    @property
    def N(self) -> int:
        return 2 * self.K

    @property
    def M(self) -> int:
        return 2 * self.K**3

    def base_matrix(self) -> np.ndarray:
        """``M * kron(I_K, J_2)``: the row player wins M by matching the column's block."""
        return self.M * np.kron(np.eye(self.K), np.ones((2, 2)))


@dataclass(frozen=True, eq=False)
class GMPInstance:
    """A perturbed matching pennies game in raw units and its normalized form."""

    params: GMPParams
    raw_A: np.ndarray
    raw_B: np.ndarray
    game: Game

    @property
    def transform(self) -> AffineTransform:
        return self.game.transform


def make_gmp(params: GMPParams, rng: Optional[np.random.Generator] = None,
             perturbation: Optional[Tuple[np.ndarray, np.ndarray]] = None) -> GMPInstance:
    """Builds ``(A* + E_A, -A* + E_B)`` and its normalization into [0, 1].

    Raw payoffs range over ``[-M, M + 1]``. The normalized game applies
    ``v -> (v + M) / (2M + 1)`` to both players, so a tolerance ``eps`` in raw
    units corresponds to ``eps / (2M + 1)`` after normalization.

    Args:
      params: Number of blocks.
      rng: Draws uniform perturbations when ``perturbation`` is not given.
      perturbation: Explicit ``(E_A, E_B)`` with entries in [0, 1].
    """
    N, M = params.N, params.M
    if perturbation is None:
        if rng is None:
            raise InvalidArgumentError("pass rng or an explicit perturbation")
        e_a, e_b = rng.random((N, N)), rng.random((N, N))
    else:
        e_a, e_b = (np.asarray(e, dtype=float) for e in perturbation)
        for e in (e_a, e_b):
            if e.shape != (N, N) or not np.all(np.isfinite(e)) or e.min() < 0 or e.max() > 1:
                raise InvalidArgumentError(f"perturbations must be {N}x{N} with entries in [0, 1]")
    base = params.base_matrix()
    raw_A, raw_B = base + e_a, -base + e_b
    transform = AffineTransform(1.0 / (2 * M + 1), M / (2 * M + 1))
    game = Game.from_matrices(transform.apply(raw_A), transform.apply(raw_B),
                              transform=transform,
                              metadata={"generator": "gmp", "K": params.K, "M": M})
    return GMPInstance(params, raw_A, raw_B, game)


def gmp_marginal_threshold(sigma: float, K: int, M: Optional[int] = None) -> float:
    """Smallest marginal tolerance ``8 sigma K^2 / M`` the block-marginal bound supports."""
    M = 2 * K**3 if M is None else M
    return 8 * sigma * K**2 / M


def check_gmp_marginals(x, y, epsilon: float, sigma: float, K: Optional[int] = None,
                        M: Optional[int] = None) -> Tuple[bool, np.ndarray, np.ndarray]:
    """Checks that both players put ``1/K +- epsilon`` mass on every block.

    Block k consists of actions ``2k`` and ``2k + 1``.

    Raises:
      InvalidArgumentError: ``epsilon`` is below ``gmp_marginal_threshold``.
    """
    x, y = as_strategy(x), as_strategy(y)
    if x.size != y.size or x.size % 2:
        raise InvalidArgumentError("strategies must have the same even length")
    K = x.size // 2 if K is None else K
    if 2 * K != x.size:
        raise InvalidArgumentError(f"strategies of length {x.size} do not have {K} blocks")
    threshold = gmp_marginal_threshold(sigma, K, M)
    if epsilon < threshold - 1e-12:
        raise InvalidArgumentError(
            f"epsilon={epsilon} is below the supported threshold {threshold}")
    x_bar, y_bar = x.reshape(K, 2).sum(axis=1), y.reshape(K, 2).sum(axis=1)
    ok = bool(np.all(np.abs(x_bar - 1 / K) <= epsilon) and np.all(np.abs(y_bar - 1 / K) <= epsilon))
    return ok, x_bar, y_bar
