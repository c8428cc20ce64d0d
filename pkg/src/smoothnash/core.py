"""Normal-form games, smooth strategy polytopes and equilibrium verification.

A strategy is a 1-D numpy array of probabilities; a profile is a sequence of
strategies, one per player. The smooth polytope for smoothness ``sigma`` over
``n`` actions is the set of distributions with every entry at most
``min(1, 1 / (n * sigma))``.
"""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass, field
from typing import Any, Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from smoothnash.errors import InvalidArgumentError, ResourceLimitError

TOL = 1e-9
MAX_GAME_ENTRIES = 10**8
KL_FLOOR = 1e-300

StrategyProfile = Sequence[np.ndarray]


@dataclass(frozen=True)
class AffineTransform:
    """Maps raw payoffs into [0, 1] as ``scale * raw + shift``."""

    scale: float
    shift: float

    def apply(self, raw: np.ndarray) -> np.ndarray:
        return self.scale * np.asarray(raw, dtype=float) + self.shift

    def invert(self, normalized: np.ndarray) -> np.ndarray:
        return (np.asarray(normalized, dtype=float) - self.shift) / self.scale

    def to_raw_epsilon(self, epsilon: float) -> float:
        """Converts an additive payoff tolerance from normalized to raw units."""
        return epsilon / self.scale

    def to_normalized_epsilon(self, epsilon: float) -> float:
        return epsilon * self.scale


@dataclass(frozen=True, eq=False)
class Game:
    """An m-player game with n actions per player.

    Attributes:
      payoffs: Array of shape ``(m, n, ..., n)`` with ``m`` trailing axes of
        size ``n``; ``payoffs[j]`` is player j's payoff tensor. Entries lie in
        [0, 1].
      transform: Optional record of the affine map that produced these
        payoffs from a game with a wider payoff range.
      metadata: Free-form provenance (generator name, seed, ...).
    """

    payoffs: np.ndarray
    transform: Optional[AffineTransform] = None
    metadata: Dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        payoffs = np.array(self.payoffs, dtype=float)
        if payoffs.ndim < 2:
            raise InvalidArgumentError(
                "payoffs must have shape (m, n, ..., n) with m >= 1")
        m = payoffs.shape[0]
        if payoffs.ndim != m + 1:
            raise InvalidArgumentError(
                f"payoffs for {m} players need {m + 1} axes, got {payoffs.ndim}")
        n = payoffs.shape[1]
        if n < 1 or any(d != n for d in payoffs.shape[1:]):
            raise InvalidArgumentError(
                f"every payoff axis must have the same size, got {payoffs.shape[1:]}")
        if float(n) ** m > MAX_GAME_ENTRIES:
            raise ResourceLimitError(
                f"game with n^m = {n}^{m} entries exceeds the limit of {MAX_GAME_ENTRIES}")
        if not np.all(np.isfinite(payoffs)):
            raise InvalidArgumentError("payoffs must be finite")
        if payoffs.min() < -TOL or payoffs.max() > 1 + TOL:
            raise InvalidArgumentError(
                "payoffs must lie in [0, 1]; rescale with an AffineTransform first")
        payoffs = np.clip(payoffs, 0.0, 1.0)
        payoffs.setflags(write=False)
        object.__setattr__(self, "payoffs", payoffs)

    @property
    def num_players(self) -> int:
        return self.payoffs.shape[0]

    @property
    def num_actions(self) -> int:
        return self.payoffs.shape[1]

    @classmethod
    def from_matrices(cls, *matrices, **kwargs) -> "Game":
        """Builds a game from one payoff tensor per player."""
        return cls(np.stack([np.asarray(a, dtype=float) for a in matrices]), **kwargs)

    def raw_payoffs(self) -> np.ndarray:
        """Payoffs in the units of the original (unnormalized) game."""
        if self.transform is None:
            return np.array(self.payoffs)
        return self.transform.invert(self.payoffs)


@dataclass(frozen=True)
class SmoothParams:
    """Smoothness level and the per-coordinate caps it induces.

    Attributes:
      sigma: Smoothness in (0, 1].
      n: Number of actions.
      base_measure: Optional reference distribution ``mu``; caps become
        ``min(1, mu_i / sigma)``. Defaults to uniform.
    """

    sigma: float
    n: int
    base_measure: Optional[Tuple[float, ...]] = None

    def __post_init__(self):
        sigma = float(self.sigma)
        if not 0.0 < sigma <= 1.0:
            raise InvalidArgumentError(f"sigma must lie in (0, 1], got {self.sigma}")
        if int(self.n) != self.n or self.n < 1:
            raise InvalidArgumentError(f"n must be a positive integer, got {self.n}")
        object.__setattr__(self, "sigma", sigma)
        object.__setattr__(self, "n", int(self.n))
        if self.base_measure is not None:
            mu = np.asarray(self.base_measure, dtype=float)
            if mu.shape != (self.n,) or mu.min() <= 0 or abs(mu.sum() - 1) > TOL:
                raise InvalidArgumentError(
                    "base_measure must be a positive distribution of length n")
            object.__setattr__(self, "base_measure", tuple(float(v) for v in mu))

    @functools.cached_property
    def support_size(self) -> float:
        """``s = n * sigma``, snapped to the nearest integer when within 1e-9."""
        s = self.n * self.sigma
        if abs(s - round(s)) <= 1e-9 * max(1.0, s):
            s = float(round(s))
        return s

    @property
    def cap(self) -> float:
        """Largest cap over coordinates (the common cap for a uniform base)."""
        if self.base_measure is None:
            return min(1.0, 1.0 / self.support_size)
        return float(self.caps.max())

    @functools.cached_property
    def caps(self) -> np.ndarray:
        if self.base_measure is None:
            caps = np.full(self.n, self.cap)
        else:
            caps = np.minimum(1.0, np.asarray(self.base_measure) / self.sigma)
        caps.setflags(write=False)
        return caps

    @functools.cached_property
    def sorted_weights(self) -> np.ndarray:
        """Optimal weights for values sorted in descending order (uniform base)."""
        if self.base_measure is not None:
            raise InvalidArgumentError("sorted weights depend on the order for a non-uniform base")
        w = np.zeros(self.n)
        s = self.support_size
        if s <= 1.0:
            w[0] = 1.0
        else:
            full = min(self.n, int(math.floor(s)))
            w[:full] = 1.0 / s
            if full < self.n:
                w[full] = max(0.0, 1.0 - full / s)
        w.setflags(write=False)
        return w

    @classmethod
    def for_tuples(cls, sigma: float, n: int, length: int) -> "SmoothParams":
        """Smoothness ``sigma**length`` over the product space ``[n]**length``."""
        return cls(sigma**length, n**length)


def as_strategy(probs, n: Optional[int] = None, tol: float = TOL) -> np.ndarray:
    """Validates a probability vector, clamping negatives within ``tol`` to 0."""
    x = np.array(probs, dtype=float).reshape(-1)
    if n is not None and x.shape[0] != n:
        raise InvalidArgumentError(f"strategy has length {x.shape[0]}, expected {n}")
    if x.size == 0 or not np.all(np.isfinite(x)):
        raise InvalidArgumentError("strategy must be a non-empty finite vector")
    if x.min() < -tol:
        raise InvalidArgumentError(f"strategy has a negative entry {x.min()}")
    if abs(x.sum() - 1.0) > tol:
        raise InvalidArgumentError(f"strategy sums to {x.sum()}, not 1")
    return np.maximum(x, 0.0)


def as_profile(game: Game, profile: StrategyProfile, tol: float = TOL) -> List[np.ndarray]:
    if len(profile) != game.num_players:
        raise InvalidArgumentError(
            f"profile has {len(profile)} strategies for a {game.num_players}-player game")
    return [as_strategy(x, game.num_actions, tol) for x in profile]


def uniform_profile(game: Game) -> List[np.ndarray]:
    n = game.num_actions
    return [np.full(n, 1.0 / n) for _ in range(game.num_players)]


def random_game(num_players: int, num_actions: int, rng: np.random.Generator) -> Game:
    """Game with i.i.d. uniform [0, 1] payoffs."""
    shape = (num_players,) + (num_actions,) * num_players
    return Game(rng.random(shape))


def contract(tensor: np.ndarray, vectors: Mapping[int, np.ndarray]) -> np.ndarray:
    """Contracts the given axes of ``tensor`` with vectors, keeping the rest in order."""
    out = tensor
    for axis in sorted(vectors, reverse=True):
        out = np.tensordot(out, vectors[axis], axes=([axis], [0]))
    return out


def expected_payoff(game: Game, profile: StrategyProfile, player: int) -> float:
    """Expected payoff of ``player`` under the product distribution ``profile``."""
    xs = as_profile(game, profile)
    return float(contract(game.payoffs[player], dict(enumerate(xs))))


def deviation_payoffs(game: Game, profile: StrategyProfile, player: int) -> np.ndarray:
    """Vector of ``A_player(e_i, x_-player)`` over actions ``i``."""
    xs = as_profile(game, profile)
    others = {j: x for j, x in enumerate(xs) if j != player}
    return contract(game.payoffs[player], others)


def top_smooth_average(values, smooth: SmoothParams) -> Tuple[float, np.ndarray]:
    """Maximizes ``<w, values>`` over the smooth polytope.

    Sorts values in descending order (stable, so ties go to the lowest index)
    and fills each coordinate up to its cap until the mass reaches 1.

    Returns:
      The optimal value and an optimal vertex of the polytope.
    """
    v = np.asarray(values, dtype=float).reshape(-1)
    if v.shape[0] != smooth.n:
        raise InvalidArgumentError(f"got {v.shape[0]} values for n={smooth.n}")
    order = np.argsort(-v, kind="stable")
    if smooth.base_measure is None:
        w_sorted = smooth.sorted_weights
    else:
        c = smooth.caps[order]
        w_sorted = np.clip(1.0 - (np.cumsum(c) - c), 0.0, c)
    witness = np.zeros(smooth.n)
    witness[order] = w_sorted
    return float(np.dot(v[order], w_sorted)), witness


def top_smooth_values(values: np.ndarray, smooth: SmoothParams, axis: int = 0) -> np.ndarray:
    """Vectorized ``top_smooth_average`` values along ``axis`` (uniform base only)."""
    v = np.moveaxis(np.asarray(values, dtype=float), axis, -1)
    if v.shape[-1] != smooth.n:
        raise InvalidArgumentError(f"got {v.shape[-1]} values for n={smooth.n}")
    w = smooth.sorted_weights
    nonzero = int(np.count_nonzero(w))
    if nonzero < smooth.n:
        # Only the largest few entries matter; partition avoids a full sort.
        part = -np.partition(-v, nonzero - 1, axis=-1)[..., :nonzero]
        top = -np.sort(-part, axis=-1)
        return top @ w[:nonzero]
    return -np.sort(-v, axis=-1) @ w


def best_smooth_response(game: Game, profile: StrategyProfile, player: int,
                         smooth: SmoothParams) -> Tuple[float, np.ndarray]:
    return top_smooth_average(deviation_payoffs(game, profile, player), smooth)


def is_smooth(x, smooth: SmoothParams, tol: float = TOL) -> bool:
    x = np.asarray(x, dtype=float)
    return bool(x.shape == (smooth.n,) and np.all(x <= smooth.caps + tol))


@dataclass
class EquilibriumReport:
    """Per-player deviation gains and the resulting equilibrium verdicts."""

    current_payoff: List[float]
    best_smooth_value: List[float]
    gain: List[float]
    smooth_member: List[bool]
    epsilon: float
    weak_ok: bool
    strong_ok: bool

    @property
    def max_gain(self) -> float:
        return max(self.gain)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "current_payoff": list(self.current_payoff),
            "best_smooth_value": list(self.best_smooth_value),
            "gain": list(self.gain),
            "smooth_member": list(self.smooth_member),
            "epsilon": self.epsilon,
            "weak_ok": self.weak_ok,
            "strong_ok": self.strong_ok,
        }


def verify(game: Game, profile: StrategyProfile, smooth: SmoothParams, epsilon: float,
           tol: float = TOL) -> EquilibriumReport:
    """Checks whether ``profile`` is an epsilon-approximate smooth equilibrium.

    Args:
      game: The game.
      profile: One strategy per player.
      smooth: Smoothness of the allowed deviations (and of the strategies for
        the strong verdict).
      epsilon: Allowed gain from deviating.
      tol: Numeric slack for the gain comparison and polytope membership.

    Returns:
      An EquilibriumReport.
    """
    if epsilon < 0:
        raise InvalidArgumentError("epsilon must be non-negative")
    xs = as_profile(game, profile, tol)
    current, best, gains, members = [], [], [], []
    for j in range(game.num_players):
        u = contract(game.payoffs[j], {i: x for i, x in enumerate(xs) if i != j})
        value, _ = top_smooth_average(u, smooth)
        payoff = float(np.dot(u, xs[j]))
        current.append(payoff)
        best.append(value)
        gains.append(value - payoff)
        members.append(is_smooth(xs[j], smooth, tol))
    weak_ok = max(gains) <= epsilon + tol
    return EquilibriumReport(current, best, gains, members, float(epsilon), weak_ok,
                             weak_ok and all(members))


def kl_project(q, smooth: SmoothParams) -> np.ndarray:
    """KL projection ``argmin_p KL(p || q)`` onto the smooth polytope.

    The minimizer has the form ``p_i = min(lam * q_i, cap_i)``. Coordinates are
    capped in decreasing order of ``q_i / cap_i``; the number of capped
    coordinates is the smallest count for which the remaining scaled mass stays
    below its caps.
    """
    q = np.asarray(q, dtype=float).reshape(-1)
    if q.shape[0] != smooth.n or not np.all(np.isfinite(q)) or q.min() < 0:
        raise InvalidArgumentError("q must be a finite non-negative vector of length n")
    q = np.maximum(q, KL_FLOOR)
    caps = smooth.caps
    order = np.argsort(-(q / caps), kind="stable")
    qs, cs = q[order], caps[order]
    capped_mass = np.concatenate(([0.0], np.cumsum(cs)[:-1]))
    free_mass = np.cumsum(qs[::-1])[::-1]
    lam = (1.0 - capped_mass) / free_mass
    valid = lam * qs <= cs * (1.0 + 1e-12)
    p_sorted = np.array(cs)
    if valid.any():
        k = int(np.argmax(valid))
        p_sorted[k:] = np.minimum(lam[k] * qs[k:], cs[k:])
    else:
        p_sorted /= p_sorted.sum()
    p = np.empty_like(p_sorted)
    p[order] = p_sorted
    return p


def euclidean_project(z, smooth: SmoothParams) -> np.ndarray:
    """Euclidean projection onto the smooth polytope.

    The solution is ``clip(z - tau, 0, cap)`` for the shift ``tau`` that makes
    it sum to 1; ``tau`` is found exactly between consecutive breakpoints.
    """
    z = np.asarray(z, dtype=float).reshape(-1)
    caps = smooth.caps
    breaks = np.unique(np.concatenate([z, z - caps]))

    def mass(tau):
        return np.clip(z[None, :] - np.atleast_1d(tau)[:, None], 0.0, caps).sum(axis=1)

    m = mass(breaks)  # non-increasing in tau
    idx = np.searchsorted(-m, -1.0, side="left")
    if idx == 0:
        tau = breaks[0]
    elif idx >= breaks.size:
        tau = breaks[-1]
    else:
        lo, hi = breaks[idx - 1], breaks[idx]
        m_lo, m_hi = m[idx - 1], m[idx]
        tau = lo if m_lo == m_hi else lo + (m_lo - 1.0) * (hi - lo) / (m_lo - m_hi)
    return np.clip(z - tau, 0.0, caps)
