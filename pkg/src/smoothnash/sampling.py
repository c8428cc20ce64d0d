"""Sparsifying smooth equilibria by sampling, and the smooth-to-uniform coupling."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import List, Optional, Tuple

import numpy as np

from smoothnash.core import (
    TOL, Game, SmoothParams, StrategyProfile, as_profile, as_strategy, contract, is_smooth,
    top_smooth_average, verify)
from smoothnash.errors import InvalidArgumentError, ResourceLimitError

MAX_HYBRID_ENTRIES = 10**7


def make_rng(seed: Optional[int | np.random.SeedSequence] = None) -> np.random.Generator:
    """Counter-based (Philox) generator; spawn children with ``rng.spawn``."""
    if not isinstance(seed, np.random.SeedSequence):
        seed = np.random.SeedSequence(seed)
    return np.random.Generator(np.random.Philox(seed))


@dataclass(frozen=True)
class SamplingParams:
    """Accuracy targets and the number of samples per player they imply."""

    epsilon: float
    sigma: float
    delta: float
    num_players: int
    constant_c1: float = 1.0

    def __post_init__(self):
        for name in ("epsilon", "sigma", "delta"):
            value = getattr(self, name)
            if not 0 < value < 1 and not (name == "sigma" and value == 1):
                raise InvalidArgumentError(f"{name} must lie in (0, 1), got {value}")
        if self.num_players < 1 or self.constant_c1 <= 0:
            raise InvalidArgumentError("num_players and constant_c1 must be positive")

    @property
    def k(self) -> int:
        m = self.num_players
        raw = self.constant_c1 * m * math.log(8 * m / (self.delta * self.sigma)) / self.epsilon**2
        return max(1, math.ceil(raw))


@dataclass(frozen=True)
class KUniformProfile:
    """Integer action counts per player, each summing to ``k``."""

    k: int
    counts: Tuple[np.ndarray, ...]

    def __post_init__(self):
        counts = tuple(np.asarray(c, dtype=np.int64) for c in self.counts)
        for c in counts:
            if c.ndim != 1 or c.min() < 0 or c.sum() != self.k:
                raise InvalidArgumentError(f"counts must be non-negative and sum to k={self.k}")
        object.__setattr__(self, "counts", counts)

    def strategies(self) -> List[np.ndarray]:
        return [c / self.k for c in self.counts]


def sample_k_uniform(profile: StrategyProfile, k: int, rng: np.random.Generator) -> KUniformProfile:
    """Draws ``k`` i.i.d. actions per player and returns the empirical counts."""
    if k < 1:
        raise InvalidArgumentError("k must be at least 1")
    counts = []
    for x in profile:
        x = as_strategy(x)
        # Renormalize to absorb rounding that numpy's sampler rejects.
        counts.append(rng.multinomial(k, x / x.sum()))
    return KUniformProfile(k, tuple(counts))


def couple_smooth_to_uniform(p, smooth: SmoothParams, t: int, l: int,
                             rng: np.random.Generator
                             ) -> Tuple[np.ndarray, np.ndarray, bool]:
    """Couples ``t`` draws from a smooth ``p`` with ``t`` rows of ``l`` base draws.

    Each row draws ``l`` actions from the base measure and accepts action ``d``
    with probability ``sigma * p(d) / mu(d)``. The row's target is its first
    accepted action, or a fresh draw from ``p`` if none was accepted. Targets
    are i.i.d. from ``p`` and the row draws are i.i.d. from the base measure.

    Returns:
      targets of shape (t,), draws of shape (t, l), and whether every target
      appears in its own row.
    """
    p = as_strategy(p, smooth.n)
    if not is_smooth(p, smooth):
        raise InvalidArgumentError("p is not smooth for the given parameters")
    n = smooth.n
    mu = np.full(n, 1.0 / n) if smooth.base_measure is None else np.asarray(smooth.base_measure)
    accept_prob = np.minimum(1.0, smooth.sigma * p / mu)
    draws = rng.choice(n, size=(t, l), p=mu)
    accepted = rng.random((t, l)) < accept_prob[draws]
    fallback = rng.choice(n, size=t, p=p / p.sum())
    has_accept = accepted.any(axis=1)
    first = np.argmax(accepted, axis=1)
    targets = np.where(has_accept, draws[np.arange(t), first], fallback)
    contained = bool(np.all((draws == targets[:, None]).any(axis=1)))
    return targets, draws, contained


def _hybrid_sup(diff: np.ndarray, sigma: float, n: int, free_axes: int) -> float:
    """``sup |<x', diff>|`` over smooth x' on the flattened product of ``free_axes`` axes."""
    flat = np.asarray(diff).reshape(-1)
    if free_axes == 0:
        return float(abs(flat[0]))
    smooth = SmoothParams.for_tuples(sigma, n, free_axes)
    upper, _ = top_smooth_average(flat, smooth)
    lower, _ = top_smooth_average(-flat, smooth)
    return max(upper, lower)


def hybrid_gaps(game: Game, exact: StrategyProfile, sampled: StrategyProfile,
                sigma: float) -> List[float]:
    """Hybrid deviation gaps between an equilibrium and its sparsified version.

    For every player j and position l (0-based here) this evaluates
    ``sup |A_j(x', xhat_l, xhat_{>l}) - A_j(x', x_l, xhat_{>l})|`` with x'
    ranging over smooth joint strategies of the first l players (smoothness
    ``sigma**l``), and for every later player j > l the same with player j's
    coordinate also free (smoothness ``sigma**(l + 1)``).
    """
    m, n = game.num_players, game.num_actions
    if m * float(n) ** max(m - 1, 0) > MAX_HYBRID_ENTRIES:
        raise ResourceLimitError(
            f"hybrid domains with m*n^(m-1) = {m}*{n}^{m - 1} entries exceed {MAX_HYBRID_ENTRIES}")
    xs = as_profile(game, exact)
    xh = as_profile(game, sampled)
    gaps = []
    for j in range(m):
        tensor = game.payoffs[j]
        for l in range(m):
            later = {i: xh[i] for i in range(l + 1, m)}
            diff = contract(tensor, {l: xh[l] - xs[l], **later})
            gaps.append(_hybrid_sup(diff, sigma, n, l))
            if j > l:
                later_minus_j = {i: v for i, v in later.items() if i != j}
                diff = contract(tensor, {l: xh[l] - xs[l], **later_minus_j})
                gaps.append(_hybrid_sup(diff, sigma, n, l + 1))
    return gaps


def strong_sampling_certificate(game: Game, strong_eq: StrategyProfile, params: SamplingParams,
                                rng: np.random.Generator, eq_slack: float = TOL
                                ) -> Tuple[KUniformProfile, List[float]]:
    """Samples a k-uniform profile from a strong equilibrium and reports its hybrid gaps.

    Args:
      game: The game.
      strong_eq: A strong smooth equilibrium of ``game``.
      params: Sampling targets; ``params.k`` samples are drawn per player.
      rng: Random generator.
      eq_slack: Gain allowed when checking that ``strong_eq`` is a strong
        equilibrium (raise it for approximate equilibria).

    Returns:
      The sampled profile and the list of hybrid gaps from ``hybrid_gaps``.
    """
    smooth = SmoothParams(params.sigma, game.num_actions)
    report = verify(game, strong_eq, smooth, eq_slack)
    if not report.strong_ok:
        raise InvalidArgumentError(
            f"strong_eq is not a strong equilibrium within {eq_slack} (max gain {report.max_gain})")
    sample = sample_k_uniform(strong_eq, params.k, rng)
    return sample, hybrid_gaps(game, strong_eq, sample.strategies(), params.sigma)
