"""No-regret dynamics for smooth equilibria of two-player zero-sum games.

The row player minimizes ``x^T A y`` and the column player maximizes it; both
are restricted to the smooth polytope. Each update is an exponentiated (or
linear multiplicative) step followed by a KL projection back onto the
polytope.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Dict, Optional

import numpy as np

from smoothnash.core import Game, SmoothParams, as_strategy, kl_project, top_smooth_average
from smoothnash.errors import InvalidArgumentError

OMD_MAX_STEP = 1.0 / 11.0


@dataclass(frozen=True, eq=False)
class ZeroSumGame:
    """Square loss matrix ``A`` with entries in [0, 1]; the row player minimizes."""

    matrix: np.ndarray

    def __post_init__(self):
        A = np.array(self.matrix, dtype=float)
        if A.ndim != 2 or A.shape[0] != A.shape[1]:
            raise InvalidArgumentError(f"matrix must be square, got shape {A.shape}")
        if not np.all(np.isfinite(A)) or A.min() < 0 or A.max() > 1:
            raise InvalidArgumentError("matrix entries must lie in [0, 1]")
        A.setflags(write=False)
        object.__setattr__(self, "matrix", A)

    @property
    def n(self) -> int:
        return self.matrix.shape[0]

    def as_game(self) -> Game:
        """General-sum form: row payoff ``1 - A``, column payoff ``A``."""
        return Game.from_matrices(1.0 - self.matrix, self.matrix)


@dataclass
class IterateTrace:
    """Iterates, running averages, gaps and step sizes of a run.

    Attributes:
      x, y: Played strategies, one row per iteration.
      x_avg, y_avg: Averages of all played strategies.
      gaps: Duality gap of the running averages at iterations 1, 2, 4, ...
        and at the final iteration.
      eta_x, eta_y: Step size used by each player at each iteration.
    """

    x: np.ndarray
    y: np.ndarray
    x_avg: np.ndarray
    y_avg: np.ndarray
    gaps: Dict[int, float] = field(default_factory=dict)
    eta_x: np.ndarray = field(default_factory=lambda: np.empty(0))
    eta_y: np.ndarray = field(default_factory=lambda: np.empty(0))

    @property
    def final_gap(self) -> float:
        return self.gaps[max(self.gaps)]


def duality_gap(game: ZeroSumGame, x, y, smooth: SmoothParams) -> float:
    """``max_{y'} x^T A y' - min_{x'} x'^T A y`` over the smooth polytope."""
    A = game.matrix
    x, y = as_strategy(x, game.n), as_strategy(y, game.n)
    col_best, _ = top_smooth_average(A.T @ x, smooth)
    neg_row_best, _ = top_smooth_average(-(A @ y), smooth)
    return col_best + neg_row_best


def max_kl_to_uniform(smooth: SmoothParams) -> float:
    """Largest KL divergence from a polytope member to the uniform distribution.

    Attained at a capped-uniform vertex; equals ``log(1/sigma)`` when
    ``sigma * n`` is an integer.
    """
    w = smooth.sorted_weights
    w = w[w > 0]
    return float(np.sum(w * np.log(smooth.n * w)))


def _is_checkpoint(t: int, T: int) -> bool:
    return t == T or (t & (t - 1)) == 0


def _check(game: ZeroSumGame, smooth: SmoothParams, T: int) -> None:
    if T < 1:
        raise InvalidArgumentError("T must be at least 1")
    if smooth.n != game.n:
        raise InvalidArgumentError("smooth.n must match the game size")


def solve_pmwu(game: ZeroSumGame, smooth: SmoothParams, T: int,
               eta: Optional[float] = None) -> IterateTrace:
    """Projected multiplicative weights for both players.

    Each player scales its strategy by ``1 - eta * loss`` and KL-projects. The
    row player's losses are ``A y`` and the column player's are ``-A^T x``.

    Args:
      game: The zero-sum game.
      smooth: Smoothness constraint on both players.
      T: Number of iterations.
      eta: Step size in (0, 1); defaults to ``min(1/2, sqrt(log(1/sigma) / T))``.
    """
    _check(game, smooth, T)
    if eta is None:
        eta = min(0.5, math.sqrt(math.log(1.0 / smooth.sigma) / T)) or 0.5
    if not 0 < eta < 1:
        raise InvalidArgumentError(f"eta must lie in (0, 1), got {eta}")
    A, n = game.matrix, game.n
    x = kl_project(np.full(n, 1.0 / n), smooth)
    y = x.copy()
    xs, ys = np.empty((T, n)), np.empty((T, n))
    gaps = {}
    for t in range(1, T + 1):
        xs[t - 1], ys[t - 1] = x, y
        if _is_checkpoint(t, T):
            gaps[t] = duality_gap(game, xs[:t].mean(axis=0), ys[:t].mean(axis=0), smooth)
        loss_x, loss_y = A @ y, -(A.T @ x)
        x = kl_project(x * (1.0 - eta * loss_x), smooth)
        y = kl_project(y * (1.0 - eta * loss_y), smooth)
    return IterateTrace(xs, ys, xs.mean(axis=0), ys.mean(axis=0), gaps,
                        np.full(T, eta), np.full(T, eta))


class _AdaptiveStep:
    """Step sizes from accumulated squared max-norm changes of the loss vector."""

    def __init__(self, radius_sq: float):
        self.radius_sq = radius_sq
        self.totals = [0.0, 0.0]  # sums through t-1 and through t-2
        self.previous_loss = None

    def next(self, loss: np.ndarray) -> float:
        """Step for the current loss; uses changes up to the previous iteration only."""
        denom = math.sqrt(self.totals[0]) + math.sqrt(self.totals[1])
        eta = OMD_MAX_STEP if denom == 0.0 else min(self.radius_sq / denom, OMD_MAX_STEP)
        change = 0.0 if self.previous_loss is None else float(np.max(np.abs(loss - self.previous_loss)))
        self.previous_loss = loss
        self.totals = [self.totals[0] + change**2, self.totals[0]]
        return eta


def _entropic_step(center: np.ndarray, loss: np.ndarray, eta: float,
                   smooth: SmoothParams) -> np.ndarray:
    """``argmin_p eta <p, loss> + KL(p || center)`` over the smooth polytope."""
    logits = np.log(np.maximum(center, 1e-300)) - eta * loss
    return kl_project(np.exp(logits - logits.max()), smooth)


def solve_omd(game: ZeroSumGame, smooth: SmoothParams, T: int) -> IterateTrace:
    """Optimistic mirror descent with entropic regularization for both players.

    Each iteration updates a secondary iterate with the current loss and then
    plays the step from that iterate using the same loss as the prediction.
    Step sizes adapt to the accumulated squared max-norm changes of the loss
    vectors, scaled by the polytope's KL radius and capped at 1/11.
    """
    _check(game, smooth, T)
    A, n = game.matrix, game.n
    radius_sq = max_kl_to_uniform(smooth)
    step_x, step_y = _AdaptiveStep(radius_sq), _AdaptiveStep(radius_sq)
    x = kl_project(np.full(n, 1.0 / n), smooth)
    y = x.copy()
    x_tilde, y_tilde = x.copy(), y.copy()
    xs, ys = np.empty((T, n)), np.empty((T, n))
    eta_x, eta_y = np.empty(T), np.empty(T)
    gaps = {}
    for t in range(1, T + 1):
        xs[t - 1], ys[t - 1] = x, y
        if _is_checkpoint(t, T):
            gaps[t] = duality_gap(game, xs[:t].mean(axis=0), ys[:t].mean(axis=0), smooth)
        loss_x, loss_y = A @ y, -(A.T @ x)
        eta_x[t - 1], eta_y[t - 1] = step_x.next(loss_x), step_y.next(loss_y)
        x_tilde = _entropic_step(x_tilde, loss_x, eta_x[t - 1], smooth)
        y_tilde = _entropic_step(y_tilde, loss_y, eta_y[t - 1], smooth)
        x = _entropic_step(x_tilde, loss_x, eta_x[t - 1], smooth)
        y = _entropic_step(y_tilde, loss_y, eta_y[t - 1], smooth)
    return IterateTrace(xs, ys, xs.mean(axis=0), ys.mean(axis=0), gaps, eta_x, eta_y)
