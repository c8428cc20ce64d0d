"""Logit (softmax) responses and their comparison with smooth best responses."""

from __future__ import annotations

from typing import List, Tuple

import numpy as np

from smoothnash.core import TOL, Game, SmoothParams, deviation_payoffs, top_smooth_average
from smoothnash.errors import InvalidArgumentError


def logit_response(u, lam: float) -> np.ndarray:
    """Softmax of ``lam * u``; ``lam = 0`` gives the uniform distribution."""
    u = np.asarray(u, dtype=float)
    if lam < 0 or not np.all(np.isfinite(u)):
        raise InvalidArgumentError("need finite u and lam >= 0")
    z = lam * (u - u.max())
    w = np.exp(z)
    return w / w.sum()


def logit_vs_smooth(u, lam: float, smooth: SmoothParams) -> Tuple[float, float, bool]:
    """Compares the logit response's value with the best smooth response's value.

    Returns:
      ``(logit_value, smooth_value, logit_value <= smooth_value)``, the
      comparison allowing ``TOL`` of rounding (the support size ``n * sigma``
      is snapped to an integer within that tolerance).
    """
    u = np.asarray(u, dtype=float)
    logit_value = float(logit_response(u, lam) @ u)
    smooth_value, _ = top_smooth_average(u, smooth)
    return logit_value, smooth_value, logit_value <= smooth_value + TOL


def logit_fixed_point(game: Game, lam: float, damping: float = 0.5, max_iter: int = 1000,
                      tol: float = 1e-10) -> Tuple[List[np.ndarray], float]:
    """Damped iteration towards a logit equilibrium.

    Every player simultaneously moves a ``damping`` fraction of the way to its
    logit response against the others. Stops once the largest deviation from
    the responses is at most ``tol``.

    Returns:
      The last profile and its residual ``max_j ||x_j - logit(payoffs_j)||_inf``.
    """
    if not 0 < damping <= 1:
        raise InvalidArgumentError("damping must lie in (0, 1]")
    m, n = game.num_players, game.num_actions
    profile = [np.full(n, 1.0 / n) for _ in range(m)]

    def responses(p):
        return [logit_response(deviation_payoffs(game, p, j), lam) for j in range(m)]

    residual = np.inf
    for _ in range(max_iter):
        targets = responses(profile)
        profile = [(1 - damping) * x + damping * r for x, r in zip(profile, targets)]
        residual = max(float(np.max(np.abs(x - r))) for x, r in zip(profile, responses(profile)))
        if residual <= tol:
            break
    return profile, residual
