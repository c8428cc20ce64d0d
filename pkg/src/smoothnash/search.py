"""Vectorized scan over products of candidate strategies.

Both the full-information enumeration solver and the query-based solver test
every profile in a product of per-player candidate sets. The scan evaluates
gains for blocks of profiles with ``einsum`` and yields passing profiles in
lexicographic order (player 0's candidate index varies slowest).
"""

from __future__ import annotations

import functools
import math
import string
from concurrent.futures import ThreadPoolExecutor
from typing import Iterator, Sequence, Tuple

import numpy as np

from smoothnash.core import SmoothParams, top_smooth_values

BLOCK_ELEMENTS = 4_000_000


@functools.lru_cache(maxsize=64)
def _compositions(n: int, k: int) -> np.ndarray:
    if n == 1:
        return np.array([[k]], dtype=np.int64)
    blocks = []
    for first in range(k, -1, -1):
        rest = _compositions(n - 1, k - first)
        blocks.append(np.hstack([np.full((rest.shape[0], 1), first, dtype=np.int64), rest]))
    out = np.vstack(blocks)
    out.setflags(write=False)
    return out


def k_uniform_counts(n: int, k: int) -> np.ndarray:
    """All length-n non-negative integer vectors summing to k, one per row.

    Rows are in lexicographically decreasing order, e.g. ``(2,0), (1,1), (0,2)``.
    """
    if n < 1 or k < 0:
        raise ValueError("need n >= 1 and k >= 0")
    return _compositions(n, k)


def count_k_uniform(n: int, k: int) -> int:
    return math.comb(n + k - 1, k)


def _einsum_contract(tensor: np.ndarray, mats: dict, keep_axis: int | None) -> np.ndarray:
    """Contracts tensor axis i with ``mats[i]`` (shape P_i x d_i) for every i in mats.

    Output axes are the new candidate axes in player order, followed by
    ``keep_axis`` if given.
    """
    letters = string.ascii_lowercase
    upper = string.ascii_uppercase
    m = tensor.ndim
    operands = [tensor]
    subs = [letters[:m]]
    out = ""
    for i in range(m):
        if i in mats:
            operands.append(mats[i])
            subs.append(upper[i] + letters[i])
            out += upper[i]
    if keep_axis is not None:
        out += letters[keep_axis]
    return np.einsum(",".join(subs) + "->" + out, *operands, optimize=True)


def scan_profiles(deviation_tensors: Sequence[np.ndarray],
                  payoff_tensors: Sequence[np.ndarray],
                  candidates: Sequence[np.ndarray],
                  smooth: SmoothParams,
                  threshold: float,
                  threads: int = 1) -> Iterator[Tuple[Tuple[int, ...], np.ndarray]]:
    """Yields every candidate profile whose gains are all at most ``threshold``.

    Args:
      deviation_tensors: Per player j, a tensor whose axis j indexes deviation
        actions (``smooth.n`` of them) and whose other axes index the support
        of the corresponding candidate strategies.
      payoff_tensors: Per player j, payoffs on the product of supports.
      candidates: Per player, a matrix with one candidate strategy per row,
        expressed over that player's support.
      smooth: Smoothness over the deviation axis.
      threshold: Largest admissible gain.
      threads: Number of worker threads evaluating blocks.

    Yields:
      ``(indices, gains)`` with one candidate index per player, in
      lexicographic order.
    """
    m = len(candidates)
    sizes = [c.shape[0] for c in candidates]
    rest = int(np.prod(sizes[1:])) if m > 1 else 1
    dev_size = smooth.n
    block = max(1, BLOCK_ELEMENTS // max(1, rest * dev_size))

    # Player 0's best deviation does not depend on its own candidate.
    others0 = {i: candidates[i] for i in range(1, m)}
    dev0 = top_smooth_values(_einsum_contract(deviation_tensors[0], others0, 0), smooth, axis=-1)

    def evaluate(start: int):
        rows = {0: candidates[0][start:start + block]}
        gains = []
        for j in range(m):
            mats = {**rows, **{i: candidates[i] for i in range(1, m)}}
            current = _einsum_contract(payoff_tensors[j], mats, None)
            if j == 0:
                best = dev0[None, ...]
            else:
                dev_mats = {i: v for i, v in mats.items() if i != j}
                best = top_smooth_values(
                    _einsum_contract(deviation_tensors[j], dev_mats, j), smooth, axis=-1)
                best = np.expand_dims(best, axis=j)
            gains.append(best - current)
        gains = np.stack(np.broadcast_arrays(*gains))
        hits = np.flatnonzero(np.all(gains <= threshold, axis=0))
        return start, hits, gains.reshape(m, -1)[:, hits]

    starts = range(0, sizes[0], block)
    shape = (sizes[0],) + tuple(sizes[1:])
    if threads <= 1:
        results = map(evaluate, starts)
    else:
        pool = ThreadPoolExecutor(max_workers=threads)
        results = pool.map(evaluate, starts)
    try:
        for start, hits, gains in results:
            for pos, flat in enumerate(hits):
                idx = np.unravel_index(flat, (min(block, sizes[0] - start),) + shape[1:])
                yield (start + int(idx[0]),) + tuple(int(i) for i in idx[1:]), gains[:, pos]
    finally:
        if threads > 1:
            pool.shutdown(wait=False, cancel_futures=True)
