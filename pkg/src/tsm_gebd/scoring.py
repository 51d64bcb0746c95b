"""Contrastive-kernel boundary scoring along the TSM diagonal.

The contrastive kernel is a fixed K x K zero-sum pattern that matches the
checkerboard a boundary leaves on the TSM: the two within-segment quadrants
(upper-left, lower-right) carry weight ``+1/(2c^2)`` and the two
cross-segment quadrants ``-1/(2c^2)``, where ``c = (K-1)/2``.  The center
row and column are zero because the frame at a candidate boundary belongs
to neither side.  With these weights the response at diagonal position
``(i, i)`` is the mean similarity within the adjacent half-windows minus
the mean similarity across them, so scores of a cosine TSM live in [-2, 2].

Scoring an interval ``[s, e)`` conceptually zero-pads the sub-matrix
``tsm[s:e, s:e]`` by ``c`` on all sides and convolves along the diagonal.
Zero is the neutral cosine similarity, so padding damps the response near
interval corners, which suppresses duplicate detections next to an already
chosen split.

Positions at least ``c`` away from both interval ends see no padding at
all; their scores equal the scores computed on the full matrix.  A
:class:`ScoreCache` keyed by global frame index shares exactly those values
across the many intervals a recursive parse visits, while padding-affected
edge positions are recomputed per interval and never cached.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .errors import DomainError
from .tsm import Tsm


@dataclass(frozen=True)
class ContrastiveKernel:
    """Zero-sum boundary-pattern kernel of odd size K >= 3."""

    size: int
    center: int
    weights: np.ndarray  # (K, K) float64


def make_kernel(size: int) -> ContrastiveKernel:
    """Materialize the contrastive kernel for an odd ``size`` >= 3.

    The weight magnitude ``1/(2c^2)`` makes the convolution response a
    difference of quadrant means.  The positive and negative cells have the
    same float magnitude and equal counts, so the exact (rational) sum of
    all weights is zero.
    """
    if size < 3 or size % 2 == 0:
        raise DomainError(f"kernel size must be an odd integer >= 3, got {size}")
    c = (size - 1) // 2
    side = np.sign(np.arange(size) - c).astype(np.float64)
    weights = np.outer(side, side) / (2.0 * c * c)
    return ContrastiveKernel(size=size, center=c, weights=weights)


@dataclass(frozen=True)
class BoundaryScores:
    """Per-frame boundariness over ``[start, end)`` in global frame indices."""

    start: int
    end: int
    values: np.ndarray  # (end - start,) float64

    def __len__(self) -> int:
        return self.end - self.start


def _check_interval(tsm: Tsm, start: int, end: int) -> None:
    if not 0 <= start < end <= tsm.num_frames:
        raise DomainError(
            f"invalid interval [{start}, {end}) for a {tsm.num_frames}-frame TSM"
        )


def _padded_diag_scores(values: np.ndarray, start: int, end: int,
                        kernel: ContrastiveKernel) -> np.ndarray:
    """Diagonal convolution of the zero-padded sub-matrix, all positions."""
    c = kernel.center
    sub = values[start:end, start:end]
    padded = np.pad(sub, c)
    windows = sliding_window_view(padded, (kernel.size, kernel.size))
    # windows[i, i] is the K x K patch centered on diagonal position i
    return np.einsum("iijk,jk->i", windows, kernel.weights)


def boundary_scores(tsm: Tsm, start: int, end: int,
                    kernel: ContrastiveKernel) -> BoundaryScores:
    """Score every diagonal position of ``tsm[start:end, start:end)``.

    The sub-matrix is zero-padded by the kernel half-width on all sides and
    convolved with the kernel along its diagonal; ``values[i - start]`` is
    the boundariness of global frame ``i``.
    """
    _check_interval(tsm, start, end)
    return BoundaryScores(start, end, _padded_diag_scores(tsm.values, start, end, kernel))


class ScoreCache:
    """Shares full-context diagonal scores across interval scorings.

    A cached score is valid for frame ``i`` inside ``[s, e)`` iff
    ``i - s >= c`` and ``e - 1 - i >= c``: such positions are unaffected by
    that interval's padding, and their windows lie strictly inside the
    interval, so the locally computed value coincides with the full-matrix
    one.  Padding-affected edge scores are recomputed per interval and never
    written back, so recursion levels cannot contaminate each other.
    """

    def __init__(self) -> None:
        self._scores: dict[int, float] = {}

    def __len__(self) -> int:
        return len(self._scores)

    def __contains__(self, index: int) -> bool:
        return index in self._scores

    def get(self, index: int) -> float:
        return self._scores[index]

    def put(self, index: int, score: float) -> None:
        self._scores[index] = score


def scores_for_interval(cache: ScoreCache, tsm: Tsm, start: int, end: int,
                        kernel: ContrastiveKernel) -> BoundaryScores:
    """Like :func:`boundary_scores`, but served from ``cache`` where valid.

    Output is elementwise equal to :func:`boundary_scores` on the same
    interval (up to summation-order noise well below 1e-12).
    """
    _check_interval(tsm, start, end)
    c = kernel.center
    M = end - start
    out = np.empty(M, dtype=np.float64)
    local = np.arange(M)
    valid = (local >= c) & (M - 1 - local >= c)
    missing = [i for i in range(M) if not (valid[i] and (start + i) in cache)]
    if missing:
        computed = _padded_diag_scores(tsm.values, start, end, kernel)
    for i in range(M):
        g = start + i
        if valid[i] and g in cache:
            out[i] = cache.get(g)
        else:
            out[i] = computed[i]
            if valid[i]:
                cache.put(g, float(computed[i]))
    return BoundaryScores(start, end, out)
