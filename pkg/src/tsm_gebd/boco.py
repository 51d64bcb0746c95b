"""Boundary-contrastive (BoCo) loss over the TSM, with analytic gradients.

Given boundary labels, every frame pair inside a band ``|i - j| <= gap``
(the local-similarity prior) is positive when both frames fall in the same
segment and negative when the pair straddles a boundary (the
semantic-coherency prior).  The loss is the mean TSM value over negative
pairs minus the mean over positive pairs, so minimizing it pulls
within-segment similarities up and cross-segment similarities down.  For a
cosine TSM the loss lives in [-2, 2].

Because the loss reads the TSM directly, its gradient with respect to the
TSM is a constant two-valued matrix, and the chain rule through the cosine
normalization gives a closed-form gradient for the underlying features.
The boundary labels themselves (typically produced by the recursive parser)
receive no gradient.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import DomainError
from .tsm import COSINE_EPS, Tsm


@dataclass(frozen=True)
class BocoMask:
    """Positive/negative pair masks for one video.

    Both masks are symmetric boolean L x L matrices with a False diagonal
    and are disjoint by construction.
    """

    length: int
    gap: int
    positive: np.ndarray  # (L, L) bool
    negative: np.ndarray  # (L, L) bool

    @property
    def num_positive(self) -> int:
        return int(np.count_nonzero(self.positive))

    @property
    def num_negative(self) -> int:
        return int(np.count_nonzero(self.negative))


def segment_ids(length: int, boundaries: list[int] | tuple[int, ...]) -> np.ndarray:
    """Segment id per frame induced by a sorted boundary list."""
    return np.searchsorted(np.asarray(boundaries, dtype=np.int64),
                           np.arange(length), side="right")


def build_mask(length: int, boundaries: list[int] | tuple[int, ...], gap: int) -> BocoMask:
    """Build the pair masks for ``boundaries`` on an ``length``-frame video.

    Positive pairs: distinct frames at distance <= ``gap`` in the same
    segment.  Negative pairs: frames at distance <= ``gap`` in different
    segments.  ``gap == 0`` yields empty masks.
    """
    if length < 2:
        raise DomainError(f"mask length must be >= 2, got {length}")
    if gap < 0:
        raise DomainError("gap must be >= 0")
    bounds = list(boundaries)
    if any(a >= b for a, b in zip(bounds, bounds[1:])):
        raise DomainError("boundaries must be strictly increasing")
    if any(not 1 <= b <= length - 1 for b in bounds):
        raise DomainError(f"boundary outside [1, {length - 1}]")
    idx = np.arange(length)
    band = np.abs(idx[:, None] - idx[None, :]) <= gap
    np.fill_diagonal(band, False)
    seg = segment_ids(length, bounds)
    same = seg[:, None] == seg[None, :]
    return BocoMask(length=length, gap=gap,
                    positive=band & same, negative=band & ~same)


def boco_loss(tsm: Tsm, mask: BocoMask) -> float:
    """Mean similarity over negative pairs minus mean over positive pairs.

    An empty pair set contributes 0 as its mean, so a single-segment video
    (no negatives) still produces a usable cohesion objective.
    """
    if mask.length != tsm.num_frames:
        raise DomainError("mask and TSM frame counts differ")
    v = tsm.values
    n_pos = mask.num_positive
    n_neg = mask.num_negative
    pos_mean = float(v[mask.positive].sum() / n_pos) if n_pos else 0.0
    neg_mean = float(v[mask.negative].sum() / n_neg) if n_neg else 0.0
    return neg_mean - pos_mean


def boco_grad_tsm(tsm: Tsm, mask: BocoMask) -> np.ndarray:
    """Gradient of :func:`boco_loss` with respect to the TSM entries.

    ``+1/|N|`` on negative pairs, ``-1/|P|`` on positive pairs, zero
    elsewhere (and everywhere for an empty set).  Symmetric because the
    masks are.
    """
    if mask.length != tsm.num_frames:
        raise DomainError("mask and TSM frame counts differ")
    grad = np.zeros((mask.length, mask.length))
    if mask.num_negative:
        grad[mask.negative] = 1.0 / mask.num_negative
    if mask.num_positive:
        grad[mask.positive] = -1.0 / mask.num_positive
    return grad


def tsm_grad_to_features(features: np.ndarray, grad_tsm: np.ndarray,
                         eps: float = COSINE_EPS) -> np.ndarray:
    """Back-propagate a TSM gradient through cosine similarity.

    With ``z_i = x_i / max(||x_i||, eps)`` and ``tsm[i, j] = z_i . z_j``,

        d loss / d x_i
            = (I - z_i z_i^T) (sum_j 2 * grad_tsm[i, j] * z_j) / max(||x_i||, eps)

    The factor 2 collects the symmetric pair ``(j, i)``; the diagonal is
    excluded.  The projector ``I - z_i z_i^T`` is why scaling a feature row
    leaves the loss unchanged and scales its gradient inversely.

    Parameters
    ----------
    features : np.ndarray
        (L, D) matrix the cosine TSM was built from.
    grad_tsm : np.ndarray
        (L, L) symmetric loss gradient with respect to the TSM.

    Returns
    -------
    np.ndarray
        (L, D) gradient of the loss with respect to ``features``.
    """
    x = np.asarray(features, dtype=np.float64)
    g = np.asarray(grad_tsm, dtype=np.float64)
    if x.ndim != 2 or g.shape != (x.shape[0], x.shape[0]):
        raise DomainError(
            f"shape mismatch: features {x.shape} vs grad_tsm {g.shape}"
        )
    g = g.copy()
    np.fill_diagonal(g, 0.0)
    norms = np.sqrt(np.einsum("ij,ij->i", x, x))
    denom = np.maximum(norms, eps)
    z = x / denom[:, None]
    s = 2.0 * (g @ z)
    radial = np.einsum("ij,ij->i", z, s)
    return (s - radial[:, None] * z) / denom[:, None]


def save_mask_pgm(mask: BocoMask, path: str | Path) -> None:
    """Debug rendering: positive pairs white, negative black, rest gray."""
    img = np.full((mask.length, mask.length), 128, dtype=np.uint8)
    img[mask.negative] = 0
    img[mask.positive] = 255
    header = f"P5\n{mask.length} {mask.length}\n255\n".encode("ascii")
    Path(path).write_bytes(header + img.tobytes())
