"""Temporal self-similarity matrices (TSMs).

A TSM holds the pairwise similarity between every pair of frames of one
video, an L x L symmetric matrix.  Event boundaries show up as a block
structure: high similarities inside a segment, low similarities across
segments, with a characteristic checkerboard pattern around each boundary
on the main diagonal.

Cosine mode is the default and the one the downstream scoring and loss
modules assume: entries are clamped to [-1, 1] and the diagonal is exactly
1.  Normalization happens inside :func:`build_tsm`, so raw and L2-normalized
inputs give the same matrix.  Negative-L2 mode (``-||x_i - x_j||_2``) is
provided for experimentation only.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import DomainError, FormatError
from .features import FeatureSequence

COSINE_EPS = 1e-12

TSM_MAGIC = b"UBTM"
TSM_VERSION = 1


@dataclass(frozen=True)
class Tsm:
    """An L x L self-similarity matrix with its similarity mode."""

    mode: str  # "cosine" | "neg_l2"
    values: np.ndarray  # (L, L) float64, exactly symmetric

    def __post_init__(self) -> None:
        v = np.asarray(self.values, dtype=np.float64)
        if v.ndim != 2 or v.shape[0] != v.shape[1]:
            raise DomainError(f"TSM must be square, got shape {v.shape}")
        if not np.all(np.isfinite(v)):
            raise DomainError("TSM contains non-finite values")
        if not np.array_equal(v, v.T):
            raise DomainError("TSM must be exactly symmetric")
        if self.mode not in ("cosine", "neg_l2"):
            raise DomainError(f"unknown TSM mode {self.mode!r}")
        object.__setattr__(self, "values", v)

    @property
    def num_frames(self) -> int:
        return self.values.shape[0]


def build_tsm(seq: FeatureSequence, mode: str = "cosine") -> Tsm:
    """Compute the self-similarity matrix of a feature sequence.

    Parameters
    ----------
    seq : FeatureSequence
        Frames as rows.
    mode : str
        ``cosine``: ``v[i,j] = (x_i . x_j) / max(||x_i|| * ||x_j||, 1e-12)``,
        clamped to [-1, 1], diagonal set to 1.  The epsilon keeps zero-norm
        rows defined (their off-diagonal similarities become ~0).
        ``neg_l2``: ``v[i,j] = -||x_i - x_j||_2`` with an exactly zero
        diagonal.

    Returns
    -------
    Tsm
        Exactly symmetric; each unordered pair is computed once and
        mirrored.
    """
    x = seq.data
    if mode == "cosine":
        gram = x @ x.T
        norms = np.sqrt(np.einsum("ij,ij->i", x, x))
        denom = np.maximum(np.outer(norms, norms), COSINE_EPS)
        v = gram / denom
        v = np.clip(v, -1.0, 1.0)
    elif mode == "neg_l2":
        sq = np.einsum("ij,ij->i", x, x)
        d2 = np.maximum(sq[:, None] + sq[None, :] - 2.0 * (x @ x.T), 0.0)
        v = -np.sqrt(d2)
    else:
        raise DomainError(f"unknown TSM mode {mode!r}")
    # mirror the upper triangle so symmetry holds bit-for-bit
    upper = np.triu(v, k=1)
    v = upper + upper.T
    if mode == "cosine":
        np.fill_diagonal(v, 1.0)
    return Tsm(mode=mode, values=v)


def render_tsm_pgm(tsm: Tsm, path: str | Path) -> None:
    """Write a cosine TSM as a binary PGM (P5) image.

    Pixel mapping: ``round((v + 1) / 2 * 255)`` clamped to [0, 255], so
    similarity -1 -> 0, 0 -> 128, +1 -> 255.
    """
    if tsm.mode != "cosine":
        raise DomainError("PGM rendering expects a cosine TSM")
    L = tsm.num_frames
    pixels = np.clip(np.rint((tsm.values + 1.0) * 127.5), 0, 255).astype(np.uint8)
    header = f"P5\n{L} {L}\n255\n".encode("ascii")
    Path(path).write_bytes(header + pixels.tobytes())


def save_tsm(tsm: Tsm, path: str | Path) -> None:
    """Raw dump: magic, version, L, then L*L little-endian float64 row-major."""
    L = tsm.num_frames
    mode_tag = 0 if tsm.mode == "cosine" else 1
    header = TSM_MAGIC + struct.pack("<III", TSM_VERSION, L, mode_tag)
    Path(path).write_bytes(header + np.ascontiguousarray(tsm.values, dtype="<f8").tobytes())


def load_tsm(path: str | Path) -> Tsm:
    path = Path(path)
    raw = path.read_bytes()
    if len(raw) < 16 or raw[:4] != TSM_MAGIC:
        raise FormatError(f"{path}: bad magic, not a TSM dump")
    version, L, mode_tag = struct.unpack("<III", raw[4:16])
    if version != TSM_VERSION:
        raise FormatError(f"{path}: unsupported version {version}")
    if len(raw) != 16 + 8 * L * L:
        raise FormatError(f"{path}: truncated TSM dump")
    values = np.frombuffer(raw, dtype="<f8", offset=16).reshape(L, L)
    return Tsm(mode="cosine" if mode_tag == 0 else "neg_l2", values=values.copy())
