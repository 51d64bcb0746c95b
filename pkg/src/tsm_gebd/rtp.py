"""Recursive TSM parsing and the two single-pass baseline parsers.

The recursive parser scores the diagonal of the current interval, picks one
split position, and recurses on both halves, sharing interior scores
through a :class:`~tsm_gebd.scoring.ScoreCache`.  Recursion stops when an
interval is shorter than ``min_parse_len`` or when the candidate scores are
too flat to contain a credible boundary (max minus mean below
``score_gap``).  Early recursion levels therefore pick up the strongest
boundaries and deeper levels the subtler ones, which is reported as a
per-boundary depth.

Split selection is either deterministic (``argmax``) or stochastic
(``sample``), where sampling draws from a softmax over the retained
top-fraction of candidates.  Sampling is meant for training-time label
diversity; inference defaults to argmax.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DomainError
from .scoring import BoundaryScores, ScoreCache, make_kernel, scores_for_interval
from .tsm import Tsm

#: Calibrated on the synthetic corpora: with margin ``min_segment=2`` and a
#: 7x7 kernel, the worst candidate spread a constant (single-segment)
#: interval can reach is (c - min_segment + 1)^2 / (2 c^2) = 4/18 ~ 0.222,
#: while a true boundary with cross-similarity under the synth prototype
#: cap (0.5) spreads by at least ~0.29.  score_gap = 0.24 separates the two.
DEFAULT_KERNEL_SIZE = 7
DEFAULT_SCORE_GAP = 0.24


@dataclass(frozen=True)
class RtpConfig:
    """Knobs for the recursive parser.

    ``min_segment`` is the protection margin: a split can never come closer
    than this to either end of its interval, so no sliver segments are
    produced (1 disables the protection).
    """

    kernel_size: int = DEFAULT_KERNEL_SIZE
    min_parse_len: int = 4
    score_gap: float = DEFAULT_SCORE_GAP
    top_fraction: float = 0.25
    temperature: float = 0.1
    min_segment: int = 2
    mode: str = "argmax"  # "argmax" | "sample"
    seed: int = 0
    zero_pad: bool = True

    def __post_init__(self) -> None:
        if self.kernel_size < 3 or self.kernel_size % 2 == 0:
            raise DomainError(f"kernel_size must be odd and >= 3, got {self.kernel_size}")
        if self.min_parse_len < 2:
            raise DomainError("min_parse_len must be >= 2")
        if not 0.0 < self.top_fraction <= 1.0:
            raise DomainError("top_fraction must be in (0, 1]")
        if self.temperature <= 0.0:
            raise DomainError("temperature must be positive")
        if self.min_segment < 1:
            raise DomainError("min_segment must be >= 1")
        if self.min_segment > self.min_parse_len:
            raise DomainError("min_segment must not exceed min_parse_len")
        if self.mode not in ("argmax", "sample"):
            raise DomainError(f"unknown selection mode {self.mode!r}")
        if self.seed < 0:
            raise DomainError("seed must be non-negative")


@dataclass(frozen=True)
class BoundaryPrediction:
    """Sorted boundary indices with the recursion depth that found each."""

    video_id: str
    boundaries: tuple[int, ...]
    depths: tuple[int, ...]

    def __post_init__(self) -> None:
        if len(self.boundaries) != len(self.depths):
            raise DomainError("boundaries and depths must align")
        if any(a >= b for a, b in zip(self.boundaries, self.boundaries[1:])):
            raise DomainError("boundaries must be strictly increasing")


def _sigmoid(x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def _select_split(scores: np.ndarray, candidates: np.ndarray, cfg: RtpConfig,
                  rng: np.random.Generator) -> int:
    """Pick one candidate: top-fraction retention, then argmax or sampling.

    Candidates are ordered by score descending with ties broken toward the
    higher index: an ideal sharp boundary scores identically at the boundary
    frame and the frame before it, and the higher of the two is the first
    frame of the new segment.
    """
    cand_scores = scores[candidates]
    order = np.lexsort((-candidates, -cand_scores))
    ordered = candidates[order]
    ordered_scores = cand_scores[order]
    n_keep = int(np.ceil(cfg.top_fraction * len(candidates)))
    retained = ordered[:n_keep]
    retained_scores = ordered_scores[:n_keep]
    if cfg.mode == "argmax":
        return int(retained[0])
    logits = retained_scores / cfg.temperature
    probs = np.exp(logits - logits.max())
    probs /= probs.sum()
    return int(rng.choice(retained, p=probs))


def rtp_detect(tsm: Tsm, cfg: RtpConfig, video_id: str = "",
               rng: np.random.Generator | None = None,
               cache: ScoreCache | None = None,
               trace: list | None = None) -> BoundaryPrediction:
    """Extract boundary indices from a TSM by recursive interval splitting.

    Parameters
    ----------
    tsm : Tsm
        Input self-similarity matrix.
    cfg : RtpConfig
        Stop thresholds, kernel size, selection mode, seed.
    rng : np.random.Generator, optional
        Random stream for ``sample`` mode; defaults to a fresh generator
        seeded with ``cfg.seed``.  One recursion consumes draws in
        left-child-then-right-child order, so equal seeds reproduce equal
        outputs.
    cache : ScoreCache, optional
        Score cache to use; a fresh one per call by default.  Concurrent
        detections must not share a cache.
    trace : list, optional
        Debug hook; every scored interval is appended as
        ``(start, end, scores_array)``.

    Returns
    -------
    BoundaryPrediction
        Sorted global boundary indices and the recursion depth (root = 1)
        at which each was emitted.
    """
    if rng is None:
        rng = np.random.default_rng(cfg.seed)
    if cache is None:
        cache = ScoreCache()
    kernel = make_kernel(cfg.kernel_size)
    found: list[tuple[int, int]] = []
    full_scores = None
    if not cfg.zero_pad:
        # ablation: local padding disabled.  Scores are computed once on the
        # whole matrix and shared by every recursion level, so interval-edge
        # positions keep the full-context response, whose window spills
        # across the split.  Nothing suppresses re-detections next to an
        # already chosen boundary, which is the failure mode padding exists
        # to prevent.
        full_scores = scores_for_interval(cache, tsm, 0, tsm.num_frames, kernel).values

    def parse(start: int, end: int, depth: int) -> None:
        M = end - start
        if M < cfg.min_parse_len:
            return
        if cfg.zero_pad:
            scored = scores_for_interval(cache, tsm, start, end, kernel)
        else:
            scored = BoundaryScores(start, end, full_scores[start:end])
        if trace is not None:
            trace.append((start, end, scored.values.copy()))
        m = cfg.min_segment
        candidates = np.arange(m, M - m + 1)
        if len(candidates) == 0:
            return
        cand_scores = scored.values[candidates]
        if cand_scores.max() - cand_scores.mean() < cfg.score_gap:
            return
        split = start + _select_split(scored.values, candidates, cfg, rng)
        found.append((split, depth))
        parse(start, split, depth + 1)
        parse(split, end, depth + 1)

    parse(0, tsm.num_frames, 1)
    found.sort()
    return BoundaryPrediction(
        video_id=video_id,
        boundaries=tuple(b for b, _ in found),
        depths=tuple(d for _, d in found),
    )


def detect_threshold(scores: BoundaryScores, theta: float,
                     min_segment: int = 2) -> list[int]:
    """Baseline parser: positions whose sigmoid score exceeds ``theta``.

    Only positions at least ``min_segment`` from the interval ends are
    eligible, mirroring the recursive parser's margin.
    """
    if min_segment < 1:
        raise DomainError("min_segment must be >= 1")
    v = scores.values
    sig = _sigmoid(v)
    M = len(v)
    return [scores.start + i
            for i in range(min_segment, M - min_segment + 1)
            if sig[i] > theta]


def detect_local_maxima(scores: BoundaryScores, theta: float,
                        min_segment: int = 2) -> list[int]:
    """Baseline parser: strict-left / non-strict-right local maxima.

    A plateau of equal maxima yields only its leftmost index.  Neighbours
    outside the score range are treated as -inf.
    """
    if min_segment < 1:
        raise DomainError("min_segment must be >= 1")
    v = scores.values
    sig = _sigmoid(v)
    M = len(v)
    out = []
    for i in range(min_segment, M - min_segment + 1):
        left = v[i - 1]
        right = v[i + 1] if i + 1 < M else -np.inf
        if v[i] > left and v[i] >= right and sig[i] > theta:
            out.append(scores.start + i)
    return out
