"""Synthetic piecewise-stationary feature corpora with known boundaries.

Each video is a sequence of segments; every segment has a unit prototype
vector and frame ``t`` of segment ``s`` is

    x_t = p_s + noise_sigma * eta_t + distractor_weight * (B @ w_t)

where ``eta_t`` is i.i.d. standard normal, ``B`` is a corpus-wide
orthonormal distractor basis, and ``w_t`` is a stationary AR(1) walk that
drifts smoothly across segment boundaries.  The distractor mimics the
object-centric content of pretrained features: it is shared by the whole
corpus, varies within segments, and leaks similarity across boundaries, so
it blurs the raw TSM while remaining linearly removable by a trained
encoder.  An optional fixed invertible mixing matrix hides the coordinate
alignment between prototypes and distractor.

Adjacent prototypes are resampled until their cosine stays below 0.5, so
with zero noise and zero distractor weight every boundary is detectable in
principle: the TSM is exactly block-structured with within-block similarity
1 and cross-block similarity below the cap.

All randomness derives from ``(seed, stream, video_index)`` tuples, so
corpora are reproducible and videos can be generated independently in any
order.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import DomainError
from .features import (
    BoundaryAnnotation,
    DatasetManifest,
    FeatureSequence,
    save_annotations,
    save_features,
    save_manifest,
)

_STREAM_BASIS = 0
_STREAM_MIXING = 1
_STREAM_VIDEO = 2

#: AR(1) coefficient of the distractor walk.  Close to 1 so the walk is a
#: slow drift: it shifts whole-video similarity structure (blurring the raw
#: TSM) without offering the contrastive loss a short-range correlation
#: shortcut, the way object-centric content behaves in pretrained features.
_DISTRACTOR_SMOOTHNESS = 0.98

#: Adjacent prototypes are resampled until their cosine is below this cap,
#: so every boundary has a guaranteed contrast.  0.2 keeps even the
#: noise-damped boundary response clear of both the parser's score_gap and
#: the constant-block edge spread (~0.22) that score_gap must reject.
_PROTOTYPE_COSINE_CAP = 0.2


@dataclass(frozen=True)
class SynthConfig:
    num_videos: int = 100
    length_range: tuple[int, int] = (34, 96)
    segments_range: tuple[int, int] = (5, 8)
    min_segment_len: int = 4
    dim: int = 10
    noise_sigma: float = 0.0
    distractor_weight: float = 0.0
    distractor_rank: int = 4
    mixing: bool = False
    annotators: int = 1
    seed: int = 0

    def __post_init__(self) -> None:
        if self.num_videos < 1:
            raise DomainError("num_videos must be >= 1")
        lo, hi = self.length_range
        if not 2 <= lo <= hi:
            raise DomainError(f"bad length_range {self.length_range}")
        slo, shi = self.segments_range
        if not 1 <= slo <= shi:
            raise DomainError(f"bad segments_range {self.segments_range}")
        if self.min_segment_len < 1:
            raise DomainError("min_segment_len must be >= 1")
        if self.min_segment_len * shi > lo:
            raise DomainError(
                f"infeasible: {shi} segments of >= {self.min_segment_len} frames "
                f"cannot fit in {lo} frames"
            )
        if self.noise_sigma < 0 or self.distractor_weight < 0:
            raise DomainError("noise_sigma and distractor_weight must be >= 0")
        if self.distractor_rank < 1 or self.dim < self.distractor_rank + 1:
            raise DomainError("need dim >= distractor_rank + 1")
        if self.annotators < 1:
            raise DomainError("annotators must be >= 1")


@dataclass(frozen=True)
class SynthVideo:
    features: FeatureSequence
    annotation: BoundaryAnnotation
    prototypes: np.ndarray  # (num_segments, dim)


def _unit(v: np.ndarray) -> np.ndarray:
    return v / np.linalg.norm(v)


def distractor_basis(cfg: SynthConfig) -> np.ndarray:
    """Corpus-wide orthonormal (dim, rank) basis of the nuisance subspace."""
    rng = np.random.default_rng([cfg.seed, _STREAM_BASIS])
    raw = rng.standard_normal((cfg.dim, cfg.dim))
    q, _ = np.linalg.qr(raw)
    return q[:, : cfg.distractor_rank]


def mixing_matrix(cfg: SynthConfig) -> np.ndarray:
    """Fixed invertible (dim, dim) mixing with condition number <= 4."""
    rng = np.random.default_rng([cfg.seed, _STREAM_MIXING])
    q1, _ = np.linalg.qr(rng.standard_normal((cfg.dim, cfg.dim)))
    q2, _ = np.linalg.qr(rng.standard_normal((cfg.dim, cfg.dim)))
    scales = rng.uniform(0.5, 2.0, size=cfg.dim)
    return q1 @ np.diag(scales) @ q2


def generate_video(cfg: SynthConfig, video_index: int) -> SynthVideo:
    """Generate one video; deterministic in ``(cfg.seed, video_index)``."""
    if not 0 <= video_index < cfg.num_videos:
        raise DomainError(f"video_index {video_index} outside [0, {cfg.num_videos})")
    rng = np.random.default_rng([cfg.seed, _STREAM_VIDEO, video_index])
    lo, hi = cfg.length_range
    length = int(rng.integers(lo, hi + 1))
    slo, shi = cfg.segments_range
    n_seg = int(rng.integers(slo, shi + 1))
    extra = length - n_seg * cfg.min_segment_len
    if extra < 0:
        raise DomainError("segment layout infeasible for drawn length")
    seg_lens = cfg.min_segment_len + rng.multinomial(extra, [1.0 / n_seg] * n_seg)
    boundaries = np.cumsum(seg_lens)[:-1].tolist()

    prototypes = np.empty((n_seg, cfg.dim))
    prototypes[0] = _unit(rng.standard_normal(cfg.dim))
    for s in range(1, n_seg):
        for _ in range(1000):
            cand = _unit(rng.standard_normal(cfg.dim))
            if float(cand @ prototypes[s - 1]) < _PROTOTYPE_COSINE_CAP:
                prototypes[s] = cand
                break
        else:
            raise DomainError("could not sample a sufficiently novel prototype")

    seg_of_frame = np.repeat(np.arange(n_seg), seg_lens)
    x = prototypes[seg_of_frame].copy()
    if cfg.noise_sigma > 0:
        x += cfg.noise_sigma * rng.standard_normal((length, cfg.dim))
    if cfg.distractor_weight > 0:
        basis = distractor_basis(cfg)
        rho = _DISTRACTOR_SMOOTHNESS
        w = np.empty((length, cfg.distractor_rank))
        w[0] = rng.standard_normal(cfg.distractor_rank)
        steps = rng.standard_normal((length - 1, cfg.distractor_rank))
        for t in range(1, length):
            w[t] = rho * w[t - 1] + np.sqrt(1.0 - rho * rho) * steps[t - 1]
        x += cfg.distractor_weight * (w @ basis.T)
    if cfg.mixing:
        x = x @ mixing_matrix(cfg).T
    # quantize to float32 so binary feature round-trips are bit-exact
    x = x.astype(np.float32).astype(np.float64)

    video_id = f"synth{video_index:04d}"
    annot_lists = [list(boundaries)]
    for _ in range(cfg.annotators - 1):
        jittered = sorted({
            int(np.clip(b + rng.choice([-1, 1]), 1, length - 1)) for b in boundaries
        })
        annot_lists.append(jittered)
    annotation = BoundaryAnnotation(
        video_id=video_id,
        length=length,
        annotators=tuple(tuple(a) for a in annot_lists),
    )
    return SynthVideo(
        features=FeatureSequence(video_id, x),
        annotation=annotation,
        prototypes=prototypes,
    )


def generate_corpus(cfg: SynthConfig) -> list[SynthVideo]:
    """All videos of the corpus, in index order."""
    return [generate_video(cfg, i) for i in range(cfg.num_videos)]


def generate_dataset(cfg: SynthConfig, out_dir: str | Path,
                     videos: list[SynthVideo] | None = None) -> DatasetManifest:
    """Write the corpus to disk: feature files, annotations, manifest.

    Layout: ``<out_dir>/features/<video_id>.ubfv`` (binary),
    ``<out_dir>/annotations.json``, ``<out_dir>/manifest.json`` with
    feature paths relative to the manifest.  Reloading reproduces the
    in-memory corpus exactly.
    """
    out_dir = Path(out_dir)
    feat_dir = out_dir / "features"
    feat_dir.mkdir(parents=True, exist_ok=True)
    if videos is None:
        videos = generate_corpus(cfg)
    entries: dict[str, tuple[Path, bool]] = {}
    annotations: dict[str, BoundaryAnnotation] = {}
    for video in videos:
        vid = video.features.video_id
        rel = Path("features") / f"{vid}.ubfv"
        save_features(video.features, out_dir / rel, format="binary")
        entries[vid] = (rel, True)
        annotations[vid] = video.annotation
    save_annotations(annotations, out_dir / "annotations.json")
    manifest = DatasetManifest(entries)
    save_manifest(manifest, out_dir / "manifest.json")
    return manifest
