"""Feature sequences, boundary annotations, and dataset manifests.

A feature sequence is the per-frame representation of one video: an L x D
matrix of finite reals, L >= 2 frames, D >= 1 dimensions.  Boundary
annotations list event boundary indices per annotator; index ``b`` marks the
split between frames ``b-1`` and ``b``, i.e. ``b`` is the first frame of the
new segment, so valid boundaries live in ``[1, L-1]``.

On-disk formats
---------------
binary features : magic ``UBFV``, then little-endian uint32 version (=1),
                  L, D, followed by L*D little-endian IEEE-754 float32
                  values, row-major (frame-major).
csv features    : one frame per line, D comma-separated decimal reals,
                  '.' decimal separator, no header.
annotations     : UTF-8 JSON object mapping video_id ->
                  {"length": int, "annotators": [[int, ...], ...]}.
manifest        : UTF-8 JSON object mapping video_id ->
                  {"features": path, "annotated": bool}; paths are resolved
                  relative to the manifest file.

Values are held as float64 in memory; the binary format stores float32, so
binary round-trips are bit-exact for sequences whose values are float32
representable (everything produced by this package is).
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import DomainError, FormatError

FEATURE_MAGIC = b"UBFV"
FEATURE_VERSION = 1


@dataclass(frozen=True)
class FeatureSequence:
    """Per-frame features for one video."""

    video_id: str
    data: np.ndarray  # (L, D) float64

    def __post_init__(self) -> None:
        data = np.asarray(self.data, dtype=np.float64)
        if data.ndim != 2:
            raise DomainError(f"feature data must be 2-D, got shape {data.shape}")
        if data.shape[0] < 2:
            raise DomainError(f"need at least 2 frames, got {data.shape[0]}")
        if data.shape[1] < 1:
            raise DomainError("need at least 1 feature dimension")
        if not np.all(np.isfinite(data)):
            raise DomainError(f"non-finite value in features of {self.video_id!r}")
        object.__setattr__(self, "data", data)

    @property
    def num_frames(self) -> int:
        return self.data.shape[0]

    @property
    def dim(self) -> int:
        return self.data.shape[1]

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, FeatureSequence):
            return NotImplemented
        return self.video_id == other.video_id and np.array_equal(self.data, other.data)


@dataclass(frozen=True)
class BoundaryAnnotation:
    """Boundary index lists for one video, one list per annotator."""

    video_id: str
    length: int
    annotators: tuple[tuple[int, ...], ...]

    def __post_init__(self) -> None:
        if self.length < 2:
            raise DomainError(f"annotation length must be >= 2, got {self.length}")
        if len(self.annotators) == 0:
            raise DomainError(f"annotation for {self.video_id!r} has no annotators")
        clean = []
        for k, bounds in enumerate(self.annotators):
            bounds = tuple(int(b) for b in bounds)
            for b in bounds:
                if not 1 <= b <= self.length - 1:
                    raise DomainError(
                        f"{self.video_id!r} annotator {k}: boundary {b} outside "
                        f"[1, {self.length - 1}]"
                    )
            if any(a >= b for a, b in zip(bounds, bounds[1:])):
                raise DomainError(
                    f"{self.video_id!r} annotator {k}: boundaries not strictly increasing"
                )
            clean.append(bounds)
        object.__setattr__(self, "annotators", tuple(clean))


@dataclass
class DatasetManifest:
    """Maps video ids to feature files and an annotation presence flag."""

    entries: dict[str, tuple[Path, bool]] = field(default_factory=dict)

    def video_ids(self) -> list[str]:
        return sorted(self.entries)


def save_features(seq: FeatureSequence, path: str | Path, format: str = "binary") -> None:
    """Write a feature sequence to ``path`` in ``binary`` or ``csv`` format."""
    path = Path(path)
    if format == "binary":
        header = FEATURE_MAGIC + struct.pack(
            "<III", FEATURE_VERSION, seq.num_frames, seq.dim
        )
        payload = np.ascontiguousarray(seq.data, dtype="<f4").tobytes()
        path.write_bytes(header + payload)
    elif format == "csv":
        # repr is the shortest exact decimal form, so csv round-trips are
        # lossless (the contract only promises 9 significant digits)
        lines = [",".join(repr(float(v)) for v in row) for row in seq.data]
        path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    else:
        raise DomainError(f"unknown feature format {format!r}")


def load_features(path: str | Path, format: str = "binary", video_id: str | None = None) -> FeatureSequence:
    """Read a feature sequence written by :func:`save_features`.

    Binary loads are bit-exact; csv loads reproduce values to 9 significant
    digits.  Raises :class:`FormatError` for malformed files and
    :class:`DomainError` for files whose contents violate the sequence
    invariants (L < 2, D < 1, non-finite entries).
    """
    path = Path(path)
    if video_id is None:
        video_id = path.stem
    if format == "binary":
        raw = path.read_bytes()
        if len(raw) < 16 or raw[:4] != FEATURE_MAGIC:
            raise FormatError(f"{path}: bad magic, not a feature file")
        version, L, D = struct.unpack("<III", raw[4:16])
        if version != FEATURE_VERSION:
            raise FormatError(f"{path}: unsupported version {version}")
        expected = 16 + 4 * L * D
        if len(raw) != expected:
            raise FormatError(f"{path}: expected {expected} bytes, found {len(raw)}")
        if L < 2 or D < 1:
            raise DomainError(f"{path}: invalid dimensions L={L}, D={D}")
        data = np.frombuffer(raw, dtype="<f4", offset=16).reshape(L, D)
        return FeatureSequence(video_id, data.astype(np.float64))
    if format == "csv":
        rows = []
        width = None
        for lineno, line in enumerate(path.read_text(encoding="utf-8").splitlines(), 1):
            if not line.strip():
                continue
            try:
                row = [float(tok) for tok in line.split(",")]
            except ValueError as exc:
                raise FormatError(f"{path}:{lineno}: {exc}") from exc
            if width is None:
                width = len(row)
            elif len(row) != width:
                raise FormatError(f"{path}:{lineno}: ragged row")
            rows.append(row)
        if not rows:
            raise FormatError(f"{path}: empty csv feature file")
        return FeatureSequence(video_id, np.array(rows, dtype=np.float64))
    raise DomainError(f"unknown feature format {format!r}")


def save_annotations(annotations: dict[str, BoundaryAnnotation], path: str | Path) -> None:
    payload = {
        vid: {"length": ann.length, "annotators": [list(a) for a in ann.annotators]}
        for vid, ann in sorted(annotations.items())
    }
    Path(path).write_text(
        json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )


def load_annotations(path: str | Path) -> dict[str, BoundaryAnnotation]:
    """Parse an annotation JSON file into validated annotations."""
    path = Path(path)
    try:
        payload = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise FormatError(f"{path}: invalid JSON: {exc}") from exc
    if not isinstance(payload, dict):
        raise FormatError(f"{path}: top level must be an object")
    out: dict[str, BoundaryAnnotation] = {}
    for vid, entry in payload.items():
        if not isinstance(entry, dict) or "length" not in entry or "annotators" not in entry:
            raise FormatError(f"{path}: entry {vid!r} must have 'length' and 'annotators'")
        out[vid] = BoundaryAnnotation(
            video_id=vid,
            length=int(entry["length"]),
            annotators=tuple(tuple(int(b) for b in a) for a in entry["annotators"]),
        )
    return out


def save_manifest(manifest: DatasetManifest, path: str | Path) -> None:
    path = Path(path)
    payload = {
        vid: {"features": str(feat), "annotated": bool(flag)}
        for vid, (feat, flag) in sorted(manifest.entries.items())
    }
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def load_manifest(path: str | Path) -> DatasetManifest:
    """Load a manifest and check that every referenced feature file exists."""
    path = Path(path)
    try:
        payload = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise FormatError(f"{path}: invalid JSON: {exc}") from exc
    if not isinstance(payload, dict):
        raise FormatError(f"{path}: top level must be an object")
    entries: dict[str, tuple[Path, bool]] = {}
    for vid, entry in payload.items():
        if not isinstance(entry, dict) or "features" not in entry:
            raise FormatError(f"{path}: entry {vid!r} must have a 'features' path")
        feat = Path(entry["features"])
        if not feat.is_absolute():
            feat = path.parent / feat
        if not feat.exists():
            raise DomainError(f"{path}: feature file {feat} for {vid!r} does not exist")
        entries[vid] = (feat, bool(entry.get("annotated", False)))
    return DatasetManifest(entries)
