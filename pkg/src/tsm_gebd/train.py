"""Trainable encoder and the pseudo-label / ground-truth training loops.

The encoder is deliberately small (a linear map, or one tanh hidden layer)
so every gradient is analytic: the training mechanics under test -- the
pseudo-label loop and the gradient flow from the boundary-contrastive loss
through the cosine TSM -- do not depend on encoder capacity, and tests can
check the whole chain against finite differences without an autodiff
dependency.

The unsupervised loop regenerates pseudo-labels every batch by running the
recursive parser (sample mode) on the current encoder's TSMs, with no
gradient through that pass, then takes one optimizer step on the
boundary-contrastive loss under those labels.  The supervised-lite variant
is the same loop with ground-truth labels, drawing one annotator per video
per epoch.  All shuffling, sampling, and initialization derive from the run
seed, so a run is reproducible bit for bit.
"""

from __future__ import annotations

import csv
import math
import struct
import time
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .boco import boco_grad_tsm, boco_loss, build_mask, tsm_grad_to_features
from .errors import DomainError, FormatError
from .features import BoundaryAnnotation, FeatureSequence
from .evaluate import f1_at
from .rtp import RtpConfig, rtp_detect
from .tsm import build_tsm

CHECKPOINT_MAGIC = b"UBCK"
CHECKPOINT_VERSION = 1

_VARIANT_TAGS = {"linear": 0, "mlp1": 1}

# rng stream tags; every random draw in a run derives from
# (seed, stream, epoch, video_index) so ordering and parallelism cannot
# change the outcome
_STREAM_INIT = 10
_STREAM_SHUFFLE = 11
_STREAM_PSEUDO = 12
_STREAM_ANNOTATOR = 13


@dataclass
class Encoder:
    """Per-frame feature encoder: ``linear`` or one-hidden-layer ``mlp1``.

    linear : y = W1 x + b              W1: (d_out, d_in)
    mlp1   : y = W1 tanh(Wh x) + b     Wh: (hidden, d_in), W1: (d_out, hidden)
    """

    variant: str
    w1: np.ndarray
    bias: np.ndarray
    wh: np.ndarray | None = None

    def __post_init__(self) -> None:
        if self.variant not in _VARIANT_TAGS:
            raise DomainError(f"unknown encoder variant {self.variant!r}")
        if (self.wh is None) != (self.variant == "linear"):
            raise DomainError("hidden weights present iff variant is mlp1")
        if self.d_out < 2:
            raise DomainError("encoder output dimension must be >= 2")
        for p in self.parameters():
            if not np.all(np.isfinite(p)):
                raise DomainError("encoder parameters must be finite")

    @property
    def d_in(self) -> int:
        return self.w1.shape[1] if self.wh is None else self.wh.shape[1]

    @property
    def d_out(self) -> int:
        return self.w1.shape[0]

    @property
    def hidden(self) -> int:
        return 0 if self.wh is None else self.wh.shape[0]

    def parameters(self) -> list[np.ndarray]:
        """Parameter tensors in declared (checkpoint) order."""
        if self.wh is None:
            return [self.w1, self.bias]
        return [self.wh, self.w1, self.bias]

    def copy(self) -> "Encoder":
        return Encoder(
            variant=self.variant,
            w1=self.w1.copy(),
            bias=self.bias.copy(),
            wh=None if self.wh is None else self.wh.copy(),
        )


def _glorot(rng: np.random.Generator, fan_out: int, fan_in: int) -> np.ndarray:
    limit = math.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=(fan_out, fan_in))


def init_encoder(variant: str, d_in: int, d_out: int, hidden: int = 32,
                 seed: int = 0) -> Encoder:
    """Seeded uniform +-sqrt(6/(fan_in+fan_out)) init, zero bias."""
    rng = np.random.default_rng([seed, _STREAM_INIT])
    if variant == "linear":
        return Encoder(variant, w1=_glorot(rng, d_out, d_in), bias=np.zeros(d_out))
    if variant == "mlp1":
        wh = _glorot(rng, hidden, d_in)
        w1 = _glorot(rng, d_out, hidden)
        return Encoder(variant, w1=w1, bias=np.zeros(d_out), wh=wh)
    raise DomainError(f"unknown encoder variant {variant!r}")


def encode(enc: Encoder, seq: FeatureSequence) -> FeatureSequence:
    """Apply the encoder to every frame; frame count is unchanged."""
    if seq.dim != enc.d_in:
        raise DomainError(f"encoder expects dim {enc.d_in}, got {seq.dim}")
    x = seq.data
    if enc.wh is None:
        y = x @ enc.w1.T + enc.bias
    else:
        y = np.tanh(x @ enc.wh.T) @ enc.w1.T + enc.bias
    return FeatureSequence(seq.video_id, y)


def _encoder_backward(enc: Encoder, x: np.ndarray,
                      grad_y: np.ndarray) -> list[np.ndarray]:
    """Gradients of the parameters given d loss / d output, declared order."""
    if enc.wh is None:
        return [grad_y.T @ x, grad_y.sum(axis=0)]
    h = np.tanh(x @ enc.wh.T)
    grad_w1 = grad_y.T @ h
    grad_h = grad_y @ enc.w1
    grad_pre = grad_h * (1.0 - h * h)
    return [grad_pre.T @ x, grad_w1, grad_y.sum(axis=0)]


class SgdMomentum:
    """SGD with classical momentum: v <- mu v + g; p <- p - lr v."""

    def __init__(self, lr: float, momentum: float = 0.9) -> None:
        if lr <= 0:
            raise DomainError("learning rate must be positive")
        self.lr = lr
        self.momentum = momentum
        self._velocity: list[np.ndarray] | None = None

    def step(self, params: list[np.ndarray], grads: list[np.ndarray]) -> None:
        if self._velocity is None:
            self._velocity = [np.zeros_like(p) for p in params]
        for p, g, v in zip(params, grads, self._velocity):
            v *= self.momentum
            v += g
            p -= self.lr * v


class AdaptiveMoments:
    """Adam-style moments with decoupled weight decay."""

    def __init__(self, lr: float, beta1: float = 0.9, beta2: float = 0.999,
                 eps: float = 1e-8, weight_decay: float = 1e-2) -> None:
        if lr <= 0:
            raise DomainError("learning rate must be positive")
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.weight_decay = weight_decay
        self._m: list[np.ndarray] | None = None
        self._v: list[np.ndarray] | None = None
        self._t = 0

    def step(self, params: list[np.ndarray], grads: list[np.ndarray]) -> None:
        if self._m is None:
            self._m = [np.zeros_like(p) for p in params]
            self._v = [np.zeros_like(p) for p in params]
        self._t += 1
        bc1 = 1.0 - self.beta1 ** self._t
        bc2 = 1.0 - self.beta2 ** self._t
        for p, g, m, v in zip(params, grads, self._m, self._v):
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * (g * g)
            update = (m / bc1) / (np.sqrt(v / bc2) + self.eps)
            p -= self.lr * (update + self.weight_decay * p)


@dataclass(frozen=True)
class TrainConfig:
    lr: float = 1e-3
    optimizer: str = "adaptive_moments"  # "sgd_momentum" | "adaptive_moments"
    momentum: float = 0.9
    batch_size: int = 32
    epochs: int = 10
    seed: int = 0
    rtp: RtpConfig = field(default_factory=RtpConfig)
    gap: int = 8
    d_out: int = 64
    encoder: str = "linear"
    hidden: int = 32

    def __post_init__(self) -> None:
        if self.lr <= 0:
            raise DomainError("lr must be positive")
        if self.optimizer not in ("sgd_momentum", "adaptive_moments"):
            raise DomainError(f"unknown optimizer {self.optimizer!r}")
        if self.batch_size < 1:
            raise DomainError("batch_size must be >= 1")
        if self.epochs < 0:
            raise DomainError("epochs must be >= 0")
        if self.gap < 0:
            raise DomainError("gap must be >= 0")
        if self.d_out < 2:
            raise DomainError("d_out must be >= 2")
        if self.encoder not in ("linear", "mlp1"):
            raise DomainError(f"unknown encoder variant {self.encoder!r}")


def make_optimizer(cfg: TrainConfig):
    if cfg.optimizer == "sgd_momentum":
        return SgdMomentum(cfg.lr, cfg.momentum)
    return AdaptiveMoments(cfg.lr)


@dataclass(frozen=True)
class EpochRecord:
    epoch: int
    loss: float  # nan for the epoch-0 (pre-training) record
    f1: float  # validation F1@0.05, nan when no annotations were supplied
    seconds: float


@dataclass
class TrainHistory:
    records: list[EpochRecord] = field(default_factory=list)

    def best_f1(self) -> float:
        vals = [r.f1 for r in self.records if not math.isnan(r.f1)]
        if not vals:
            raise DomainError("history has no validation scores")
        return max(vals)


def video_loss_and_grads(enc: Encoder, seq: FeatureSequence,
                         boundaries: list[int], gap: int
                         ) -> tuple[float, list[np.ndarray]]:
    """Loss and encoder-parameter gradients for one labelled video."""
    encoded = encode(enc, seq)
    mat = build_tsm(encoded, mode="cosine")
    mask = build_mask(seq.num_frames, boundaries, gap)
    loss = boco_loss(mat, mask)
    grad_y = tsm_grad_to_features(encoded.data, boco_grad_tsm(mat, mask))
    return loss, _encoder_backward(enc, seq.data, grad_y)


def train_step(enc: Encoder, optimizer, batch: list[FeatureSequence],
               labels: list[list[int]], gap: int) -> float:
    """One optimizer step on a batch; returns the mean per-video loss.

    Gradients are summed over the batch in the order given (callers pass
    videos in ascending dataset index), so the reduction is deterministic.
    """
    if len(batch) != len(labels):
        raise DomainError("batch and labels must align")
    if not batch:
        raise DomainError("empty batch")
    total_grads = [np.zeros_like(p) for p in enc.parameters()]
    total_loss = 0.0
    for seq, bounds in zip(batch, labels):
        loss, grads = video_loss_and_grads(enc, seq, bounds, gap)
        total_loss += loss
        for acc, g in zip(total_grads, grads):
            acc += g
    optimizer.step(enc.parameters(), total_grads)
    return total_loss / len(batch)


def _validate_f1(enc: Encoder, videos: list[FeatureSequence],
                 annotations: dict[str, BoundaryAnnotation],
                 rtp_cfg: RtpConfig) -> float:
    """F1@0.05 of argmax-mode detection under the current encoder."""
    infer_cfg = replace(rtp_cfg, mode="argmax")
    predictions = {}
    for seq in videos:
        if seq.video_id not in annotations:
            continue
        pred = rtp_detect(build_tsm(encode(enc, seq)), infer_cfg, seq.video_id)
        predictions[seq.video_id] = list(pred.boundaries)
    if not predictions:
        return math.nan
    _, _, f1 = f1_at(predictions, annotations, theta=0.05)
    return f1


def _pseudo_labels(enc: Encoder, seq: FeatureSequence, cfg: TrainConfig,
                   epoch: int, video_index: int) -> list[int]:
    """Sample-mode detection on the current TSM; no gradient flows here."""
    rng = np.random.default_rng([cfg.seed, _STREAM_PSEUDO, epoch, video_index])
    sample_cfg = replace(cfg.rtp, mode="sample")
    pred = rtp_detect(build_tsm(encode(enc, seq)), sample_cfg, seq.video_id, rng=rng)
    return list(pred.boundaries)


def _check_dataset(videos: list[FeatureSequence]) -> int:
    if not videos:
        raise DomainError("dataset is empty")
    d_in = videos[0].dim
    for seq in videos:
        if seq.dim != d_in:
            raise DomainError("all videos must share one feature dimension")
    return d_in


def _train_loop(videos: list[FeatureSequence], cfg: TrainConfig,
                label_fn, annotations: dict[str, BoundaryAnnotation] | None
                ) -> tuple[Encoder, TrainHistory]:
    d_in = _check_dataset(videos)
    enc = init_encoder(cfg.encoder, d_in, cfg.d_out, cfg.hidden, seed=cfg.seed)
    optimizer = make_optimizer(cfg)
    history = TrainHistory()

    t0 = time.perf_counter()
    f1 = _validate_f1(enc, videos, annotations, cfg.rtp) if annotations else math.nan
    history.records.append(EpochRecord(0, math.nan, f1, time.perf_counter() - t0))

    n = len(videos)
    for epoch in range(1, cfg.epochs + 1):
        t0 = time.perf_counter()
        order = np.random.default_rng([cfg.seed, _STREAM_SHUFFLE, epoch]).permutation(n)
        losses = []
        for lo in range(0, n, cfg.batch_size):
            batch_idx = sorted(int(i) for i in order[lo:lo + cfg.batch_size])
            batch = [videos[i] for i in batch_idx]
            labels = [label_fn(enc, videos[i], epoch, i) for i in batch_idx]
            losses.append((train_step(enc, optimizer, batch, labels, cfg.gap),
                           len(batch)))
        mean_loss = sum(l * k for l, k in losses) / n
        f1 = _validate_f1(enc, videos, annotations, cfg.rtp) if annotations else math.nan
        history.records.append(
            EpochRecord(epoch, mean_loss, f1, time.perf_counter() - t0))
    return enc, history


def train_uboco(videos: list[FeatureSequence], cfg: TrainConfig,
                annotations: dict[str, BoundaryAnnotation] | None = None
                ) -> tuple[Encoder, TrainHistory]:
    """Unsupervised loop: pseudo-labels from the parser, refreshed per batch.

    ``annotations`` are used for per-epoch validation F1 only; they never
    feed the loss.  The epoch-0 history record evaluates the freshly
    initialized encoder.
    """

    def label_fn(enc: Encoder, seq: FeatureSequence, epoch: int, index: int):
        return _pseudo_labels(enc, seq, cfg, epoch, index)

    return _train_loop(videos, cfg, label_fn, annotations)


def train_sboco_lite(videos: list[FeatureSequence],
                     annotations: dict[str, BoundaryAnnotation],
                     cfg: TrainConfig) -> tuple[Encoder, TrainHistory]:
    """Supervised-lite loop: ground-truth labels instead of pseudo-labels.

    One annotator is drawn per video per epoch (seeded); everything else
    matches the unsupervised loop, including argmax-mode validation.
    """
    for seq in videos:
        if seq.video_id not in annotations:
            raise DomainError(f"no annotation for {seq.video_id!r}")
        if annotations[seq.video_id].length != seq.num_frames:
            raise DomainError(f"annotation length mismatch for {seq.video_id!r}")

    def label_fn(enc: Encoder, seq: FeatureSequence, epoch: int, index: int):
        ann = annotations[seq.video_id]
        rng = np.random.default_rng([cfg.seed, _STREAM_ANNOTATOR, epoch, index])
        pick = int(rng.integers(0, len(ann.annotators)))
        return list(ann.annotators[pick])

    return _train_loop(videos, cfg, label_fn, annotations)


def save_checkpoint(enc: Encoder, path: str | Path) -> None:
    """Binary checkpoint: magic, version, variant, dims, then float64 params."""
    header = CHECKPOINT_MAGIC + struct.pack(
        "<IIIII", CHECKPOINT_VERSION, _VARIANT_TAGS[enc.variant],
        enc.d_in, enc.d_out, enc.hidden,
    )
    body = b"".join(np.ascontiguousarray(p, dtype="<f8").tobytes()
                    for p in enc.parameters())
    Path(path).write_bytes(header + body)


def load_checkpoint(path: str | Path) -> Encoder:
    path = Path(path)
    raw = path.read_bytes()
    if len(raw) < 24 or raw[:4] != CHECKPOINT_MAGIC:
        raise FormatError(f"{path}: not an encoder checkpoint")
    version, tag, d_in, d_out, hidden = struct.unpack("<IIIII", raw[4:24])
    if version != CHECKPOINT_VERSION:
        raise FormatError(f"{path}: unsupported version {version}")
    variants = {v: k for k, v in _VARIANT_TAGS.items()}
    if tag not in variants:
        raise FormatError(f"{path}: unknown variant tag {tag}")
    variant = variants[tag]
    if variant == "linear":
        shapes = [(d_out, d_in), (d_out,)]
    else:
        shapes = [(hidden, d_in), (d_out, hidden), (d_out,)]
    expected = 24 + 8 * sum(int(np.prod(s)) for s in shapes)
    if len(raw) != expected:
        raise FormatError(f"{path}: expected {expected} bytes, found {len(raw)}")
    offset = 24
    arrays = []
    for shape in shapes:
        count = int(np.prod(shape))
        arrays.append(np.frombuffer(raw, dtype="<f8", offset=offset,
                                    count=count).reshape(shape).copy())
        offset += 8 * count
    if variant == "linear":
        return Encoder("linear", w1=arrays[0], bias=arrays[1])
    return Encoder("mlp1", wh=arrays[0], w1=arrays[1], bias=arrays[2])


def save_history_csv(history: TrainHistory, path: str | Path,
                     zero_seconds: bool = False) -> None:
    """History rows as ``epoch,loss,f1,seconds``.

    ``zero_seconds`` writes 0.0 in the wall-clock column so reruns of a
    seeded pipeline produce byte-identical files.
    """
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["epoch", "loss", "f1", "seconds"])
        for rec in history.records:
            writer.writerow([rec.epoch, repr(rec.loss), repr(rec.f1),
                             "0.0" if zero_seconds else repr(rec.seconds)])


def load_history_csv(path: str | Path) -> TrainHistory:
    history = TrainHistory()
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        for row in reader:
            history.records.append(EpochRecord(
                epoch=int(row["epoch"]),
                loss=float(row["loss"]),
                f1=float(row["f1"]),
                seconds=float(row["seconds"]),
            ))
    return history
