"""Event boundary detection on temporal self-similarity matrices.

The pipeline: per-frame features -> self-similarity matrix (TSM) ->
contrastive-kernel boundary scores -> recursive parsing into boundary
indices.  A boundary-contrastive loss with analytic gradients trains a
small encoder on the parser's own output (pseudo-labels) or on ground
truth, and detections are scored with F1 at relative-distance thresholds.
"""

from .boco import (
    BocoMask,
    boco_grad_tsm,
    boco_loss,
    build_mask,
    save_mask_pgm,
    segment_ids,
    tsm_grad_to_features,
)
from .errors import DomainError, FormatError
from .evaluate import EvalResult, ThresholdResult, average_f1, f1_at, match_boundaries
from .features import (
    BoundaryAnnotation,
    DatasetManifest,
    FeatureSequence,
    load_annotations,
    load_features,
    load_manifest,
    save_annotations,
    save_features,
    save_manifest,
)
from .rtp import (
    BoundaryPrediction,
    RtpConfig,
    detect_local_maxima,
    detect_threshold,
    rtp_detect,
)
from .scoring import (
    BoundaryScores,
    ContrastiveKernel,
    ScoreCache,
    boundary_scores,
    make_kernel,
    scores_for_interval,
)
from .synth import SynthConfig, SynthVideo, generate_corpus, generate_dataset, generate_video
from .train import (
    Encoder,
    EpochRecord,
    TrainConfig,
    TrainHistory,
    encode,
    init_encoder,
    load_checkpoint,
    save_checkpoint,
    train_sboco_lite,
    train_step,
    train_uboco,
)
from .tsm import Tsm, build_tsm, load_tsm, render_tsm_pgm, save_tsm

__version__ = "0.1.0"

__all__ = [
    "BocoMask", "boco_grad_tsm", "boco_loss", "build_mask", "save_mask_pgm",
    "segment_ids", "tsm_grad_to_features",
    "DomainError", "FormatError",
    "EvalResult", "ThresholdResult", "average_f1", "f1_at", "match_boundaries",
    "BoundaryAnnotation", "DatasetManifest", "FeatureSequence",
    "load_annotations", "load_features", "load_manifest",
    "save_annotations", "save_features", "save_manifest",
    "BoundaryPrediction", "RtpConfig", "detect_local_maxima",
    "detect_threshold", "rtp_detect",
    "BoundaryScores", "ContrastiveKernel", "ScoreCache", "boundary_scores",
    "make_kernel", "scores_for_interval",
    "SynthConfig", "SynthVideo", "generate_corpus", "generate_dataset",
    "generate_video",
    "Encoder", "EpochRecord", "TrainConfig", "TrainHistory", "encode",
    "init_encoder", "load_checkpoint", "save_checkpoint", "train_sboco_lite",
    "train_step", "train_uboco",
    "Tsm", "build_tsm", "load_tsm", "render_tsm_pgm", "save_tsm",
    "__version__",
]
