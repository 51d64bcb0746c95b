"""Command-line surface: synth | tsm | score | detect | train | eval.

Every subcommand takes the global flags ``--seed``, ``--config``,
``--quiet``, ``--jobs``, and ``--out``; flag values override config-file
entries, which override defaults.  The config file is a flat JSON object
keyed by flag names (``{"num-videos": 4}``); unknown keys are rejected.

All artifacts land under ``--out``.  JSON artifacts produced by the CLI
embed ``tool_version``, ``seed``, and the effective (merged) configuration
so a run can be reproduced exactly; canonical-schema files (manifest,
annotations) stay pure and get a ``*_meta.json`` sidecar instead.  Reruns
with identical flags and seed are byte-identical, including across
``--jobs`` values (per-video work is reduced in video-index order).

Exit codes: 0 success, 2 usage error, 3 data/domain error, 4 I/O error.
"""

from __future__ import annotations

import argparse
import json
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict
from pathlib import Path

import numpy as np

from . import __version__
from .errors import DomainError, FormatError
from .evaluate import average_f1
from .features import load_annotations, load_features, load_manifest
from .rtp import RtpConfig, detect_local_maxima, detect_threshold, rtp_detect
from .scoring import boundary_scores, make_kernel
from .synth import SynthConfig, generate_dataset, generate_video
from .train import (
    TrainConfig,
    save_checkpoint,
    save_history_csv,
    train_sboco_lite,
    train_uboco,
)
from .tsm import build_tsm, render_tsm_pgm, save_tsm

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_DATA = 3
EXIT_IO = 4

_STREAM_DETECT = 20

_GLOBAL_FLAGS = [
    ("seed", int, 0, "master seed; per-video streams derive from it"),
    ("config", str, None, "flat JSON config file (flag -> value)"),
    ("quiet", bool, False, "suppress progress messages"),
    ("jobs", int, 1, "worker processes for per-video work"),
    ("out", str, None, "output directory (required)"),
]

_RTP_FLAGS = [
    ("kernel-size", int, RtpConfig.kernel_size, "contrastive kernel size (odd)"),
    ("t1", int, RtpConfig.min_parse_len, "stop: interval shorter than this"),
    ("t2", float, RtpConfig.score_gap, "stop: candidate max-mean below this"),
    ("top-fraction", float, RtpConfig.top_fraction, "fraction of candidates retained"),
    ("tau", float, RtpConfig.temperature, "softmax temperature for sample mode"),
    ("min-segment", int, RtpConfig.min_segment, "margin: min frames on each side of a split"),
    ("mode", str, RtpConfig.mode, "split selection: argmax | sample"),
    ("no-zero-pad", bool, False, "ablation: score interval edges without padding"),
]

_SUBCOMMANDS: dict[str, list[tuple[str, type, object, str]]] = {
    "synth": [
        ("num-videos", int, 100, "corpus size"),
        ("length-min", int, 34, "min frames per video"),
        ("length-max", int, 96, "max frames per video"),
        ("segments-min", int, 5, "min segments per video"),
        ("segments-max", int, 8, "max segments per video"),
        ("min-segment-len", int, 4, "min frames per segment"),
        ("dim", int, 10, "feature dimension"),
        ("noise-sigma", float, 0.0, "i.i.d. gaussian noise scale"),
        ("distractor-weight", float, 0.0, "shared low-rank distractor scale"),
        ("distractor-rank", int, 4, "distractor subspace rank"),
        ("mixing", bool, False, "apply a fixed invertible mixing matrix"),
        ("annotators", int, 1, "extra annotators jitter boundaries by +-1"),
    ],
    "tsm": [
        ("features", str, None, "feature file (binary)"),
        ("mode", str, "cosine", "similarity: cosine | neg_l2"),
        ("pgm", bool, False, "write a PGM rendering (default when no --raw)"),
        ("raw", bool, False, "write a raw float64 dump"),
    ],
    "score": [
        ("features", str, None, "feature file (binary)"),
        ("kernel-size", int, RtpConfig.kernel_size, "contrastive kernel size (odd)"),
    ],
    "detect": [
        ("manifest", str, None, "dataset manifest"),
        ("parser", str, "rtp", "rtp | threshold | localmax"),
        ("theta", float, 0.5, "sigmoid threshold for baseline parsers"),
        *_RTP_FLAGS,
    ],
    "train": [
        ("manifest", str, None, "dataset manifest"),
        ("annotations", str, None, "annotation JSON (labels for sboco-lite, validation otherwise)"),
        ("method", str, "uboco", "uboco | sboco-lite"),
        ("epochs", int, 10, "training epochs"),
        ("batch-size", int, 32, "videos per optimizer step"),
        ("lr", float, 1e-3, "learning rate"),
        ("optimizer", str, "adaptive_moments", "sgd_momentum | adaptive_moments"),
        ("gap", int, 8, "local-similarity band half-width"),
        ("d-out", int, 64, "encoder output dimension"),
        ("encoder", str, "linear", "linear | mlp1"),
        ("hidden", int, 32, "hidden width for mlp1"),
        ("record-timing", bool, False, "write real wall-clock seconds (breaks byte-identical reruns)"),
        *_RTP_FLAGS,
    ],
    "eval": [
        ("predictions", str, None, "predictions JSON from `detect`"),
        ("annotations", str, None, "annotation JSON"),
        ("annotator-rule", str, "max", "per-video annotator rule: max | first"),
    ],
}


def _log(cfg: dict, message: str) -> None:
    if not cfg.get("quiet"):
        print(message, file=sys.stderr)


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="tsm-gebd",
        description="Event boundary detection on temporal self-similarity matrices.",
    )
    parser.add_argument("--version", action="version", version=__version__)
    subparsers = parser.add_subparsers(dest="command", required=True)
    for name, flags in _SUBCOMMANDS.items():
        sub = subparsers.add_parser(name)
        for flag, ftype, _default, help_text in _GLOBAL_FLAGS + flags:
            if ftype is bool:
                sub.add_argument(f"--{flag}", dest=flag, default=None,
                                 action="store_const", const=True, help=help_text)
            else:
                sub.add_argument(f"--{flag}", dest=flag, default=None,
                                 type=ftype, help=help_text)
    return parser


def _merge_config(command: str, args: argparse.Namespace) -> dict:
    """defaults < config file < explicit flags; unknown config keys rejected."""
    spec = _GLOBAL_FLAGS + _SUBCOMMANDS[command]
    effective = {flag: default for flag, _t, default, _h in spec}
    known = {flag for flag, *_ in spec}
    config_path = getattr(args, "config")
    if config_path is not None:
        try:
            loaded = json.loads(Path(config_path).read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise FormatError(f"{config_path}: invalid JSON: {exc}") from exc
        if not isinstance(loaded, dict):
            raise FormatError(f"{config_path}: config must be a flat JSON object")
        for key, value in loaded.items():
            if key not in known:
                raise UsageError(f"unknown config key {key!r} for subcommand {command!r}")
            effective[key] = value
        effective["config"] = config_path
    for flag, *_ in spec:
        value = getattr(args, flag)
        if value is not None:
            effective[flag] = value
    if effective.get("out") is None:
        raise UsageError("--out is required")
    return effective


class UsageError(Exception):
    pass


def _write_json(path: Path, payload: dict) -> None:
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n",
                    encoding="utf-8")


def _meta(cfg: dict) -> dict:
    # out/quiet/jobs/config describe the execution environment, not the
    # result; embedding them would make byte-identical reruns impossible
    shown = {k: v for k, v in cfg.items()
             if k not in ("out", "quiet", "jobs", "config")}
    return {"tool_version": __version__, "seed": cfg["seed"],
            "effective_config": shown}


def _rtp_config(cfg: dict) -> RtpConfig:
    return RtpConfig(
        kernel_size=cfg["kernel-size"],
        min_parse_len=cfg["t1"],
        score_gap=cfg["t2"],
        top_fraction=cfg["top-fraction"],
        temperature=cfg["tau"],
        min_segment=cfg["min-segment"],
        mode=cfg["mode"],
        seed=cfg["seed"],
        zero_pad=not cfg["no-zero-pad"],
    )


def _synth_config(cfg: dict) -> SynthConfig:
    return SynthConfig(
        num_videos=cfg["num-videos"],
        length_range=(cfg["length-min"], cfg["length-max"]),
        segments_range=(cfg["segments-min"], cfg["segments-max"]),
        min_segment_len=cfg["min-segment-len"],
        dim=cfg["dim"],
        noise_sigma=cfg["noise-sigma"],
        distractor_weight=cfg["distractor-weight"],
        distractor_rank=cfg["distractor-rank"],
        mixing=cfg["mixing"],
        annotators=cfg["annotators"],
        seed=cfg["seed"],
    )


def _cmd_synth(cfg: dict) -> int:
    out = Path(cfg["out"])
    synth_cfg = _synth_config(cfg)
    if cfg["jobs"] > 1:
        with ProcessPoolExecutor(max_workers=cfg["jobs"]) as pool:
            videos = list(pool.map(generate_video,
                                   [synth_cfg] * synth_cfg.num_videos,
                                   range(synth_cfg.num_videos),
                                   chunksize=8))
    else:
        videos = [generate_video(synth_cfg, i) for i in range(synth_cfg.num_videos)]
    out.mkdir(parents=True, exist_ok=True)
    generate_dataset(synth_cfg, out, videos=videos)
    _write_json(out / "synth_meta.json", _meta(cfg))
    _log(cfg, f"wrote {synth_cfg.num_videos} videos to {out}")
    return EXIT_OK


def _cmd_tsm(cfg: dict) -> int:
    if cfg["features"] is None:
        raise UsageError("tsm requires --features")
    seq = load_features(cfg["features"])
    mat = build_tsm(seq, mode=cfg["mode"])
    out = Path(cfg["out"])
    out.mkdir(parents=True, exist_ok=True)
    want_pgm = cfg["pgm"] or not cfg["raw"]
    written = []
    if want_pgm:
        pgm_path = out / f"{seq.video_id}.pgm"
        render_tsm_pgm(mat, pgm_path)
        written.append(pgm_path.name)
    if cfg["raw"]:
        raw_path = out / f"{seq.video_id}.ubtm"
        save_tsm(mat, raw_path)
        written.append(raw_path.name)
    payload = _meta(cfg)
    payload["video_id"] = seq.video_id
    payload["num_frames"] = seq.num_frames
    payload["artifacts"] = written
    _write_json(out / "tsm_meta.json", payload)
    _log(cfg, f"wrote {', '.join(written)} to {out}")
    return EXIT_OK


def _cmd_score(cfg: dict) -> int:
    if cfg["features"] is None:
        raise UsageError("score requires --features")
    seq = load_features(cfg["features"])
    mat = build_tsm(seq)
    kernel = make_kernel(cfg["kernel-size"])
    scores = boundary_scores(mat, 0, mat.num_frames, kernel)
    out = Path(cfg["out"])
    out.mkdir(parents=True, exist_ok=True)
    (out / "scores.csv").write_text(
        ",".join(repr(float(v)) for v in scores.values) + "\n", encoding="utf-8")
    payload = _meta(cfg)
    payload["video_id"] = seq.video_id
    _write_json(out / "score_meta.json", payload)
    _log(cfg, f"wrote scores.csv ({len(scores.values)} frames) to {out}")
    return EXIT_OK


def _detect_one(task: tuple) -> dict:
    vid, path, parser, rtp_cfg, theta, seed, index = task
    seq = load_features(path, video_id=vid)
    mat = build_tsm(seq)
    if parser == "rtp":
        rng = np.random.default_rng([seed, _STREAM_DETECT, index])
        pred = rtp_detect(mat, rtp_cfg, vid, rng=rng)
        boundaries, depths = list(pred.boundaries), list(pred.depths)
    else:
        kernel = make_kernel(rtp_cfg.kernel_size)
        scores = boundary_scores(mat, 0, mat.num_frames, kernel)
        if parser == "threshold":
            boundaries = detect_threshold(scores, theta, rtp_cfg.min_segment)
        elif parser == "localmax":
            boundaries = detect_local_maxima(scores, theta, rtp_cfg.min_segment)
        else:
            raise DomainError(f"unknown parser {parser!r}")
        depths = [1] * len(boundaries)
    return {"video_id": vid, "boundaries": boundaries, "depths": depths}


def _cmd_detect(cfg: dict) -> int:
    if cfg["manifest"] is None:
        raise UsageError("detect requires --manifest")
    manifest = load_manifest(cfg["manifest"])
    rtp_cfg = _rtp_config(cfg)
    parser_cfg_echo = asdict(rtp_cfg)
    tasks = [
        (vid, str(manifest.entries[vid][0]), cfg["parser"], rtp_cfg,
         cfg["theta"], cfg["seed"], index)
        for index, vid in enumerate(manifest.video_ids())
    ]
    if cfg["jobs"] > 1:
        with ProcessPoolExecutor(max_workers=cfg["jobs"]) as pool:
            results = list(pool.map(_detect_one, tasks, chunksize=8))
    else:
        results = [_detect_one(t) for t in tasks]
    for entry in results:
        entry["config"] = dict(parser_cfg_echo, parser=cfg["parser"], theta=cfg["theta"])
    out = Path(cfg["out"])
    out.mkdir(parents=True, exist_ok=True)
    payload = _meta(cfg)
    payload["predictions"] = results
    _write_json(out / "predictions.json", payload)
    _log(cfg, f"wrote predictions for {len(results)} videos to {out}")
    return EXIT_OK


def _cmd_train(cfg: dict) -> int:
    if cfg["manifest"] is None:
        raise UsageError("train requires --manifest")
    if cfg["method"] not in ("uboco", "sboco-lite"):
        raise UsageError(f"unknown training method {cfg['method']!r}")
    manifest = load_manifest(cfg["manifest"])
    videos = [load_features(manifest.entries[vid][0], video_id=vid)
              for vid in manifest.video_ids()]
    annotations = None
    if cfg["annotations"] is not None:
        annotations = load_annotations(cfg["annotations"])
    train_cfg = TrainConfig(
        lr=cfg["lr"],
        optimizer=cfg["optimizer"],
        batch_size=cfg["batch-size"],
        epochs=cfg["epochs"],
        seed=cfg["seed"],
        rtp=_rtp_config(cfg),
        gap=cfg["gap"],
        d_out=cfg["d-out"],
        encoder=cfg["encoder"],
        hidden=cfg["hidden"],
    )
    if cfg["method"] == "uboco":
        enc, history = train_uboco(videos, train_cfg, annotations)
    else:
        if annotations is None:
            raise UsageError("sboco-lite requires --annotations")
        enc, history = train_sboco_lite(videos, annotations, train_cfg)
    out = Path(cfg["out"])
    out.mkdir(parents=True, exist_ok=True)
    save_checkpoint(enc, out / "checkpoint.ubck")
    save_history_csv(history, out / "history.csv",
                     zero_seconds=not cfg["record-timing"])
    _write_json(out / "train_meta.json", _meta(cfg))
    final = history.records[-1]
    _log(cfg, f"trained {cfg['epochs']} epochs; final loss {final.loss:.6f}, "
              f"val f1 {final.f1}")
    return EXIT_OK


def _cmd_eval(cfg: dict) -> int:
    if cfg["predictions"] is None or cfg["annotations"] is None:
        raise UsageError("eval requires --predictions and --annotations")
    try:
        payload = json.loads(Path(cfg["predictions"]).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise FormatError(f"{cfg['predictions']}: invalid JSON: {exc}") from exc
    if "predictions" not in payload:
        raise FormatError(f"{cfg['predictions']}: missing 'predictions' key")
    predictions = {entry["video_id"]: [int(b) for b in entry["boundaries"]]
                   for entry in payload["predictions"]}
    annotations = load_annotations(cfg["annotations"])
    result = average_f1(predictions, annotations, annotator_rule=cfg["annotator-rule"])
    out = Path(cfg["out"])
    out.mkdir(parents=True, exist_ok=True)
    doc = _meta(cfg)
    doc["per_threshold"] = [
        {"theta": row.theta, "precision": row.precision,
         "recall": row.recall, "f1": row.f1}
        for row in result.per_threshold
    ]
    doc["average_f1"] = result.average_f1
    _write_json(out / "eval.json", doc)
    _log(cfg, f"average F1 {result.average_f1:.4f} "
              f"(F1@0.05 {result.per_threshold[0].f1:.4f})")
    return EXIT_OK


_HANDLERS = {
    "synth": _cmd_synth,
    "tsm": _cmd_tsm,
    "score": _cmd_score,
    "detect": _cmd_detect,
    "train": _cmd_train,
    "eval": _cmd_eval,
}


def run(argv: list[str] | None = None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = _merge_config(args.command, args)
        return _HANDLERS[args.command](cfg)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DomainError, FormatError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_IO


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
