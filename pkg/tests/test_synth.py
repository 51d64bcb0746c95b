import numpy as np
import pytest

from tsm_gebd import (
    DomainError,
    RtpConfig,
    SynthConfig,
    build_tsm,
    f1_at,
    generate_corpus,
    generate_dataset,
    generate_video,
    load_annotations,
    load_features,
    load_manifest,
    rtp_detect,
)


def test_clean_video_is_block_structured():
    cfg = SynthConfig(num_videos=2, seed=3)
    video = generate_video(cfg, 0)
    tsm = build_tsm(video.features)
    gt = list(video.annotation.annotators[0])
    edges = [0, *gt, video.features.num_frames]
    for s, e in zip(edges, edges[1:]):
        block = tsm.values[s:e, s:e]
        assert np.allclose(block, 1.0, atol=1e-6)
    for a in range(len(edges) - 2):
        s, e = edges[a], edges[a + 1]
        s2, e2 = edges[a + 1], edges[a + 2]
        cross = tsm.values[s:e, s2:e2]
        assert cross.max() < 0.5


def test_same_seed_reproduces_video():
    cfg = SynthConfig(num_videos=3, noise_sigma=0.1, distractor_weight=0.5, seed=9)
    a = generate_video(cfg, 1)
    b = generate_video(cfg, 1)
    assert a.features == b.features
    assert a.annotation == b.annotation


def test_min_segment_gap_enforced():
    cfg = SynthConfig(num_videos=20, min_segment_len=5, segments_range=(4, 6),
                      length_range=(40, 80), seed=1)
    for k in range(20):
        video = generate_video(cfg, k)
        gt = [0, *video.annotation.annotators[0], video.features.num_frames]
        assert all(b - a >= 5 for a, b in zip(gt, gt[1:]))


def test_different_seeds_differ():
    layouts = set()
    for seed in range(50):
        cfg = SynthConfig(num_videos=1, seed=seed)
        video = generate_video(cfg, 0)
        layouts.add((video.features.num_frames, video.annotation.annotators[0]))
    assert len(layouts) == 50


def test_infeasible_config_rejected():
    with pytest.raises(DomainError):
        SynthConfig(length_range=(20, 30), segments_range=(4, 6), min_segment_len=6)
    with pytest.raises(DomainError):
        SynthConfig(dim=4, distractor_rank=4)


def test_extra_annotators_jitter():
    cfg = SynthConfig(num_videos=2, annotators=3, seed=5)
    video = generate_video(cfg, 0)
    truth = np.array(video.annotation.annotators[0])
    assert len(video.annotation.annotators) == 3
    for extra in video.annotation.annotators[1:]:
        assert len(extra) >= 1
        for b in extra:
            assert np.abs(truth - b).min() <= 1


def test_generate_dataset_layout(tmp_path):
    cfg = SynthConfig(num_videos=3, seed=2)
    manifest = generate_dataset(cfg, tmp_path)
    assert sorted(manifest.entries) == ["synth0000", "synth0001", "synth0002"]
    assert (tmp_path / "annotations.json").exists()
    loaded = load_manifest(tmp_path / "manifest.json")
    assert loaded.video_ids() == ["synth0000", "synth0001", "synth0002"]


def test_dataset_roundtrip_exact(tmp_path):
    cfg = SynthConfig(num_videos=3, noise_sigma=0.2, distractor_weight=0.7, seed=4)
    videos = generate_corpus(cfg)
    generate_dataset(cfg, tmp_path, videos=videos)
    manifest = load_manifest(tmp_path / "manifest.json")
    anns = load_annotations(tmp_path / "annotations.json")
    for video in videos:
        vid = video.features.video_id
        back = load_features(manifest.entries[vid][0], video_id=vid)
        assert back == video.features
        assert anns[vid] == video.annotation


def test_clean_corpus_separable_sample():
    # small slice of the acceptance criterion: exact recovery at defaults
    cfg = SynthConfig(num_videos=10, seed=0)
    preds, anns = {}, {}
    for video in generate_corpus(cfg):
        vid = video.features.video_id
        pred = rtp_detect(build_tsm(video.features), RtpConfig(), vid)
        preds[vid] = list(pred.boundaries)
        anns[vid] = video.annotation
    assert f1_at(preds, anns, 0.05)[2] == 1.0


def test_distractor_lowers_raw_f1():
    clean = SynthConfig(num_videos=30, seed=6)
    noisy = SynthConfig(num_videos=30, noise_sigma=0.1, distractor_weight=1.0,
                        distractor_rank=4, seed=6)

    def corpus_f1(cfg):
        preds, anns = {}, {}
        for video in generate_corpus(cfg):
            vid = video.features.video_id
            preds[vid] = list(rtp_detect(build_tsm(video.features), RtpConfig(), vid).boundaries)
            anns[vid] = video.annotation
        return f1_at(preds, anns, 0.05)[2]

    assert corpus_f1(clean) - corpus_f1(noisy) >= 0.2
