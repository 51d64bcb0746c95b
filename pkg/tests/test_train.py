import math

import numpy as np
import pytest

from tsm_gebd import (
    DomainError,
    Encoder,
    FeatureSequence,
    RtpConfig,
    TrainConfig,
    boco_loss,
    build_mask,
    build_tsm,
    encode,
    init_encoder,
    load_checkpoint,
    save_checkpoint,
    train_sboco_lite,
    train_step,
    train_uboco,
)
from tsm_gebd.train import (
    SgdMomentum,
    _pseudo_labels,
    load_history_csv,
    save_history_csv,
    video_loss_and_grads,
)
from oracles import central_difference, relative_error


def test_identity_linear_encoder():
    enc = Encoder("linear", w1=np.eye(3), bias=np.zeros(3))
    seq = FeatureSequence("v", np.random.default_rng(0).standard_normal((5, 3)))
    out = encode(enc, seq)
    assert np.array_equal(out.data, seq.data)


def test_zero_encoder_gives_zero_features():
    enc = Encoder("linear", w1=np.zeros((4, 3)), bias=np.zeros(4))
    seq = FeatureSequence("v", np.ones((4, 3)))
    out = encode(enc, seq)
    assert np.all(out.data == 0.0)
    # downstream cosine handles all-zero rows through the epsilon rule
    tsm = build_tsm(out)
    assert np.all(np.diag(tsm.values) == 1.0)


def test_encoder_is_framewise():
    rng = np.random.default_rng(1)
    enc = init_encoder("linear", 5, 4, seed=3)
    x = rng.standard_normal((6, 5))
    base = encode(enc, FeatureSequence("v", x)).data
    pert = x.copy()
    pert[4] += rng.standard_normal(5)
    out = encode(enc, FeatureSequence("v", pert)).data
    assert np.array_equal(out[:4], base[:4])
    assert np.array_equal(out[5], base[5])
    assert not np.array_equal(out[4], base[4])


def test_dimension_mismatch():
    enc = init_encoder("linear", 5, 4, seed=0)
    with pytest.raises(DomainError):
        encode(enc, FeatureSequence("v", np.zeros((3, 4))))


@pytest.mark.parametrize("variant", ["linear", "mlp1"])
def test_full_chain_gradient_matches_finite_differences(variant):
    rng = np.random.default_rng(11)
    L, d_in, d_out = 6, 5, 3
    enc = init_encoder(variant, d_in, d_out, hidden=4, seed=7)
    x = rng.standard_normal((L, d_in))
    seq = FeatureSequence("v", x)
    bounds = [2, 4]
    gap = 3
    mask = build_mask(L, bounds, gap)

    _, grads = video_loss_and_grads(enc, seq, bounds, gap)
    for param, analytic in zip(enc.parameters(), grads):
        def loss_fn():
            return boco_loss(build_tsm(encode(enc, seq)), mask)

        numeric = central_difference(loss_fn, param)
        assert relative_error(analytic, numeric) < 1e-4


def test_train_step_zero_gap_keeps_parameters():
    rng = np.random.default_rng(2)
    enc = init_encoder("linear", 4, 3, seed=1)
    before = [p.copy() for p in enc.parameters()]
    batch = [FeatureSequence("v", rng.standard_normal((8, 4)))]
    opt = SgdMomentum(lr=1e-3, momentum=0.0)
    train_step(enc, opt, batch, [[4]], gap=0)
    for b, a in zip(before, enc.parameters()):
        assert np.array_equal(b, a)


def test_train_step_descends():
    successes = 0
    for seed in range(20):
        rng = np.random.default_rng(seed)
        enc = init_encoder("linear", 6, 4, seed=seed)
        seq = FeatureSequence("v", rng.standard_normal((12, 6)))
        bounds = [4, 8]
        gap = 4

        def current_loss():
            return boco_loss(build_tsm(encode(enc, seq)), build_mask(12, bounds, gap))

        before = current_loss()
        train_step(enc, SgdMomentum(lr=1e-3, momentum=0.0), [seq], [bounds], gap)
        if current_loss() < before:
            successes += 1
    assert successes >= 19


def _tiny_corpus(n=6, seed=0):
    rng = np.random.default_rng(seed)
    videos, anns = [], {}
    for k in range(n):
        vid = f"v{k}"
        x = rng.standard_normal((14, 5))
        x[7:] += 2.0
        videos.append(FeatureSequence(vid, x))
        from tsm_gebd import BoundaryAnnotation
        anns[vid] = BoundaryAnnotation(vid, 14, ((7,),))
    return videos, anns


def _cfg(**kw):
    base = dict(epochs=2, batch_size=4, d_out=6, seed=5,
                rtp=RtpConfig(min_parse_len=4), gap=4)
    base.update(kw)
    return TrainConfig(**base)


def test_zero_epochs_returns_initialization():
    videos, anns = _tiny_corpus()
    enc, history = train_uboco(videos, _cfg(epochs=0), anns)
    ref = init_encoder("linear", 5, 6, seed=5)
    for a, b in zip(enc.parameters(), ref.parameters()):
        assert np.array_equal(a, b)
    assert len(history.records) == 1 and history.records[0].epoch == 0


def test_uboco_is_deterministic():
    videos, anns = _tiny_corpus()
    enc1, h1 = train_uboco(videos, _cfg(), anns)
    enc2, h2 = train_uboco(videos, _cfg(), anns)
    for a, b in zip(enc1.parameters(), enc2.parameters()):
        assert np.array_equal(a, b)
    assert [(r.epoch, r.loss, r.f1) for r in h1.records] == \
        [(r.epoch, r.loss, r.f1) for r in h2.records]


def test_sboco_matches_uboco_at_zero_epochs():
    videos, anns = _tiny_corpus()
    (enc_u, _), (enc_s, _) = (train_uboco(videos, _cfg(epochs=0), anns),
                              train_sboco_lite(videos, anns, _cfg(epochs=0)))
    for a, b in zip(enc_u.parameters(), enc_s.parameters()):
        assert np.array_equal(a, b)


def test_sboco_requires_annotations():
    videos, anns = _tiny_corpus()
    del anns["v0"]
    with pytest.raises(DomainError):
        train_sboco_lite(videos, anns, _cfg())


def test_pseudo_labels_do_not_touch_parameters():
    videos, _ = _tiny_corpus()
    cfg = _cfg()
    enc = init_encoder("linear", 5, 6, seed=5)
    before = [p.copy() for p in enc.parameters()]
    labels = _pseudo_labels(enc, videos[0], cfg, epoch=1, video_index=0)
    assert all(isinstance(b, int) for b in labels)
    for b, a in zip(before, enc.parameters()):
        assert np.array_equal(b, a)


def test_cosine_scale_neutrality():
    videos, _ = _tiny_corpus()
    enc = init_encoder("linear", 5, 6, seed=9)
    scaled = enc.copy()
    scaled.w1 *= 3.0
    scaled.bias *= 3.0
    for seq in videos:
        a = boco_loss(build_tsm(encode(enc, seq)), build_mask(14, [7], 4))
        b = boco_loss(build_tsm(encode(scaled, seq)), build_mask(14, [7], 4))
        assert abs(a - b) < 1e-12


def test_empty_dataset_rejected():
    with pytest.raises(DomainError):
        train_uboco([], _cfg())


@pytest.mark.parametrize("variant,hidden", [("linear", 0), ("mlp1", 4)])
def test_checkpoint_roundtrip(tmp_path, variant, hidden):
    enc = init_encoder(variant, 5, 3, hidden=max(hidden, 1), seed=2)
    save_checkpoint(enc, tmp_path / "c.ubck")
    back = load_checkpoint(tmp_path / "c.ubck")
    assert back.variant == enc.variant
    for a, b in zip(enc.parameters(), back.parameters()):
        assert np.array_equal(a, b)


def test_history_csv_roundtrip(tmp_path):
    videos, anns = _tiny_corpus()
    _, history = train_uboco(videos, _cfg(), anns)
    save_history_csv(history, tmp_path / "h.csv")
    back = load_history_csv(tmp_path / "h.csv")
    assert len(back.records) == len(history.records)
    for a, b in zip(back.records, history.records):
        assert a.epoch == b.epoch
        assert (math.isnan(a.loss) and math.isnan(b.loss)) or a.loss == b.loss
        assert (math.isnan(a.f1) and math.isnan(b.f1)) or a.f1 == b.f1


def test_history_zero_seconds_mode(tmp_path):
    videos, anns = _tiny_corpus()
    _, history = train_uboco(videos, _cfg(epochs=1), anns)
    save_history_csv(history, tmp_path / "h.csv", zero_seconds=True)
    back = load_history_csv(tmp_path / "h.csv")
    assert all(r.seconds == 0.0 for r in back.records)
