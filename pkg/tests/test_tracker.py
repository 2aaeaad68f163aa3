import numpy as np
import pytest
from dataclasses import replace

from stars_tir.astf import ridge_filter
from stars_tir.boxes import BoundingBox, Frame
from stars_tir.errors import InvalidConfig
from stars_tir.synthetic import blob_sequence
from stars_tir.tracker import TrackerConfig, _label, _sample, detect, init, run_sequence, track

BASELINE = TrackerConfig(use_astf=False, use_epsr=False, use_gesr=False)


def blob_frame(cx=32.0, cy=30.0, sigma=4.0, size=64):
    yy, xx = np.mgrid[:size, :size].astype(float)
    return Frame(0.15 + 0.7 * np.exp(-((yy - cy) ** 2 + (xx - cx) ** 2) / (2 * sigma**2)))


def test_config_validation():
    with pytest.raises(InvalidConfig):
        TrackerConfig(learning_rate=1.5)
    with pytest.raises(InvalidConfig):
        TrackerConfig(scales=())


@pytest.mark.parametrize("cfg", [BASELINE, TrackerConfig()], ids=["baseline", "full"])
def test_self_detection(cfg):
    frame = blob_frame()
    box = BoundingBox.from_center(32, 30, 16, 16)
    st = init(frame, box, cfg)
    assert st.frame_index == 0
    found, _, _ = detect(st, frame, cfg)
    (a, b), (c, d) = found.center, box.center
    assert np.hypot(a - c, b - d) <= 1.0


def test_sr_trigger_decided_at_init():
    box = BoundingBox.from_center(32, 30, 16, 16)
    assert init(blob_frame(), box, TrackerConfig()).use_sr
    assert init(blob_frame(), box, TrackerConfig()).window == 128
    assert not init(blob_frame(), box, BASELINE).use_sr


def test_baseline_filter_is_ridge():
    frame = blob_frame()
    box = BoundingBox.from_center(32, 30, 16, 16)
    st = init(frame, box, BASELINE)
    x = _sample(frame, st.bbox, BASELINE, 64, False)
    y = _label(st.bbox, BASELINE, 64)
    assert np.max(np.abs(st.model.weights - ridge_filter(x, y, BASELINE.astf.gamma_ridge))) < 1e-12


def test_static_sequence_is_stationary():
    frame = blob_frame()
    box = BoundingBox.from_center(32, 30, 16, 16)
    res = run_sequence([frame] * 50, box, TrackerConfig())
    for r in res:
        (a, b), (c, d) = r.bbox.center, box.center
        assert np.hypot(a - c, b - d) <= 1.0
    assert all(r.converged for r in res)


def test_zero_learning_rate_keeps_model():
    seq = blob_sequence(3, n_frames=6)
    cfg = replace(BASELINE, learning_rate=0.0)
    st = init(seq.frames[0], seq.boxes[0], cfg)
    w0 = st.model.weights.copy()
    for f in seq.frames[1:]:
        st, _ = track(st, f, cfg)
    assert np.array_equal(st.model.weights, w0) and st.frame_index == 5


def test_deterministic_and_follows_blob():
    seq = blob_sequence(1, n_frames=25)
    a = run_sequence(seq.frames, seq.boxes[0], TrackerConfig())
    b = run_sequence(seq.frames, seq.boxes[0], TrackerConfig())
    assert [r.bbox for r in a] == [r.bbox for r in b]
    err = [np.hypot(*(np.subtract(r.bbox.center, g.center))) for r, g in zip(a, seq.boxes)]
    assert max(err) < 4.0


def test_box_stays_in_frame():
    seq = blob_sequence(2, n_frames=20)
    for r in run_sequence(seq.frames, seq.boxes[0], BASELINE):
        cx, cy = r.bbox.center
        assert 0 <= cx <= 63 and 0 <= cy <= 63
