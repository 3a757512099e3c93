import numpy as np
import pytest

from ptav.geometry import BoundingBox, iou
from ptav.synthetic import SyntheticSpec, generate_synthetic
from ptav.tracker import CorrelationTracker, TrackerConfig


def track(seq, config=None):
    tr = CorrelationTracker(config)
    frames = seq.load_frames()
    state = tr.initialize(frames[0], seq.ground_truth[0])
    boxes = [state.box]
    for f in frames[1:]:
        state = tr.step(state, f)
        boxes.append(state.box)
    return boxes, state


class TestCorrelationTracker:
    def test_initial_box_preserved(self, short_sequence):
        tr = CorrelationTracker()
        state = tr.initialize(short_sequence.frames[0], short_sequence.ground_truth[0])
        assert state.box == short_sequence.ground_truth[0]
        assert state.projector.d_out == 5
        assert state.template_shape == (64, 64)

    def test_follows_moving_square(self, short_sequence):
        boxes, _ = track(short_sequence)
        ious = [iou(b, g) for b, g in zip(boxes, short_sequence.ground_truth)]
        assert min(ious) > 0.6

    def test_static_object_stays_put(self):
        seq = generate_synthetic(SyntheticSpec(n_frames=15, velocity_x=0, velocity_y=0, noise=0))
        boxes, state = track(seq)
        for b in boxes:
            assert b.as_tuple() == pytest.approx(seq.ground_truth[0].as_tuple(), abs=1e-9)
        assert state.scale.current_scale == 1.0

    def test_deterministic(self, short_sequence):
        a, _ = track(short_sequence)
        b, _ = track(short_sequence)
        assert [x.as_tuple() for x in a] == [x.as_tuple() for x in b]

    def test_step_is_pure(self, short_sequence):
        tr = CorrelationTracker()
        f0, f1 = short_sequence.frames[:2]
        s0 = tr.initialize(f0, short_sequence.ground_truth[0])
        A0 = s0.filter.A.copy()
        s1 = tr.step(s0, f1)
        np.testing.assert_array_equal(s0.filter.A, A0)
        assert s1.frame_index == 1 and s0.frame_index == 0

    def test_reinitialize_sets_box(self, short_sequence):
        tr = CorrelationTracker()
        frames = short_sequence.frames
        s = tr.initialize(frames[0], short_sequence.ground_truth[0])
        s = tr.step(s, frames[1])
        target = BoundingBox(70.0, 50.0, 34.0, 34.0)
        r = tr.reinitialize(s, frames[2], target)
        assert r.box.as_tuple() == pytest.approx(target.as_tuple(), abs=1e-9)
        assert r.projector is s.projector
        assert r.filter.A.shape == s.filter.A.shape

    def test_large_target_template_capped(self):
        seq = generate_synthetic(
            SyntheticSpec(n_frames=2, frame_width=320, frame_height=320, object_width=100, object_height=60)
        )
        s = CorrelationTracker().initialize(seq.frames[0], seq.ground_truth[0])
        rows, cols = s.template_shape
        assert rows * cols <= 64 * 64 * 1.1
        assert rows % 4 == 0 and cols % 4 == 0

    @pytest.mark.parametrize(
        "kwargs", [dict(lam=-1), dict(eta=1.5), dict(padding=0.5), dict(num_scales=4), dict(scale_step=1.0)]
    )
    def test_config_validation(self, kwargs):
        with pytest.raises(ValueError):
            TrackerConfig(**kwargs)
