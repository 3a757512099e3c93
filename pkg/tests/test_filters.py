import numpy as np
import pytest

from oracles import filter_terms, spatial_response
from ptav import filters
from ptav.features import FeatureMap
from ptav.filters import (
    ScaleModel,
    SingularFilterError,
    estimate_scale,
    init_scale_model,
    locate,
    make_label,
    respond,
    train_initial,
    update,
)
from ptav.geometry import Frame


class TestLabel:
    @pytest.mark.parametrize("shape", [(1, 1), (7, 9), (16, 16), (5, 12)])
    def test_peak_at_center(self, shape):
        g = make_label(shape, 1 / 16).g
        center = (shape[0] // 2, shape[1] // 2)
        assert g[center] == 1.0
        assert locate(g)[0] == center

    def test_symmetric(self):
        g = make_label((16, 16), 1 / 8).g
        assert g[8 + 2, 8 + 3] == g[8 - 2, 8 - 3]

    def test_sigma(self):
        g = make_label((16, 16), 1 / 16).g  # sigma = 1 cell
        assert g[8, 9] == pytest.approx(np.exp(-0.5), abs=1e-15)

    def test_impulse_limit(self):
        g = make_label((9, 9), 1e-4).g
        assert g[4, 4] == 1.0
        assert np.sum(g) - 1.0 < 1e-100


class TestTrain:
    def test_zero_features(self):
        m = train_initial(np.zeros((6, 6, 2)), make_label((6, 6)))
        assert np.all(m.A == 0) and np.all(m.B == 0)

    def test_matches_dft_oracle(self, rng):
        f = rng.normal(size=(8, 8, 2))
        label = make_label((8, 8), 0.1)
        m = train_initial(f, label)
        A, B = filter_terms(f, label.g)
        np.testing.assert_allclose(m.A, A, atol=1e-8)
        np.testing.assert_allclose(m.B, B, atol=1e-8)
        assert np.all(m.B >= 0)

    def test_shape_mismatch(self):
        with pytest.raises(ValueError):
            train_initial(np.zeros((6, 5, 1)), make_label((6, 6)))

    def test_label_reproduced(self, rng):
        f = rng.normal(size=(10, 12, 1))
        label = make_label((10, 12))
        m = train_initial(f, label, lam=0.0)
        np.testing.assert_allclose(respond(m, f), label.g, atol=1e-6)


class TestUpdate:
    def test_eta_one_is_fresh(self, rng):
        label = make_label((8, 8))
        m = train_initial(rng.normal(size=(8, 8, 3)), label)
        f2 = rng.normal(size=(8, 8, 3))
        fresh = train_initial(f2, label)
        got = update(m, f2, eta=1.0)
        np.testing.assert_allclose(got.A, fresh.A, rtol=0, atol=1e-12)
        np.testing.assert_allclose(got.B, fresh.B, rtol=0, atol=1e-12)

    def test_eta_zero_is_identity(self, rng):
        label = make_label((8, 8))
        m = train_initial(rng.normal(size=(8, 8, 3)), label)
        got = update(m, rng.normal(size=(8, 8, 3)), eta=0.0)
        np.testing.assert_array_equal(got.A, m.A)
        np.testing.assert_array_equal(got.B, m.B)

    def test_fixed_point(self, rng):
        f = rng.normal(size=(8, 8, 2))
        m = train_initial(f, make_label((8, 8)), eta=0.3)
        once = update(m, f)
        twice = update(once, f)
        np.testing.assert_allclose(once.A, m.A, atol=1e-12)
        np.testing.assert_allclose(twice.B, once.B, atol=1e-12)

    def test_denominator_stays_nonnegative(self, rng):
        m = train_initial(rng.normal(size=(6, 6, 2)), make_label((6, 6)), eta=0.4)
        for _ in range(20):
            m = update(m, rng.normal(size=(6, 6, 2)) * rng.uniform(0, 3))
            assert np.all(m.B >= 0)

    def test_returns_new_model(self, rng):
        f = rng.normal(size=(4, 4, 1))
        m = train_initial(f, make_label((4, 4)))
        A0 = m.A.copy()
        update(m, rng.normal(size=(4, 4, 1)))
        np.testing.assert_array_equal(m.A, A0)

    def test_shape_mismatch(self, rng):
        m = train_initial(rng.normal(size=(4, 4, 2)), make_label((4, 4)))
        with pytest.raises(ValueError):
            update(m, rng.normal(size=(4, 4, 3)))


class TestRespond:
    def test_matches_spatial_oracle(self, rng):
        f = rng.normal(size=(9, 7, 3))
        z = rng.normal(size=(9, 7, 3))
        label = make_label((9, 7), 0.1)
        y = respond(train_initial(f, label, lam=0.05), z)
        want = spatial_response(f, label.g, z, 0.05)
        assert np.max(np.abs(want.imag)) < 1e-9
        np.testing.assert_allclose(y, want.real, atol=1e-9)

    def test_zero_input(self, rng):
        m = train_initial(rng.normal(size=(8, 8, 2)), make_label((8, 8)))
        assert np.all(respond(m, np.zeros((8, 8, 2))) == 0.0)

    def test_singular_denominator(self):
        f = np.zeros((4, 4, 1))
        f[0, 0, 0] = 1.0
        f[0, 1, 0] = 1.0  # spectrum 1 + e^{-i w}, zero at the Nyquist column
        m = train_initial(f, make_label((4, 4)), lam=0.0)
        with pytest.raises(SingularFilterError):
            respond(m, f)

    def test_accepts_feature_map(self, rng):
        f = rng.normal(size=(6, 6, 2))
        m = train_initial(FeatureMap(f, 4), make_label((6, 6)))
        np.testing.assert_array_equal(respond(m, FeatureMap(f, 4)), respond(m, f))

    @pytest.mark.parametrize("shift", [(0, 0), (1, 0), (0, -3), (4, 4), (-4, 2), (-2, -4)])
    def test_shift_moves_peak(self, rng, shift):
        f = rng.normal(size=(16, 16, 2))
        m = train_initial(f, make_label((16, 16)))
        y = respond(m, np.roll(f, shift, axis=(0, 1)))
        want = ((8 + shift[0]) % 16, (8 + shift[1]) % 16)
        assert locate(y)[0] == want


class TestLocate:
    def test_single_peak(self):
        y = np.zeros((6, 8))
        y[3, 5] = 1.0
        assert locate(y) == ((3, 5), 1.0)

    def test_constant_tie_break(self):
        assert locate(np.full((4, 4), 0.2))[0] == (0, 0)

    def test_label_peak(self):
        assert locate(make_label((11, 6)).g)[0] == (5, 3)

    def test_empty(self):
        with pytest.raises(ValueError):
            locate(np.zeros((0, 3)))


def _textured_frame(rng, size=160):
    from scipy import ndimage

    img = ndimage.gaussian_filter(rng.random((size, size)), 1.5)
    img = (img - img.min()) / (img.max() - img.min())
    return img


def _zoom_about(img, factor, center):
    """Resample ``img`` so content is magnified by ``factor`` about ``center``."""
    from scipy import ndimage

    rows, cols = np.indices(img.shape, dtype=np.float64)
    cx, cy = center
    src_x = cx + (cols + 0.5 - cx) / factor - 0.5
    src_y = cy + (rows + 0.5 - cy) / factor - 0.5
    return ndimage.map_coordinates(img, [src_y, src_x], order=3, mode="nearest").clip(0, 1)


class TestScale:
    def test_single_level_keeps_scale(self, rng):
        frame = Frame(0, _textured_frame(rng))
        m = init_scale_model(frame, (80, 80), (32, 32), num_scales=1)
        out = estimate_scale(m, frame, (80, 80), (32, 32))
        assert out.current_scale == 1.0 and out.last_level == 0

    def test_self_match_center_level(self, rng):
        frame = Frame(0, _textured_frame(rng))
        m = init_scale_model(frame, (80, 80), (32, 32))
        out = estimate_scale(m, frame, (80, 80), (32, 32))
        assert out.last_level == 0 and out.current_scale == 1.0

    @pytest.mark.parametrize("level", [1, -1, 2])
    def test_zoom_by_step_moves_one_level(self, rng, level):
        img = _textured_frame(rng)
        m = init_scale_model(Frame(0, img), (80, 80), (32, 32), scale_step=1.05)
        zoomed = Frame(1, _zoom_about(img, 1.05**level, (80, 80)))
        # exhaustive oracle: score every level directly
        samples = filters.scale_samples(m, zoomed, (80, 80), (32, 32))
        y = respond(m.filter, samples)
        assert int(m.levels[np.argmax(y)]) == level
        out = estimate_scale(m, zoomed, (80, 80), (32, 32))
        assert out.last_level == level
        assert out.current_scale == pytest.approx(1.05**level)

    def test_scale_bounds_clip(self, rng):
        img = _textured_frame(rng)
        m = init_scale_model(Frame(0, img), (80, 80), (32, 32), scale_step=1.05, max_scale=1.01)
        out = estimate_scale(m, Frame(1, _zoom_about(img, 1.05**2, (80, 80))), (80, 80), (32, 32))
        assert out.current_scale == 1.01

    def test_model_validation(self):
        with pytest.raises(ValueError):
            ScaleModel(num_scales=4, scale_step=1.02, current_scale=1.0, template_shape=(8, 8))
        with pytest.raises(ValueError):
            ScaleModel(num_scales=5, scale_step=1.0, current_scale=1.0, template_shape=(8, 8))
