import math

import numpy as np
import pytest

from gazekit.core import Fixation, Geometry, RasterImage, SaliencyMap, ShapeError
from gazekit.render import (
    RenderConfig,
    apply_attention,
    display_to_output,
    render_saliency,
    sigma_from_geometry,
)


def small_config(sigma=8.0, display=(64, 48), out=None, truncation=4.0):
    return RenderConfig(sigma_px=sigma, display_resolution=display,
                        output_size=out or display, truncation_radius=truncation)


class TestSigmaFromGeometry:
    def test_reference_setup_lands_near_75(self):
        g = Geometry(600.0, 530.0, 1920, 1080, foveal_angle_deg=2.0)
        assert abs(sigma_from_geometry(g) - 75.0) <= 2.0

    def test_zero_angle_gives_zero_and_is_rejected_by_render_config(self):
        g = Geometry(600.0, 530.0, 1920, 1080, foveal_angle_deg=0.0)
        assert sigma_from_geometry(g) == 0.0
        with pytest.raises(ValueError):
            RenderConfig(sigma_px=0.0, display_resolution=(8, 8), output_size=(8, 8))

    def test_half_resolution_halves_sigma(self):
        g = Geometry(600.0, 530.0, 960, 540, foveal_angle_deg=2.0)
        expected = math.tan(math.radians(2.0)) * 600.0 * (960 / 530.0)
        assert sigma_from_geometry(g) == pytest.approx(expected, rel=1e-12)
        assert sigma_from_geometry(g) == pytest.approx(38.0, abs=0.2)


class TestRenderSaliency:
    def test_single_fixation_gaussian_profile(self):
        sigma = 8.0
        config = small_config(sigma=sigma, display=(64, 64), truncation=None)
        saliency = render_saliency([Fixation(32.0, 32.0, 100.0)], config)
        peak = saliency.values[32, 32]
        assert np.unravel_index(np.argmax(saliency.values), saliency.values.shape) == (32, 32)
        at_sigma = saliency.values[32, 32 + int(sigma)]
        assert at_sigma / peak == pytest.approx(math.exp(-0.5), rel=1e-3)
        assert peak == pytest.approx(100.0, rel=1e-12)

    def test_mirror_symmetric_fixations_give_flip_symmetric_map(self):
        config = RenderConfig(sigma_px=6.0, display_resolution=(60, 40),
                              output_size=(30, 20))
        fixations = [Fixation(20.0, 18.0, 250.0), Fixation(39.0, 18.0, 250.0)]
        saliency = render_saliency(fixations, config)
        assert np.allclose(saliency.values, saliency.values[:, ::-1], atol=1e-6)

    def test_duration_linearity_is_exact(self):
        rng = np.random.default_rng(5)
        fixations = [Fixation(rng.uniform(0, 63), rng.uniform(0, 47), rng.uniform(50, 500))
                     for _ in range(6)]
        doubled = [Fixation(f.x, f.y, 2.0 * f.duration_ms) for f in fixations]
        config = small_config()
        once = render_saliency(fixations, config)
        twice = render_saliency(doubled, config)
        assert np.array_equal(twice.values, 2.0 * once.values)

    def test_permutation_invariance(self):
        fixations = [Fixation(10.0, 10.0, 100.0), Fixation(40.0, 30.0, 200.0),
                     Fixation(25.0, 20.0, 50.0)]
        config = small_config()
        forward = render_saliency(fixations, config)
        backward = render_saliency(fixations[::-1], config)
        assert np.allclose(forward.values, backward.values, rtol=1e-12, atol=1e-12)

    def test_additivity(self):
        rng = np.random.default_rng(9)
        group_a = [Fixation(rng.uniform(0, 63), rng.uniform(0, 47), rng.uniform(50, 300))
                   for _ in range(4)]
        group_b = [Fixation(rng.uniform(0, 63), rng.uniform(0, 47), rng.uniform(50, 300))
                   for _ in range(3)]
        config = small_config()
        combined = render_saliency(group_a + group_b, config)
        separate = render_saliency(group_a, config).values + render_saliency(group_b, config).values
        assert np.allclose(combined.values, separate, rtol=1e-9, atol=1e-9)

    def test_empty_fixations_flagged_all_zero(self):
        saliency = render_saliency([], small_config())
        assert saliency.is_all_zero

    def test_argmax_lands_near_fixation_after_resampling(self):
        config = RenderConfig(sigma_px=10.0, display_resolution=(128, 96),
                              output_size=(64, 48))
        fix = Fixation(77.0, 41.0, 100.0)
        saliency = render_saliency([fix], config)
        peak_y, peak_x = np.unravel_index(np.argmax(saliency.values), saliency.values.shape)
        expect_x, expect_y = display_to_output(config, fix.x, fix.y)
        assert abs(peak_x - expect_x) <= 1.0
        assert abs(peak_y - expect_y) <= 1.0

    def test_truncation_only_trims_far_tail(self):
        config_exact = small_config(sigma=5.0, display=(64, 64), truncation=None)
        config_trunc = small_config(sigma=5.0, display=(64, 64), truncation=4.0)
        fix = [Fixation(32.0, 32.0, 100.0)]
        exact = render_saliency(fix, config_exact).values
        truncated = render_saliency(fix, config_trunc).values
        assert truncated[32, 32] == exact[32, 32]
        # beyond 4 sigma the truncated map is exactly zero
        assert truncated[32, 32 + 21] == 0.0
        assert exact[32, 32 + 21] > 0.0
        assert np.max(np.abs(exact - truncated)) <= math.exp(-8.0) * 100.0


class TestApplyAttention:
    def test_uniform_map_is_identity(self):
        rng = np.random.default_rng(2)
        image = RasterImage(values=rng.random((5, 7, 3)))
        saliency = SaliencyMap(values=np.full((5, 7), 3.5))
        out = apply_attention(image, saliency)
        assert np.array_equal(out.values, image.values)

    def test_zero_map_blanks_image_with_warning(self):
        image = RasterImage(values=np.ones((4, 4)))
        saliency = SaliencyMap(values=np.zeros((4, 4)))
        with pytest.warns(UserWarning):
            out = apply_attention(image, saliency)
        assert not np.any(out.values)

    def test_hand_computed_weighting(self):
        image = RasterImage(values=np.ones((1, 3)))
        saliency = SaliencyMap(values=np.array([[1.0, 2.0, 4.0]]))
        out = apply_attention(image, saliency)
        assert out.values.tolist() == [[0.25, 0.5, 1.0]]

    def test_dimension_mismatch(self):
        with pytest.raises(ShapeError):
            apply_attention(RasterImage(values=np.ones((2, 2))),
                            SaliencyMap(values=np.ones((3, 3))))

    def test_idempotent_for_binary_maps(self):
        rng = np.random.default_rng(3)
        image = RasterImage(values=rng.random((6, 6)))
        mask = np.zeros((6, 6))
        mask[1:4, 2:5] = 7.0  # zeros and a single positive level
        saliency = SaliencyMap(values=mask)
        once = apply_attention(image, saliency)
        again = apply_attention(once, saliency)
        assert np.array_equal(once.values, again.values)
