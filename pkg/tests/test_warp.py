import numpy as np
import pytest

from chromafix import (
    ChannelId,
    InsufficientKeypointsError,
    PipelineConfig,
    PipelineError,
    RgbImage,
    SimilarityTransform,
    correct_image,
    warp_channel,
)


class TestWarpChannel:
    def test_identity_exact(self, rng):
        field = rng.uniform(size=(20, 25))
        out = warp_channel(field, SimilarityTransform.identity())
        assert np.array_equal(out, field)

    def test_unit_shift_samples_neighbour(self, rng):
        field = rng.uniform(size=(16, 16))
        out = warp_channel(field, SimilarityTransform(sigma=1.0, tx=1.0, ty=0.0))
        # output(x) = field(x + 1); last column clamps to the edge
        assert np.allclose(out[:, :-1], field[:, 1:])
        assert np.allclose(out[:, -1], field[:, -1])

    def test_pure_scale_on_ramp(self):
        # linear ramp along x: warp with sigma=2 doubles the slope until clamp
        field = np.tile(np.linspace(0.0, 1.0, 32), (8, 1)) * 0.5
        out = warp_channel(field, SimilarityTransform(sigma=2.0, tx=0.0, ty=0.0))
        xs = np.arange(32)
        expected = np.minimum(2 * xs, 31) / 31.0 * 0.5
        assert np.allclose(out[4], expected, atol=1e-12)

    def test_fractional_translation_is_bilinear(self, rng):
        field = rng.uniform(size=(12, 12))
        out = warp_channel(field, SimilarityTransform(sigma=1.0, tx=0.5, ty=0.0))
        interior = 0.5 * (field[:, 3:5].sum(axis=1))
        assert np.allclose(out[:, 3], interior)

    def test_output_clipped_to_unit_range(self):
        field = np.ones((10, 10))
        out = warp_channel(field, SimilarityTransform(sigma=1.001, tx=0.3, ty=0.3))
        assert out.min() >= 0.0 and out.max() <= 1.0

    def test_inverse_round_trip_interior(self, rng):
        # warp then inverse-warp: interior pixels of a smooth field survive
        from scipy import ndimage

        field = ndimage.gaussian_filter(rng.uniform(size=(64, 64)), 5.0)
        t = SimilarityTransform(sigma=1.01, tx=1.5, ty=-1.0)
        back = warp_channel(warp_channel(field, t), t.inverse())
        # two bilinear resamplings leave only interpolation smoothing error
        assert np.allclose(back[16:-16, 16:-16], field[16:-16, 16:-16], atol=2e-3)


class TestCorrectImage:
    def test_aligned_image_near_identity_fits(self, texture_256):
        cfg = PipelineConfig(search_radius=3)
        result = correct_image(texture_256, cfg)
        for rep in result.fits.values():
            assert abs(rep.transform.sigma - 1.0) <= 0.002
            assert np.hypot(rep.transform.tx, rep.transform.ty) <= 0.5

    def test_reference_channel_untouched(self, texture_256):
        cfg = PipelineConfig(search_radius=3)
        result = correct_image(texture_256, cfg)
        ref = cfg.reference
        assert np.array_equal(
            result.corrected.channel(ref), texture_256.channel(ref)
        )

    def test_output_in_unit_range(self, texture_256):
        result = correct_image(texture_256, PipelineConfig(search_radius=3))
        assert result.corrected.channels.min() >= 0.0
        assert result.corrected.channels.max() <= 1.0

    def test_flat_image_fails_in_keypoint_stage(self):
        img = RgbImage(np.full((3, 128, 128), 0.5))
        with pytest.raises(InsufficientKeypointsError) as exc_info:
            correct_image(img, PipelineConfig())
        assert exc_info.value.stage == "keypoints"

    def test_stage_attached_to_pipeline_errors(self, texture_256):
        # an impossible prune threshold fails in the prune stage
        cfg = PipelineConfig(search_radius=3, l_max=1e-15)
        with pytest.raises(PipelineError) as exc_info:
            correct_image(texture_256, cfg)
        assert exc_info.value.stage == "prune"

    def test_deterministic_across_runs_and_workers(self, texture_256):
        cfg = PipelineConfig(search_radius=3)
        a = correct_image(texture_256, cfg)
        b = correct_image(texture_256, cfg)
        c = correct_image(texture_256, cfg, workers=4)
        assert np.array_equal(a.corrected.channels, b.corrected.channels)
        assert np.array_equal(a.corrected.channels, c.corrected.channels)
        assert a.fits == b.fits == c.fits

    def test_diagnostics_populated(self, texture_256):
        cfg = PipelineConfig(search_radius=3)
        result = correct_image(texture_256, cfg)
        d = result.diagnostics
        assert d["keypoint_count"] == cfg.keypoint_count
        assert 2 <= d["pruned_count"] <= d["match_count"] <= d["keypoint_count"]
        assert d["mean_post_l"] <= cfg.l_max

    def test_json_dict_shape(self, texture_256):
        result = correct_image(texture_256, PipelineConfig(search_radius=3))
        d = result.to_json_dict()
        assert set(d) == {"channels", "matches", "diagnostics"}
        assert set(d["channels"]) == {"red", "blue"}
        for m in d["matches"]:
            assert set(m) == {"x", "y", "dgx", "dgy", "dbx", "dby", "pre_l", "post_l"}
