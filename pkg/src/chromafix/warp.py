"""Channel resampling and the end-to-end correction pipeline."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .collinearity import moving_channels
from .config import PipelineConfig, validate
from .disparity import DisparityMatch, SearchConfig, match_all
from .errors import PipelineError
from .image import ChannelId, RgbImage, bilinear_sample, gradient_magnitude, saturation_mask
from .keypoints import KeypointConfig, candidate_mask, gradient_threshold, select_keypoints
from .transform import FitReport, SimilarityTransform, fit_channels, prune_matches


def warp_channel(channel: np.ndarray, transform: SimilarityTransform) -> np.ndarray:
    """Pull-back resampling: output(p) = channel(sigma * p + t), bilinear, clamped.

    The transform maps reference coordinates into the moving channel's
    coordinates, so it is applied directly (no inversion here).
    """
    h, w = channel.shape
    xs, ys = np.meshgrid(np.arange(w, dtype=np.float64), np.arange(h, dtype=np.float64))
    mx, my = transform.apply(xs, ys)
    out = bilinear_sample(channel, mx, my)
    return np.clip(out, 0.0, 1.0)


@dataclass(frozen=True)
class CorrectionResult:
    corrected: RgbImage
    fits: dict[ChannelId, FitReport]
    matches: list[DisparityMatch]
    diagnostics: dict = field(default_factory=dict)

    def to_json_dict(self) -> dict:
        return {
            "channels": {cid.label: rep.to_json_dict() for cid, rep in self.fits.items()},
            "matches": [m.to_json_dict() for m in self.matches],
            "diagnostics": self.diagnostics,
        }


def _stage(name):
    """Attach the stage name to pipeline errors escaping a block."""

    class _Ctx:
        def __enter__(self):
            return self

        def __exit__(self, exc_type, exc, tb):
            if isinstance(exc, PipelineError) and exc.stage is None:
                exc.stage = name
            return False

    return _Ctx()


def correct_image(image: RgbImage, cfg: PipelineConfig, workers: int | None = None) -> CorrectionResult:
    """Full pipeline: keypoints, disparity search, prune, fit, resample.

    The reference channel is copied through untouched. Deterministic for a
    fixed cfg.seed, including when `workers` enables threaded search.
    """
    validate(cfg)
    grad = gradient_magnitude(image)
    sat = saturation_mask(image, cfg.sat_threshold, cfg.resolved_sat_dilation())
    threshold = gradient_threshold(grad, cfg.grad_percentile)

    with _stage("keypoints"):
        cand = candidate_mask(grad, sat, threshold, cfg.margin())
        kp_cfg = KeypointConfig(
            count=cfg.keypoint_count,
            grad_threshold=threshold,
            use_l_weighting=cfg.use_l_weighting,
            cell_grid=cfg.cell_grid,
            seed=cfg.seed,
        )
        kps = select_keypoints(image, grad, cand, kp_cfg, cfg.window_radius, cfg.reference)

    with _stage("disparity"):
        search_cfg = SearchConfig(
            radius_px=cfg.search_radius,
            window_radius=cfg.window_radius,
            joint=cfg.joint_search,
        )
        matches = match_all(image, kps, search_cfg, cfg.reference, workers=workers)

    with _stage("prune"):
        pruned = prune_matches(matches, cfg.l_max)

    with _stage("fit"):
        fits = fit_channels(pruned, cfg.reference)

    corrected = image
    for cid in moving_channels(cfg.reference):
        corrected = corrected.with_channel(
            cid, warp_channel(image.channel(cid), fits[cid].transform)
        )

    pre_ls = [kp.pre_l for kp in kps if kp.pre_l is not None]
    post_ls = [m.post_l for m in pruned]
    diagnostics = {
        "grad_threshold": float(threshold),
        "keypoint_count": len(kps),
        "match_count": len(matches),
        "pruned_count": len(pruned),
        "mean_pre_l": float(np.mean(pre_ls)) if pre_ls else None,
        "mean_post_l": float(np.mean(post_ls)) if post_ls else None,
    }
    return CorrectionResult(
        corrected=corrected, fits=fits, matches=pruned, diagnostics=diagnostics
    )
