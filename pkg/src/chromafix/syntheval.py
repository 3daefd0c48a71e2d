"""Synthetic aberration generation and ground-truth evaluation."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .collinearity import l_map, moving_channels
from .config import PipelineConfig
from .errors import ImageSizeError
from .image import ChannelId, RgbImage, gradient_magnitude
from .keypoints import gradient_threshold
from .transform import FitReport, SimilarityTransform
from .warp import CorrectionResult, correct_image, warp_channel

SIGMA_MIN, SIGMA_MAX = 0.9, 1.1  # generator sanity range


@dataclass(frozen=True)
class AberrationSpec:
    """Ground-truth per-channel transforms used to displace the moving channels."""

    transforms: dict[ChannelId, SimilarityTransform]
    reference: ChannelId = ChannelId.GREEN

    def __post_init__(self):
        expected = set(moving_channels(self.reference))
        if set(self.transforms) != expected:
            raise ValueError(
                f"spec must carry transforms for exactly {sorted(c.label for c in expected)}"
            )
        for cid, t in self.transforms.items():
            if not SIGMA_MIN <= t.sigma <= SIGMA_MAX:
                raise ValueError(
                    f"{cid.label} sigma {t.sigma} outside [{SIGMA_MIN}, {SIGMA_MAX}]"
                )

    def to_json_dict(self) -> dict:
        return {
            "reference": self.reference.label,
            **{
                cid.label: {"sigma": t.sigma, "tx": t.tx, "ty": t.ty}
                for cid, t in sorted(self.transforms.items())
            },
        }


@dataclass(frozen=True)
class EvalReport:
    psnr_before_db: float
    psnr_after_db: float
    mean_l_before: float
    mean_l_after: float
    transform_errors: dict[ChannelId, tuple[float, float]]  # (|dsigma|, |dt|)
    fits: dict[ChannelId, FitReport]


def synthesize_aberration(image: RgbImage, spec: AberrationSpec) -> RgbImage:
    """Displace each moving channel through the inverse of its spec transform.

    Correcting the result should then recover the spec transforms
    themselves, since correction pulls each channel back through the fit.
    """
    out = image
    for cid, t in spec.transforms.items():
        out = out.with_channel(cid, warp_channel(image.channel(cid), t.inverse()))
    return out


def psnr(a: RgbImage, b: RgbImage, border_crop: int = 16) -> float:
    """Peak signal-to-noise ratio in dB over all channels, border excluded.

    Returns math.inf for identical images.
    """
    if (a.height, a.width) != (b.height, b.width):
        raise ImageSizeError("images must share dimensions")
    c = border_crop
    if 2 * c >= a.height or 2 * c >= a.width:
        raise ImageSizeError("border_crop leaves no pixels")
    da = a.channels[:, c : a.height - c, c : a.width - c]
    db = b.channels[:, c : b.height - c, c : b.width - c]
    mse = float(np.mean((da - db) ** 2))
    if mse == 0.0:
        return math.inf
    return 10.0 * math.log10(1.0 / mse)


def mean_l(image: RgbImage, radius: int = 7, grad_percentile: float = 60.0) -> float:
    """Mean defined metric over high-gradient pixels (the keypoint-eligible set)."""
    lm = l_map(image, radius)
    grad = gradient_magnitude(image)
    threshold = gradient_threshold(grad, grad_percentile)
    select = lm.defined & (grad >= threshold)
    if not select.any():
        raise ImageSizeError("no defined metric values above the gradient percentile")
    return float(lm.values[select].mean())


def evaluate_case(
    original: RgbImage,
    spec: AberrationSpec,
    cfg: PipelineConfig,
    workers: int | None = None,
) -> tuple[EvalReport, CorrectionResult]:
    """Aberrate, correct, and score one ground-truth case."""
    aberrated = synthesize_aberration(original, spec)
    result = correct_image(aberrated, cfg, workers=workers)
    errors = {}
    for cid, t_true in spec.transforms.items():
        t_est = result.fits[cid].transform
        errors[cid] = (
            abs(t_est.sigma - t_true.sigma),
            math.hypot(t_est.tx - t_true.tx, t_est.ty - t_true.ty),
        )
    report = EvalReport(
        psnr_before_db=psnr(aberrated, original, cfg.border_crop),
        psnr_after_db=psnr(result.corrected, original, cfg.border_crop),
        mean_l_before=mean_l(aberrated, cfg.window_radius, cfg.grad_percentile),
        mean_l_after=mean_l(result.corrected, cfg.window_radius, cfg.grad_percentile),
        transform_errors=errors,
        fits=result.fits,
    )
    return report, result


def default_sweep(reference: ChannelId = ChannelId.GREEN) -> list[AberrationSpec]:
    """Nine representative cases: scale x translation grid on the first moving
    channel, a fixed non-identity displacement on the second."""
    first, second = moving_channels(reference)
    fixed_second = SimilarityTransform(sigma=1.002, tx=-1.5, ty=1.0)
    specs = []
    for sigma in (0.996, 1.0, 1.004):
        for t in (-2.5, 0.0, 2.5):
            specs.append(
                AberrationSpec(
                    transforms={
                        first: SimilarityTransform(sigma=sigma, tx=t, ty=t),
                        second: fixed_second,
                    },
                    reference=reference,
                )
            )
    return specs


def write_sweep_csv(path, specs, reports, reference: ChannelId = ChannelId.GREEN) -> None:
    """One row per case: true and recovered parameters, errors, quality scores."""
    first, second = moving_channels(reference)
    header = ["case"]
    for tag, cid in (("first", first), ("second", second)):
        header += [
            f"{tag}_sigma_true", f"{tag}_tx_true", f"{tag}_ty_true",
            f"{tag}_sigma_est", f"{tag}_tx_est", f"{tag}_ty_est",
            f"{tag}_sigma_err", f"{tag}_t_err",
        ]
    header += ["psnr_before_db", "psnr_after_db", "mean_l_before", "mean_l_after"]
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for i, (spec, rep) in enumerate(zip(specs, reports)):
            row = [i]
            for cid in (first, second):
                t_true = spec.transforms[cid]
                t_est = rep.fits[cid].transform
                ds, dt = rep.transform_errors[cid]
                row += [
                    t_true.sigma, t_true.tx, t_true.ty,
                    t_est.sigma, t_est.tx, t_est.ty, ds, dt,
                ]
            row += [rep.psnr_before_db, rep.psnr_after_db, rep.mean_l_before, rep.mean_l_after]
            writer.writerow(row)


def make_test_image(width: int = 512, height: int = 512, seed: int = 0) -> RgbImage:
    """Procedural test texture built to follow the colour-lines model.

    A multi-octave mixing field blends two slowly varying palette colours,
    so every aligned neighbourhood sits on a line in RGB space while any
    channel misalignment lifts it off that line. The field's isocontours
    are curved and non-repeating, which avoids both the straight-edge
    aperture ambiguity and self-similar false matches. A few geometric
    shapes are stamped into the mixing field for hard edges, and a touch
    of independent per-channel grain keeps flat windows from passing the
    pruning threshold at a random disparity.
    """
    rng = np.random.default_rng(seed)

    mix = np.zeros((height, width))
    for scale, weight in ((16.0, 1.0), (8.0, 0.7), (4.0, 0.5), (2.0, 0.35)):
        octave = ndimage.gaussian_filter(rng.standard_normal((height, width)), scale)
        mix += weight * octave / octave.std()
    mix /= np.abs(mix).max()
    mix = 1.0 / (1.0 + np.exp(-9.0 * mix))  # plateaus with curved transitions

    n_shapes = max(12, (width * height) // 6000)
    ys, xs = np.mgrid[0:height, 0:width]
    for _ in range(n_shapes):
        level = rng.random()
        cx = rng.uniform(0, width)
        cy = rng.uniform(0, height)
        size = rng.uniform(3.0, max(6.0, 0.04 * min(width, height)))
        if rng.random() < 0.4:
            mask = (np.abs(xs - cx) < size) & (np.abs(ys - cy) < size * rng.uniform(0.5, 1.5))
        else:
            mask = (xs - cx) ** 2 + (ys - cy) ** 2 < size**2
        mix[mask] = level
    mix = ndimage.gaussian_filter(mix, 0.8)

    dark = np.empty((3, height, width))
    light = np.empty((3, height, width))
    for c in range(3):
        for pal, lo, span in ((dark, 0.08, 0.34), (light, 0.55, 0.37)):
            field = ndimage.gaussian_filter(rng.standard_normal((height, width)), 64.0)
            field = (field - field.min()) / np.ptp(field)
            pal[c] = lo + span * field

    chans = mix[None, :, :] * light + (1.0 - mix[None, :, :]) * dark
    for c in range(3):
        chans[c] += 0.002 * rng.standard_normal((height, width))
    return RgbImage(np.clip(chans, 0.02, 0.98))
