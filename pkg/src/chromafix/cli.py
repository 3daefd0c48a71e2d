"""Batch command-line interface: correct, aberrate, lmap, keypoints, evaluate.

Exit codes: 0 success, 1 usage/IO/config problems, 2 pipeline failures.
Human-readable summaries go to stdout; machine-readable data only to
explicitly named output files.
"""

from __future__ import annotations

import argparse
import json
import sys

import cv2
import numpy as np

from . import __version__
from .collinearity import l_map, lmap_to_image, moving_channels
from .config import PipelineConfig, load_config
from .errors import ChromaFixError, PipelineError
from .image import ChannelId, RgbImage, gradient_magnitude, load_image, saturation_mask, save_image
from .keypoints import KeypointConfig, candidate_mask, gradient_threshold, select_keypoints
from .syntheval import (
    AberrationSpec,
    default_sweep,
    evaluate_case,
    synthesize_aberration,
    write_sweep_csv,
)
from .transform import SimilarityTransform
from .warp import correct_image


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _UsageError(message)


def _bool_flag(value: str) -> bool:
    low = value.lower()
    if low in ("true", "1", "yes", "on"):
        return True
    if low in ("false", "0", "no", "off"):
        return False
    raise argparse.ArgumentTypeError(f"expected true/false, got {value!r}")


_CONFIG_FLAGS = [
    ("reference", str, "reference channel: red, green, or blue"),
    ("window_radius", int, "neighbourhood radius for the metric window"),
    ("search_radius", int, "maximum absolute disparity per axis"),
    ("joint_search", _bool_flag, "joint 4D search (true) or sequential per-channel (false)"),
    ("keypoint_count", int, "number of keypoints to select"),
    ("cell_grid", int, "stratification grid dimension"),
    ("grad_percentile", float, "gradient-threshold percentile over nonzero magnitudes"),
    ("sat_threshold", float, "intensity at or above which a pixel counts as saturated"),
    ("sat_dilation", int, "Chebyshev radius of saturation dilation"),
    ("l_max", float, "pruning threshold on the post-alignment metric"),
    ("use_l_weighting", _bool_flag, "weight keypoint sampling by the local metric"),
    ("seed", int, "RNG seed for keypoint sampling"),
    ("border_crop", int, "border frame excluded from PSNR"),
]


def _add_config_flags(parser):
    parser.add_argument("--config", help="JSON config file")
    for name, typ, help_text in _CONFIG_FLAGS:
        parser.add_argument(f"--{name.replace('_', '-')}", type=typ, default=None,
                            dest=name, help=help_text)
    parser.add_argument("--workers", type=int, default=None,
                        help="threads for the disparity search")


def _config_from_args(args) -> PipelineConfig:
    overrides = {name: getattr(args, name) for name, _, _ in _CONFIG_FLAGS}
    return load_config(args.config, overrides)


def _build_parser() -> _Parser:
    parser = _Parser(prog="chromafix",
                     description="Correct lateral chromatic aberration in a single photograph.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("correct", help="correct an aberrated image")
    p.add_argument("input")
    p.add_argument("output")
    p.add_argument("--report", help="write the correction report as JSON")
    p.add_argument("--overlay", help="write a debug overlay with keypoints and disparity arrows")
    _add_config_flags(p)

    p = sub.add_parser("aberrate", help="synthesize a known aberration")
    p.add_argument("input")
    p.add_argument("output")
    for suffix in ("g", "b"):
        p.add_argument(f"--sigma-{suffix}", type=float, default=1.0)
        p.add_argument(f"--tx-{suffix}", type=float, default=0.0)
        p.add_argument(f"--ty-{suffix}", type=float, default=0.0)
    p.add_argument("--reference", type=str, default="green")

    p = sub.add_parser("lmap", help="write the per-pixel metric map as a grayscale image")
    p.add_argument("input")
    p.add_argument("output")
    p.add_argument("--radius", type=int, default=7)
    p.add_argument("--debug-color", action="store_true",
                   help="render undefined pixels magenta")

    p = sub.add_parser("keypoints", help="write a keypoint overlay image and JSON list")
    p.add_argument("input")
    p.add_argument("overlay_output")
    p.add_argument("--json", dest="json_output", help="write keypoints as JSON")
    _add_config_flags(p)

    p = sub.add_parser("evaluate", help="run a ground-truth sweep and write a CSV summary")
    p.add_argument("input_original")
    p.add_argument("csv_output")
    p.add_argument("--sweep", help="JSON file with a list of aberration specs")
    _add_config_flags(p)
    return parser


def _to_u8(image: RgbImage) -> np.ndarray:
    return np.rint(np.moveaxis(image.channels, 0, 2) * 255.0).astype(np.uint8)


def _save_overlay(image: RgbImage, matches_or_kps, path, arrows: bool) -> None:
    canvas = np.ascontiguousarray(_to_u8(image)[:, :, ::-1])  # BGR for cv2 drawing
    for item in matches_or_kps:
        kp = item.keypoint if arrows else item
        cv2.drawMarker(canvas, (kp.x, kp.y), (0, 255, 255),
                       markerType=cv2.MARKER_CROSS, markerSize=11, thickness=1)
        if arrows:
            for d, colour in ((item.d_first, (255, 0, 255)), (item.d_second, (0, 128, 255))):
                tip = (kp.x + 4 * d[0], kp.y + 4 * d[1])  # exaggerated for visibility
                cv2.arrowedLine(canvas, (kp.x, kp.y), tip, colour, 1, tipLength=0.3)
    if not cv2.imwrite(str(path), canvas):
        raise OSError(f"could not write overlay: {path}")


def _write_json(data, path) -> None:
    with open(path, "w") as fh:
        json.dump(data, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _run_correct(args) -> int:
    cfg = _config_from_args(args)
    image = load_image(args.input)
    result = correct_image(image, cfg, workers=args.workers)
    save_image(result.corrected, args.output)
    for cid in moving_channels(cfg.reference):
        rep = result.fits[cid]
        t = rep.transform
        print(
            f"{cid.label}: sigma={t.sigma:.6f} t=({t.tx:.3f}, {t.ty:.3f}) "
            f"rms={rep.rms_residual:.3f}px points={rep.n_points} "
            f"matches={result.diagnostics['match_count']}/"
            f"{result.diagnostics['keypoint_count']}"
        )
    if args.report:
        _write_json(result.to_json_dict(), args.report)
    if args.overlay:
        _save_overlay(result.corrected, result.matches, args.overlay, arrows=True)
    return 0


def _run_aberrate(args) -> int:
    image = load_image(args.input)
    reference = ChannelId.parse(args.reference)
    first, second = moving_channels(reference)
    spec = AberrationSpec(
        transforms={
            first: SimilarityTransform(args.sigma_g, args.tx_g, args.ty_g),
            second: SimilarityTransform(args.sigma_b, args.tx_b, args.ty_b),
        },
        reference=reference,
    )
    save_image(synthesize_aberration(image, spec), args.output)
    print(json.dumps(spec.to_json_dict(), sort_keys=True))
    return 0


def _run_lmap(args) -> int:
    image = load_image(args.input)
    lm = l_map(image, args.radius)
    save_image(lmap_to_image(lm, debug_color=args.debug_color), args.output)
    defined = lm.defined.sum()
    mean = lm.values[lm.defined].mean() if defined else float("nan")
    print(f"defined={defined} mean_l={mean:.6f}")
    return 0


def _run_keypoints(args) -> int:
    cfg = _config_from_args(args)
    image = load_image(args.input)
    grad = gradient_magnitude(image)
    sat = saturation_mask(image, cfg.sat_threshold, cfg.resolved_sat_dilation())
    threshold = gradient_threshold(grad, cfg.grad_percentile)
    cand = candidate_mask(grad, sat, threshold, cfg.margin())
    kp_cfg = KeypointConfig(
        count=cfg.keypoint_count,
        grad_threshold=threshold,
        use_l_weighting=cfg.use_l_weighting,
        cell_grid=cfg.cell_grid,
        seed=cfg.seed,
    )
    kps = select_keypoints(image, grad, cand, kp_cfg, cfg.window_radius, cfg.reference)
    _save_overlay(image, kps, args.overlay_output, arrows=False)
    if args.json_output:
        _write_json([kp.to_json_dict() for kp in kps], args.json_output)
    print(f"keypoints={len(kps)}")
    return 0


def _parse_sweep(path, reference: ChannelId) -> list[AberrationSpec]:
    with open(path) as fh:
        raw = json.load(fh)
    if not isinstance(raw, list):
        raise ValueError("sweep file must hold a JSON list of specs")
    first, second = moving_channels(reference)
    specs = []
    for entry in raw:
        specs.append(
            AberrationSpec(
                transforms={
                    cid: SimilarityTransform(
                        entry[cid.label]["sigma"], entry[cid.label]["tx"], entry[cid.label]["ty"]
                    )
                    for cid in (first, second)
                },
                reference=reference,
            )
        )
    return specs


def _run_evaluate(args) -> int:
    cfg = _config_from_args(args)
    original = load_image(args.input_original)
    if args.sweep:
        specs = _parse_sweep(args.sweep, cfg.reference)
    else:
        specs = default_sweep(cfg.reference)
    reports = []
    for i, spec in enumerate(specs):
        report, _ = evaluate_case(original, spec, cfg, workers=args.workers)
        reports.append(report)
        print(
            f"case {i}: psnr {report.psnr_before_db:.2f} -> {report.psnr_after_db:.2f} dB, "
            f"mean_l {report.mean_l_before:.4f} -> {report.mean_l_after:.4f}"
        )
    write_sweep_csv(args.csv_output, specs, reports, cfg.reference)
    return 0


_RUNNERS = {
    "correct": _run_correct,
    "aberrate": _run_aberrate,
    "lmap": _run_lmap,
    "keypoints": _run_keypoints,
    "evaluate": _run_evaluate,
}


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except _UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    try:
        return _RUNNERS[args.command](args)
    except PipelineError as exc:
        stage = exc.stage or "pipeline"
        print(f"error in {stage} stage: {exc}", file=sys.stderr)
        return 2
    except (ChromaFixError, OSError, ValueError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def entrypoint() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entrypoint()
