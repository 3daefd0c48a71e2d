"""Keypoint selection: high-gradient, unsaturated pixels, stratified over a grid."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .collinearity import l_at
from .errors import InsufficientKeypointsError
from .image import ChannelId, RgbImage

DEFAULT_GRAD_PERCENTILE = 60.0


@dataclass(frozen=True)
class Keypoint:
    x: int
    y: int
    grad: float
    pre_l: float | None  # zero-disparity metric at the pixel

    def to_json_dict(self) -> dict:
        return {"x": self.x, "y": self.y, "grad": self.grad, "pre_l": self.pre_l}


@dataclass(frozen=True)
class KeypointConfig:
    count: int = 24
    grad_threshold: float = 0.0
    use_l_weighting: bool = False
    cell_grid: int = 4
    seed: int = 0

    def __post_init__(self):
        if self.count < 2:
            raise ValueError("count must be >= 2 (two keypoints pin 3 DoF)")
        if self.cell_grid < 1:
            raise ValueError("cell_grid must be >= 1")


def gradient_threshold(grad: np.ndarray, percentile: float = DEFAULT_GRAD_PERCENTILE) -> float:
    """Percentile of the nonzero gradient magnitudes (adapts to image contrast)."""
    nonzero = grad[grad > 0.0]
    if nonzero.size == 0:
        return np.inf
    return float(np.percentile(nonzero, percentile))


def candidate_mask(grad: np.ndarray, sat: np.ndarray, grad_threshold: float, margin: int) -> np.ndarray:
    """Usable pixels: strong gradient, saturation-free, margin away from borders."""
    if grad.shape != sat.shape:
        raise ValueError("gradient and saturation fields must share dimensions")
    h, w = grad.shape
    mask = (grad >= grad_threshold) & sat
    border = np.zeros_like(mask)
    if 2 * margin < h and 2 * margin < w:
        border[margin : h - margin, margin : w - margin] = True
    return mask & border


def _weighted_draw(rng: np.random.Generator, weights: np.ndarray) -> int:
    total = weights.sum()
    if total <= 0.0:
        return int(rng.integers(len(weights)))
    return int(rng.choice(len(weights), p=weights / total))


def select_keypoints(
    image: RgbImage,
    grad: np.ndarray,
    candidates: np.ndarray,
    cfg: KeypointConfig,
    window_radius: int = 7,
    reference: ChannelId = ChannelId.GREEN,
) -> list[Keypoint]:
    """Draw up to cfg.count keypoints, round-robin over grid cells.

    Within a cell, candidates are drawn with probability proportional to
    gradient magnitude (times the local metric when cfg.use_l_weighting).
    Deterministic for a fixed seed; stops early when candidates run out.
    """
    ys, xs = np.nonzero(candidates)
    if len(xs) < 2:
        raise InsufficientKeypointsError(
            f"only {len(xs)} keypoint candidates (need at least 2)", stage="keypoints"
        )
    h, w = candidates.shape
    g = cfg.cell_grid
    cell_ids = (ys * g // h) * g + (xs * g // w)

    cells: dict[int, dict] = {}
    for cid in range(g * g):
        sel = cell_ids == cid
        if not sel.any():
            continue
        cx, cy = xs[sel], ys[sel]
        weights = grad[cy, cx].astype(np.float64)
        if cfg.use_l_weighting:
            for i in range(len(cx)):
                lv = l_at(image, int(cx[i]), int(cy[i]), window_radius,
                          (0, 0), (0, 0), reference)
                weights[i] *= 0.0 if lv is None else lv
        cells[cid] = {"x": list(cx), "y": list(cy), "w": list(weights)}

    rng = np.random.default_rng(cfg.seed)
    picked: list[tuple[int, int]] = []
    while len(picked) < cfg.count and cells:
        for cid in sorted(cells):
            cell = cells[cid]
            idx = _weighted_draw(rng, np.asarray(cell["w"]))
            picked.append((cell["x"].pop(idx), cell["y"].pop(idx)))
            cell["w"].pop(idx)
            if not cell["x"]:
                del cells[cid]
            if len(picked) == cfg.count:
                break

    keypoints = []
    for x, y in picked:
        x, y = int(x), int(y)
        pre_l = l_at(image, x, y, window_radius, (0, 0), (0, 0), reference)
        keypoints.append(Keypoint(x=x, y=y, grad=float(grad[y, x]), pre_l=pre_l))
    return keypoints
