"""Integer disparity search minimizing the collinearity metric per keypoint.

The joint search covers all (2R+1)^4 disparity 4-tuples of the two moving
channels. It is vectorized: windows are centered once per shift, and the
only quantity depending on both disparities (the cross-covariance of the
two moving channels) is a single matrix product.
"""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .collinearity import DENOM_MIN, eigenvalues_sym3_batch, l_at, moving_channels
from .errors import (
    DegenerateNeighbourhoodError,
    InsufficientMatchesError,
    WindowBoundsError,
)
from .image import ChannelId, RgbImage
from .keypoints import Keypoint

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class SearchConfig:
    radius_px: int = 8
    window_radius: int = 7
    joint: bool = True

    def __post_init__(self):
        if self.radius_px < 1:
            raise ValueError("radius_px must be >= 1")
        if self.window_radius < 2:
            raise ValueError("window_radius must be >= 2")


@dataclass(frozen=True)
class DisparityMatch:
    keypoint: Keypoint
    d_first: tuple[int, int]  # disparity of the first moving channel (dx, dy)
    d_second: tuple[int, int]
    post_l: float

    def to_json_dict(self) -> dict:
        return {
            "x": self.keypoint.x,
            "y": self.keypoint.y,
            "dgx": self.d_first[0],
            "dgy": self.d_first[1],
            "dbx": self.d_second[0],
            "dby": self.d_second[1],
            "pre_l": self.keypoint.pre_l,
            "post_l": self.post_l,
        }


def _shifted_window_matrix(field: np.ndarray, x: int, y: int, r: int, R: int) -> np.ndarray:
    """All (2R+1)^2 shifted windows around (x, y) as rows, dy-major then dx."""
    h, w = field.shape
    if x - r - R < 0 or y - r - R < 0 or x + r + R >= w or y + r + R >= h:
        raise WindowBoundsError(
            f"search region of radius {r}+{R} at ({x}, {y}) exceeds {w}x{h} image"
        )
    region = field[y - r - R : y + r + R + 1, x - r - R : x + r + R + 1]
    wins = sliding_window_view(region, (2 * r + 1, 2 * r + 1))
    return wins.reshape((2 * R + 1) ** 2, (2 * r + 1) ** 2)


def _offsets(R: int) -> np.ndarray:
    """(dx, dy) per window-matrix row, matching _shifted_window_matrix order."""
    rng = np.arange(-R, R + 1)
    dy, dx = np.meshgrid(rng, rng, indexing="ij")
    return np.stack([dx.ravel(), dy.ravel()], axis=1)


def _best_index(l_flat, defined_flat, d1, d2):
    """Index of the minimizer under the tie-break chain.

    Smallest metric first, then smallest total squared disparity norm,
    then lexicographic (d1x, d1y, d2x, d2y).
    """
    idx = np.nonzero(defined_flat)[0]
    lmin = l_flat[idx].min()
    ties = idx[l_flat[idx] == lmin]
    norms = (d1[ties] ** 2).sum(axis=1) + (d2[ties] ** 2).sum(axis=1)
    ties = ties[norms == norms.min()]
    order = np.lexsort((d2[ties, 1], d2[ties, 0], d1[ties, 1], d1[ties, 0]))
    return int(ties[order[0]])


def _covariance_grids(image: RgbImage, x: int, y: int, cfg: SearchConfig, reference: ChannelId):
    """Covariance entries for every disparity pair, keyed by RGB channel index.

    Returns (entries, offsets) where entries[(i, j)] broadcasts over a
    (n_shifts_first, n_shifts_second) grid.
    """
    r, R = cfg.window_radius, cfg.radius_px
    first, second = moving_channels(reference)
    n = (2 * r + 1) ** 2

    ref_win = _shifted_window_matrix(image.channel(reference), x, y, r, 0)[0]
    rc = ref_win - ref_win.mean()
    w1 = _shifted_window_matrix(image.channel(first), x, y, r, R)
    w2 = _shifted_window_matrix(image.channel(second), x, y, r, R)
    c1 = w1 - w1.mean(axis=1, keepdims=True)
    c2 = w2 - w2.mean(axis=1, keepdims=True)

    var = {
        reference: np.float64(rc @ rc / n),
        first: (np.einsum("ij,ij->i", c1, c1) / n)[:, None],
        second: (np.einsum("ij,ij->i", c2, c2) / n)[None, :],
    }
    cov = {
        _key(reference, first): (c1 @ rc / n)[:, None],
        _key(reference, second): (c2 @ rc / n)[None, :],
        _key(first, second): c1 @ c2.T / n,
    }
    entries = {}
    for i in range(3):
        entries[(i, i)] = var[ChannelId(i)]
        for j in range(i + 1, 3):
            entries[(i, j)] = cov[(i, j)]
    return entries, _offsets(R)


def _key(a: ChannelId, b: ChannelId):
    return (min(int(a), int(b)), max(int(a), int(b)))


def _l_grid(entries):
    denom = entries[(0, 0)] * entries[(1, 1)] * entries[(2, 2)]
    l0, l1, l2 = eigenvalues_sym3_batch(
        entries[(0, 0)], entries[(0, 1)], entries[(0, 2)],
        entries[(1, 1)], entries[(1, 2)], entries[(2, 2)],
    )
    defined = np.broadcast_to(denom >= DENOM_MIN, l0.shape)
    with np.errstate(divide="ignore", invalid="ignore"):
        l = np.where(defined, l0 * l1 * l2 / np.broadcast_to(denom, l0.shape), np.inf)
    return l, defined


def search_match(
    image: RgbImage,
    kp: Keypoint,
    cfg: SearchConfig,
    reference: ChannelId = ChannelId.GREEN,
) -> DisparityMatch:
    """Best integer disparities of the two moving channels at one keypoint."""
    entries, offs = _covariance_grids(image, kp.x, kp.y, cfg, reference)
    l, defined = _l_grid(entries)
    if not defined.any():
        raise DegenerateNeighbourhoodError(
            f"all disparities undefined at ({kp.x}, {kp.y})", stage="disparity"
        )
    n_shift = offs.shape[0]
    if cfg.joint:
        d1 = np.repeat(offs, n_shift, axis=0)
        d2 = np.tile(offs, (n_shift, 1))
        best = _best_index(l.ravel(), defined.ravel(), d1, d2)
        bd1, bd2 = tuple(int(v) for v in d1[best]), tuple(int(v) for v in d2[best])
    else:
        zero = int(np.nonzero((offs == 0).all(axis=1))[0][0])
        col_l, col_def = l[:, zero], defined[:, zero]
        if not col_def.any():
            raise DegenerateNeighbourhoodError(
                f"all first-channel disparities undefined at ({kp.x}, {kp.y})",
                stage="disparity",
            )
        zeros = np.zeros_like(offs)
        i1 = _best_index(col_l, col_def, offs, zeros)
        row_l, row_def = l[i1, :], defined[i1, :]
        i2 = _best_index(row_l, row_def, zeros, offs)
        bd1, bd2 = tuple(int(v) for v in offs[i1]), tuple(int(v) for v in offs[i2])

    # re-evaluate through the scalar path so post_l matches l_at exactly
    post_l = l_at(image, kp.x, kp.y, cfg.window_radius, bd1, bd2, reference)
    if post_l is None:
        raise DegenerateNeighbourhoodError(
            f"best disparity undefined at ({kp.x}, {kp.y})", stage="disparity"
        )
    return DisparityMatch(keypoint=kp, d_first=bd1, d_second=bd2, post_l=post_l)


def match_all(
    image: RgbImage,
    kps: list[Keypoint],
    cfg: SearchConfig,
    reference: ChannelId = ChannelId.GREEN,
    workers: int | None = None,
) -> list[DisparityMatch]:
    """Search every keypoint, preserving order; degenerate keypoints are dropped."""
    if not kps:
        return []

    def run(kp):
        try:
            return search_match(image, kp, cfg, reference)
        except DegenerateNeighbourhoodError:
            logger.info("dropping degenerate keypoint at (%d, %d)", kp.x, kp.y)
            return None

    if workers is not None and workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(run, kps))
    else:
        results = [run(kp) for kp in kps]
    matches = [m for m in results if m is not None]
    if not matches:
        raise InsufficientMatchesError("every keypoint was degenerate", stage="disparity")
    return matches
