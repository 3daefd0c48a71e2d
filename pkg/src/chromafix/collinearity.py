"""Colour-collinearity alignment metric over pixel neighbourhoods.

The metric is the product of the three eigenvalues of the RGB covariance
matrix of a neighbourhood, divided by the product of the per-channel
variances. It is near 0 when the neighbourhood's colour points lie on a
line (channels aligned) and approaches 1 for an isotropic cloud.
"""

from __future__ import annotations

from dataclasses import dataclass

import cv2
import numpy as np

from .errors import ImageSizeError, InsufficientSamplesError, WindowBoundsError
from .image import ChannelId, RgbImage

# Eigenvalues within this distance below zero are treated as exact zeros
# (covariances are PSD up to rounding).
EIGEN_CLAMP = 1e-12

# Below this variance product the metric is undefined (a channel is
# numerically constant over the neighbourhood).
DENOM_MIN = 1e-12


def accumulate_covariance(samples) -> np.ndarray:
    """Population (1/n) covariance of (r, g, b) triples, centered two-pass."""
    arr = np.asarray(samples, dtype=np.float64)
    if arr.ndim != 2 or arr.shape[1] != 3:
        raise ValueError(f"expected (n, 3) samples, got {arr.shape}")
    n = arr.shape[0]
    if n < 2:
        raise InsufficientSamplesError("covariance needs at least 2 samples")
    dev = arr - arr.mean(axis=0)
    return dev.T @ dev / n


def eigenvalues_sym3_batch(a11, a12, a13, a22, a23, a33):
    """Closed-form eigenvalues of symmetric 3x3 matrices, vectorized.

    Returns (l0, l1, l2) sorted descending; values within EIGEN_CLAMP
    below zero are clamped to zero.
    """
    a11, a12, a13, a22, a23, a33 = np.broadcast_arrays(
        *(np.asarray(a, dtype=np.float64) for a in (a11, a12, a13, a22, a23, a33))
    )
    q = (a11 + a22 + a33) / 3.0
    p1 = a12 * a12 + a13 * a13 + a23 * a23
    b11, b22, b33 = a11 - q, a22 - q, a33 - q
    p2 = b11 * b11 + b22 * b22 + b33 * b33 + 2.0 * p1
    p = np.sqrt(p2 / 6.0)
    safe_p = np.where(p > 0.0, p, 1.0)
    c11, c22, c33 = b11 / safe_p, b22 / safe_p, b33 / safe_p
    c12, c13, c23 = a12 / safe_p, a13 / safe_p, a23 / safe_p
    detb = (
        c11 * (c22 * c33 - c23 * c23)
        - c12 * (c12 * c33 - c23 * c13)
        + c13 * (c12 * c23 - c22 * c13)
    )
    r = np.clip(detb / 2.0, -1.0, 1.0)
    phi = np.arccos(r) / 3.0
    l0 = q + 2.0 * p * np.cos(phi)
    l2 = q + 2.0 * p * np.cos(phi + 2.0 * np.pi / 3.0)
    l1 = 3.0 * q - l0 - l2
    # p == 0 means the matrix is a multiple of the identity
    l0 = np.where(p > 0.0, l0, q)
    l1 = np.where(p > 0.0, l1, q)
    l2 = np.where(p > 0.0, l2, q)
    # snap to exactly zero on both sides of 0: PSD inputs can only stray below
    # by rounding, and collapsing the dust makes exactly-collinear windows
    # produce bit-identical zeros in every evaluation path (stable tie-breaks)
    snap = lambda v: np.where(np.abs(v) < EIGEN_CLAMP, 0.0, v)
    return snap(l0), snap(l1), snap(l2)


def eigenvalues_sym3(cov: np.ndarray) -> np.ndarray:
    """Eigenvalues of one symmetric 3x3 matrix, sorted descending."""
    cov = np.asarray(cov, dtype=np.float64)
    if cov.shape != (3, 3):
        raise ValueError(f"expected a 3x3 matrix, got {cov.shape}")
    if not np.allclose(cov, cov.T, rtol=0.0, atol=1e-9):
        raise ValueError("matrix is not symmetric")
    l0, l1, l2 = eigenvalues_sym3_batch(
        cov[0, 0], cov[0, 1], cov[0, 2], cov[1, 1], cov[1, 2], cov[2, 2]
    )
    return np.array([float(l0), float(l1), float(l2)])


def _l_from_entries(a11, a12, a13, a22, a23, a33):
    """Metric value from covariance entries; NaN where undefined."""
    denom = a11 * a22 * a33
    l0, l1, l2 = eigenvalues_sym3_batch(a11, a12, a13, a22, a23, a33)
    with np.errstate(divide="ignore", invalid="ignore"):
        value = l0 * l1 * l2 / denom
    return np.where(denom < DENOM_MIN, np.nan, value)


def l_value(samples):
    """Collinearity metric of a set of (r, g, b) triples.

    Returns a float in [0, 1] (up to rounding), or None when any channel
    is numerically constant over the samples.
    """
    cov = accumulate_covariance(samples)
    value = _l_from_entries(
        cov[0, 0], cov[0, 1], cov[0, 2], cov[1, 1], cov[1, 2], cov[2, 2]
    )
    v = float(value)
    return None if np.isnan(v) else v


def _window(field: np.ndarray, x: int, y: int, radius: int) -> np.ndarray:
    h, w = field.shape
    if x - radius < 0 or y - radius < 0 or x + radius >= w or y + radius >= h:
        raise WindowBoundsError(
            f"window of radius {radius} at ({x}, {y}) exceeds {w}x{h} image"
        )
    return field[y - radius : y + radius + 1, x - radius : x + radius + 1]


def moving_channels(reference: ChannelId):
    """The two non-reference channels, in fixed RED < GREEN < BLUE order."""
    return tuple(c for c in ChannelId if c != reference)


def gather_window_samples(image, x, y, radius, d_first, d_second, reference=ChannelId.RED):
    """Stack the (r, g, b) triples of shifted windows as an (n, 3) array.

    The reference channel's window sits at (x, y); the first and second
    moving channels (in RED < GREEN < BLUE order) are shifted by
    `d_first` and `d_second` respectively.
    """
    first, second = moving_channels(reference)
    shifts = {reference: (0, 0), first: tuple(d_first), second: tuple(d_second)}
    columns = []
    for cid in ChannelId:
        dx, dy = shifts[cid]
        win = _window(image.channel(cid), x + dx, y + dy, radius)
        columns.append(win.ravel())
    return np.stack(columns, axis=1)


def l_at(image, x, y, radius, d_first, d_second, reference=ChannelId.RED):
    """Metric at a pixel with the moving channels' windows shifted by integer disparities."""
    return l_value(gather_window_samples(image, x, y, radius, d_first, d_second, reference))


@dataclass(frozen=True)
class LMap:
    """Per-pixel metric values with a mask of where they are defined."""

    values: np.ndarray
    defined: np.ndarray

    def mean_defined(self) -> float:
        if not self.defined.any():
            raise ImageSizeError("no defined metric values")
        return float(self.values[self.defined].mean())


def l_map(image: RgbImage, radius: int) -> LMap:
    """Zero-disparity metric at every pixel whose window fits in the image."""
    h, w = image.height, image.width
    k = 2 * radius + 1
    if h < k or w < k:
        raise ImageSizeError(f"image {w}x{h} smaller than {k}x{k} window")
    n = float(k * k)

    def boxsum(field):
        return cv2.boxFilter(field, ddepth=-1, ksize=(k, k), normalize=False,
                             borderType=cv2.BORDER_CONSTANT)

    chans = [np.ascontiguousarray(image.channel(c)) for c in ChannelId]
    means = [boxsum(c) / n for c in chans]
    entries = {}
    for i in range(3):
        for j in range(i, 3):
            entries[(i, j)] = boxsum(chans[i] * chans[j]) / n - means[i] * means[j]
    values = _l_from_entries(
        entries[(0, 0)], entries[(0, 1)], entries[(0, 2)],
        entries[(1, 1)], entries[(1, 2)], entries[(2, 2)],
    )
    defined = ~np.isnan(values)
    defined[:radius, :] = False
    defined[h - radius :, :] = False
    defined[:, :radius] = False
    defined[:, w - radius :] = False
    values = np.where(defined, values, 0.0)
    return LMap(values=values, defined=defined)


def lmap_to_image(lmap: LMap, debug_color: bool = False) -> RgbImage:
    """Render a metric map: 0 maps to black, >= 1 to white.

    In the colour debug variant, undefined pixels are magenta.
    """
    gray = np.clip(lmap.values, 0.0, 1.0)
    r = gray.copy()
    g = gray.copy()
    b = gray.copy()
    if debug_color:
        und = ~lmap.defined
        r[und] = 1.0
        g[und] = 0.0
        b[und] = 1.0
    else:
        und = ~lmap.defined
        r[und] = g[und] = b[und] = 0.0
    return RgbImage.from_channels(r, g, b)
