"""Image container, PNG/PPM I/O, gradient and saturation fields, bilinear sampling.

Intensities are stored as float64 in [0, 1]; conversion to/from integer
pixel formats happens only at the I/O boundary.
"""

from __future__ import annotations

import enum
import os
from dataclasses import dataclass

import cv2
import numpy as np
from scipy import ndimage

from .errors import ImageFormatError

_SUPPORTED_EXT = {".png", ".ppm"}


class ChannelId(enum.IntEnum):
    RED = 0
    GREEN = 1
    BLUE = 2

    @property
    def label(self) -> str:
        return self.name.lower()

    @classmethod
    def parse(cls, name: str) -> "ChannelId":
        try:
            return cls[name.upper()]
        except KeyError:
            raise ValueError(f"unknown channel {name!r} (expected red/green/blue)")


@dataclass(frozen=True)
class RgbImage:
    """Three planar colour channels, shape (3, height, width), values in [0, 1]."""

    channels: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.channels, dtype=np.float64)
        if arr.ndim != 3 or arr.shape[0] != 3:
            raise ImageFormatError(f"expected (3, h, w) channel stack, got {arr.shape}")
        if arr.shape[1] < 1 or arr.shape[2] < 1:
            raise ImageFormatError("image dimensions must be at least 1x1")
        if not np.isfinite(arr).all():
            raise ImageFormatError("image contains non-finite intensities")
        if arr.min() < 0.0 or arr.max() > 1.0:
            raise ImageFormatError("intensities must lie in [0, 1]")
        arr = arr.copy()
        arr.setflags(write=False)
        object.__setattr__(self, "channels", arr)

    @classmethod
    def from_channels(cls, red, green, blue) -> "RgbImage":
        return cls(np.stack([red, green, blue], axis=0))

    @property
    def height(self) -> int:
        return self.channels.shape[1]

    @property
    def width(self) -> int:
        return self.channels.shape[2]

    def channel(self, cid: ChannelId) -> np.ndarray:
        return self.channels[int(cid)]

    def with_channel(self, cid: ChannelId, values: np.ndarray) -> "RgbImage":
        stack = self.channels.copy()
        stack[int(cid)] = values
        return RgbImage(stack)


def _check_extension(path) -> str:
    ext = os.path.splitext(str(path))[1].lower()
    if ext not in _SUPPORTED_EXT:
        raise ImageFormatError(f"unsupported image extension {ext!r} (use .png or .ppm)")
    return ext


def load_image(path) -> RgbImage:
    """Decode an 8/16-bit PNG or binary PPM (P6); alpha is dropped."""
    _check_extension(path)
    if not os.path.isfile(str(path)):
        raise OSError(f"no such file: {path}")
    raw = cv2.imread(str(path), cv2.IMREAD_UNCHANGED)
    if raw is None:
        raise ImageFormatError(f"could not decode image: {path}")
    if raw.ndim == 2:
        raw = raw[:, :, None].repeat(3, axis=2)
    if raw.shape[2] == 4:
        raw = raw[:, :, :3]
    if raw.dtype == np.uint8:
        scale = 255.0
    elif raw.dtype == np.uint16:
        scale = 65535.0
    else:
        raise ImageFormatError(f"unsupported pixel depth {raw.dtype} in {path}")
    rgb = raw[:, :, ::-1].astype(np.float64) / scale  # BGR -> RGB
    return RgbImage(np.moveaxis(rgb, 2, 0))


def save_image(image: RgbImage, path) -> None:
    """Write an 8-bit PNG or binary PPM, chosen by extension."""
    _check_extension(path)
    rgb8 = np.rint(np.moveaxis(image.channels, 0, 2) * 255.0).astype(np.uint8)
    ok = cv2.imwrite(str(path), rgb8[:, :, ::-1])
    if not ok:
        raise OSError(f"could not write image: {path}")


def luminance(image: RgbImage) -> np.ndarray:
    return (
        0.299 * image.channel(ChannelId.RED)
        + 0.587 * image.channel(ChannelId.GREEN)
        + 0.114 * image.channel(ChannelId.BLUE)
    )


def gradient_magnitude(image: RgbImage) -> np.ndarray:
    """Central-difference gradient norm of the luminance (one-sided at borders)."""
    gy, gx = np.gradient(luminance(image))
    return np.hypot(gx, gy)


def saturation_mask(image: RgbImage, sat_threshold: float = 0.99, dilation_radius: int = 7) -> np.ndarray:
    """Boolean field, True where a pixel is usable.

    A pixel is unusable if any channel reaches `sat_threshold` anywhere
    within Chebyshev distance `dilation_radius`.
    """
    if not 0.0 < sat_threshold <= 1.0:
        raise ValueError("sat_threshold must be in (0, 1]")
    if dilation_radius < 0:
        raise ValueError("dilation_radius must be >= 0")
    saturated = (image.channels >= sat_threshold).any(axis=0)
    if dilation_radius > 0:
        saturated = ndimage.maximum_filter(
            saturated, size=2 * dilation_radius + 1, mode="constant", cval=False
        )
    return ~saturated


def bilinear_sample(field: np.ndarray, xs, ys):
    """Bilinear interpolation with clamp-to-edge for out-of-range coordinates.

    Exact at integer coordinates; vectorized over xs/ys.
    """
    h, w = field.shape
    xs = np.clip(np.asarray(xs, dtype=np.float64), 0.0, float(w - 1))
    ys = np.clip(np.asarray(ys, dtype=np.float64), 0.0, float(h - 1))
    x0 = np.floor(xs).astype(np.intp)
    y0 = np.floor(ys).astype(np.intp)
    x1 = np.minimum(x0 + 1, w - 1)
    y1 = np.minimum(y0 + 1, h - 1)
    fx = xs - x0
    fy = ys - y0
    top = field[y0, x0] * (1.0 - fx) + field[y0, x1] * fx
    bot = field[y1, x0] * (1.0 - fx) + field[y1, x1] * fx
    return top * (1.0 - fy) + bot * fy


def sample_bilinear(field: np.ndarray, x: float, y: float) -> float:
    """Scalar convenience wrapper around `bilinear_sample`."""
    return float(bilinear_sample(field, x, y))
