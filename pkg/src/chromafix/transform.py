"""Match pruning and per-channel uniform-scale-plus-translation fit.

The model maps reference-channel coordinates p to moving-channel
coordinates (sigma * p_x + t_x, sigma * p_y + t_y). Each point pair
contributes two rows [px, 1, 0] and [py, 0, 1] to a linear system in
(sigma, t_x, t_y), solved by least squares over all pairs.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .collinearity import moving_channels
from .disparity import DisparityMatch
from .errors import DegenerateFitError, InsufficientMatchesError, InsufficientPointsError
from .image import ChannelId

DEFAULT_L_MAX = 0.01  # below this the alignment counts as good
CONDITION_LIMIT = 1e8


@dataclass(frozen=True)
class SimilarityTransform:
    sigma: float
    tx: float
    ty: float

    def __post_init__(self):
        if not self.sigma > 0.0:
            raise ValueError("sigma must be positive")

    def apply(self, x, y):
        return self.sigma * x + self.tx, self.sigma * y + self.ty

    def inverse(self) -> "SimilarityTransform":
        return SimilarityTransform(
            sigma=1.0 / self.sigma, tx=-self.tx / self.sigma, ty=-self.ty / self.sigma
        )

    def matrix(self) -> np.ndarray:
        return np.array(
            [[self.sigma, 0.0, self.tx], [0.0, self.sigma, self.ty], [0.0, 0.0, 1.0]]
        )

    @classmethod
    def identity(cls) -> "SimilarityTransform":
        return cls(sigma=1.0, tx=0.0, ty=0.0)


@dataclass(frozen=True)
class PointPair:
    ref: tuple[float, float]
    mov: tuple[float, float]


@dataclass(frozen=True)
class FitReport:
    transform: SimilarityTransform
    rms_residual: float
    n_points: int
    condition_flag: bool

    def to_json_dict(self, channel: ChannelId | None = None) -> dict:
        out = {
            "sigma": self.transform.sigma,
            "tx": self.transform.tx,
            "ty": self.transform.ty,
            "rms_residual": self.rms_residual,
            "n_points": self.n_points,
            "condition_flag": self.condition_flag,
        }
        if channel is not None:
            out["channel"] = channel.label
        return out


def prune_matches(matches: list[DisparityMatch], l_max: float = DEFAULT_L_MAX) -> list[DisparityMatch]:
    """Keep matches whose best metric value is at most l_max, in order."""
    kept = [m for m in matches if m.post_l is not None and m.post_l <= l_max]
    if len(kept) < 2:
        raise InsufficientMatchesError(
            f"{len(kept)} matches below l_max={l_max} (need at least 2)", stage="prune"
        )
    return kept


def fit_similarity(pairs: list[PointPair]) -> FitReport:
    """Least-squares (sigma, tx, ty) over all pairs via the 3x3 normal equations."""
    if len(pairs) < 2:
        raise InsufficientPointsError(
            f"{len(pairs)} point pairs (need at least 2)", stage="fit"
        )
    ref = np.array([p.ref for p in pairs], dtype=np.float64)
    mov = np.array([p.mov for p in pairs], dtype=np.float64)
    n = len(pairs)
    a = np.zeros((2 * n, 3))
    a[0::2, 0] = ref[:, 0]
    a[0::2, 1] = 1.0
    a[1::2, 0] = ref[:, 1]
    a[1::2, 2] = 1.0
    b = mov.ravel()
    normal = a.T @ a
    try:
        theta = np.linalg.solve(normal, a.T @ b)
    except np.linalg.LinAlgError as exc:
        raise DegenerateFitError(f"singular normal equations: {exc}", stage="fit")
    sigma, tx, ty = (float(v) for v in theta)
    if sigma <= 0.0:
        raise DegenerateFitError(f"non-positive scale {sigma}", stage="fit")
    residuals = a @ theta - b
    rms = float(np.sqrt(np.mean(residuals**2)))
    spread = max(np.ptp(ref[:, 0]), np.ptp(ref[:, 1]))
    condition_flag = bool(np.linalg.cond(normal) > CONDITION_LIMIT or spread <= 1.0)
    return FitReport(
        transform=SimilarityTransform(sigma=sigma, tx=tx, ty=ty),
        rms_residual=rms,
        n_points=n,
        condition_flag=condition_flag,
    )


def fit_channels(
    matches: list[DisparityMatch], reference: ChannelId = ChannelId.GREEN
) -> dict[ChannelId, FitReport]:
    """Fit one transform per moving channel from keypoint + disparity pairs."""
    if len(matches) < 2:
        raise InsufficientMatchesError(
            f"{len(matches)} matches (need at least 2)", stage="fit"
        )
    first, second = moving_channels(reference)
    reports = {}
    for cid, pick in ((first, lambda m: m.d_first), (second, lambda m: m.d_second)):
        pairs = [
            PointPair(
                ref=(float(m.keypoint.x), float(m.keypoint.y)),
                mov=(float(m.keypoint.x + pick(m)[0]), float(m.keypoint.y + pick(m)[1])),
            )
            for m in matches
        ]
        reports[cid] = fit_similarity(pairs)
    return reports
