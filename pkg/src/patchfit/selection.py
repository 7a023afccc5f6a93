"""Noise estimation and automatic surface order selection.

Candidate orders grow by at most one in each direction per update. Each
candidate is scored by an information statistic that trades the log of the
estimated noise variance against a parameter-count penalty; the candidate
with the largest statistic wins, with ties broken toward parsimony.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .bezier import BezierSurface, design_matrix
from .control import solve_control_points
from .errors import RankDeficiencyError
from .voxel import PointCloud

# Candidates are ranked with the noise variance floored at a small fraction
# of the cloud's RMS radius (squared), so candidates that interpolate to
# floating-point dust tie and compete through the parameter penalty instead
# of through rounding noise or an infinite statistic.
_REL_FLOOR = 1e-13


def ranking_floor(points: np.ndarray) -> float:
    """Variance floor used when ranking candidate fits of these points."""
    centered = points - points.mean(axis=0)
    rms2 = float(np.mean(np.sum(centered**2, axis=1)))
    return max(_REL_FLOOR**2 * rms2, 1e-300)


@dataclass
class FitModel:
    """Fitted surface with location parameters and selection statistics."""

    surface: BezierSurface
    u: np.ndarray
    v: np.ndarray
    sigma2: float
    t: float
    d: int
    centroid: np.ndarray = field(default_factory=lambda: np.zeros(3))

    @property
    def n_u(self) -> int:
        return self.surface.n_u

    @property
    def n_v(self) -> int:
        return self.surface.n_v

    @property
    def size(self) -> int:
        return self.surface.size


def sigma2_hat(cloud: PointCloud, surface: BezierSurface, u: np.ndarray, v: np.ndarray) -> float:
    """Maximum-likelihood noise variance from weighted squared residuals.

    Equals two thirds of the weighted objective divided by the point count.
    """
    if cloud.n_x < 1:
        raise ValueError("cannot estimate noise variance from an empty cloud")
    b = design_matrix(u, v, surface.n_u, surface.n_v)
    residual = cloud.points - b.T @ surface.flat
    total = float(np.sum(cloud.weights**2 * np.sum(residual**2, axis=1)))
    return total / (3.0 * cloud.n_x)


def param_count(n_x: int, n_u: int, n_v: int) -> int:
    """Total free parameters: two locations per point, control coords, variance."""
    if n_x < 1 or n_u < 1 or n_v < 1:
        raise ValueError("point count and orders must be at least 1")
    return 2 * n_x + 3 * (n_u + 1) * (n_v + 1) + 1


def bic_statistic(sigma2: float, d: int, n_x: int) -> float:
    """Selection statistic: -3 n_x ln(sigma2) - d ln(n_x). Larger is better.

    A zero variance (degenerate exact interpolation) returns +inf; callers
    comparing candidates must fall back to the parsimony tie-break.
    """
    if n_x < 1:
        raise ValueError("point count must be at least 1")
    if sigma2 < 0:
        raise ValueError(f"variance must be nonnegative, got {sigma2}")
    if sigma2 == 0.0:
        return math.inf
    return -3.0 * n_x * math.log(sigma2) - d * math.log(n_x)


def _rank_key(t: float, d: int, n_u: int, n_v: int) -> tuple:
    """Sort key for candidate models: best statistic first, then parsimony."""
    return (-t, d, n_u + n_v, n_u)


def mdl_select(
    cloud: PointCloud,
    u: np.ndarray,
    v: np.ndarray,
    n_u: int,
    n_v: int,
    lam: float,
    order_cap: tuple[int, int] | None = None,
) -> FitModel:
    """Refit control points at the current and incremented orders, keep the best.

    Location parameters are held fixed. The candidate grid is
    {n_u, n_u+1} x {n_v, n_v+1}, clipped at ``order_cap``; orders therefore
    never decrease. A candidate whose solve is rank deficient is skipped; if
    every candidate fails the error propagates.
    """
    u = np.asarray(u, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    cap_u, cap_v = order_cap if order_cap is not None else (None, None)
    us = [n_u] if (cap_u is not None and n_u >= cap_u) else [n_u, n_u + 1]
    vs = [n_v] if (cap_v is not None and n_v >= cap_v) else [n_v, n_v + 1]
    floor = ranking_floor(cloud.points)

    best = None
    best_key = None
    last_error = None
    for cand_u in us:
        for cand_v in vs:
            try:
                surface = solve_control_points(
                    cloud.points, cloud.weights, u, v, cand_u, cand_v, lam
                )
            except RankDeficiencyError as exc:
                last_error = exc
                continue
            sigma2 = sigma2_hat(cloud, surface, u, v)
            d = param_count(cloud.n_x, cand_u, cand_v)
            t = bic_statistic(max(sigma2, floor), d, cloud.n_x)
            key = _rank_key(t, d, cand_u, cand_v)
            if best_key is None or key < best_key:
                best_key = key
                best = FitModel(surface, u.copy(), v.copy(), sigma2, t, d)
    if best is None:
        raise RankDeficiencyError("every candidate order was rank deficient") from last_error
    return best
