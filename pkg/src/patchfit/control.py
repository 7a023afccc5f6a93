"""Closed-form control-point updates.

For fixed location parameters the weighted fitting objective is linear least
squares in the flattened control matrix; a Tikhonov term keeps the system
well posed when the design is poorly scaled. The regularizer penalizes
distance from the origin, so clouds should be centered before solving and
the surface translated back afterwards.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import LinAlgError, cho_factor, cho_solve

from .bezier import BezierSurface, design_matrix
from .errors import RankDeficiencyError
from .voxel import PointCloud

DEFAULT_LAMBDA = 1e-3


@dataclass
class CenteredCloud:
    """Points translated so their unweighted centroid is the origin."""

    points: np.ndarray
    centroid: np.ndarray


def center_cloud(cloud: PointCloud) -> CenteredCloud:
    if cloud.n_x < 1:
        raise ValueError("cannot center an empty cloud")
    centroid = cloud.points.mean(axis=0)
    return CenteredCloud(cloud.points - centroid, centroid)


def weighted_objective(
    points: np.ndarray,
    weights: np.ndarray,
    surface: BezierSurface,
    u: np.ndarray,
    v: np.ndarray,
) -> float:
    """Half the weighted sum of squared point-to-surface-sample distances."""
    b = design_matrix(u, v, surface.n_u, surface.n_v)
    residual = points - b.T @ surface.flat
    return 0.5 * float(np.sum(weights**2 * np.sum(residual**2, axis=1)))


def regularized_objective(
    points: np.ndarray,
    weights: np.ndarray,
    surface: BezierSurface,
    u: np.ndarray,
    v: np.ndarray,
    lam: float,
) -> float:
    """Weighted objective plus the ridge penalty on the flattened control."""
    penalty = 0.5 * lam * float(np.sum(surface.flat**2))
    return weighted_objective(points, weights, surface, u, v) + penalty


def solve_control_points(
    points: np.ndarray,
    weights: np.ndarray,
    u: np.ndarray,
    v: np.ndarray,
    n_u: int,
    n_v: int,
    lam: float = DEFAULT_LAMBDA,
) -> BezierSurface:
    """Minimize the (optionally ridge-regularized) weighted objective over A.

    Solves (B W^2 B^T + lam I) A_flat = B W^2 X for the flattened control
    matrix via a single symmetric positive definite factorization shared by
    the three coordinate columns.

    Raises:
        RankDeficiencyError: the system is singular and ``lam`` is 0.
    """
    points = np.asarray(points, dtype=np.float64).reshape(-1, 3)
    weights = np.asarray(weights, dtype=np.float64).reshape(-1)
    if lam < 0:
        raise ValueError(f"regularization strength must be nonnegative, got {lam}")
    b = design_matrix(u, v, n_u, n_v)
    w2 = weights**2
    bw = b * w2
    gram = bw @ b.T
    gram[np.diag_indices_from(gram)] += lam
    rhs = bw @ points
    try:
        factor = cho_factor(gram, lower=True)
    except LinAlgError as exc:
        raise RankDeficiencyError(
            "control-point system is singular; increase the regularization "
            "strength or supply more points"
        ) from exc
    if lam == 0.0:
        # rank deficiency can slip through the factorization as a tiny pivot
        pivots = np.abs(np.diag(factor[0]))
        if pivots.min() <= 1e-7 * pivots.max():
            raise RankDeficiencyError(
                "control-point system is numerically singular at lam=0; "
                "increase the regularization strength or supply more points"
            )
    flat = cho_solve(factor, rhs)
    return BezierSurface.from_flat(flat, n_u, n_v)


def translate_surface(surface: BezierSurface, offset: np.ndarray) -> BezierSurface:
    """Shift every control point by ``offset``; evaluation commutes with it."""
    offset = np.asarray(offset, dtype=np.float64).reshape(3)
    return BezierSurface(surface.control + offset)
