"""Alternating surface fitting with online order selection.

The loop interleaves two blocks: per-point foot-point updates on the current
surface, and a closed-form control-point refit that may also grow the surface
order. Location parameters are initialized by projecting the cloud onto its
top two principal directions.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from time import perf_counter

import numpy as np

from .control import (
    DEFAULT_LAMBDA,
    center_cloud,
    regularized_objective,
    solve_control_points,
    translate_surface,
    weighted_objective,
)
from .errors import DegenerateGeometryError, RankDeficiencyError
from .projection import ProjectionSettings, project_all
from .selection import (
    FitModel,
    bic_statistic,
    mdl_select,
    param_count,
    ranking_floor,
    sigma2_hat,
)
from .voxel import PointCloud

_DEGENERATE_RATIO = 1e-10


@dataclass
class FitSettings:
    max_outer_iters: int = 10
    rel_sigma2_tol: float = 1e-6
    lam: float = DEFAULT_LAMBDA
    order_cap: tuple[int, int] = (6, 6)
    projection: ProjectionSettings = field(default_factory=ProjectionSettings)
    fixed_orders: tuple[int, int] | None = None

    def __post_init__(self):
        if self.max_outer_iters < 1:
            raise ValueError("max_outer_iters must be at least 1")
        if self.order_cap[0] < 1 or self.order_cap[1] < 1:
            raise ValueError("order caps must be at least 1")


@dataclass
class FitIteration:
    """One record per outer iteration; iteration 0 is the initial fit.

    ``f`` is the weighted objective of the iteration's final model. The
    f_* pairs instrument the two descent blocks: the projection pair uses the
    projector's own objective values, the solve pair compares the regularized
    objective of the previous surface against a refit at unchanged orders.
    """

    iteration: int
    n_u: int
    n_v: int
    sigma2: float
    t: float
    f: float
    f_before_projection: float
    f_after_projection: float
    f_reg_before_solve: float
    f_reg_after_solve: float
    projection_failures: int
    seconds: float


FitTrace = list[FitIteration]


def init_uv(cloud: PointCloud) -> tuple[np.ndarray, np.ndarray]:
    """Initial location parameters from the top two principal directions.

    Each coordinate is affinely rescaled to span [0, 1], where the basis is
    best conditioned. Both principal directions are sign-fixed (largest
    magnitude component positive) so the result is deterministic.

    Raises:
        DegenerateGeometryError: second singular value is negligible, so the
            cloud has no usable 2D extent.
    """
    if cloud.n_x < 3:
        raise ValueError(f"need at least 3 points to initialize, got {cloud.n_x}")
    centered = cloud.points - cloud.points.mean(axis=0)
    _, svals, vt = np.linalg.svd(centered, full_matrices=False)
    if svals[1] <= _DEGENERATE_RATIO * svals[0]:
        raise DegenerateGeometryError(
            "points are collinear or nearly collinear; cannot spread them over a patch"
        )
    basis = vt[:2].copy()
    for row in basis:
        if row[np.argmax(np.abs(row))] < 0:
            row *= -1.0
    coords = centered @ basis.T
    lo = coords.min(axis=0)
    hi = coords.max(axis=0)
    coords = (coords - lo) / (hi - lo)
    return coords[:, 0].copy(), coords[:, 1].copy()


def _fit_fixed(cloud, u, v, n_u, n_v, lam) -> FitModel:
    """Single-candidate refit at frozen orders."""
    surface = solve_control_points(cloud.points, cloud.weights, u, v, n_u, n_v, lam)
    sigma2 = sigma2_hat(cloud, surface, u, v)
    d = param_count(cloud.n_x, n_u, n_v)
    t = bic_statistic(max(sigma2, ranking_floor(cloud.points)), d, cloud.n_x)
    return FitModel(surface, np.asarray(u, float).copy(), np.asarray(v, float).copy(),
                    sigma2, t, d)


def fit_surface(
    cloud: PointCloud, settings: FitSettings | None = None
) -> tuple[FitModel, FitTrace]:
    """Fit a surface to a point cloud, selecting the order on the fly.

    The cloud is centered, location parameters are initialized from the
    principal directions, and the surface starts bilinear. Each outer
    iteration updates the foot points, then refits the control points while
    allowing the order to grow by one per direction. Iteration stops at
    ``max_outer_iters`` or when the relative change of the noise variance
    estimate drops below ``rel_sigma2_tol``. The returned surface is
    translated back to the original frame.
    """
    if settings is None:
        settings = FitSettings()
    if cloud.n_x < 3:
        raise ValueError(f"need at least 3 points to fit, got {cloud.n_x}")
    centered = center_cloud(cloud)
    inner = PointCloud(centered.points, cloud.weights)
    u, v = init_uv(inner)
    lam = settings.lam
    fixed = settings.fixed_orders

    trace: FitTrace = []
    tic = perf_counter()
    if fixed is not None:
        model = _fit_fixed(inner, u, v, fixed[0], fixed[1], lam)
    else:
        model = mdl_select(inner, u, v, 1, 1, lam, settings.order_cap)
    f0 = weighted_objective(inner.points, inner.weights, model.surface, u, v)
    trace.append(
        FitIteration(0, model.n_u, model.n_v, model.sigma2, model.t, f0,
                     math.nan, math.nan, math.nan, math.nan, 0, perf_counter() - tic)
    )

    prev_sigma2 = model.sigma2
    for it in range(1, settings.max_outer_iters + 1):
        tic = perf_counter()
        batch = project_all(inner, model.surface, u, v, settings.projection)
        u, v = batch.u, batch.v
        f_before = float(np.sum(inner.weights**2 * batch.g_start))
        f_after = float(np.sum(inner.weights**2 * batch.g_final))

        f_reg_before = regularized_objective(
            inner.points, inner.weights, model.surface, u, v, lam
        )
        try:
            same_order = solve_control_points(
                inner.points, inner.weights, u, v, model.n_u, model.n_v, lam
            )
            f_reg_after = regularized_objective(
                inner.points, inner.weights, same_order, u, v, lam
            )
        except RankDeficiencyError:
            # the order search below decides whether any candidate survives
            f_reg_before = math.nan
            f_reg_after = math.nan

        if fixed is not None:
            model = _fit_fixed(inner, u, v, fixed[0], fixed[1], lam)
        else:
            model = mdl_select(inner, u, v, model.n_u, model.n_v, lam, settings.order_cap)
        f_model = weighted_objective(inner.points, inner.weights, model.surface, u, v)
        trace.append(
            FitIteration(it, model.n_u, model.n_v, model.sigma2, model.t, f_model,
                         f_before, f_after, f_reg_before, f_reg_after,
                         len(batch.failed), perf_counter() - tic)
        )

        rel = abs(model.sigma2 - prev_sigma2) / max(prev_sigma2, 1e-300)
        prev_sigma2 = model.sigma2
        if rel < settings.rel_sigma2_tol:
            break

    final = replace(
        model,
        surface=translate_surface(model.surface, centered.centroid),
        centroid=centered.centroid.copy(),
    )
    return final, trace


def outer_iterations(trace: FitTrace) -> int:
    """Number of alternating iterations executed (excludes the initial fit)."""
    return sum(1 for row in trace if row.iteration > 0)
