"""Point selection from binary occupancy grids.

The pipeline is: mark interior boundary voxels by thresholding a Laplacian
convolution, grow a connected region outward from a query voxel by repeated
box-kernel convolution, then turn the grown region into a weighted point
cloud at voxel centers.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .errors import EmptySelectionError, PerimeterTruncationWarning

# Region values are clamped here; only their relative magnitude is used.
_SATURATION = 2**52

DEFAULT_EPSILON = 9
DEFAULT_NEIGHBORHOOD = 3
DEFAULT_MAX_ITERS = 7


@dataclass
class VoxelGrid:
    """Dense 3D scalar lattice with physical spacing and origin.

    ``data[i, j, k]`` lives at physical position ``origin + spacing * (i, j, k)``
    (the origin is the center of voxel (0, 0, 0)). Occupancy grids hold 0/1,
    region grids hold nonnegative integers, weight grids hold reals.
    """

    data: np.ndarray
    spacing: np.ndarray
    origin: np.ndarray

    def __post_init__(self):
        data = np.asarray(self.data)
        if data.ndim != 3:
            raise ValueError(f"grid data must be 3D, got {data.ndim}D")
        spacing = np.asarray(self.spacing, dtype=np.float64).reshape(3)
        origin = np.asarray(self.origin, dtype=np.float64).reshape(3)
        if not (np.isfinite(spacing).all() and (spacing > 0).all()):
            raise ValueError(f"spacing must be strictly positive, got {spacing}")
        if not np.isfinite(origin).all():
            raise ValueError("origin must be finite")
        self.data = data
        self.spacing = spacing
        self.origin = origin

    @property
    def dims(self) -> tuple[int, int, int]:
        return self.data.shape

    def is_binary(self) -> bool:
        return bool(np.isin(self.data, (0, 1)).all())

    def voxel_centers(self, indices: np.ndarray) -> np.ndarray:
        """Physical centers (mm) for an (n, 3) array of voxel indices."""
        return self.origin + np.asarray(indices, dtype=np.float64) * self.spacing


@dataclass
class Kernel3:
    """Odd-sized integer convolution kernel."""

    weights: np.ndarray

    def __post_init__(self):
        w = np.asarray(self.weights)
        if w.ndim != 3:
            raise ValueError("kernel must be 3D")
        if any(d % 2 == 0 or d < 1 for d in w.shape):
            raise ValueError(f"kernel dims must be odd and positive, got {w.shape}")
        self.weights = w.astype(np.int64)

    @property
    def dims(self) -> tuple[int, int, int]:
        return self.weights.shape


@dataclass
class PointCloud:
    """Indexed points in R^3 with strictly positive weights."""

    points: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=np.float64).reshape(-1, 3)
        w = np.asarray(self.weights, dtype=np.float64).reshape(-1)
        if pts.shape[0] != w.shape[0]:
            raise ValueError(f"points ({pts.shape[0]}) and weights ({w.shape[0]}) differ in length")
        if w.size and not (w > 0).all():
            raise ValueError("weights must be strictly positive")
        self.points = pts
        self.weights = w

    @property
    def n_x(self) -> int:
        return self.points.shape[0]


def laplacian_kernel() -> Kernel3:
    """3x3x3 kernel with 26 at the center and -1 elsewhere.

    Convolved with a binary grid, the response at an occupied voxel equals
    the number of exterior voxels in its 3x3x3 neighborhood (out-of-grid
    counts as exterior via zero padding).
    """
    w = np.full((3, 3, 3), -1, dtype=np.int64)
    w[1, 1, 1] = 26
    return Kernel3(w)


def ones_kernel(l: int = DEFAULT_NEIGHBORHOOD) -> Kernel3:
    """l x l x l all-ones box kernel used for region growth."""
    l = int(l)
    if l < 1 or l % 2 == 0:
        raise ValueError(f"neighborhood size must be odd and positive, got {l}")
    return Kernel3(np.ones((l, l, l), dtype=np.int64))


def convolve3(grid: VoxelGrid, kernel: Kernel3) -> VoxelGrid:
    """Direct 3D convolution with zero padding, integer exact.

    Output has the same dims, spacing and origin as the input.
    """
    if any(k > g for k, g in zip(kernel.dims, grid.dims)):
        raise ValueError(f"kernel dims {kernel.dims} exceed grid dims {grid.dims}")
    data = grid.data.astype(np.int64, copy=False)
    out = ndimage.convolve(data, kernel.weights, mode="constant", cval=0)
    return VoxelGrid(out, grid.spacing, grid.origin)


def boundary_mask(grid: VoxelGrid, epsilon: int = DEFAULT_EPSILON) -> VoxelGrid:
    """Binary mask of interior boundary voxels.

    A voxel is kept when it is occupied and has at least ``epsilon`` exterior
    voxels in its 3x3x3 neighborhood. The occupancy requirement excludes
    exterior voxels adjacent to the volume, which would otherwise pass the
    threshold.
    """
    if not grid.is_binary():
        raise ValueError("boundary_mask requires a binary occupancy grid")
    response = convolve3(grid, laplacian_kernel()).data
    mask = ((response >= int(epsilon)) & (grid.data == 1)).astype(np.int64)
    return VoxelGrid(mask, grid.spacing, grid.origin)


def _snap_to_mask(mask: np.ndarray, seed: tuple[int, int, int], radius: int,
                  spacing: np.ndarray) -> tuple[int, int, int]:
    """Nearest mask voxel within a Chebyshev radius of seed, else error.

    Nearest is by physical distance; ties break on lexicographic index order.
    """
    dims = mask.shape
    lo = [max(0, seed[a] - radius) for a in range(3)]
    hi = [min(dims[a], seed[a] + radius + 1) for a in range(3)]
    if any(lo[a] >= hi[a] for a in range(3)):
        raise EmptySelectionError(f"query voxel {seed} is beyond the snap radius of any boundary voxel")
    window = mask[lo[0]:hi[0], lo[1]:hi[1], lo[2]:hi[2]]
    candidates = np.argwhere(window > 0)
    if candidates.size == 0:
        raise EmptySelectionError(
            f"no boundary voxel within Chebyshev radius {radius} of query voxel {seed}"
        )
    candidates = candidates + np.array(lo)
    offsets = (candidates - np.array(seed)) * spacing
    dist2 = (offsets**2).sum(axis=1)
    order = np.lexsort((candidates[:, 2], candidates[:, 1], candidates[:, 0], dist2))
    return tuple(int(c) for c in candidates[order[0]])


def select_points(
    grid: VoxelGrid,
    seed: tuple[int, int, int],
    l: int = DEFAULT_NEIGHBORHOOD,
    max_iters: int = DEFAULT_MAX_ITERS,
    epsilon: int = DEFAULT_EPSILON,
) -> VoxelGrid:
    """Grow a single-surface region of boundary voxels around a query voxel.

    Starting from the seed (snapped to the nearest boundary voxel within
    Chebyshev radius ``l`` if needed), the region expands one box-kernel
    neighborhood per step, restricted to the boundary mask. After growth the
    support equals the set of mask voxels within ``max_iters`` hops of the
    seed, where one hop spans Chebyshev distance (l-1)/2. Accumulated values
    are larger near the seed and approximate an inverse surface distance.

    Emits PerimeterTruncationWarning when the grown region comes close enough
    to the grid perimeter that the next dilation would leave the grid.
    """
    l = int(l)
    max_iters = int(max_iters)
    if max_iters < 1:
        raise ValueError(f"max_iters must be at least 1, got {max_iters}")
    mask_grid = boundary_mask(grid, epsilon)
    mask = mask_grid.data
    seed = tuple(int(s) for s in seed)
    inside = all(0 <= seed[a] < mask.shape[a] for a in range(3))
    if not inside or mask[seed] == 0:
        seed = _snap_to_mask(mask, seed, l, grid.spacing)

    kernel = ones_kernel(l)
    delta = np.zeros_like(mask)
    delta[seed] = 1
    region = convolve3(VoxelGrid(delta, grid.spacing, grid.origin), kernel).data * mask
    for _ in range(max_iters - 1):
        grown = convolve3(VoxelGrid(region, grid.spacing, grid.origin), kernel).data * mask
        region = np.minimum(region + grown, _SATURATION)

    margin = (l - 1) // 2
    support = np.argwhere(region > 0)
    if support.size:
        near_low = (support <= margin).any()
        near_high = (support >= np.array(region.shape) - 1 - margin).any()
        if near_low or near_high:
            warnings.warn(
                "region growth reached the grid perimeter; selection may be truncated",
                PerimeterTruncationWarning,
                stacklevel=2,
            )
    return VoxelGrid(region, grid.spacing, grid.origin)


def extract_cloud(
    region: VoxelGrid,
    weight_mode: str = "uniform",
    weight_grid: VoxelGrid | None = None,
) -> PointCloud:
    """One point per nonzero region voxel, at its physical center.

    Weight modes:
        uniform: all weights 1.
        inverse-distance: region value divided by the region maximum, in (0, 1].
        external-map: weights read from ``weight_grid`` at the same voxels.
    """
    indices = np.argwhere(region.data > 0)
    if indices.shape[0] == 0:
        raise EmptySelectionError("region grid has no nonzero voxels")
    points = region.voxel_centers(indices)
    if weight_mode == "uniform":
        weights = np.ones(indices.shape[0])
    elif weight_mode == "inverse-distance":
        values = region.data[tuple(indices.T)].astype(np.float64)
        weights = values / values.max()
    elif weight_mode == "external-map":
        if weight_grid is None:
            raise ValueError("external-map mode requires a weight grid")
        if weight_grid.dims != region.dims:
            raise ValueError(
                f"weight grid dims {weight_grid.dims} do not match region dims {region.dims}"
            )
        weights = weight_grid.data[tuple(indices.T)].astype(np.float64)
        if not (weights > 0).all():
            raise ValueError("external weight map must be strictly positive on selected voxels")
    else:
        raise ValueError(f"unknown weight mode: {weight_mode!r}")
    return PointCloud(points, weights)
