"""Plain-text file formats.

All formats are diffable text. Grids use the VOX1 layout: one ASCII header
line ``VOX1 n m p sx sy sz ox oy oz`` followed by n*m*p whitespace-separated
values in x-fastest order (i, then j, then k). Point clouds are ``x,y,z,w``
delimited text. Fitted surfaces are JSON documents; field names are fixed in
the README. Floats are serialized at full double precision via repr.
"""

from __future__ import annotations

import json
from importlib import resources
from pathlib import Path

import numpy as np

from .bezier import BezierSurface, design_matrix
from .errors import FileFormatError
from .selection import FitModel, param_count
from .simulate import ExperimentSpec, StudyRow, TrialRecord
from .voxel import PointCloud, VoxelGrid

VOX_MAGIC = "VOX1"
CLOUD_HEADER = "x,y,z,w"


def _fmt(value: float) -> str:
    return repr(float(value))


# ---------------------------------------------------------------------------
# Voxel grids
# ---------------------------------------------------------------------------

def write_voxel_grid(grid: VoxelGrid, path) -> None:
    n, m, p = grid.dims
    integral = np.issubdtype(grid.data.dtype, np.integer)
    header = " ".join(
        [VOX_MAGIC, str(n), str(m), str(p)]
        + [_fmt(s) for s in grid.spacing]
        + [_fmt(o) for o in grid.origin]
    )
    flat = grid.data.flatten(order="F")
    lines = [header]
    for start in range(0, flat.size, n):
        chunk = flat[start:start + n]
        if integral:
            lines.append(" ".join(str(int(v)) for v in chunk))
        else:
            lines.append(" ".join(_fmt(v) for v in chunk))
    Path(path).write_text("\n".join(lines) + "\n")


def read_voxel_grid(path) -> VoxelGrid:
    path = Path(path)
    text = path.read_text()
    lines = text.splitlines()
    if not lines:
        raise FileFormatError(f"{path}: empty file")
    header = lines[0].split()
    if len(header) != 10 or header[0] != VOX_MAGIC:
        raise FileFormatError(f"{path}:1: expected 'VOX1 n m p sx sy sz ox oy oz' header")
    try:
        n, m, p = (int(tok) for tok in header[1:4])
        spacing = [float(tok) for tok in header[4:7]]
        origin = [float(tok) for tok in header[7:10]]
    except ValueError as exc:
        raise FileFormatError(f"{path}:1: bad header value ({exc})") from exc
    values = []
    for lineno, line in enumerate(lines[1:], start=2):
        for tok in line.split():
            try:
                values.append(float(tok))
            except ValueError as exc:
                raise FileFormatError(f"{path}:{lineno}: bad value {tok!r}") from exc
    if len(values) != n * m * p:
        raise FileFormatError(
            f"{path}: expected {n * m * p} values for dims ({n}, {m}, {p}), got {len(values)}"
        )
    arr = np.array(values)
    if arr.size and np.all(arr == np.round(arr)):
        arr = arr.astype(np.int64)
    data = arr.reshape((n, m, p), order="F")
    return VoxelGrid(data, spacing, origin)


# ---------------------------------------------------------------------------
# Point clouds
# ---------------------------------------------------------------------------

def write_point_cloud(cloud: PointCloud, path) -> None:
    lines = [CLOUD_HEADER]
    for pt, w in zip(cloud.points, cloud.weights):
        lines.append(",".join([_fmt(pt[0]), _fmt(pt[1]), _fmt(pt[2]), _fmt(w)]))
    Path(path).write_text("\n".join(lines) + "\n")


def read_point_cloud(path) -> PointCloud:
    path = Path(path)
    lines = path.read_text().splitlines()
    if not lines or lines[0].strip() != CLOUD_HEADER:
        raise FileFormatError(f"{path}:1: expected '{CLOUD_HEADER}' header")
    points = []
    weights = []
    for lineno, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        parts = line.split(",")
        if len(parts) != 4:
            raise FileFormatError(f"{path}:{lineno}: expected 4 comma-separated values")
        try:
            values = [float(tok) for tok in parts]
        except ValueError as exc:
            raise FileFormatError(f"{path}:{lineno}: bad value ({exc})") from exc
        points.append(values[:3])
        weights.append(values[3])
    try:
        return PointCloud(np.array(points).reshape(-1, 3), np.array(weights))
    except ValueError as exc:
        raise FileFormatError(f"{path}: {exc}") from exc


# ---------------------------------------------------------------------------
# Fitted surface documents
# ---------------------------------------------------------------------------

def write_surface_model(model: FitModel, cloud: PointCloud, path) -> None:
    """JSON document for a fitted model, including per-point records.

    The residual of each record is the Euclidean distance from the cloud
    point to the surface at the fitted parameters.
    """
    b = design_matrix(model.u, model.v, model.n_u, model.n_v)
    fitted = b.T @ model.surface.flat
    residuals = np.sqrt(np.sum((cloud.points - fitted) ** 2, axis=1))
    doc = {
        "n_u": model.n_u,
        "n_v": model.n_v,
        "control": model.surface.control.tolist(),
        "sigma2": float(model.sigma2),
        "t": float(model.t),
        "centroid": [float(c) for c in model.centroid],
        "points": [
            {"u": float(u), "v": float(v), "residual": float(r)}
            for u, v, r in zip(model.u, model.v, residuals)
        ],
    }
    Path(path).write_text(json.dumps(doc, indent=1) + "\n")


def read_surface_model(path) -> tuple[FitModel, np.ndarray]:
    """Parse a surface document; returns the model and stored residuals."""
    path = Path(path)
    try:
        doc = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise FileFormatError(f"{path}:{exc.lineno}: {exc.msg}") from exc
    try:
        n_u = int(doc["n_u"])
        n_v = int(doc["n_v"])
        surface = BezierSurface(np.array(doc["control"], dtype=np.float64))
        records = doc["points"]
        u = np.array([rec["u"] for rec in records], dtype=np.float64)
        v = np.array([rec["v"] for rec in records], dtype=np.float64)
        residuals = np.array([rec["residual"] for rec in records], dtype=np.float64)
        model = FitModel(
            surface=surface,
            u=u,
            v=v,
            sigma2=float(doc["sigma2"]),
            t=float(doc["t"]),
            d=param_count(max(len(records), 1), n_u, n_v),
            centroid=np.array(doc["centroid"], dtype=np.float64),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise FileFormatError(f"{path}: malformed surface document ({exc})") from exc
    if (surface.n_u, surface.n_v) != (n_u, n_v):
        raise FileFormatError(
            f"{path}: control tensor shape does not match recorded orders ({n_u}, {n_v})"
        )
    return model, residuals


# ---------------------------------------------------------------------------
# Study configs and results
# ---------------------------------------------------------------------------

_SPEC_INT = {"n_tr": "n_tr", "n_te": "n_te", "seed": "seed", "trials": "trials"}
_SPEC_FLOAT = {"sigma2_y": "sigma2_y", "lam": "lam"}
_SPEC_STR = {"name": "name", "surface": "surface", "mode": "mode"}
_SPEC_PAIR = {"orders": "orders", "brute_cap": "brute_cap"}


def parse_study_config(text: str, source: str = "<config>") -> list[ExperimentSpec]:
    """Parse ``[spec]`` blocks of ``key = value`` lines into experiment specs."""
    blocks: list[dict] = []
    current: dict | None = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if line == "[spec]":
            current = {}
            blocks.append(current)
            continue
        if current is None:
            raise FileFormatError(f"{source}:{lineno}: expected a [spec] section before values")
        if "=" not in line:
            raise FileFormatError(f"{source}:{lineno}: expected 'key = value'")
        key, _, value = line.partition("=")
        key = key.strip()
        value = value.strip()
        if key in _SPEC_INT:
            try:
                current[key] = int(value)
            except ValueError:
                raise FileFormatError(f"{source}:{lineno}: field {key} needs an integer") from None
        elif key in _SPEC_FLOAT:
            try:
                current[key] = float(value)
            except ValueError:
                raise FileFormatError(f"{source}:{lineno}: field {key} needs a number") from None
        elif key in _SPEC_STR:
            current[key] = value
        elif key in _SPEC_PAIR:
            parts = value.split()
            if len(parts) != 2:
                raise FileFormatError(f"{source}:{lineno}: field {key} needs two integers")
            try:
                current[key] = (int(parts[0]), int(parts[1]))
            except ValueError:
                raise FileFormatError(f"{source}:{lineno}: field {key} needs two integers") from None
        else:
            raise FileFormatError(f"{source}:{lineno}: unknown field {key!r}")
    if not blocks:
        raise FileFormatError(f"{source}: no [spec] sections found")
    specs = []
    for idx, block in enumerate(blocks):
        for required in ("surface", "n_tr", "sigma2_y", "seed"):
            if required not in block:
                raise FileFormatError(f"{source}: spec {idx + 1} is missing field {required!r}")
        try:
            specs.append(ExperimentSpec(**block))
        except ValueError as exc:
            raise FileFormatError(f"{source}: spec {idx + 1}: {exc}") from exc
    return specs


def load_study_config(name_or_path) -> list[ExperimentSpec]:
    """Load a config from a path, or from the bundled configs by name."""
    path = Path(name_or_path)
    if path.exists():
        return parse_study_config(path.read_text(), str(path))
    name = str(name_or_path)
    if not name.endswith(".cfg"):
        name += ".cfg"
    bundle = resources.files("patchfit").joinpath("configs", name)
    if bundle.is_file():
        return parse_study_config(bundle.read_text(), f"bundled:{name}")
    raise FileFormatError(f"no such config file or bundled config: {name_or_path}")


_TABLE_COLUMNS = ("name", "surface", "mode", "n_tr", "sigma2_y", "trials", "failures",
                  "mean_iterations", "mean_size", "mean_sigma2_tr", "mean_sigma2_te",
                  "test_failures")
_LONG_COLUMNS = ("name", "trial", "surface", "mode", "n_tr", "sigma2_y", "iterations",
                 "size", "n_u", "n_v", "sigma2_tr", "sigma2_te", "test_failures", "error")


def _cell(value) -> str:
    if isinstance(value, float):
        return _fmt(value)
    # error messages may carry delimiters; keep rows parseable
    return str(value).replace(",", ";").replace("\n", " ")


def write_study_table(rows: list[StudyRow], path) -> None:
    """Aggregate results, one row per spec. Wall times are reported on stdout
    only so that re-runs produce byte-identical files."""
    lines = [",".join(_TABLE_COLUMNS)]
    for row in rows:
        lines.append(",".join(_cell(getattr(row, col)) for col in _TABLE_COLUMNS))
    Path(path).write_text("\n".join(lines) + "\n")


def write_study_long(records: list[TrialRecord], path) -> None:
    """Plot-ready long format, one row per trial."""
    lines = [",".join(_LONG_COLUMNS)]
    for rec in records:
        lines.append(",".join(_cell(getattr(rec, col)) for col in _LONG_COLUMNS))
    Path(path).write_text("\n".join(lines) + "\n")
