"""Bernstein bases and Bezier surface evaluation with analytic derivatives.

A patch is the tensor-product polynomial

    s(u, v) = sum_ij b(u; i, n_u) * b(v; j, n_v) * A[i, j, :]

with control tensor ``A`` of shape ``(n_u+1, n_v+1, 3)``. Parameters are
unconstrained reals: the basis is evaluated as a polynomial everywhere and is
never clamped to [0, 1].

Flattening convention: ``A`` reshapes to ``((n_u+1)(n_v+1), 3)`` with the
u index fastest (Fortran order over the first two axes), so that

    s(u, v) = A_flat^T (b(v) kron b(u)).

Every module in the package relies on this ordering.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np


@lru_cache(maxsize=None)
def _pascal_row(n: int) -> np.ndarray:
    """Binomial coefficients C(n, 0..n) built by Pascal addition (exact)."""
    row = np.ones(1)
    for _ in range(n):
        nxt = np.empty(row.size + 1)
        nxt[0] = 1.0
        nxt[-1] = 1.0
        nxt[1:-1] = row[:-1] + row[1:]
        row = nxt
    row.flags.writeable = False
    return row


@lru_cache(maxsize=None)
def _deriv_factors(n: int) -> tuple[np.ndarray, ...]:
    i = np.arange(n + 1, dtype=np.float64)
    j = n - i
    factors = (i, j, i * (i - 1.0), 2.0 * i * j, j * (j - 1.0))
    for f in factors:
        f.flags.writeable = False
    return factors


def _power_tables(u: float, n: int) -> tuple[np.ndarray, np.ndarray]:
    """Return (pu, qrev) with pu[k] = u**k and qrev[i] = (1-u)**(n-i)."""
    pu = np.empty(n + 1)
    qu = np.empty(n + 1)
    pu[0] = 1.0
    qu[0] = 1.0
    w = 1.0 - u
    for k in range(1, n + 1):
        pu[k] = pu[k - 1] * u
        qu[k] = qu[k - 1] * w
    return pu, qu[::-1]


def _b0(n: int, pu: np.ndarray, qrev: np.ndarray) -> np.ndarray:
    return _pascal_row(n) * pu * qrev


def _b1(n: int, pu: np.ndarray, qrev: np.ndarray) -> np.ndarray:
    i, j, _, _, _ = _deriv_factors(n)
    pum1 = np.empty(n + 1)
    pum1[0] = 0.0
    pum1[1:] = pu[:-1]
    qrevm1 = np.empty(n + 1)
    qrevm1[-1] = 0.0
    qrevm1[:-1] = qrev[1:]
    return _pascal_row(n) * (i * pum1 * qrev - j * pu * qrevm1)


def _b2(n: int, pu: np.ndarray, qrev: np.ndarray) -> np.ndarray:
    _, _, cii, cij, cjj = _deriv_factors(n)
    pum1 = np.empty(n + 1)
    pum1[0] = 0.0
    pum1[1:] = pu[:-1]
    pum2 = np.empty(n + 1)
    pum2[:2] = 0.0
    pum2[2:] = pu[:-2]
    qrevm1 = np.empty(n + 1)
    qrevm1[-1] = 0.0
    qrevm1[:-1] = qrev[1:]
    qrevm2 = np.empty(n + 1)
    qrevm2[-2:] = 0.0
    qrevm2[:-2] = qrev[2:]
    return _pascal_row(n) * (cii * pum2 * qrev - cij * pum1 * qrevm1 + cjj * pu * qrevm2)


_B_FUNCS = (_b0, _b1, _b2)


def bernstein(u: float, i: int, n: int) -> float:
    """Evaluate the degree-n Bernstein polynomial C(n,i) u^i (1-u)^(n-i).

    Exact at u in {0, 1}. Raises ValueError when i is outside [0, n].
    """
    i = int(i)
    n = int(n)
    if n < 0:
        raise ValueError(f"order must be nonnegative, got {n}")
    if i < 0 or i > n:
        raise ValueError(f"basis index {i} outside [0, {n}]")
    return float(_pascal_row(n)[i] * u**i * (1.0 - u) ** (n - i))


def basis_vector(u: float, n: int, deriv: int = 0) -> np.ndarray:
    """All n+1 Bernstein basis values at u, or their elementwise derivatives.

    Args:
        u: Parameter value (any real).
        n: Polynomial order, at least 1.
        deriv: 0 for values, 1 or 2 for first/second derivatives in u.

    Returns:
        Array of length n+1.
    """
    n = int(n)
    if n < 1:
        raise ValueError(f"order must be at least 1, got {n}")
    if deriv not in (0, 1, 2):
        raise ValueError(f"derivative level must be 0, 1 or 2, got {deriv}")
    pu, qrev = _power_tables(float(u), n)
    return _B_FUNCS[deriv](n, pu, qrev)


def _batch_power_tables(values: np.ndarray, n: int) -> tuple[np.ndarray, np.ndarray]:
    """Batched power tables; row k matches the scalar path bitwise."""
    m = values.size
    pu = np.empty((m, n + 1))
    qu = np.empty((m, n + 1))
    pu[:, 0] = 1.0
    qu[:, 0] = 1.0
    w = 1.0 - values
    for k in range(1, n + 1):
        pu[:, k] = pu[:, k - 1] * values
        qu[:, k] = qu[:, k - 1] * w
    return pu, qu[:, ::-1]


def _basis_rows(values: np.ndarray, n: int) -> np.ndarray:
    """Basis values for a batch of parameters: rows of shape (len, n+1)."""
    pu, qrev = _batch_power_tables(values, n)
    return _pascal_row(n) * pu * qrev


def _basis_rows_derivs(values: np.ndarray, n: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Batched basis rows with first and second derivative rows.

    Row k of each output matches ``basis_vector(values[k], n, deriv)`` for
    deriv 0, 1, 2; the same shifted-power expressions are used.
    """
    pu, qrev = _batch_power_tables(values, n)
    m = values.size
    i, j, cii, cij, cjj = _deriv_factors(n)
    c = _pascal_row(n)

    pum1 = np.empty((m, n + 1))
    pum1[:, 0] = 0.0
    pum1[:, 1:] = pu[:, :-1]
    pum2 = np.empty((m, n + 1))
    pum2[:, :2] = 0.0
    pum2[:, 2:] = pu[:, :-2]
    qrevm1 = np.empty((m, n + 1))
    qrevm1[:, -1] = 0.0
    qrevm1[:, :-1] = qrev[:, 1:]
    qrevm2 = np.empty((m, n + 1))
    qrevm2[:, -2:] = 0.0
    qrevm2[:, :-2] = qrev[:, 2:]

    b0 = c * pu * qrev
    b1 = c * (i * pum1 * qrev - j * pu * qrevm1)
    b2 = c * (cii * pum2 * qrev - cij * pum1 * qrevm1 + cjj * pu * qrevm2)
    return b0, b1, b2


@dataclass(frozen=True)
class BezierSurface:
    """Tensor-product patch defined by an (n_u+1, n_v+1, 3) control tensor."""

    control: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.control, dtype=np.float64)
        if arr.ndim != 3 or arr.shape[2] != 3:
            raise ValueError(f"control tensor must have shape (n_u+1, n_v+1, 3), got {arr.shape}")
        if arr.shape[0] < 2 or arr.shape[1] < 2:
            raise ValueError("surface orders must be at least 1 in each direction")
        if not np.isfinite(arr).all():
            raise ValueError("control points must be finite")
        object.__setattr__(self, "control", arr)

    @property
    def n_u(self) -> int:
        return self.control.shape[0] - 1

    @property
    def n_v(self) -> int:
        return self.control.shape[1] - 1

    @property
    def size(self) -> int:
        """Number of control points, (n_u+1)(n_v+1)."""
        return self.control.shape[0] * self.control.shape[1]

    @property
    def flat(self) -> np.ndarray:
        """Control tensor as ((n_u+1)(n_v+1), 3), u index fastest."""
        return self.control.reshape(-1, 3, order="F")

    @classmethod
    def from_flat(cls, flat: np.ndarray, n_u: int, n_v: int) -> "BezierSurface":
        flat = np.asarray(flat, dtype=np.float64)
        expected = (n_u + 1) * (n_v + 1)
        if flat.shape != (expected, 3):
            raise ValueError(f"flat control must have shape ({expected}, 3), got {flat.shape}")
        return cls(flat.reshape(n_u + 1, n_v + 1, 3, order="F"))


def surface_eval(u: float, v: float, surface: BezierSurface) -> np.ndarray:
    """Point on the surface at (u, v), shape (3,)."""
    control = surface.control
    pu, qru = _power_tables(float(u), surface.n_u)
    pv, qrv = _power_tables(float(v), surface.n_v)
    bu = _b0(surface.n_u, pu, qru)
    bv = _b0(surface.n_v, pv, qrv)
    return bu @ np.tensordot(control, bv, axes=(1, 0))


def design_matrix(u: np.ndarray, v: np.ndarray, n_u: int, n_v: int) -> np.ndarray:
    """Stack per-point basis Kronecker products as columns.

    Column i equals ``kron(b(v_i; n_v), b(u_i; n_u))``, so for a surface S with
    matching orders, ``S.flat.T @ B[:, i] == surface_eval(u_i, v_i, S)``.

    Args:
        u, v: Parameter vectors of equal length n_x >= 1.
        n_u, n_v: Surface orders, at least 1.

    Returns:
        Matrix of shape ((n_u+1)(n_v+1), n_x).
    """
    u = np.atleast_1d(np.asarray(u, dtype=np.float64))
    v = np.atleast_1d(np.asarray(v, dtype=np.float64))
    if u.shape != v.shape or u.ndim != 1:
        raise ValueError(f"u and v must be 1D vectors of equal length, got {u.shape} and {v.shape}")
    if u.size < 1:
        raise ValueError("need at least one parameter pair")
    rows_u = _basis_rows(u, int(n_u))
    rows_v = _basis_rows(v, int(n_v))
    outer = rows_v[:, :, None] * rows_u[:, None, :]
    return outer.reshape(u.size, -1).T


def surface_jacobian(u: float, v: float, surface: BezierSurface) -> np.ndarray:
    """Partial derivatives of the surface map, rows (ds/du, ds/dv), shape (2, 3)."""
    control = surface.control
    pu, qru = _power_tables(float(u), surface.n_u)
    pv, qrv = _power_tables(float(v), surface.n_v)
    t0 = np.tensordot(control, _b0(surface.n_v, pv, qrv), axes=(1, 0))
    t1 = np.tensordot(control, _b1(surface.n_v, pv, qrv), axes=(1, 0))
    return np.stack((_b1(surface.n_u, pu, qru) @ t0, _b0(surface.n_u, pu, qru) @ t1))


def g_value(x: np.ndarray, u: float, v: float, surface: BezierSurface) -> float:
    """Half squared distance between x and the surface point at (u, v)."""
    r = x - surface_eval(u, v, surface)
    return 0.5 * float(r @ r)


def g_eval(
    x: np.ndarray, u: float, v: float, surface: BezierSurface
) -> tuple[float, np.ndarray, np.ndarray]:
    """Value, gradient and Hessian of the half squared point-to-surface distance.

    The gradient is with respect to (u, v). The Hessian is the Gauss-Newton
    term J J^T minus the curvature corrections from the second basis
    derivatives dotted with the residual; it is symmetric as stored but not
    necessarily positive definite.

    Returns:
        (value, gradient shape (2,), hessian shape (2, 2))
    """
    control = surface.control
    n_u, n_v = surface.n_u, surface.n_v
    pu, qru = _power_tables(float(u), n_u)
    pv, qrv = _power_tables(float(v), n_v)
    bu = _b0(n_u, pu, qru)
    bv = _b0(n_v, pv, qrv)
    t0 = np.tensordot(control, bv, axes=(1, 0))
    t1 = np.tensordot(control, _b1(n_v, pv, qrv), axes=(1, 0))
    s = bu @ t0
    r = x - s
    value = 0.5 * float(r @ r)

    bu1 = _b1(n_u, pu, qru)
    su = bu1 @ t0
    sv = bu @ t1
    grad = -np.array([su @ r, sv @ r])

    t2 = np.tensordot(control, _b2(n_v, pv, qrv), axes=(1, 0))
    c_u = (_b2(n_u, pu, qru) @ t0) @ r
    c_v = (bu @ t2) @ r
    c_uv = (bu1 @ t1) @ r
    h12 = su @ sv - c_uv
    hess = np.array([[su @ su - c_u, h12], [h12, sv @ sv - c_v]])
    return value, grad, hess
