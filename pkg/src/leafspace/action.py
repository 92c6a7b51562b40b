"""Infinitesimal actions: a basis of vector fields on a chart domain and their flows."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from . import ode
from .domains import ChartDomain, in_domain
from .errors import PointOutsideDomain, StencilExitsDomain

Field = Callable[[np.ndarray], np.ndarray]

__all__ = [
    "VectorFieldAlgebra", "FlowOutcome", "evaluate", "bracket_defect", "flow", "in_domain",
    "transport", "fd_jacobian", "jacobi_residual",
]


@dataclass
class VectorFieldAlgebra:
    """Basis fields zeta_{e_i} on ``domain`` plus structure constants.

    ``structure_constants[i, j, k]`` is the coefficient of e_k in [e_i, e_j].
    Each field maps an (N, d) array of points to an (N, d) array of vectors.
    """

    domain: ChartDomain
    fields: Sequence[Field]
    structure_constants: np.ndarray
    labels: Sequence[str] = field(default_factory=tuple)

    def __post_init__(self):
        m = len(self.fields)
        c = np.asarray(self.structure_constants, dtype=float)
        if c.size == 0:
            c = np.zeros((m, m, m))
        if c.shape != (m, m, m):
            raise ValueError(f"structure constants must have shape {(m, m, m)}")
        self.structure_constants = c
        self.fields = tuple(self.fields)

    @property
    def dim(self) -> int:
        return len(self.fields)

    @property
    def dimension(self) -> int:
        return self.domain.dimension

    def basis_values(self, points: np.ndarray) -> np.ndarray:
        """Array of shape (m, N, d) with every basis field at every point."""
        return np.stack([np.asarray(f(points), dtype=float).reshape(points.shape) for f in self.fields])

    def combination(self, coeffs: np.ndarray, points: np.ndarray) -> np.ndarray:
        vals = self.basis_values(points)
        coeffs = np.asarray(coeffs, dtype=float)
        if coeffs.ndim == 1:
            return np.tensordot(coeffs, vals, axes=1)
        return np.einsum("nm,mnd->nd", coeffs, vals)

    def is_fixed(self, points: np.ndarray) -> np.ndarray:
        """Rows where every basis field vanishes (within 1e-14)."""
        vals = self.basis_values(points)
        return np.all(np.abs(vals) <= 1e-14, axis=(0, 2))


@dataclass
class FlowOutcome:
    tag: str
    endpoint: np.ndarray | None
    t_escape: float | None
    times: np.ndarray
    points: np.ndarray

    @property
    def reached(self) -> bool:
        return self.tag == "reached"

    @property
    def last_point(self) -> np.ndarray:
        return self.points[-1]


def _point(algebra: VectorFieldAlgebra, x) -> np.ndarray:
    p = np.asarray(x, dtype=float).reshape(-1)
    if p.shape[0] != algebra.dimension:
        raise ValueError(f"point must have dimension {algebra.dimension}")
    return p


def _require_inside(domain: ChartDomain, pts: np.ndarray) -> None:
    inside = domain.contains(pts)
    if not np.all(inside):
        bad = int(np.flatnonzero(~inside)[0])
        raise PointOutsideDomain(f"point {pts[bad].tolist()} lies outside {domain.label or 'the domain'}")


def evaluate(algebra: VectorFieldAlgebra, X, x) -> np.ndarray:
    """zeta_X(x) = sum_i X^i zeta_{e_i}(x)."""
    p = _point(algebra, x)
    X = np.asarray(X, dtype=float).reshape(-1)
    if X.shape[0] != algebra.dim:
        raise ValueError(f"coefficient vector must have length {algebra.dim}")
    _require_inside(algebra.domain, p[None, :])
    return algebra.combination(X, p[None, :])[0]


def fd_jacobian(fn: Callable[[np.ndarray], np.ndarray], x: np.ndarray, h: float) -> np.ndarray:
    """Central-difference Jacobian of a vectorized map at a single point."""
    d = x.shape[0]
    stencil = np.concatenate([x + h * np.eye(d), x - h * np.eye(d)])
    vals = np.asarray(fn(stencil), dtype=float)
    return ((vals[:d] - vals[d:]) / (2 * h)).T


def _stencil_check(domain: ChartDomain, x: np.ndarray, h: float) -> None:
    _require_inside(domain, x[None, :])
    d = x.shape[0]
    stencil = np.concatenate([x + h * np.eye(d), x - h * np.eye(d)])
    if domain.signed_distance(x[None, :])[0] <= 2 * h or not np.all(domain.contains(stencil)):
        raise StencilExitsDomain(f"finite-difference stencil of size {h} leaves the domain at {x.tolist()}")


def jacobi_residual(c: np.ndarray) -> float:
    """Max violation of antisymmetry and the Jacobi identity by the constants."""
    c = np.asarray(c, dtype=float)
    if c.size == 0:
        return 0.0
    anti = np.max(np.abs(c + c.transpose(1, 0, 2)))
    # [[e_i, e_j], e_k] = c_ij^l c_lk^p
    t = np.einsum("ijl,lkp->ijkp", c, c)
    jac = t + t.transpose(1, 2, 0, 3) + t.transpose(2, 0, 1, 3)
    return float(max(anti, np.max(np.abs(jac))))


def bracket_defect(algebra: VectorFieldAlgebra, i: int, j: int, x, h: float = 1e-3) -> float:
    """|FD [zeta_i, zeta_j](x) - zeta_{[e_i, e_j]}(x)| with central differences."""
    p = _point(algebra, x)
    _stencil_check(algebra.domain, p, h)
    fi, fj = algebra.fields[i], algebra.fields[j]
    Ji = fd_jacobian(fi, p, h)
    Jj = fd_jacobian(fj, p, h)
    vi = np.asarray(fi(p[None, :]), float).reshape(-1)
    vj = np.asarray(fj(p[None, :]), float).reshape(-1)
    lie = Jj @ vi - Ji @ vj
    expected = algebra.combination(algebra.structure_constants[i, j], p[None, :])[0]
    return float(np.linalg.norm(lie - expected))


def transport(
    algebra: VectorFieldAlgebra,
    velocity,
    x0: np.ndarray,
    *,
    s0: float = 0.0,
    s1: float = 1.0,
    shared_step: bool = False,
    record: bool = False,
    rtol: float = ode.RTOL,
    atol: float = ode.ATOL,
    event_tol: float = ode.EVENT_TOL,
    locate: bool = True,
) -> ode.BatchResult:
    """Solve y' = zeta_{v(s)}(y) on [s0, s1] for every row of ``x0``.

    ``velocity`` is either an (N, m) array of constant coefficient rows, an
    (m,) vector shared by all rows, or a callable s -> (n, m) / (m,).
    Rows that start at a common zero of all basis fields stay put.  With
    ``locate=False`` only the escape flag is reliable, not the exit time.
    """
    x0 = np.atleast_2d(np.asarray(x0, dtype=float))
    N = x0.shape[0]
    if callable(velocity):
        def coeffs(idx, s):
            v = np.asarray(velocity(s), dtype=float)
            return np.broadcast_to(v, (len(idx), algebra.dim)) if v.ndim == 1 else v
    else:
        V = np.asarray(velocity, dtype=float)
        V = np.broadcast_to(V, (N, algebra.dim)) if V.ndim == 1 else V

        def coeffs(idx, s):
            return V[idx]

    if algebra.dim == 1:
        f = algebra.fields[0]

        def rhs(idx, s, y):
            return coeffs(idx, s) * np.asarray(f(y), dtype=float).reshape(y.shape)
    else:
        def rhs(idx, s, y):
            return np.einsum("nm,mnd->nd", coeffs(idx, s), algebra.basis_values(y))

    frozen = algebra.is_fixed(x0)
    return ode.integrate(
        rhs, s0, s1, x0, corridor=algebra.domain.corridor,
        clearance=algebra.domain.signed_distance, rtol=rtol, atol=atol,
        event_tol=event_tol, shared_step=shared_step, record=record, frozen=frozen,
        locate=locate,
    )


def flow(algebra: VectorFieldAlgebra, X, t: float, x0, *, record: bool = True) -> FlowOutcome:
    """Fl^{zeta_X}_t(x0) with adaptive stepping and boundary-event detection."""
    p = _point(algebra, x0)
    _require_inside(algebra.domain, p[None, :])
    X = np.asarray(X, dtype=float).reshape(-1)
    t = float(t)
    if t == 0.0:
        return FlowOutcome("reached", p.copy(), None, np.array([0.0]), p[None, :].copy())
    res = transport(algebra, (t * X)[None, :], p[None, :], record=record,
                    event_tol=ode.EVENT_TOL / max(1.0, abs(t)))
    if record:
        s, pts = res.trajectories[0]
        times = s * t
    else:
        times = np.array([0.0, res.t[0] * t])
        pts = np.stack([p, res.y[0]])
    if res.escaped[0]:
        return FlowOutcome("escaped", None, float(res.t[0] * t), times, pts)
    return FlowOutcome("reached", res.y[0].copy(), None, times, pts)
