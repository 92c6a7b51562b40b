"""Linear lifts of an infinitesimal action to trivial vector bundles M x R^r."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from . import ode
from .action import VectorFieldAlgebra, _require_inside, fd_jacobian
from .errors import InvalidParameter, NotLiftable, StencilExitsDomain
from .group import GroupPath, GroupSpec
from .lift import FD_STEP, POINT_TOL
from .recurrence import philox

Vertical = Callable[[np.ndarray], np.ndarray]
Base = Callable[[np.ndarray, np.ndarray], np.ndarray]


@dataclass
class LinearLift:
    """Lifted fields (zeta_i(x), A_i(x) v); ``base`` optionally overrides the base component."""

    algebra: VectorFieldAlgebra
    vertical: Sequence[Vertical]
    rank: int
    base: Sequence[Base] | None = None
    label: str = ""

    def __post_init__(self):
        if len(self.vertical) != self.algebra.dim:
            raise InvalidParameter("one vertical part per basis field is required")
        if self.base is not None and len(self.base) != self.algebra.dim:
            raise InvalidParameter("one base component per basis field is required")

    def matrices(self, i: int, X: np.ndarray) -> np.ndarray:
        X = np.atleast_2d(X)
        return np.asarray(self.vertical[i](X), float).reshape(len(X), self.rank, self.rank)

    def field(self, i: int, X: np.ndarray, V: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Base and vertical components of the i-th lifted field at rows (x, v)."""
        X = np.atleast_2d(np.asarray(X, float))
        V = np.atleast_2d(np.asarray(V, float))
        if self.base is None:
            b = np.asarray(self.algebra.fields[i](X), float).reshape(X.shape)
        else:
            b = np.asarray(self.base[i](X, V), float).reshape(X.shape)
        return b, np.einsum("nij,nj->ni", self.matrices(i, X), V)

    def joint(self, i: int):
        """The i-th lifted field as a map on stacked (x, v) rows."""
        d = self.algebra.dimension

        def f(P):
            b, w = self.field(i, P[:, :d], P[:, d:])
            return np.concatenate([b, w], axis=1)
        return f


@dataclass
class ProjectabilityReport:
    passed: bool
    fiber_dependence: float
    projection_defect: float
    tol: float
    worst_sample: list | None = None

    def to_dict(self) -> dict:
        return {"passed": self.passed, "fiber_dependence": self.fiber_dependence,
                "projection_defect": self.projection_defect, "tol": self.tol, "worst_sample": self.worst_sample}


def projectability_check(lift: LinearLift, samples, h: float = 1e-3, tol: float = 1e-9, seed: int = 0) -> ProjectabilityReport:
    """Base components must ignore the fiber coordinate and project onto zeta."""
    X = np.atleast_2d(np.asarray(samples, float))
    _require_inside(lift.algebra.domain, X)
    rng = philox(seed)
    V1 = rng.normal(size=(len(X), lift.rank))
    V2 = rng.normal(size=(len(X), lift.rank))
    dep = np.zeros(len(X))
    proj = np.zeros(len(X))
    for i in range(lift.algebra.dim):
        b1, _ = lift.field(i, X, V1)
        b2, _ = lift.field(i, X, V2)
        b3, _ = lift.field(i, X, V1 + h)
        z = np.asarray(lift.algebra.fields[i](X), float).reshape(X.shape)
        dep = np.maximum(dep, np.maximum(np.linalg.norm(b1 - b2, axis=1), np.linalg.norm(b3 - b1, axis=1) / h))
        proj = np.maximum(proj, np.linalg.norm(b1 - z, axis=1))
    worst = int(np.argmax(np.maximum(dep, proj)))
    passed = bool(dep.max() <= tol and proj.max() <= tol)
    return ProjectabilityReport(passed, float(dep.max()), float(proj.max()), tol,
                                None if passed else X[worst].tolist())


def linearity_defect(lift: LinearLift, samples, seed: int = 0) -> float:
    """Max |w(x, 2v) - 2 w(x, v)| + |w(x, u + v) - w(x, u) - w(x, v)| of the vertical parts."""
    X = np.atleast_2d(np.asarray(samples, float))
    rng = philox(seed)
    U = rng.normal(size=(len(X), lift.rank))
    V = rng.normal(size=(len(X), lift.rank))
    worst = 0.0
    for i in range(lift.algebra.dim):
        wu = lift.field(i, X, U)[1]
        wv = lift.field(i, X, V)[1]
        e = np.linalg.norm(lift.field(i, X, 2 * V)[1] - 2 * wv, axis=1)
        e += np.linalg.norm(lift.field(i, X, U + V)[1] - wu - wv, axis=1)
        worst = max(worst, float(e.max()))
    return worst


def homomorphism_defect(lift: LinearLift, i: int, j: int, x, v, h: float = 1e-4) -> float:
    """|FD [Y_i, Y_j] - Y_{[e_i, e_j]}| at (x, v) on the total space."""
    x = np.asarray(x, float).reshape(-1)
    v = np.asarray(v, float).reshape(-1)
    p = np.concatenate([x, v])
    d = x.shape[0]
    stencil = np.concatenate([x + h * np.eye(d), x - h * np.eye(d)])
    if not np.all(lift.algebra.domain.contains(np.concatenate([x[None, :], stencil]))):
        raise StencilExitsDomain(f"bracket stencil leaves the domain at {x.tolist()}")
    fi, fj = lift.joint(i), lift.joint(j)
    Ji, Jj = fd_jacobian(fi, p, h), fd_jacobian(fj, p, h)
    vi, vj = fi(p[None, :])[0], fj(p[None, :])[0]
    lie = Jj @ vi - Ji @ vj
    c = lift.algebra.structure_constants[i, j]
    expected = sum(c[k] * lift.joint(k)(p[None, :])[0] for k in range(lift.algebra.dim))
    return float(np.linalg.norm(lie - expected))


def _stencils(P: np.ndarray, h: float):
    d = P.shape[1]
    step = h * np.maximum(1.0, np.linalg.norm(P, axis=1))
    offs = step[:, None, None] * np.eye(d)[None]
    return np.concatenate([P[:, None, :] + offs, P[:, None, :] - offs], axis=1).reshape(-1, d), step


def tangent_lift(algebra: VectorFieldAlgebra, h: float = FD_STEP, at=None) -> LinearLift:
    """Canonical lift to TM with A_i(x) the FD Jacobian of zeta_i at x.

    Fields are evaluated wherever the integrator asks (trial stages may sit just
    outside the domain); stencils at the points ``at`` are checked up front.
    """
    d = algebra.dimension
    if at is not None:
        P = np.atleast_2d(np.asarray(at, float))
        _require_inside(algebra.domain, P)
        stencil, _ = _stencils(P, h)
        inside = algebra.domain.contains(stencil)
        if not np.all(inside):
            bad = int(np.flatnonzero(~inside)[0]) // (2 * d)
            raise StencilExitsDomain(f"tangent-lift stencil leaves the domain at {P[bad].tolist()}")

    def make(f):
        def A(P):
            P = np.atleast_2d(P)
            stencil, step = _stencils(P, h)
            vals = np.asarray(f(stencil), float).reshape(len(P), 2 * d, d)
            # out[n, k, j] = d f_k / d x_j
            return ((vals[:, :d] - vals[:, d:]) / (2 * step[:, None, None])).transpose(0, 2, 1)
        return A

    return LinearLift(algebra, [make(f) for f in algebra.fields], d, label="tangent")


@dataclass
class BundleLiftResult:
    g_end: np.ndarray
    y: np.ndarray
    v: np.ndarray
    escaped: np.ndarray
    s_star: np.ndarray = field(default_factory=lambda: np.zeros(0))


def _lift_rows(lift: LinearLift, path: GroupPath, X: np.ndarray, V: np.ndarray) -> BundleLiftResult:
    algebra = lift.algebra
    d = algebra.dimension
    Z = np.concatenate([X, V], axis=1)
    N = len(Z)
    escaped = np.zeros(N, bool)
    s_star = np.full(N, np.nan)
    dom = algebra.domain

    def corridor(p, q):
        return dom.corridor(p[:, :d], q[:, :d])

    def clearance(p):
        return dom.signed_distance(p[:, :d])

    for seg in path.segments:
        idx = np.flatnonzero(~escaped)
        if idx.size == 0:
            break

        def rhs(rows, s, y, seg=seg):
            c = np.broadcast_to(np.asarray(seg.derivative(s), float).reshape(-1, algebra.dim),
                                (len(rows), algebra.dim))
            out = np.zeros_like(y)
            for i in range(algebra.dim):
                b, w = lift.field(i, y[:, :d], y[:, d:])
                out[:, :d] += c[:, i:i + 1] * b
                out[:, d:] += c[:, i:i + 1] * w
            return out

        speed = float(np.max(np.abs(seg.derivative(np.linspace(seg.a, seg.b, 5)))))
        res = ode.integrate(rhs, seg.a, seg.b, Z[idx], corridor=corridor, clearance=clearance,
                            event_tol=ode.EVENT_TOL / max(1.0, speed))
        Z[idx] = res.y
        esc = idx[res.escaped]
        escaped[esc] = True
        s_star[esc] = res.t[res.escaped]
    return BundleLiftResult(path.end, Z[:, :d], Z[:, d:], escaped, s_star)


def lift_path_on_bundle(lift: LinearLift, spec: GroupSpec, path: GroupPath, x0, v0) -> BundleLiftResult:
    """Joint lift of (y, v) along ``path``; raises not-liftable when the base lift escapes."""
    if path.k != spec.k or spec.k != lift.algebra.dim:
        raise InvalidParameter("path, group and algebra dimensions must agree")
    X = np.atleast_2d(np.asarray(x0, float))
    V = np.atleast_2d(np.asarray(v0, float))
    if V.shape[1] != lift.rank:
        raise InvalidParameter(f"fiber vectors must have length {lift.rank}")
    if len(X) == 1 and len(V) > 1:
        X = np.repeat(X, len(V), axis=0)
    if len(V) == 1 and len(X) > 1:
        V = np.repeat(V, len(X), axis=0)
    if len(X) != len(V):
        raise InvalidParameter("base points and fiber vectors must pair up row by row")
    X = np.array(X, float)
    V = np.array(V, float)
    _require_inside(lift.algebra.domain, X)
    res = _lift_rows(lift, path, X, V)
    if np.any(res.escaped):
        i = int(np.flatnonzero(res.escaped)[0])
        raise NotLiftable(f"the base lift escapes at s={res.s_star[i]:.6g}", probe=i, escape=float(res.s_star[i]))
    return res


__all__ = [
    "LinearLift", "ProjectabilityReport", "projectability_check", "linearity_defect", "homomorphism_defect",
    "tangent_lift", "BundleLiftResult", "lift_path_on_bundle", "POINT_TOL",
]
