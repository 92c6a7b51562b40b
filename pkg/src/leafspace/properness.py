"""Properness, isotropy compactness, slices and invariant metrics."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.optimize import minimize_scalar

from .action import _require_inside, _stencil_check, fd_jacobian
from .completion import SequenceFamily, certify
from .errors import BallExitsDomain, InvalidParameter, OrbitEscapesDomain, ZeroOrbitDirection
from .group import GroupSpec, project
from .lift import POINT_TOL, leaf_range
from .recurrence import intersection_set, philox, straight_endpoints

CLUSTER_TOL = 1e-4
SCAN_STEPS = 2000
RANK_TOL = 1e-9


# -- isotropy ------------------------------------------------------------------------------


@dataclass
class IsotropyReport:
    """Sampled {g in [-B, B] : x in I(e; g, x)} grouped into clusters."""

    x: np.ndarray
    B: float
    K: int
    clusters: list[tuple[float, float]]
    hits: np.ndarray
    bounded: bool
    compact_group: bool
    step: float

    @property
    def count(self) -> int:
        return len(self.clusters)

    @property
    def compact(self) -> bool:
        return self.compact_group or self.bounded

    def to_dict(self) -> dict:
        return {"x": self.x.tolist(), "B": self.B, "K": self.K, "clusters": [list(c) for c in self.clusters],
                "count": self.count, "bounded": self.bounded, "compact": self.compact, "step": self.step}


def _returns(algebra, x: np.ndarray, gs: np.ndarray):
    """Distance |Fl_{-g}(x) - x| for each scalar g (inf where the lift escapes)."""
    X = np.repeat(x[None, :], len(gs), axis=0)
    Y, ok = straight_endpoints(algebra, X, -gs[:, None])
    d = np.linalg.norm(Y - x, axis=1)
    d[~ok] = np.inf
    return d, Y


def _split(values: np.ndarray, gap: float) -> list[np.ndarray]:
    if values.size == 0:
        return []
    v = np.sort(values)
    cuts = np.flatnonzero(np.diff(v) > gap) + 1
    return np.split(v, cuts)


def _scan(algebra, x: np.ndarray, B: float, tol: float):
    """Return times of x in [-B, B] (k = 1): grid hits plus refined isolated minima."""
    gs = np.linspace(-B, B, SCAN_STEPS + 1)
    step = gs[1] - gs[0]
    d, _ = _returns(algebra, x, gs)
    hits = list(gs[d <= tol])
    speed = float(np.linalg.norm(algebra.basis_values(x[None, :])[0, 0]))
    for i in range(1, len(gs) - 1):
        if d[i] <= tol or not (d[i] <= d[i - 1] and d[i] <= d[i + 1]):
            continue
        if d[i] > 2 * speed * step + tol:
            continue
        res = minimize_scalar(lambda g: _returns(algebra, x, np.array([g]))[0][0],
                              bounds=(gs[i - 1], gs[i + 1]), method="bounded",
                              options={"xatol": 1e-12})
        if res.fun <= tol:
            hits.append(float(res.x))
    return np.array(sorted(hits)), step


def isotropy_compactness(algebra, spec: GroupSpec, x, B: float = 10.0, K: int = 8,
                         tol: float = POINT_TOL) -> IsotropyReport:
    """Cluster the recapture set of x in the window B; bounded means it stays off the window edge."""
    if spec.k != 1:
        raise InvalidParameter("isotropy scanning is implemented for one-parameter groups")
    x = np.asarray(x, float).reshape(-1)
    _require_inside(algebra.domain, x[None, :])
    # a compact group sees the cover window through its deck translates
    window = min(B, K * float(np.abs(spec.lattice).max())) if spec.rank else B
    hits, step = _scan(algebra, x, window, tol)
    if spec.rank:
        vals = project(spec, hits[:, None])[:, 0] if hits.size else hits
        period = float(np.abs(spec.lattice[0, 0]))
        groups = _split(vals, 1.5 * step)
        # merge a cluster wrapping through the identity
        if len(groups) > 1 and groups[0][0] + period - groups[-1][-1] <= 1.5 * step:
            groups[0] = np.concatenate([groups[-1] - period, groups[0]])
            groups.pop()
        bounded = True
    else:
        groups = _split(hits, 1.5 * step)
        bounded = all(g[0] > -window + 1.5 * step and g[-1] < window - 1.5 * step for g in groups)
    clusters = [(float(g[0]), float(g[-1])) for g in groups]
    return IsotropyReport(x, float(window), K, clusters, hits, bounded, spec.rank == spec.k, float(step))


# -- properness -------------------------------------------------------------------------------


@dataclass
class ProperReport:
    proper: bool
    families: int
    B: float
    K: int
    tol: float
    counterexample: dict | None = None

    def to_dict(self) -> dict:
        return {"proper": self.proper, "families": self.families, "B": self.B, "K": self.K,
                "cluster_tol": self.tol, "counterexample": self.counterexample}


def _representatives(hits: np.ndarray, step: float) -> list[float]:
    """Cluster centers, or a ladder toward the far end for interval clusters."""
    reps: list[float] = []
    for g in _split(hits, 1.5 * step):
        if g[-1] - g[0] < 2 * step:
            reps.append(float(g[len(g) // 2]))
            continue
        near, far = (g[0], g[-1]) if abs(g[0]) <= abs(g[-1]) else (g[-1], g[0])
        targets = near + (far - near) * (1 - 2.0 ** -np.arange(0, 11))
        reps += sorted({float(g[np.argmin(np.abs(g - t))]) for t in targets}, key=abs)
    return reps


def recapture_families(algebra, spec: GroupSpec, points, B: float = 10.0, K: int = 8,
                       tol: float = POINT_TOL) -> list[SequenceFamily]:
    """Families x_n = x, y_n = x with g_n running through the recapture set of x (one per side)."""
    if spec.k != 1:
        raise InvalidParameter("recapture families are implemented for one-parameter groups")
    fams = []
    for x in np.atleast_2d(np.asarray(points, float)):
        hits, step = _scan(algebra, x, B, tol)
        for side in (1.0, -1.0):
            reps = [g for g in _representatives(hits[hits * side >= 0], step)]
            reps = sorted(set(reps), key=abs)
            if len(reps) < 2:
                continue
            g = np.array(reps)[:, None]
            n = len(reps)
            xs = np.repeat(x[None, :], n, axis=0)
            ys, ok = straight_endpoints(algebra, xs, -g)
            if not np.all(ok):
                continue
            gs = project(spec, g) if spec.rank else g
            fams.append(SequenceFamily(xs, ys, -g, gs, x.copy(), f"recapture x={np.round(x, 6).tolist()} side={side:+.0f}"))
    return fams


def accumulates(spec: GroupSpec, gs: np.ndarray, B: float, tol: float = CLUSTER_TOL) -> bool:
    """Two members within ``tol`` of each other strictly inside the window."""
    g = np.atleast_2d(np.asarray(gs, float))
    if spec.rank:
        g = project(spec, g)
    if len(g) < 2:
        return True
    inside = np.all(np.abs(g) < B, axis=1)
    diff = np.linalg.norm(g[:, None, :] - g[None, :, :], axis=2)
    np.fill_diagonal(diff, np.inf)
    close = (diff <= tol) & inside[:, None] & inside[None, :]
    return bool(np.any(close))


def proper_check(algebra, spec: GroupSpec, families: list[SequenceFamily], B: float = 10.0, K: int = 8,
                 tol: float = CLUSTER_TOL) -> ProperReport:
    """Proper iff in every certified family the g_n accumulate inside the window B."""
    certify(algebra, families)
    for f in families:
        if not accumulates(spec, f.gs, B, tol):
            return ProperReport(False, len(families), B, K, tol, f.to_dict())
    return ProperReport(True, len(families), B, K, tol)


# -- slices ----------------------------------------------------------------------------------


@dataclass
class SliceReport:
    x: np.ndarray
    radius: float
    basis: np.ndarray
    orbit_basis: np.ndarray
    degenerate: bool
    residuals: dict = field(default_factory=dict)
    coverage: float = 1.0
    samples: int = 0

    @property
    def passed(self) -> bool:
        r = self.residuals
        return (not self.degenerate and r["isotropy_tangent"] <= 1e-6 and r["spanning_min_sv"] > 1e-6
                and r["direct_sum_min_sv"] > 1e-6 and r["dimension_gap"] == 0 and r["transversal_isotropy"] <= 1e-6
                and self.coverage == 1.0)

    def to_dict(self) -> dict:
        return {"x": self.x.tolist(), "radius": self.radius, "basis": self.basis.T.tolist(),
                "degenerate": self.degenerate, "residuals": self.residuals, "tube_coverage": self.coverage,
                "samples": self.samples, "passed": self.passed if not self.degenerate else None}


def _orbit_matrix(algebra, pts: np.ndarray) -> np.ndarray:
    """(N, d, m) matrices whose columns are the basis fields."""
    return np.transpose(algebra.basis_values(pts), (1, 2, 0))


def _ball(rng, center: np.ndarray, basis: np.ndarray, r: float, n: int) -> np.ndarray:
    q = basis.shape[1]
    u = rng.normal(size=(n, q))
    u /= np.maximum(np.linalg.norm(u, axis=1, keepdims=True), 1e-300)
    rad = r * rng.uniform(size=(n, 1)) ** (1.0 / max(q, 1))
    return center + (u * rad) @ basis.T


def _tube_reach(algebra, x, S, Z0, targets, iters: int = 12, h: float = 1e-6):
    """Gauss-Newton solve of Fl_X(x + S sigma) = p for every target; returns residuals."""
    q, m = S.shape[1], Z0.shape[1]
    diff = targets - x
    sig = diff @ S
    X = np.linalg.lstsq(Z0, diff.T, rcond=None)[0].T
    n = len(targets)
    res = np.full(n, np.inf)
    for _ in range(iters):
        u = np.concatenate([sig, X], axis=1)
        dim = q + m
        pert = np.concatenate([u[:, None, :], u[:, None, :] + h * np.eye(dim)[None]], axis=1).reshape(-1, dim)
        starts = x + pert[:, :q] @ S.T
        Y, ok = straight_endpoints(algebra, starts, pert[:, q:])
        Y = Y.reshape(n, dim + 1, -1)
        ok = ok.reshape(n, dim + 1).all(axis=1)
        F = Y[:, 0] - targets
        res = np.where(ok, np.linalg.norm(F, axis=1), np.inf)
        if np.all(res[ok] <= 1e-10) or not np.any(ok):
            break
        J = (Y[:, 1:] - Y[:, :1]).transpose(0, 2, 1) / h
        for i in np.flatnonzero(ok):
            step = np.linalg.lstsq(J[i], -F[i], rcond=None)[0]
            sig[i] += step[:q]
            X[i] += step[q:]
    # reached points must come from inside the slice disc
    return np.where(np.linalg.norm(sig, axis=1) <= 1.0, res, np.inf), sig


def build_slice(algebra, x, r: float = 0.1, samples: int = 32, seed: int = 0, tube: int = 16,
                strict: bool = False) -> SliceReport:
    """Affine disc through x orthogonal to the orbit directions, with sampled slice conditions."""
    x = np.asarray(x, float).reshape(-1)
    _require_inside(algebra.domain, x[None, :])
    if algebra.domain.signed_distance(x[None, :])[0] <= r:
        raise BallExitsDomain(f"slice disc of radius {r} leaves the domain at {x.tolist()}")
    d = x.shape[0]
    Z0 = _orbit_matrix(algebra, x[None, :])[0]
    U, sv, Vt = np.linalg.svd(Z0)
    scale = max(1.0, float(sv.max()) if sv.size else 0.0)
    rank = int(np.sum(sv > RANK_TOL * scale))
    orbit, S = U[:, :rank], U[:, rank:]
    if rank == 0:
        if strict:
            raise ZeroOrbitDirection(f"every basis field vanishes at {x.tolist()}")
        return SliceReport(x, r, S, orbit, True, {"rank": 0}, 1.0, 0)
    rng = philox(seed)
    Ys = np.concatenate([x[None, :], _ball(rng, x, S, r, samples - 1)]) if S.shape[1] else x[None, :]
    Zy = _orbit_matrix(algebra, Ys)
    # isotropy algebra g_x = ker Z0
    iso = Vt[rank:].T
    normal = orbit
    tang = 0.0
    if iso.shape[1]:
        tang = float(np.max(np.abs(np.einsum("dk,ndm,mj->nkj", normal, Zy, iso))))
    span_sv = np.linalg.svd(np.concatenate([Zy, np.broadcast_to(S, (len(Ys),) + S.shape)], axis=2),
                            compute_uv=False)
    span = float(span_sv[:, d - 1].min()) if span_sv.shape[1] >= d else 0.0
    direct = float(np.linalg.svd(np.concatenate([orbit, S], axis=1), compute_uv=False).min())
    gap = rank + S.shape[1] - d
    # transversality: X with zeta_X(y) tangent to the slice must lie in g_x
    worst = 0.0
    for Zi in Zy:
        A = normal.T @ Zi
        _, s, V = np.linalg.svd(A)
        sc = max(1.0, float(s.max()) if s.size else 0.0)
        ker = V[int(np.sum(s > RANK_TOL * sc)):].T
        if ker.shape[1]:
            worst = max(worst, float(np.max(np.linalg.norm(Z0 @ ker, axis=0))))
    # tube: a neighbourhood of x is swept out by flows of slice points
    targets = x + (r / 2) * rng.uniform(-1, 1, size=(tube, d)) / np.sqrt(d)
    reach, _ = _tube_reach(algebra, x, S, Z0, targets)
    coverage = float(np.mean(reach <= 1e-8))
    residuals = {"rank": rank, "isotropy_tangent": tang, "spanning_min_sv": span, "direct_sum_min_sv": direct,
                 "dimension_gap": gap, "transversal_isotropy": worst}
    return SliceReport(x, r, S, orbit, False, residuals, coverage, len(Ys))


# -- invariant metrics -----------------------------------------------------------------------


@dataclass
class MetricField:
    """Point -> symmetric positive-definite matrix, vectorized over rows."""

    fn: Callable[[np.ndarray], np.ndarray]
    dimension: int
    label: str = ""

    def __call__(self, pts) -> np.ndarray:
        P = np.atleast_2d(np.asarray(pts, float))
        G = np.asarray(self.fn(P), float).reshape(len(P), self.dimension, self.dimension)
        G = 0.5 * (G + G.transpose(0, 2, 1))
        if np.any(np.linalg.eigvalsh(G)[:, 0] <= 0):
            raise InvalidParameter(f"metric {self.label or ''} is not positive definite at a sample")
        return G

    @classmethod
    def constant(cls, matrix, label: str = "") -> "MetricField":
        M = np.asarray(matrix, float)
        return cls(lambda P: np.broadcast_to(M, (len(P),) + M.shape).copy(), M.shape[0], label or "constant")

    @classmethod
    def flat(cls, d: int) -> "MetricField":
        return cls.constant(np.eye(d), "flat")


def lie_derivative(algebra, metric: MetricField, i: int, x: np.ndarray, h: float) -> np.ndarray:
    """(L_{zeta_i} h)(x) by central differences."""
    d = x.shape[0]
    f = algebra.fields[i]
    v = np.asarray(f(x[None, :]), float).reshape(d)
    J = fd_jacobian(lambda P: np.asarray(f(P), float).reshape(P.shape), x, h)
    stencil = np.concatenate([x + h * np.eye(d), x - h * np.eye(d)])
    vals = metric(stencil)
    dG = (vals[:d] - vals[d:]) / (2 * h)
    G = metric(x[None, :])[0]
    return np.einsum("k,kij->ij", v, dG) + J.T @ G + G @ J


def killing_defect(algebra, metric: MetricField, samples, h: float = 1e-4) -> float:
    """Max Frobenius norm of L_{zeta_i} h over samples and basis fields."""
    worst = 0.0
    for x in np.atleast_2d(np.asarray(samples, float)):
        _stencil_check(algebra.domain, x, h)
        for i in range(algebra.dim):
            worst = max(worst, float(np.linalg.norm(lie_derivative(algebra, metric, i, x, h))))
    return worst


def _deck_classes(algebra, spec: GroupSpec, x: np.ndarray, K: int) -> np.ndarray:
    """One deck element per distinct holonomy point of x."""
    s = intersection_set(algebra, spec, np.zeros(spec.k), np.zeros(spec.k), x, K)
    if not len(s):
        raise OrbitEscapesDomain(f"the deck orbit of {x.tolist()} leaves the domain")
    return np.array([m.deck for m in s.members])


def _nodes(spec: GroupSpec, quadrature: int) -> np.ndarray:
    per = max(1, int(round(quadrature ** (1.0 / spec.k))))
    grid = np.stack(np.meshgrid(*[np.arange(per) / per] * spec.k, indexing="ij"), axis=-1).reshape(-1, spec.k)
    return grid @ spec.lattice


def average_metric(algebra, spec: GroupSpec, metric: MetricField, x, quadrature: int = 256, K: int = 8,
                   h: float = 1e-5) -> np.ndarray:
    """Mean of the pullbacks J^T h(Fl_g x) J over a uniform grid on G times the deck classes of x."""
    if not spec.compact:
        raise InvalidParameter("averaging needs a compact group (full-rank lattice)")
    x = np.asarray(x, float).reshape(-1)
    _require_inside(algebra.domain, x[None, :])
    d = x.shape[0]
    if algebra.dim == 0:
        return metric(x[None, :])[0]
    decks = _deck_classes(algebra, spec, x, K)
    D = (_nodes(spec, quadrature)[:, None, :] + decks[None, :, :]).reshape(-1, spec.k)
    # a closed orbit lifts for all times; test twice the swept window in every direction
    span = float(np.max(np.linalg.norm(D, axis=1))) + float(np.linalg.norm(spec.lattice, axis=1).max())
    if not leaf_range(algebra, spec, x, budget=2 * span).complete:
        raise OrbitEscapesDomain(f"the orbit of {x.tolist()} is incomplete; averaging is impossible")
    step = h * max(1.0, float(np.linalg.norm(x)))
    stencil = np.concatenate([x[None, :], x + step * np.eye(d), x - step * np.eye(d)])
    n, w = len(D), len(stencil)
    Y, ok = straight_endpoints(algebra, np.tile(stencil, (n, 1)), np.repeat(D, w, axis=0), shared_step=True)
    if not np.all(ok):
        raise OrbitEscapesDomain(f"the orbit of {x.tolist()} leaves the domain; averaging is impossible")
    Y = Y.reshape(n, w, d)
    J = ((Y[:, 1:d + 1] - Y[:, d + 1:]) / (2 * step)).transpose(0, 2, 1)
    G = metric(Y[:, 0])
    out = np.einsum("nki,nkl,nlj->ij", J, G, J) / n
    return 0.5 * (out + out.T)


def averaged_metric(algebra, spec: GroupSpec, metric: MetricField, quadrature: int = 256, K: int = 8) -> MetricField:
    """The averaged metric as a field (each evaluation runs a quadrature)."""
    def fn(P):
        return np.stack([average_metric(algebra, spec, metric, p, quadrature, K) for p in P])
    return MetricField(fn, metric.dimension, f"average({metric.label})")
