"""Lifting group paths through the graph foliation, holonomy transforms and leaf ranges."""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from . import ode
from .action import VectorFieldAlgebra, _require_inside, transport
from .errors import NotLiftable, StencilExitsDomain
from .group import GroupPath, GroupSpec

POINT_TOL = 1e-6
FD_STEP = 1e-5


@dataclass
class LiftResult:
    liftable: bool
    endpoint: tuple[np.ndarray, np.ndarray] | None
    escape: float | None
    samples: list[tuple[float, np.ndarray, np.ndarray]]

    @property
    def y_end(self) -> np.ndarray:
        return self.endpoint[1]

    def rows(self) -> np.ndarray:
        """Samples flattened to rows (t, g..., y...) for CSV export."""
        return np.array([[t, *g, *y] for t, g, y in self.samples])


@dataclass(frozen=True)
class HolonomyWord:
    """Composable word of flow steps (X, t), applied left to right."""

    steps: tuple[tuple[tuple[float, ...], float], ...]

    @classmethod
    def straight(cls, displacement) -> "HolonomyWord":
        v = tuple(float(a) for a in np.atleast_1d(displacement))
        return cls(((v, 1.0),))

    @classmethod
    def identity(cls) -> "HolonomyWord":
        return cls(())

    @property
    def displacement(self) -> np.ndarray:
        if not self.steps:
            return np.zeros(0)
        return sum(np.asarray(X) * t for X, t in self.steps)

    def inverse(self) -> "HolonomyWord":
        return HolonomyWord(tuple((X, -t) for X, t in reversed(self.steps)))

    def then(self, other: "HolonomyWord") -> "HolonomyWord":
        return HolonomyWord(self.steps + other.steps)

    def apply(self, algebra: VectorFieldAlgebra, points, *, shared_step: bool = False):
        """Images of ``points`` and a mask of rows where every step was defined."""
        pts = np.atleast_2d(np.asarray(points, dtype=float)).copy()
        ok = algebra.domain.contains(pts)
        for X, t in self.steps:
            if t == 0.0 or not np.any(ok):
                continue
            idx = np.flatnonzero(ok)
            v = np.asarray(X, float) * t
            res = transport(algebra, v, pts[idx], shared_step=shared_step, locate=False,
                            event_tol=ode.EVENT_TOL / max(1.0, float(np.abs(v).max())))
            pts[idx] = res.y
            ok[idx[res.escaped]] = False
        return pts, ok

    def to_dict(self) -> dict:
        return {"steps": [{"X": list(X), "t": t} for X, t in self.steps]}


def words_equal(algebra, w1: HolonomyWord, w2: HolonomyWord, probes, tol: float = POINT_TOL) -> bool:
    """Probe-level equality: both words defined and agreeing on every probe."""
    a, oka = w1.apply(algebra, probes)
    b, okb = w2.apply(algebra, probes)
    if not (np.all(oka) and np.all(okb)):
        return False
    return bool(np.max(np.linalg.norm(a - b, axis=1)) <= tol)


def _lift_rows(algebra, path: GroupPath, x0: np.ndarray, *, shared_step=False, record=False):
    """Lift ``path`` from every row of ``x0``; returns (endpoints, escaped, s*, trajs)."""
    if path.k != algebra.dim:
        raise ValueError("path dimension must match the algebra dimension")
    Y = np.array(x0, dtype=float)
    N = Y.shape[0]
    escaped = np.zeros(N, bool)
    s_star = np.full(N, np.nan)
    trajs = [([0.0], [Y[i].copy()]) for i in range(N)] if record else None
    for seg in path.segments:
        idx = np.flatnonzero(~escaped)
        if idx.size == 0:
            break
        speed = float(np.max(np.abs(seg.derivative(np.linspace(seg.a, seg.b, 5)))))
        res = transport(algebra, seg.derivative, Y[idx], s0=seg.a, s1=seg.b, shared_step=shared_step,
                        record=record, event_tol=ode.EVENT_TOL / max(1.0, speed))
        Y[idx] = res.y
        esc = idx[res.escaped]
        escaped[esc] = True
        s_star[esc] = res.t[res.escaped]
        if record:
            for j, i in enumerate(idx):
                ts, ys = res.trajectories[j]
                trajs[i][0].extend(ts[1:].tolist())
                trajs[i][1].extend(list(ys[1:]))
    return Y, escaped, s_star, trajs


def lift_path(algebra: VectorFieldAlgebra, spec: GroupSpec, path: GroupPath, x0, *, record: bool = True) -> LiftResult:
    """Unique lift of ``path`` through the graph foliation starting at (c(0), x0)."""
    p = np.asarray(x0, dtype=float).reshape(1, -1)
    _require_inside(algebra.domain, p)
    Y, escaped, s_star, trajs = _lift_rows(algebra, path, p, record=record)
    samples = []
    if record:
        ts, ys = trajs[0]
        samples = [(float(t), path.value(t), np.asarray(y)) for t, y in zip(ts, ys)]
    if escaped[0]:
        return LiftResult(False, None, float(s_star[0]), samples)
    return LiftResult(True, (path.end, Y[0].copy()), None, samples)


class HolonomyTransform(NamedTuple):
    word: HolonomyWord
    images: np.ndarray
    jacobians: np.ndarray
    word_residual: float


def path_word(path: GroupPath) -> HolonomyWord:
    """Flow word with one straight step per path segment."""
    steps = []
    for seg in path.segments:
        d = seg.value(seg.b) - seg.value(seg.a)
        steps.append((tuple(float(a) for a in d), 1.0))
    return HolonomyWord(tuple(steps))


def holonomy_transform(algebra, spec: GroupSpec, path: GroupPath, probes, h: float = FD_STEP) -> HolonomyTransform:
    """Holonomy x -> p2(lift of c from x)(1) on ``probes`` with FD Jacobians.

    Each Jacobian stencil is integrated with a shared step sequence so that the
    central differences see a smooth numerical map.
    """
    probes = np.atleast_2d(np.asarray(probes, dtype=float))
    _require_inside(algebra.domain, probes)
    n, d = probes.shape
    images, escaped, s_star, _ = _lift_rows(algebra, path, probes)
    if np.any(escaped):
        i = int(np.flatnonzero(escaped)[0])
        raise NotLiftable(f"path is not liftable at probe {i}", probe=i, escape=float(s_star[i]))
    jac = np.zeros((n, d, d))
    eye = np.eye(d)
    for i, p in enumerate(probes):
        step = h * max(1.0, float(np.linalg.norm(p)))
        stencil = np.concatenate([p + step * eye, p - step * eye])
        if not np.all(algebra.domain.contains(stencil)):
            raise StencilExitsDomain(f"Jacobian stencil leaves the domain at probe {i}")
        out, esc, _, _ = _lift_rows(algebra, path, stencil, shared_step=True)
        if np.any(esc):
            raise NotLiftable(f"path is not liftable on the Jacobian stencil of probe {i}", probe=i)
        jac[i] = ((out[:d] - out[d:]) / (2 * step)).T
    word = path_word(path)
    wimg, ok = word.apply(algebra, probes)
    resid = float(np.max(np.linalg.norm(wimg - images, axis=1))) if np.all(ok) else float("inf")
    return HolonomyTransform(word, images, jac, resid)


@dataclass
class LeafRange:
    """Estimated W_x: escape extents along a star of directions in the cover."""

    base: np.ndarray
    directions: np.ndarray
    extents: np.ndarray
    escaped: np.ndarray
    budget: float

    @property
    def complete(self) -> bool:
        return not bool(np.any(self.escaped))

    @property
    def interval(self) -> tuple[float, float]:
        """(lower, upper) for one-dimensional groups."""
        if self.directions.shape[1] != 1:
            raise ValueError("interval reporting needs a one-dimensional group")
        up = self.extents[self.directions[:, 0] > 0][0]
        down = self.extents[self.directions[:, 0] < 0][0]
        return (-float(down), float(up))

    @property
    def open_ends(self) -> tuple[bool, bool]:
        """Whether each end of the interval is an escape (open) end."""
        up = bool(self.escaped[self.directions[:, 0] > 0][0])
        down = bool(self.escaped[self.directions[:, 0] < 0][0])
        return (down, up)

    @property
    def length(self) -> float:
        lo, hi = self.interval
        return hi - lo

    def contains(self, g) -> bool:
        lo, hi = self.interval
        return lo < float(np.atleast_1d(g)[0]) < hi

    def certificate(self, g) -> HolonomyWord:
        return HolonomyWord.straight(g)

    def to_dict(self) -> dict:
        d = {"base": self.base.tolist(), "budget": self.budget, "complete": self.complete,
             "directions": self.directions.tolist(), "extents": self.extents.tolist(),
             "escaped": self.escaped.tolist()}
        if self.directions.shape[1] == 1:
            d["interval"] = list(self.interval)
            d["open_ends"] = list(self.open_ends)
        return d


def _star(k: int) -> np.ndarray:
    if k == 1:
        return np.array([[1.0], [-1.0]])
    import itertools

    dirs = np.array([v for v in itertools.product((-1.0, 0.0, 1.0), repeat=k) if any(v)])
    return dirs / np.linalg.norm(dirs, axis=1, keepdims=True)


def leaf_range(algebra, spec: GroupSpec, x0, budget: float = 10.0) -> LeafRange:
    """Escape parameters of straight lifts from x0 along a star of directions."""
    p = np.asarray(x0, dtype=float).reshape(1, -1)
    _require_inside(algebra.domain, p)
    dirs = _star(spec.k)
    rows = np.repeat(p, len(dirs), axis=0)
    res = transport(algebra, dirs * budget, rows, event_tol=ode.EVENT_TOL / max(1.0, budget))
    extents = np.where(res.escaped, res.t * budget, budget)
    return LeafRange(p[0].copy(), dirs, extents, res.escaped.copy(), float(budget))
