"""Abelian groups R^k / Lambda, their covers, and piecewise-polynomial group paths."""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np
from numpy.polynomial import polynomial as P

from .action import VectorFieldAlgebra, bracket_defect, jacobi_residual
from .errors import JunctionParameter

JUNCTION_TOL = 1e-12


@dataclass(frozen=True)
class GroupSpec:
    """G = R^k / Lambda with the lattice given by generator rows (possibly none)."""

    k: int
    lattice_generators: tuple[tuple[float, ...], ...] = ()

    def __post_init__(self):
        L = self.lattice
        if L.shape[0]:
            if L.shape[1] != self.k:
                raise ValueError("lattice generators must have length k")
            if np.linalg.matrix_rank(L) != L.shape[0]:
                raise ValueError("lattice generators must be linearly independent")

    @property
    def lattice(self) -> np.ndarray:
        return np.asarray(self.lattice_generators, dtype=float).reshape(-1, self.k)

    @property
    def rank(self) -> int:
        return self.lattice.shape[0]

    @property
    def compact(self) -> bool:
        return self.rank == self.k

    def cover(self) -> "GroupSpec":
        """The simply connected cover R^k (trivial lattice)."""
        return GroupSpec(self.k)

    def deck_elements(self, K: int) -> np.ndarray:
        """Lattice points sum a_i lambda_i with |a_i| <= K, canonically ordered."""
        if self.rank == 0:
            return np.zeros((1, self.k))
        coeffs = np.array(list(itertools.product(range(-K, K + 1), repeat=self.rank)), dtype=float)
        order = np.lexsort((coeffs.T[::-1]))
        coeffs = coeffs[order]
        # smallest-norm coefficient vectors first so that merges keep them
        coeffs = coeffs[np.argsort(np.abs(coeffs).sum(axis=1), kind="stable")]
        return coeffs @ self.lattice

    def to_dict(self) -> dict:
        return {"k": self.k, "lattice_generators": [list(g) for g in self.lattice_generators]}

    @classmethod
    def from_dict(cls, d: dict) -> "GroupSpec":
        return cls(int(d["k"]), tuple(tuple(float(x) for x in g) for g in d.get("lattice_generators", [])))


def _lattice_coords(spec: GroupSpec, g: np.ndarray):
    L = spec.lattice
    gram = L @ L.T
    a = np.linalg.solve(gram, L @ g.T).T
    rest = g - a @ L
    return a, rest


def project(spec: GroupSpec, g) -> np.ndarray:
    """Representative of g + Lambda in the half-open box spanned by the generators."""
    g = np.atleast_1d(np.asarray(g, dtype=float))
    single = g.ndim == 1
    g = g.reshape(-1, spec.k)
    if spec.rank == 0:
        out = g.copy()
    else:
        a, rest = _lattice_coords(spec, g)
        near = np.round(a)
        a = np.where(np.abs(a - near) < 1e-12, near, a)
        frac = a - np.floor(a)
        out = frac @ spec.lattice + rest
    return out[0] if single else out


def deck_orbit(spec: GroupSpec, g, window: float) -> np.ndarray:
    """All g + lambda with every coordinate in [-window, window]."""
    g = np.asarray(g, dtype=float).reshape(spec.k)
    if spec.rank == 0:
        return g[None, :] if np.all(np.abs(g) <= window) else np.zeros((0, spec.k))
    smin = np.linalg.svd(spec.lattice, compute_uv=False).min()
    bound = int(np.ceil((window * np.sqrt(spec.k) + np.linalg.norm(g)) / smin)) + 1
    coeffs = np.array(list(itertools.product(range(-bound, bound + 1), repeat=spec.rank)), dtype=float)
    pts = g + coeffs @ spec.lattice
    pts = pts[np.all(np.abs(pts) <= window + 1e-12, axis=1)]
    return pts[np.lexsort(pts.T[::-1])]


def group_distance(spec: GroupSpec, a, b) -> float:
    """Distance in G: minimum over lattice translates of the difference."""
    diff = project(spec, np.asarray(b, float) - np.asarray(a, float))
    if spec.rank == 0:
        return float(np.linalg.norm(diff))
    cands = diff + np.array(list(itertools.product((-1, 0, 1), repeat=spec.rank)), float) @ spec.lattice
    return float(np.min(np.linalg.norm(cands, axis=1)))


@dataclass(frozen=True)
class Segment:
    """c(s) = sum_j coeffs[j] s^j on [a, b]; coeffs has shape (deg + 1, k)."""

    a: float
    b: float
    coeffs: np.ndarray = field(compare=False)

    def value(self, s):
        return P.polyval(np.asarray(s, float), self.coeffs).T

    def derivative(self, s):
        return P.polyval(np.asarray(s, float), P.polyder(self.coeffs)).T

    @property
    def linear(self) -> bool:
        c = self.coeffs
        return c.shape[0] <= 2 or np.all(c[2:] == 0)


@dataclass(frozen=True)
class GroupPath:
    """Piecewise-polynomial path [0, 1] -> R^k."""

    segments: tuple[Segment, ...]

    def __post_init__(self):
        segs = self.segments
        if not segs or segs[0].a != 0.0 or segs[-1].b != 1.0:
            raise ValueError("segments must cover [0, 1]")
        for s, t in zip(segs, segs[1:]):
            if s.b != t.a:
                raise ValueError("segments must be contiguous")
            if np.linalg.norm(s.value(s.b) - t.value(t.a)) > 1e-9:
                raise ValueError("path is discontinuous at a junction")

    @property
    def k(self) -> int:
        return self.segments[0].coeffs.shape[1]

    @property
    def start(self) -> np.ndarray:
        return self.segments[0].value(0.0)

    @property
    def end(self) -> np.ndarray:
        return self.segments[-1].value(1.0)

    @property
    def junctions(self) -> list[float]:
        return [s.b for s in self.segments[:-1]]

    def _segment_at(self, s: float) -> Segment:
        for seg in self.segments:
            if s <= seg.b:
                return seg
        return self.segments[-1]

    def value(self, s: float) -> np.ndarray:
        return self._segment_at(s).value(s)

    @classmethod
    def linear(cls, start, end) -> "GroupPath":
        p = np.atleast_1d(np.asarray(start, float))
        q = np.atleast_1d(np.asarray(end, float))
        return cls((Segment(0.0, 1.0, np.stack([p, q - p])),))

    @classmethod
    def constant(cls, point) -> "GroupPath":
        p = np.atleast_1d(np.asarray(point, float))
        return cls((Segment(0.0, 1.0, p[None, :]),))

    @classmethod
    def polyline(cls, points, breaks=None) -> "GroupPath":
        pts = np.asarray(points, float)
        if pts.ndim == 1:
            pts = pts[:, None]
        n = len(pts) - 1
        breaks = np.linspace(0.0, 1.0, n + 1) if breaks is None else np.asarray(breaks, float)
        segs = []
        for i in range(n):
            a, b = float(breaks[i]), float(breaks[i + 1])
            slope = (pts[i + 1] - pts[i]) / (b - a)
            segs.append(Segment(a, b, np.stack([pts[i] - a * slope, slope])))
        return cls(tuple(segs))

    @classmethod
    def polynomial(cls, coeffs) -> "GroupPath":
        c = np.asarray(coeffs, float)
        if c.ndim == 1:
            c = c[:, None]
        return cls((Segment(0.0, 1.0, c),))

    def translate(self, g) -> "GroupPath":
        g = np.atleast_1d(np.asarray(g, float))
        segs = []
        for s in self.segments:
            c = s.coeffs.copy()
            c[0] = c[0] + g
            segs.append(Segment(s.a, s.b, c))
        return GroupPath(tuple(segs))

    def compose(self, sigma_coeffs) -> "GroupPath":
        """The path c o sigma for a polynomial bijection sigma of [0, 1].

        Only single-segment paths are supported; breakpoints of a composite
        would need sigma to be inverted.
        """
        if len(self.segments) != 1:
            raise ValueError("reparametrization is supported for single-segment paths")
        sig = np.asarray(sigma_coeffs, float)
        c = self.segments[0].coeffs
        out = []
        for col in c.T:
            acc = np.array([col[-1]])
            for a in col[-2::-1]:
                acc = P.polyadd(P.polymul(acc, sig), [a])
            out.append(acc)
        width = max(len(o) for o in out)
        arr = np.zeros((width, len(out)))
        for j, o in enumerate(out):
            arr[: len(o), j] = o
        return GroupPath((Segment(0.0, 1.0, arr),))

    def concat(self, other: "GroupPath") -> "GroupPath":
        """Traverse self on [0, 1/2] then other on [1/2, 1]."""
        if np.linalg.norm(self.end - other.start) > 1e-9:
            raise ValueError("paths do not meet")
        segs = []
        for path, shift in ((self, 0.0), (other, 0.5)):
            for s in path.segments:
                # c(u) with u = 2 (s - shift)
                sig = np.array([-2.0 * shift, 2.0])
                single = GroupPath((Segment(0.0, 1.0, s.coeffs),))
                comp = single.compose(sig).segments[0].coeffs
                segs.append(Segment(shift + s.a / 2, shift + s.b / 2, comp))
        return GroupPath(tuple(segs))

    def to_dict(self) -> dict:
        return {"segments": [{"a": s.a, "b": s.b, "coeffs": s.coeffs.tolist()} for s in self.segments]}


def mc_velocity(path: GroupPath, t: float) -> np.ndarray:
    """Maurer-Cartan velocity of an abelian path: the coordinate derivative."""
    for j in path.junctions:
        if abs(t - j) <= JUNCTION_TOL:
            raise JunctionParameter(f"velocity undefined at junction parameter {j}")
    return path._segment_at(t).derivative(t)


def flatness_defect(algebra: VectorFieldAlgebra, spec: GroupSpec, x, h: float = 1e-3) -> float:
    """Maurer-Cartan defect of pairing ``algebra`` with the abelian group ``spec``.

    For abelian groups flatness means the basis fields commute; the result adds
    the bracket defects, the Jacobi residual and the size of any nonzero
    structure constant (an abelian group cannot carry it).
    """
    if algebra.dim != spec.k:
        raise ValueError("group dimension must equal the algebra dimension")
    m = algebra.dim
    worst = 0.0
    for i in range(m):
        for j in range(i + 1, m):
            worst = max(worst, bracket_defect(algebra, i, j, x, h))
    mismatch = float(np.max(np.abs(algebra.structure_constants))) if m else 0.0
    return worst + jacobi_residual(algebra.structure_constants) + mismatch
