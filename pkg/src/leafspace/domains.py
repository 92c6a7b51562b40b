"""Chart domains: an open base region in R^d with closed obstacles removed.

Containment is the authority; signed distances are estimates that agree with
it in sign (positive inside, negative outside, zero on the boundary).  Thin
slits are modelled as segments widened to ``SLIT_WIDTH`` and are detected
along chords, since a single step can jump across them.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

SLIT_WIDTH = 1e-9
TWO_PI = 2.0 * np.pi


def _as_points(p, d: int) -> np.ndarray:
    a = np.asarray(p, dtype=float)
    if a.ndim == 1:
        a = a[None, :]
    if a.shape[-1] != d:
        raise ValueError(f"expected points of dimension {d}, got shape {a.shape}")
    return a


def _segment_distance(p: np.ndarray, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Distance from each row of ``p`` to the segment [a, b]."""
    ab = b - a
    denom = float(ab @ ab)
    if denom == 0.0:
        return np.linalg.norm(p - a, axis=1)
    s = np.clip((p - a) @ ab / denom, 0.0, 1.0)
    return np.linalg.norm(p - (a + s[:, None] * ab), axis=1)


def _segments_intersect_2d(p, q, a, b) -> np.ndarray:
    """Rows where segment [p, q] meets the fixed segment [a, b] (2D)."""

    def orient(u, v, w):
        return (v[..., 0] - u[..., 0]) * (w[..., 1] - u[..., 1]) - (v[..., 1] - u[..., 1]) * (w[..., 0] - u[..., 0])

    a = np.broadcast_to(a, p.shape)
    b = np.broadcast_to(b, p.shape)
    d1 = orient(a, b, p)
    d2 = orient(a, b, q)
    d3 = orient(p, q, a)
    d4 = orient(p, q, b)
    return (d1 * d2 <= 0) & (d3 * d4 <= 0) & ~((d1 == 0) & (d2 == 0) & (d3 == 0) & (d4 == 0))


def _segment_segment_distance(p, q, a, b) -> np.ndarray:
    """Distance between rows of segments [p, q] and the fixed segment [a, b] (2D)."""
    a = np.asarray(a, float)
    b = np.asarray(b, float)
    d = np.minimum.reduce([
        _segment_distance(p, a, b), _segment_distance(q, a, b),
        _point_segments_distance(a, p, q), _point_segments_distance(b, p, q),
    ])
    return np.where(_segments_intersect_2d(p, q, a, b), 0.0, d)


def _point_segments_distance(a, p, q) -> np.ndarray:
    """Distance from the fixed point a to each segment [p_i, q_i]."""
    pq = q - p
    denom = np.einsum("ij,ij->i", pq, pq)
    s = np.where(denom > 0, np.einsum("ij,ij->i", a - p, pq) / np.where(denom > 0, denom, 1.0), 0.0)
    s = np.clip(s, 0.0, 1.0)
    return np.linalg.norm(p + s[:, None] * pq - a, axis=1)


# -- base regions (open) ----------------------------------------------------


@dataclass(frozen=True)
class Disc:
    radius: float
    center: tuple[float, ...] = (0.0, 0.0)

    @property
    def dimension(self) -> int:
        return len(self.center)

    def signed_distance(self, p: np.ndarray) -> np.ndarray:
        return self.radius - np.linalg.norm(p - np.asarray(self.center), axis=1)

    def contains(self, p: np.ndarray) -> np.ndarray:
        return self.signed_distance(p) > 0

    def corridor(self, p, q):
        # |x - c| is convex, so its maximum over a segment sits at an end
        return np.minimum(self.signed_distance(p), self.signed_distance(q))

    def bounds(self):
        c = np.asarray(self.center)
        return c - self.radius, c + self.radius

    def to_dict(self):
        return {"type": "disc", "radius": self.radius, "center": list(self.center)}


@dataclass(frozen=True)
class Box:
    """Open axis-aligned box; infinite bounds give the whole space."""

    lower: tuple[float, ...]
    upper: tuple[float, ...]
    sample_lower: tuple[float, ...] | None = None
    sample_upper: tuple[float, ...] | None = None

    @property
    def dimension(self) -> int:
        return len(self.lower)

    def signed_distance(self, p: np.ndarray) -> np.ndarray:
        lo = np.asarray(self.lower)
        hi = np.asarray(self.upper)
        with np.errstate(invalid="ignore"):
            d = np.minimum(p - lo, hi - p)
        return np.min(d, axis=1)

    def contains(self, p: np.ndarray) -> np.ndarray:
        return self.signed_distance(p) > 0

    def corridor(self, p, q):
        return np.minimum(self.signed_distance(p), self.signed_distance(q))

    def bounds(self):
        lo = np.asarray(self.sample_lower if self.sample_lower is not None else self.lower, float)
        hi = np.asarray(self.sample_upper if self.sample_upper is not None else self.upper, float)
        if not (np.all(np.isfinite(lo)) and np.all(np.isfinite(hi))):
            raise ValueError("unbounded box needs explicit sample bounds")
        return lo, hi

    def to_dict(self):
        d = {"type": "box", "lower": list(self.lower), "upper": list(self.upper)}
        if self.sample_lower is not None:
            d["sample_lower"] = list(self.sample_lower)
            d["sample_upper"] = list(self.sample_upper)
        return d


def whole_space(d: int, sample_half_width: float = 5.0) -> Box:
    inf = float("inf")
    return Box((-inf,) * d, (inf,) * d, (-sample_half_width,) * d, (sample_half_width,) * d)


# -- obstacles (closed) -------------------------------------------------------


@dataclass(frozen=True)
class AnnularWedge:
    """Closed set r_inner <= r <= r_outer, |angle - center| <= half_width.

    Angles are in turns (one turn = 2*pi radians).
    """

    r_inner: float
    r_outer: float
    center_turns: float
    half_width_turns: float

    def _polar(self, p):
        r = np.hypot(p[:, 0], p[:, 1])
        phi = np.arctan2(p[:, 1], p[:, 0]) - TWO_PI * self.center_turns
        phi = (phi + np.pi) % TWO_PI - np.pi
        return r, phi

    def contains(self, p: np.ndarray) -> np.ndarray:
        r, phi = self._polar(p)
        alpha = TWO_PI * self.half_width_turns
        return (r >= self.r_inner) & (r <= self.r_outer) & (np.abs(phi) <= alpha)

    def signed_distance(self, p: np.ndarray) -> np.ndarray:
        """Positive outside the wedge, negative inside."""
        r, phi = self._polar(p)
        alpha = TWO_PI * self.half_width_turns
        best = np.full(len(p), np.inf)
        for sgn in (1.0, -1.0):
            ang = TWO_PI * self.center_turns + sgn * alpha
            u = np.array([np.cos(ang), np.sin(ang)])
            best = np.minimum(best, _segment_distance(p, self.r_inner * u, self.r_outer * u))
        in_span = np.abs(phi) <= alpha
        arc = np.minimum(np.abs(r - self.r_inner), np.abs(r - self.r_outer))
        best = np.where(in_span, np.minimum(best, arc), best)
        return np.where(self.contains(p), -best, best)

    def _arc_distance(self, p, q, rho):
        """Distance from segments [p, q] to the arc of radius rho spanned by the wedge."""
        alpha = TWO_PI * self.half_width_turns
        c0 = TWO_PI * self.center_turns

        def in_span(x):
            phi = np.arctan2(x[:, 1], x[:, 0]) - c0
            return np.abs((phi + np.pi) % TWO_PI - np.pi) <= alpha

        def point_arc(x):
            r = np.hypot(x[:, 0], x[:, 1])
            ends = [np.linalg.norm(x - rho * np.array([np.cos(c0 + sg * alpha), np.sin(c0 + sg * alpha)]), axis=1)
                    for sg in (1.0, -1.0)]
            return np.where(in_span(x), np.abs(r - rho), np.minimum(*ends))

        best = np.minimum(point_arc(p), point_arc(q))
        for sg in (1.0, -1.0):
            ang = c0 + sg * alpha
            best = np.minimum(best, _point_segments_distance(rho * np.array([np.cos(ang), np.sin(ang)]), p, q))
        # interior foot of the perpendicular from the origin
        pq = q - p
        denom = np.einsum("ij,ij->i", pq, pq)
        s = np.clip(np.where(denom > 0, -np.einsum("ij,ij->i", p, pq) / np.where(denom > 0, denom, 1.0), 0.0), 0, 1)
        foot = p + s[:, None] * pq
        rf = np.hypot(foot[:, 0], foot[:, 1])
        best = np.where(in_span(foot) & (rf >= rho), np.minimum(best, rf - rho), best)
        # crossings of the full circle that land inside the angular span
        b = np.einsum("ij,ij->i", p, pq)
        c = np.einsum("ij,ij->i", p, p) - rho * rho
        disc = b * b - denom * c
        ok = (disc >= 0) & (denom > 0)
        sq = np.sqrt(np.where(ok, disc, 0.0))
        for sgn in (-1.0, 1.0):
            u = np.where(ok, (-b + sgn * sq) / np.where(denom > 0, denom, 1.0), -1.0)
            x = p + u[:, None] * pq
            best = np.where(ok & (u >= 0) & (u <= 1) & in_span(x), 0.0, best)
        return best

    def corridor(self, p, q):
        """Distance from each segment [p, q] to the wedge (zero if they meet)."""
        best = np.minimum(self._arc_distance(p, q, self.r_inner), self._arc_distance(p, q, self.r_outer))
        for sg in (1.0, -1.0):
            ang = TWO_PI * (self.center_turns + sg * self.half_width_turns)
            u = np.array([np.cos(ang), np.sin(ang)])
            best = np.minimum(best, _segment_segment_distance(p, q, self.r_inner * u, self.r_outer * u))
        inside = self.contains(p) | self.contains(q)
        return np.where(inside, 0.0, best)

    def to_dict(self):
        return {"type": "annular_wedge", "r_inner": self.r_inner, "r_outer": self.r_outer,
                "center_turns": self.center_turns, "half_width_turns": self.half_width_turns}


@dataclass(frozen=True)
class Slit:
    """Closed segment widened to ``width``; 2D only."""

    start: tuple[float, float]
    end: tuple[float, float]
    width: float = SLIT_WIDTH

    def contains(self, p: np.ndarray) -> np.ndarray:
        return _segment_distance(p, np.asarray(self.start), np.asarray(self.end)) <= self.width

    def signed_distance(self, p: np.ndarray) -> np.ndarray:
        return _segment_distance(p, np.asarray(self.start), np.asarray(self.end)) - self.width

    def corridor(self, p, q):
        return _segment_segment_distance(p, q, np.asarray(self.start, float), np.asarray(self.end, float)) - self.width

    def crossed(self, p: np.ndarray, q: np.ndarray) -> np.ndarray:
        a = np.asarray(self.start, float)
        b = np.asarray(self.end, float)
        return _segments_intersect_2d(p, q, a, b) | self.contains(q)

    def to_dict(self):
        return {"type": "slit", "start": list(self.start), "end": list(self.end), "width": self.width}


@dataclass(frozen=True)
class HalfSpace:
    """Closed half-space {x : normal . x >= offset}."""

    normal: tuple[float, ...]
    offset: float

    def _value(self, p):
        n = np.asarray(self.normal, float)
        return (p @ n - self.offset) / np.linalg.norm(n)

    def contains(self, p: np.ndarray) -> np.ndarray:
        return self._value(p) >= 0

    def signed_distance(self, p: np.ndarray) -> np.ndarray:
        return -self._value(p)

    def corridor(self, p, q):
        return np.minimum(self.signed_distance(p), self.signed_distance(q))

    def to_dict(self):
        return {"type": "half_space", "normal": list(self.normal), "offset": self.offset}


# -- the domain ---------------------------------------------------------------


@dataclass(frozen=True)
class ChartDomain:
    dimension: int
    base: Disc | Box
    obstacles: tuple = field(default_factory=tuple)
    label: str = ""

    def contains(self, p) -> np.ndarray:
        p = _as_points(p, self.dimension)
        inside = self.base.contains(p)
        for ob in self.obstacles:
            inside &= ~ob.contains(p)
        return inside

    def signed_distance(self, p) -> np.ndarray:
        p = _as_points(p, self.dimension)
        sd = self.base.signed_distance(p)
        for ob in self.obstacles:
            sd = np.minimum(sd, ob.signed_distance(p))
        # keep the estimate consistent with the containment verdict
        inside = self.contains(p)
        return np.where(inside, np.maximum(sd, np.finfo(float).tiny), np.minimum(sd, 0.0))

    def corridor(self, p: np.ndarray, q: np.ndarray) -> np.ndarray:
        """Lower bound on the distance from each segment [p, q] to the complement."""
        c = self.base.corridor(p, q)
        if not self.obstacles:
            return c
        half = 0.5 * np.linalg.norm(q - p, axis=1)
        for ob in self.obstacles:
            # every chord point is within half a chord of an end; compute exactly only when that bound is weak
            lb = np.minimum(ob.signed_distance(p), ob.signed_distance(q)) - half
            close = np.flatnonzero(lb <= 2 * half)
            if close.size:
                lb[close] = ob.corridor(p[close], q[close])
            c = np.minimum(c, lb)
        return c

    def sample(self, rng: np.random.Generator, n: int, margin: float = 0.0) -> np.ndarray:
        """Rejection-sample ``n`` points with boundary distance above ``margin``."""
        lo, hi = self.base.bounds()
        out = [np.zeros((0, self.dimension))]
        count = 0
        while count < n:
            cand = rng.uniform(lo, hi, size=(max(4 * n, 16), self.dimension))
            cand = cand[self.signed_distance(cand) > margin]
            out.append(cand)
            count += len(cand)
        return np.concatenate(out)[:n]

    def to_dict(self):
        return {"dimension": self.dimension, "label": self.label, "base": self.base.to_dict(),
                "obstacles": [ob.to_dict() for ob in self.obstacles]}

    @classmethod
    def from_dict(cls, d: dict) -> "ChartDomain":
        dim = int(d["dimension"])
        b = d.get("base", {"type": "whole"})
        kind = b["type"]
        if kind == "disc":
            base = Disc(float(b["radius"]), tuple(b.get("center", [0.0] * dim)))
        elif kind == "box":
            base = Box(tuple(b["lower"]), tuple(b["upper"]),
                       tuple(b["sample_lower"]) if "sample_lower" in b else None,
                       tuple(b["sample_upper"]) if "sample_upper" in b else None)
        elif kind == "whole":
            base = whole_space(dim, float(b.get("sample_half_width", 5.0)))
        else:
            raise ValueError(f"unknown base region {kind!r}")
        obs = []
        for o in d.get("obstacles", []):
            t = o["type"]
            if t == "annular_wedge":
                obs.append(AnnularWedge(o["r_inner"], o["r_outer"], o["center_turns"], o["half_width_turns"]))
            elif t == "slit":
                obs.append(Slit(tuple(o["start"]), tuple(o["end"]), o.get("width", SLIT_WIDTH)))
            elif t == "half_space":
                obs.append(HalfSpace(tuple(o["normal"]), float(o["offset"])))
            else:
                raise ValueError(f"unknown obstacle {t!r}")
        return cls(dim, base, tuple(obs), d.get("label", ""))


def in_domain(domain: ChartDomain, x) -> tuple[bool, float]:
    """Containment verdict of a single point with its boundary distance."""
    p = _as_points(x, domain.dimension)
    return bool(domain.contains(p)[0]), float(domain.signed_distance(p)[0])
