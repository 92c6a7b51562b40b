"""Worked scenarios with closed-form oracles.

Disc scenarios use the rotation field zeta(z) = (2 pi i / n) z on the open disc
of radius 2, whose integral curves are z(t) = z0 exp(2 pi i t / n).  Points on
the disc are addressed in polar form (r, theta) with theta in turns.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np

from .action import VectorFieldAlgebra
from .domains import SLIT_WIDTH, AnnularWedge, ChartDomain, Disc, Slit, whole_space
from .errors import InvalidParameter, OracleMissing, UnknownScenario
from .group import GroupSpec

NAMES = ("full_disc", "wedge", "wedge_plus_ray", "translation_plane", "affine_line")

DEFAULT_K = 8
DEFAULT_B = 10.0
DEFAULT_GRID = 8


def polar(r: float, theta: float) -> np.ndarray:
    """Cartesian point of radius r at angle theta (turns)."""
    a = 2 * math.pi * theta
    return np.array([r * math.cos(a), r * math.sin(a)])


def to_polar(p) -> tuple[float, float]:
    p = np.asarray(p, float)
    return float(np.hypot(p[0], p[1])), float((math.atan2(p[1], p[0]) / (2 * math.pi)) % 1.0)


def rotate(points, turns) -> np.ndarray:
    pts = np.atleast_2d(np.asarray(points, float))
    a = 2 * np.pi * np.asarray(turns, float)
    c, s = np.cos(a), np.sin(a)
    return np.stack([c * pts[..., 0] - s * pts[..., 1], s * pts[..., 0] + c * pts[..., 1]], axis=-1)


@dataclass
class Scenario:
    name: str
    params: dict
    domain: ChartDomain
    algebra: VectorFieldAlgebra
    group: GroupSpec
    coordinates: str = "cartesian"
    oracles: dict[str, Callable] = field(default_factory=dict)
    expected: dict = field(default_factory=dict)
    loci: list[tuple[np.ndarray, np.ndarray]] = field(default_factory=list)
    landmarks: list[np.ndarray] = field(default_factory=list)
    budgets: dict = field(default_factory=lambda: {"K": DEFAULT_K, "B": DEFAULT_B, "grid": DEFAULT_GRID})

    def point(self, coords) -> np.ndarray:
        """Chart point from user coordinates (polar turns for disc scenarios)."""
        c = [float(v) for v in np.atleast_1d(coords)]
        if self.coordinates == "polar":
            return polar(c[0], c[1])
        return np.asarray(c, float)

    def oracle(self, name: str) -> Callable:
        try:
            return self.oracles[name]
        except KeyError:
            raise OracleMissing(f"scenario {self.name!r} has no {name!r} oracle") from None

    def with_group(self, group: GroupSpec) -> "Scenario":
        """Same scenario over another group; group-dependent verdicts are dropped."""
        kind = "circle" if group.rank else "line"
        if self.name in ("full_disc", "wedge", "wedge_plus_ray"):
            return scenario(self.name, n=self.params["n"], group=kind)
        return replace(self, group=group, expected={})


def _rotation_algebra(domain: ChartDomain, n: int) -> VectorFieldAlgebra:
    w = 2 * math.pi / n

    def rot(P):
        return w * np.stack([-P[:, 1], P[:, 0]], axis=1)

    return VectorFieldAlgebra(domain, [rot], np.zeros((1, 1, 1)), ("rotation",))


def _disc_scenario(name: str, n, group: str) -> Scenario:
    if not isinstance(n, (int, np.integer)) or isinstance(n, bool) or n <= 2:
        raise InvalidParameter(f"n must be an integer > 2, got {n!r}")
    n = int(n)
    if group not in ("circle", "line"):
        raise InvalidParameter(f"group must be 'circle' or 'line', got {group!r}")
    obstacles = []
    if name in ("wedge", "wedge_plus_ray"):
        obstacles.append(AnnularWedge(1.0, 2.0, 0.0, 1.0 / n))
    if name == "wedge_plus_ray":
        # the removed ray sits on the negative real axis, theta = 1/2 turn
        obstacles.append(Slit((-1.0, 0.0), (-2.0, 0.0), SLIT_WIDTH))
    domain = ChartDomain(2, Disc(2.0), tuple(obstacles), f"{name}(n={n})")
    algebra = _rotation_algebra(domain, n)
    spec = GroupSpec(1, ((1.0,),)) if group == "circle" else GroupSpec(1)

    def trajectory(x0, phis):
        return rotate(np.asarray(x0, float)[None, :], np.asarray(phis, float)[:, None] / n)[:, 0, :]

    def escape_interval(x0):
        r, th = to_polar(x0)
        if name == "full_disc" or r < 1.0 or r == 0.0:
            return (-math.inf, math.inf)
        lo, hi = 1.0 - n * th, n - 1.0 - n * th
        if name == "wedge_plus_ray":
            cut = n / 2.0 - n * th
            if th < 0.5:
                hi = cut
            else:
                lo = cut
        return (lo, hi)

    def recurrence_set(x, on=None):
        on = on or group
        x = np.asarray(x, float)
        if on == "line" or np.linalg.norm(x) == 0.0:
            return x[None, :].copy()
        lo, hi = escape_interval(x)
        ks = [k for k in range(-n, n + 1) if lo < k < hi]
        pts = rotate(x[None, :], np.array(ks, float)[:, None] / n)[:, 0, :]
        uniq = []
        for p in pts:
            if all(np.linalg.norm(p - q) > 1e-9 for q in uniq):
                uniq.append(p)
        return np.array(uniq)

    def isotropy(x, on=None):
        on = on or group
        if on == "circle" and np.linalg.norm(np.asarray(x, float)) < 1e-12:
            return n
        return 1

    def orbit_id(x):
        r, th = to_polar(x)
        r = round(r, 9)
        if r == 0.0:
            return (0.0, 0)
        if name == "wedge_plus_ray" and r >= 1.0:
            return (r, 0 if th < 0.5 else 1)
        return (r, 0)

    oracles = {
        "trajectory": trajectory,
        "escape_interval": escape_interval,
        "leaf_range": escape_interval,
        "recurrence_set": recurrence_set,
        "isotropy": isotropy,
        "orbit_id": orbit_id,
    }
    expected = {"isotropy_at_origin": n if group == "circle" else 1, "orbifold_like": True}
    if name in ("full_disc", "wedge"):
        expected["hausdorff"] = True
    else:
        expected["hausdorff"] = False
    if group == "circle":
        expected["proper"] = True
    elif name == "full_disc":
        expected["proper"] = False
    loci = []
    for j in range(16):
        th = (j + 0.5) / 16
        p = polar(1.0, th)
        loci.append((p, -p / np.linalg.norm(p)))
        loci.append((p, p / np.linalg.norm(p)))
    return Scenario(name, {"n": n, "group": group}, domain, algebra, spec, "polar", oracles, expected, loci,
                    [np.zeros(2)])


def _translation_plane() -> Scenario:
    domain = ChartDomain(2, whole_space(2, 5.0), (), "plane")

    def dx(P):
        out = np.zeros_like(P)
        out[:, 0] = 1.0
        return out

    algebra = VectorFieldAlgebra(domain, [dx], np.zeros((1, 1, 1)), ("d/dx",))

    def trajectory(x0, phis):
        phis = np.asarray(phis, float)
        return np.asarray(x0, float)[None, :] + np.stack([phis, np.zeros_like(phis)], axis=1)

    oracles = {
        "trajectory": trajectory,
        "escape_interval": lambda x0: (-math.inf, math.inf),
        "leaf_range": lambda x0: (-math.inf, math.inf),
        "recurrence_set": lambda x, on=None: np.asarray(x, float)[None, :].copy(),
        "isotropy": lambda x, on=None: 1,
        "orbit_id": lambda x: (round(float(np.asarray(x)[1]), 9),),
    }
    expected = {"proper": True, "free": True, "trivial_recurrence": True, "hausdorff": True,
                "orbifold_like": True}
    loci = [(np.array([0.0, 0.0]), np.array([0.0, 1.0])), (np.array([1.0, -1.0]), np.array([1.0, 0.0]))]
    return Scenario("translation_plane", {}, domain, algebra, GroupSpec(1), "cartesian", oracles, expected, loci)


def _affine_line() -> Scenario:
    domain = ChartDomain(1, whole_space(1, 5.0), (), "line")
    c = np.zeros((2, 2, 2))
    c[0, 1, 0] = 1.0
    c[1, 0, 0] = -1.0
    algebra = VectorFieldAlgebra(domain, [lambda P: np.ones_like(P), lambda P: P.copy()], c, ("d/dx", "x d/dx"))
    expected = {"abelian_compatible": False}
    return Scenario("affine_line", {}, domain, algebra, GroupSpec(2), "cartesian", {}, expected, [])


def scenario(name: str, n: int | None = None, group: str = "circle") -> Scenario:
    """Build a catalog scenario by name."""
    if name in ("full_disc", "wedge", "wedge_plus_ray"):
        return _disc_scenario(name, 4 if n is None else n, group)
    if name == "translation_plane":
        return _translation_plane()
    if name == "affine_line":
        return _affine_line()
    raise UnknownScenario(f"unknown scenario {name!r}; expected one of {', '.join(NAMES)}")


# -- oracle comparison -------------------------------------------------------------------------


@dataclass
class OracleReport:
    scenario: str
    op: str
    residual: float
    tol: float
    cases: int
    details: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return bool(self.residual <= self.tol)

    def to_dict(self) -> dict:
        return {"scenario": self.scenario, "op": self.op, "residual": self.residual, "tol": self.tol,
                "cases": self.cases, "passed": self.passed, "details": self.details}


ORACLE_TOLS = {"lift": 1e-6, "recurrence": 1e-6, "escape": 1e-3}


def _hausdorff(a: np.ndarray, b: np.ndarray) -> float:
    from scipy.spatial.distance import directed_hausdorff

    if len(a) == 0 or len(b) == 0:
        return 0.0 if len(a) == len(b) else math.inf
    return float(max(directed_hausdorff(a, b)[0], directed_hausdorff(b, a)[0]))


def _compare_lift(sc: Scenario, x0: np.ndarray, window: float, margin: float = 1e-3):
    from .group import GroupPath
    from .lift import lift_path

    lo, hi = sc.oracle("escape_interval")(x0)
    traj = sc.oracle("trajectory")
    worst = 0.0
    for end in (min(hi - margin, window), max(lo + margin, -window)):
        res = lift_path(sc.algebra, sc.group, GroupPath.linear([0.0], [end]), x0)
        if not res.liftable:
            return math.inf, {"x0": x0.tolist(), "end": end, "escape": res.escape}
        t = np.array([s for s, _, _ in res.samples]) * end
        ys = np.array([y for _, _, y in res.samples])
        worst = max(worst, float(np.max(np.linalg.norm(ys - traj(x0, t), axis=1))))
    return worst, {"x0": x0.tolist(), "interval": [lo, hi], "deviation": worst}


def _compare_escape(sc: Scenario, x0: np.ndarray, window: float):
    from .lift import leaf_range

    lo, hi = sc.oracle("escape_interval")(x0)
    lr = leaf_range(sc.algebra, sc.group.cover(), x0, window)
    got_lo, got_hi = lr.interval
    down, up = lr.open_ends
    want = [lo if lo > -window else None, hi if hi < window else None]
    got = [got_lo if down else None, got_hi if up else None]
    err = 0.0
    for w, g in zip(want, got):
        if (w is None) != (g is None):
            err = math.inf
        elif w is not None:
            err = max(err, abs(w - g))
    return err, {"x0": x0.tolist(), "expected": [lo, hi], "numeric": [got_lo, got_hi], "open_ends": [down, up]}


def oracle_compare(sc: Scenario, op: str, inputs, window: float = DEFAULT_B, K: int = DEFAULT_K) -> OracleReport:
    """Max residual between a numeric operation and the scenario's closed-form oracle.

    ``op`` is ``lift`` (trajectory over the liftable interval), ``recurrence``
    (Hausdorff distance of recurrence sets) or ``escape`` (escape parameters).
    ``inputs`` are chart points.
    """
    if op not in ORACLE_TOLS:
        raise InvalidParameter(f"unknown oracle operation {op!r}; expected one of {', '.join(ORACLE_TOLS)}")
    pts = np.atleast_2d(np.asarray(inputs, float))
    details = []
    worst = 0.0
    if op == "recurrence":
        from .recurrence import recurrence_sets

        oracle = sc.oracle("recurrence_set")
        for x, s in zip(pts, recurrence_sets(sc.algebra, sc.group, pts, K)):
            err = _hausdorff(s.points, oracle(x))
            worst = max(worst, err)
            details.append({"x": x.tolist(), "members": len(s), "expected": len(oracle(x)), "residual": err})
    else:
        fn = _compare_lift if op == "lift" else _compare_escape
        for x in pts:
            err, info = fn(sc, x, window)
            worst = max(worst, err)
            details.append(info)
    return OracleReport(sc.name, op, float(worst), ORACLE_TOLS[op], len(pts), details)
