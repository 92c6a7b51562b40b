"""The G-completion as a sampled identification atlas, with separation checks."""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

from . import ode
from .action import _require_inside, flow, transport
from .errors import InvalidParameter, UncertifiedFamily
from .group import GroupSpec, project
from .lift import POINT_TOL, HolonomyWord, _star
from .recurrence import (
    intersection_sets, philox, recurrence_partition, relation_matrix, straight_endpoints, subset,
    uniformity_many,
)

LIMIT_TOL = 1e-4
LADDER = tuple(range(3, 13))
MIN_TAIL = 4


def _components(R: np.ndarray) -> np.ndarray:
    from scipy.sparse import csr_matrix
    from scipy.sparse.csgraph import connected_components

    return connected_components(csr_matrix(R | R.T), directed=False)[1]


def _canonical_labels(lab) -> list[int]:
    seen: dict[int, int] = {}
    return [seen.setdefault(int(c), len(seen)) for c in lab]


def default_grid(spec: GroupSpec, n: int, window: float = 1.0) -> np.ndarray:
    """n grid points on the fundamental domain (k=1), or on [-window, window] for R."""
    if spec.k != 1:
        axes = [np.linspace(-window, window, n)] * spec.k
        return np.array(list(itertools.product(*axes)))
    if spec.compact:
        return project(spec, spec.lattice[0] * (np.arange(n) / n)[:, None])
    return np.linspace(-window, window, n)[:, None]


# -- atlas ------------------------------------------------------------------------


@dataclass
class CompletionAtlas:
    grid: np.ndarray
    samples: np.ndarray
    classes: list[list[int]]
    isotropy: list[int]
    transitions: list[dict]
    complete: list[bool]
    triangle_residual: float
    translation_residual: float
    fibers_match: bool
    K: int

    @property
    def consistent(self) -> bool:
        return self.triangle_residual <= POINT_TOL and self.translation_residual <= POINT_TOL and self.fibers_match

    def to_dict(self) -> dict:
        return {
            "grid": self.grid.tolist(), "samples": self.samples.tolist(), "classes": self.classes,
            "isotropy": self.isotropy, "transitions": self.transitions,
            "flags": {"complete": self.complete, "fibers_match_recurrence": self.fibers_match,
                      "triangle_residual": self.triangle_residual,
                      "translation_residual": self.translation_residual},
            "K": self.K,
        }


def build_atlas(algebra, spec: GroupSpec, grid, samples, K: int = 8, r: float = 0.05, seed: int = 0) -> CompletionAtlas:
    """Charts j_g on the grid, identified through I(g; g, x) on the samples.

    Transitions between consecutive charts are straight words; triangles of
    consecutive grid points must compose to the identity, and each chart's
    fiber partition must equal the recurrence partition at e.
    """
    grid = np.atleast_2d(np.asarray(grid, float)).reshape(-1, spec.k)
    samples = np.atleast_2d(np.asarray(samples, float))
    _require_inside(algebra.domain, samples)
    ng, ns = len(grid), len(samples)
    queries = [(g, g, x) for g in grid for x in samples]
    sets = intersection_sets(algebra, spec, queries, K)
    classes = []
    for a in range(ng):
        R = relation_matrix(sets[a * ns:(a + 1) * ns], samples)
        classes.append(_canonical_labels(_components(R)))
    base = recurrence_partition(algebra, spec, samples, K)
    base_labels = _canonical_labels(base.labels(ns))
    fibers_match = all(c == base_labels for c in classes)

    # chart g_b -> chart g_a:  j_{g_b}(x) = j_{g_a}(Fl_{g_a - g_b} x)
    pairs = [(a, b) for a in range(ng) for b in range(ng) if a != b]
    X = np.repeat(samples, len(pairs), axis=0)
    D = np.tile(np.array([grid[a] - grid[b] for a, b in pairs]), (ns, 1))
    _, ok = straight_endpoints(algebra, X, D)
    ok = ok.reshape(ns, len(pairs))
    complete = [bool(np.all(ok[:, [q for q, (a, b) in enumerate(pairs) if b == c]])) for c in range(ng)]
    transitions = []
    for q, (a, b) in enumerate(pairs):
        if (b - a) % ng == 1 or ng == 2:
            transitions.append({"from": b, "to": a, "word": HolonomyWord.straight(grid[a] - grid[b]).to_dict(),
                                "defined_fraction": float(ok[:, q].mean())})

    tri = 0.0
    for a in range(ng):
        b, c = (a + 1) % ng, (a + 2) % ng
        if len({a, b, c}) < 3:
            continue
        w_cb = HolonomyWord.straight(grid[b] - grid[c])
        w_ba = HolonomyWord.straight(grid[a] - grid[b])
        w_ca = HolonomyWord.straight(grid[a] - grid[c])
        two, ok2 = w_cb.then(w_ba).apply(algebra, samples)
        one, ok1 = w_ca.apply(algebra, samples)
        m = ok1 & ok2
        if np.any(m):
            tri = max(tri, float(np.max(np.linalg.norm(two[m] - one[m], axis=1))))

    # translation law: the trace of (g', x) on e equals the trace of (g, x) on g - g'
    trans = 0.0
    tq = [(np.zeros(spec.k), grid[b], x) for b in range(ng) for x in samples[:5]]
    tq2 = [(grid[0] - grid[b], grid[0], x) for b in range(ng) for x in samples[:5]]
    for s1, s2 in zip(intersection_sets(algebra, spec, tq, K), intersection_sets(algebra, spec, tq2, K)):
        if len(s1) != len(s2):
            trans = float("inf")
        elif len(s1):
            d = np.linalg.norm(s1.points[:, None] - s2.points[None], axis=2)
            trans = max(trans, float(d.min(axis=1).max()))

    uni = uniformity_many(algebra, spec, samples, r, K, seed)
    isotropy = [u.isotropy_order for u in uni]
    return CompletionAtlas(grid, samples, classes, isotropy, transitions, complete, tri, trans, fibers_match, K)


def orbifold_check(algebra, spec: GroupSpec, samples, r: float = 0.05, K: int = 8, seed: int = 0) -> dict:
    """Discretely-valued verdict: uniformity and proper discontinuity at every sample."""
    reps = uniformity_many(algebra, spec, samples, r, K, seed)
    failing = [u.to_dict() for u in reps if not (u.uniform and u.properly_discontinuous)]
    return {"orbifold_like": not failing, "samples": len(reps), "failing": failing[:5],
            "isotropy_orders": sorted({u.isotropy_order for u in reps}), "K": K, "radius": r}


# -- sequence families ------------------------------------------------------------------


@dataclass
class SequenceFamily:
    """x_n -> x and y_n in I(e; g_n, x_n), each y_n certified by a displacement."""

    xs: np.ndarray
    ys: np.ndarray
    displacements: np.ndarray | None
    gs: np.ndarray
    x_limit: np.ndarray
    label: str = ""

    @property
    def y_limit(self) -> np.ndarray:
        # offsets halve along the ladder, so one Richardson step cancels the linear term
        return 2 * self.ys[-1] - self.ys[-2]

    def to_dict(self) -> dict:
        return {"label": self.label, "x": self.xs.tolist(), "y": self.ys.tolist(), "g": self.gs.tolist(),
                "x_limit": self.x_limit.tolist(), "y_limit": self.y_limit.tolist()}


def certify(algebra, families: list[SequenceFamily], tol: float = POINT_TOL) -> None:
    """Replay every certificate; raise if any is missing or does not land on y_n."""
    X, D, Y = [], [], []
    for f in families:
        if f.displacements is None:
            raise UncertifiedFamily(f"family {f.label!r} has no membership certificates")
        X.append(f.xs)
        D.append(f.displacements)
        Y.append(f.ys)
    if not X:
        return
    got, ok = straight_endpoints(algebra, np.concatenate(X), np.concatenate(D), rtol=ode.RTOL / 2,
                                 atol=ode.ATOL / 2)
    err = np.linalg.norm(got - np.concatenate(Y), axis=1)
    if not np.all(ok) or np.max(err) > tol:
        raise UncertifiedFamily("a membership certificate does not reproduce its point")


def _ladders(algebra, loci, scale: float = 1.0):
    out = []
    for p, u in loci:
        p = np.asarray(p, float)
        u = np.asarray(u, float)
        xs = p + scale * np.array([2.0 ** -j for j in LADDER])[:, None] * u
        if algebra.domain.contains(p[None, :])[0] and np.all(algebra.domain.contains(xs)):
            out.append((p, xs))
    return out


def ladder_families(algebra, spec: GroupSpec, loci, K: int = 8, g=None) -> list[SequenceFamily]:
    """Families along boundary-offset ladders, one per (locus, deck element) with a defined tail.

    With ``g`` given the members lie in I(e; g, x_n), otherwise in I(e; e, x_n).
    """
    g = np.zeros(spec.k) if g is None else np.atleast_1d(np.asarray(g, float))
    ladders = _ladders(algebra, loci)
    if not ladders:
        return []
    decks = spec.deck_elements(K)
    nz, nl = len(decks), len(LADDER)
    X = np.concatenate([np.repeat(xs, nz, axis=0) for _, xs in ladders])
    D = np.tile(-g + decks, (nl * len(ladders), 1))
    Y, ok = straight_endpoints(algebra, X, D)
    Y = Y.reshape(len(ladders), nl, nz, -1)
    ok = ok.reshape(len(ladders), nl, nz)
    fams = []
    for li, (p, xs) in enumerate(ladders):
        seen: list[np.ndarray] = []
        for zi in range(nz):
            good = ok[li, :, zi]
            tail = nl
            while tail > 0 and good[tail - 1]:
                tail -= 1
            if nl - tail < MIN_TAIL:
                continue
            ys = Y[li, tail:, zi]
            if any(np.max(np.linalg.norm(ys - s, axis=1)) <= POINT_TOL for s in seen):
                continue
            seen.append(ys)
            d = np.repeat((-g + decks[zi])[None, :], nl - tail, axis=0)
            fams.append(SequenceFamily(xs[tail:].copy(), ys.copy(), d, np.repeat(g[None, :], nl - tail, axis=0),
                                       p.copy(), f"locus={np.round(p, 6).tolist()} deck={decks[zi].tolist()}"))
    return fams


def generate_families(algebra, spec: GroupSpec, loci=(), K: int = 8, n_random: int = 20, seed: int = 0):
    """Ladder families around the given loci plus ``n_random`` random loci."""
    rng = philox(seed)
    loci = list(loci)
    d = algebra.dimension
    pts = algebra.domain.sample(rng, n_random, margin=0.05)
    dirs = rng.normal(size=(n_random, d))
    dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
    loci += [(p, 0.1 * u) for p, u in zip(pts, dirs)]
    return ladder_families(algebra, spec, loci, K)


@dataclass
class HausdorffReport:
    passed: bool
    families: int
    passing: int
    discarded: int
    counterexample: dict | None
    non_separable: list[dict] = field(default_factory=list)
    K: int = 8
    tolerance: float = LIMIT_TOL

    def to_dict(self) -> dict:
        return {"passed": self.passed, "families": self.families, "passing": self.passing,
                "discarded": self.discarded, "counterexample": self.counterexample,
                "non_separable": self.non_separable, "K": self.K, "tolerance": self.tolerance}


def hausdorff_check(algebra, spec: GroupSpec, families: list[SequenceFamily], K: int = 8,
                    tol: float = LIMIT_TOL) -> HausdorffReport:
    """Fails iff some family has y_n in I(e; e, x_n) but its limit y is not in I(e; e, x).

    Families whose limit y leaves M do not converge in M and are discarded.
    """
    certify(algebra, families)
    e = np.zeros(spec.k)
    usable = [f for f in families if algebra.domain.contains(f.y_limit[None, :])[0]
              and algebra.domain.signed_distance(f.y_limit[None, :])[0] > tol]
    sets = intersection_sets(algebra, spec, [(e, e, f.x_limit) for f in usable], K)
    passing = 0
    counter = None
    pairs = []
    for f, s in zip(usable, sets):
        if s.contains(f.y_limit, tol):
            passing += 1
            continue
        if counter is None:
            counter = f.to_dict()
        pairs.append({"x": f.x_limit.tolist(), "y": f.y_limit.tolist()})
    return HausdorffReport(counter is None, len(families), passing, len(families) - len(usable), counter,
                           pairs[:10], K, tol)


# -- limit elements --------------------------------------------------------------------


@dataclass
class LimitElementReport:
    g_hat: np.ndarray
    x_hat: np.ndarray
    xs: np.ndarray
    ys: np.ndarray
    y_limit: np.ndarray
    deck: np.ndarray
    verdict: bool
    K: int

    def to_dict(self) -> dict:
        return {"g_hat": self.g_hat.tolist(), "x_hat": self.x_hat.tolist(), "x": self.xs.tolist(),
                "y": self.ys.tolist(), "y_limit": self.y_limit.tolist(), "deck": self.deck.tolist(),
                "verdict": self.verdict, "K": self.K}


def limit_elements(algebra, spec: GroupSpec, g0, boundary_samples, K: int = 8, directions=None,
                   scale: float = 1.0) -> list[LimitElementReport]:
    """(g0, x) with I(e; g0, x) empty although nearby x_n have members y_n -> y in M."""
    g0 = np.atleast_1d(np.asarray(g0, float))
    pts = np.atleast_2d(np.asarray(boundary_samples, float))
    dirs = _star(algebra.dimension) if directions is None else np.atleast_2d(np.asarray(directions, float))
    e = np.zeros(spec.k)
    empty = [len(s) == 0 for s in intersection_sets(algebra, spec, [(e, g0, p) for p in pts], K)]
    out = []
    for p, is_empty in zip(pts, empty):
        if not is_empty:
            continue
        loci = [(p, u) for u in dirs]
        for f in ladder_families(algebra, spec, [(a, scale * b) for a, b in loci], K, g=g0):
            y = f.y_limit
            if algebra.domain.signed_distance(y[None, :])[0] > LIMIT_TOL:
                deck = f.displacements[0] + g0
                out.append(LimitElementReport(g0, p.copy(), f.xs, f.ys, y, deck, True, K))
    return out


# -- orbit space --------------------------------------------------------------------------


def _reach(algebra, sources: np.ndarray, lo: float, hi: float, targets: np.ndarray, tol: float):
    """R[i, j]: targets[j] = Fl_t(sources[i]) for some t in [lo, hi] (k = 1)."""
    n = len(sources)
    R = np.zeros((n, len(targets)), bool)
    paths = []
    for end in (hi, lo):
        if end == 0:
            continue
        res = transport(algebra, np.full((n, 1), end), sources, record=True,
                        event_tol=ode.EVENT_TOL / max(1.0, abs(end)))
        paths.append((end, res.trajectories))
    for i in range(n):
        pts = np.concatenate([tr[i][1] for _, tr in paths])
        times = np.concatenate([tr[i][0] * end for end, tr in paths])
        for j, y in enumerate(targets):
            dd = np.linalg.norm(pts - y, axis=1)
            q = int(np.argmin(dd))
            p, t = pts[q], times[q]
            v = algebra.combination(np.ones(1), p[None, :])[0]
            vv = float(v @ v)
            if vv == 0.0:
                R[i, j] = dd[q] <= tol
                continue
            delta = float((y - p) @ v / vv)
            if np.linalg.norm(y - p - delta * v) > 1e-3 * max(1.0, abs(delta) * np.sqrt(vv)):
                continue
            # Newton on the flow parameter from the nearest recorded point
            cur = p
            for _ in range(4):
                out = flow(algebra, [1.0], delta, p, record=False)
                if not out.reached:
                    break
                cur = out.endpoint
                w = algebra.combination(np.ones(1), cur[None, :])[0]
                delta += float((y - cur) @ w / float(w @ w))
            if lo - 1e-9 <= t + delta <= hi + 1e-9 and np.linalg.norm(cur - y) <= tol:
                R[i, j] = True
    return R


@dataclass
class OrbitSpaceReport:
    representatives: list[int]
    algebra_classes: list[list[int]]
    group_classes: list[list[int]]
    agree: bool
    window: float
    K: int

    def to_dict(self) -> dict:
        return {"representatives": self.representatives, "algebra_classes": self.algebra_classes,
                "group_classes": self.group_classes, "agree": self.agree, "window": self.window, "K": self.K}


def _classes(lab) -> list[list[int]]:
    out: dict[int, list[int]] = {}
    for i, c in enumerate(lab):
        out.setdefault(int(c), []).append(i)
    return sorted(out.values(), key=lambda c: c[0])


def orbit_space(algebra, spec: GroupSpec, samples, K: int = 8, B: float = 10.0, tol: float = POINT_TOL):
    """Partition samples into orbits two ways and compare.

    The algebra side follows flows over [-B, B].  The group side sweeps each
    recurrence member of x across the fundamental domain of G (or [-B, B]
    when the lattice is trivial).
    """
    if spec.k != 1:
        raise InvalidParameter("orbit_space supports one-dimensional groups")
    samples = np.atleast_2d(np.asarray(samples, float))
    _require_inside(algebra.domain, samples)
    n = len(samples)
    Ra = _reach(algebra, samples, -B, B, samples, tol)
    alg = _canonical_labels(_components(Ra))

    rec = intersection_sets(algebra, spec, [(np.zeros(1), np.zeros(1), x) for x in samples], K)
    if spec.compact:
        lo, hi = -float(spec.lattice[0, 0]), 0.0
        lo, hi = min(lo, hi), max(lo, hi)
    else:
        lo, hi = -B, B
    owners, members = [], []
    for i, s in enumerate(rec):
        for m in s.members:
            owners.append(i)
            members.append(m.point)
    Rm = _reach(algebra, np.array(members), lo, hi, samples, tol) if members else np.zeros((0, n), bool)
    Rg = np.zeros((n, n), bool)
    for row, i in zip(Rm, owners):
        Rg[i] |= row
    grp = _canonical_labels(_components(Rg))
    reps = [c[0] for c in _classes(alg)]
    return OrbitSpaceReport(reps, _classes(alg), _classes(grp), alg == grp, B, K)


# -- Z-quotient --------------------------------------------------------------------------


@dataclass
class ZQuotientReport:
    degenerate: bool
    union_violations: int
    partitions_agree: bool
    cover_classes: list[list[int]]
    group_classes: list[list[int]]
    K: int

    @property
    def passed(self) -> bool:
        return self.union_violations == 0 and self.partitions_agree

    def to_dict(self) -> dict:
        return {"passed": self.passed, "degenerate": self.degenerate, "union_violations": self.union_violations,
                "partitions_agree": self.partitions_agree, "cover_classes": self.cover_classes,
                "group_classes": self.group_classes, "K": self.K}


def z_quotient_check(algebra, spec: GroupSpec, samples, K: int = 8, tol: float = POINT_TOL) -> ZQuotientReport:
    """G-classes against deck orbits of cover classes.

    For every sample, I_G(e; e, x) must equal the union over deck elements z of
    the cover traces I(e; z, x), and the G-partition must be the partition
    generated by those unions.
    """
    samples = np.atleast_2d(np.asarray(samples, float))
    cover = spec.cover()
    n = len(samples)
    pc = recurrence_partition(algebra, cover, samples, K)
    pg = recurrence_partition(algebra, spec, samples, K)
    if spec.rank == 0:
        return ZQuotientReport(True, 0, pc.classes == pg.classes, pc.classes, pg.classes, K)
    decks = spec.deck_elements(K)
    e = np.zeros(spec.k)
    gsets = intersection_sets(algebra, spec, [(e, e, x) for x in samples], K)
    csets = intersection_sets(algebra, cover, [(e, z, x) for x in samples for z in decks], 0)
    viol = 0
    R = np.zeros((n, n), bool)
    for i in range(n):
        parts = [s.points for s in csets[i * len(decks):(i + 1) * len(decks)] if len(s)]
        union = np.concatenate(parts) if parts else np.zeros((0, samples.shape[1]))
        if not (subset(union, gsets[i].points, tol) and subset(gsets[i].points, union, tol)):
            viol += 1
        if len(union):
            R[i] = np.linalg.norm(samples[:, None] - union[None], axis=2).min(axis=1) <= tol
    induced = _classes(_canonical_labels(_components(R)))
    return ZQuotientReport(False, viol, induced == pg.classes, pc.classes, pg.classes, K)
