"""Intersection and recurrence sets by deck-window enumeration.

The leaf through (g, x) meets the transversal {g'} x M at the endpoints of
straight lifts with displacement g' - g + z, z running over the deck lattice.
All queries of one call are integrated as a single batch.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components

from . import ode
from .action import VectorFieldAlgebra, _require_inside, transport
from .errors import BallExitsDomain
from .group import GroupSpec
from .lift import POINT_TOL, HolonomyWord


def philox(seed: int) -> np.random.Generator:
    """Counter-based generator used for every sampled quantity."""
    return np.random.Generator(np.random.Philox(int(seed)))


@dataclass
class Member:
    point: np.ndarray
    deck: np.ndarray
    displacement: np.ndarray

    @property
    def word(self) -> HolonomyWord:
        return HolonomyWord.straight(self.displacement)


@dataclass
class IntersectionSet:
    """I(g'; g, x) with one certificate per member."""

    target: np.ndarray
    source_g: np.ndarray
    source_x: np.ndarray
    K: int
    members: list[Member]
    merged: int = 0

    def __len__(self) -> int:
        return len(self.members)

    @property
    def points(self) -> np.ndarray:
        if not self.members:
            return np.zeros((0, len(self.source_x)))
        return np.array([m.point for m in self.members])

    def contains(self, y, tol: float = POINT_TOL) -> bool:
        if not self.members:
            return False
        return bool(np.min(np.linalg.norm(self.points - np.asarray(y, float), axis=1)) <= tol)

    def to_dict(self) -> dict:
        return {
            "target": self.target.tolist(),
            "source": {"g": self.source_g.tolist(), "x": self.source_x.tolist()},
            "K": self.K,
            "members": [{"point": m.point.tolist(), "deck": m.deck.tolist(), "escape": False} for m in self.members],
            "merged": self.merged,
        }


def straight_endpoints(algebra: VectorFieldAlgebra, X, D, *, rtol: float = ode.RTOL, atol: float = ode.ATOL,
                       shared_step: bool = False):
    """Endpoints of straight lifts with displacement rows D from rows X, plus a defined-mask."""
    X = np.atleast_2d(np.asarray(X, float))
    D = np.atleast_2d(np.asarray(D, float))
    scale = max(1.0, float(np.abs(D).max())) if D.size else 1.0
    res = transport(algebra, D, X, rtol=rtol, atol=atol, event_tol=ode.EVENT_TOL / scale,
                    locate=False, shared_step=shared_step)
    return res.y, ~res.escaped


def _assemble(target, g, x, K, decks, disp, Y, ok, tol) -> IntersectionSet:
    members: list[Member] = []
    merged = 0
    for z, d, y, good in zip(decks, disp, Y, ok):
        if not good:
            continue
        if any(np.linalg.norm(y - m.point) <= tol for m in members):
            merged += 1
            continue
        members.append(Member(y.copy(), z.copy(), d.copy()))
    members.sort(key=lambda m: tuple(np.round(m.point, 9)) + tuple(m.deck))
    return IntersectionSet(np.asarray(target, float), np.asarray(g, float), np.asarray(x, float), K, members, merged)


def intersection_sets(algebra, spec: GroupSpec, queries, K: int, tol: float = POINT_TOL) -> list[IntersectionSet]:
    """Batched I(g'; g, x) for a list of (g', g, x) triples (one deck window per call)."""
    if not queries:
        return []
    decks = spec.deck_elements(K)
    nz = len(decks)
    X, D = [], []
    for gp, g, x in queries:
        base = np.atleast_1d(np.asarray(gp, float)) - np.atleast_1d(np.asarray(g, float))
        X.append(np.repeat(np.asarray(x, float)[None, :], nz, axis=0))
        D.append(base + decks)
    X = np.concatenate(X)
    D = np.concatenate(D)
    _require_inside(algebra.domain, X)
    Y, ok = straight_endpoints(algebra, X, D)
    out = []
    for q, (gp, g, x) in enumerate(queries):
        sl = slice(q * nz, (q + 1) * nz)
        out.append(_assemble(np.atleast_1d(np.asarray(gp, float)), np.atleast_1d(np.asarray(g, float)),
                             x, K, decks, D[sl], Y[sl], ok[sl], tol))
    return out


def intersection_set(algebra, spec: GroupSpec, g_target, g_source, x, K: int = 8) -> IntersectionSet:
    """Certified members of I(g'; g, x) within deck window K."""
    return intersection_sets(algebra, spec, [(g_target, g_source, np.asarray(x, float))], K)[0]


def recurrence_sets(algebra, spec: GroupSpec, points, K: int = 8) -> list[IntersectionSet]:
    e = np.zeros(spec.k)
    return intersection_sets(algebra, spec, [(e, e, p) for p in np.atleast_2d(points)], K)


def verify_certificates(algebra, iset: IntersectionSet, tol: float = POINT_TOL) -> bool:
    """Replay every member's straight lift at half the integrator tolerance."""
    if not iset.members:
        return True
    D = np.array([m.displacement for m in iset.members])
    X = np.repeat(iset.source_x[None, :], len(D), axis=0)
    Y, ok = straight_endpoints(algebra, X, D, rtol=ode.RTOL / 2, atol=ode.ATOL / 2)
    return bool(np.all(ok) and np.max(np.linalg.norm(Y - iset.points, axis=1)) <= tol)


def subset(a: np.ndarray, b: np.ndarray, tol: float = POINT_TOL) -> bool:
    """Every row of a lies within tol of some row of b."""
    if len(a) == 0:
        return True
    if len(b) == 0:
        return False
    d = np.linalg.norm(a[:, None, :] - b[None, :, :], axis=2)
    return bool(np.all(d.min(axis=1) <= tol))


def meets(a: np.ndarray, b: np.ndarray, tol: float = POINT_TOL) -> bool:
    if len(a) == 0 or len(b) == 0:
        return False
    return bool(np.min(np.linalg.norm(a[:, None, :] - b[None, :, :], axis=2)) <= tol)


# -- partitions -----------------------------------------------------------------


@dataclass
class Partition:
    classes: list[list[int]]
    reflexive: bool
    symmetric: bool
    transitive: bool
    K: int

    @property
    def is_equivalence(self) -> bool:
        return self.reflexive and self.symmetric and self.transitive

    def labels(self, n: int) -> np.ndarray:
        lab = np.empty(n, int)
        for c, members in enumerate(self.classes):
            lab[members] = c
        return lab

    def to_dict(self) -> dict:
        return {"classes": self.classes, "reflexive": self.reflexive, "symmetric": self.symmetric,
                "transitive": self.transitive, "K": self.K}


def relation_matrix(sets: list[IntersectionSet], samples: np.ndarray, tol: float = POINT_TOL) -> np.ndarray:
    """R[i, j] = samples[j] in I(e; e, samples[i])."""
    n = len(samples)
    R = np.zeros((n, n), bool)
    for i, s in enumerate(sets):
        if s.members:
            d = np.linalg.norm(samples[:, None, :] - s.points[None, :, :], axis=2)
            R[i] = d.min(axis=1) <= tol
    return R


def recurrence_partition(algebra, spec: GroupSpec, samples, K: int = 8, tol: float = POINT_TOL) -> Partition:
    """Group samples by y in I(e; e, x) and verify the relation is an equivalence."""
    samples = np.atleast_2d(np.asarray(samples, float))
    R = relation_matrix(recurrence_sets(algebra, spec, samples, K), samples, tol)
    reflexive = bool(np.all(np.diag(R)))
    symmetric = bool(np.array_equal(R, R.T))
    Ri = R.astype(int)
    transitive = bool(np.all(~((Ri @ Ri) > 0) | R))
    _, lab = connected_components(csr_matrix(R | R.T), directed=False)
    classes: dict[int, list[int]] = {}
    for i, c in enumerate(lab):
        classes.setdefault(c, []).append(i)
    ordered = sorted(classes.values(), key=lambda c: c[0])
    return Partition(ordered, reflexive, symmetric, transitive, K)


# -- identities -----------------------------------------------------------------


@dataclass
class IdentityReport:
    trials: int
    K: int
    seed: int
    violations: dict[str, int]
    applicable: dict[str, int]
    examples: list[dict] = field(default_factory=list)

    @property
    def total_violations(self) -> int:
        return int(sum(self.violations.values()))

    @property
    def passed(self) -> bool:
        return self.total_violations == 0

    def to_dict(self) -> dict:
        return {"trials": self.trials, "K": self.K, "seed": self.seed, "violations": self.violations,
                "applicable": self.applicable, "total_violations": self.total_violations,
                "examples": self.examples}


def identity_check(algebra, spec: GroupSpec, trials: int = 100, K: int = 8, seed: int = 0,
                   group_span: float = 2.0, tol: float = POINT_TOL) -> IdentityReport:
    """Randomized check of the translation, leaf and equivalence identities.

    Inclusions that compare sets from different base points use a doubled deck
    window on the containing side so that window edges cannot fake a violation.
    """
    rng = philox(seed)
    k = spec.k
    xs = algebra.domain.sample(rng, trials, margin=1e-3)
    x3s = algebra.domain.sample(rng, trials, margin=1e-3)
    G = rng.uniform(-group_span, group_span, size=(trials, 3, k))
    e = np.zeros(k)
    names = ["translation", "leaf_independence", "disjointness", "transitivity", "reflexivity", "symmetry",
             "class_transitivity"]
    viol = dict.fromkeys(names, 0)
    appl = dict.fromkeys(names, 0)
    examples: list[dict] = []

    def flag(name, t, **info):
        viol[name] += 1
        if len(examples) < 10:
            examples.append({"identity": name, "trial": t, **{a: np.asarray(b).tolist() for a, b in info.items()}})

    stage1, stage1_big = [], []
    for t in range(trials):
        x, x3 = xs[t], x3s[t]
        g, gp, gpp = G[t]
        stage1 += [(gp, g, x), (gp - g, e, x), (e, g - gp, x), (e, e, x), (e, e, x3), (g, g, x), (gpp, g, x)]
        stage1_big += [(gpp, g, x), (e, e, x)]
    s1 = intersection_sets(algebra, spec, stage1, K, tol)
    b1 = intersection_sets(algebra, spec, stage1_big, 2 * K, tol)

    stage2, stage2_big, plan = [], [], []
    for t in range(trials):
        A, B, C, R, R3, refl, L = s1[7 * t: 7 * t + 7]
        Lbig, Rbig = b1[2 * t: 2 * t + 2]
        g, gp, gpp = G[t]
        x = xs[t]
        appl["translation"] += 1
        if not (subset(A.points, B.points, tol) and subset(B.points, A.points, tol)
                and subset(A.points, C.points, tol) and subset(C.points, A.points, tol)):
            flag("translation", t, g=g, gp=gp, x=x)
        appl["reflexivity"] += 1
        if not refl.contains(x, tol):
            flag("reflexivity", t, x=x)
        appl["disjointness"] += 1
        if meets(R3.points, R.points, tol) and not subset(R3.points, Rbig.points, tol):
            flag("disjointness", t, x=x, x3=x3s[t])
        item = {"t": t}
        if A.members:
            y = A.members[len(A.members) // 2].point
            item["y"] = len(stage2)
            stage2.append((gpp, gp, y))
            stage2_big.append((gpp, gp, y))
        if R.members:
            w = R.members[-1].point
            item["w"] = len(stage2)
            stage2.append((e, e, w))
        plan.append(item)
    s2 = intersection_sets(algebra, spec, stage2, K, tol)
    b2 = intersection_sets(algebra, spec, stage2_big, 2 * K, tol)
    big_index = {}
    for item in plan:
        if "y" in item:
            big_index[item["t"]] = len(big_index)
    for item in plan:
        t = item["t"]
        A, B, C, R, R3, refl, L = s1[7 * t: 7 * t + 7]
        Lbig, Rbig = b1[2 * t: 2 * t + 2]
        x = xs[t]
        if "y" in item:
            # (g', y) on the leaf of (g, x): traces on {g''} agree, and membership is transitive
            Ly = s2[item["y"]]
            Lybig = b2[big_index[t]]
            appl["leaf_independence"] += 1
            if not (subset(Ly.points, Lbig.points, tol) and subset(L.points, Lybig.points, tol)):
                flag("leaf_independence", t, x=x, y=Ly.source_x)
            appl["transitivity"] += 1
            if not subset(Ly.points, Lbig.points, tol):
                flag("transitivity", t, x=x, y=Ly.source_x)
        if "w" in item:
            Rw = s2[item["w"]]
            appl["symmetry"] += 1
            if not Rw.contains(x, tol):
                flag("symmetry", t, x=x, w=Rw.source_x)
            appl["class_transitivity"] += 1
            if not subset(Rw.points, Rbig.points, tol):
                flag("class_transitivity", t, x=x, w=Rw.source_x)
    return IdentityReport(trials, K, seed, viol, appl, examples)


# -- uniformity -----------------------------------------------------------------


@dataclass
class UniformityReport:
    x0: np.ndarray
    radius: float
    uniform: bool
    properly_discontinuous: bool
    isotropy_order: int
    words: int
    K: int

    def to_dict(self) -> dict:
        return {"x0": self.x0.tolist(), "radius": self.radius, "uniform": self.uniform,
                "properly_discontinuous": self.properly_discontinuous,
                "isotropy_order": self.isotropy_order, "words": self.words, "K": self.K}


CLOUD = 20
LADDER = tuple(range(3, 13))


def _cloud(rng, x0, r, n=CLOUD):
    d = len(x0)
    u = rng.normal(size=(n, d))
    u /= np.linalg.norm(u, axis=1, keepdims=True)
    rad = r * rng.uniform(0.1, 1.0, size=(n, 1)) ** (1.0 / d)
    return x0 + u * rad


def uniformity_many(algebra, spec: GroupSpec, X0, r: float = 0.05, K: int = 8, seed: int = 0,
                    tol: float = POINT_TOL, shrink: int = 12, strict: bool = False) -> list[UniformityReport]:
    """Uniformity, proper discontinuity and isotropy order at each row of X0.

    Words are the deck-translated straight words z of I(e; e, x0).  A ball whose
    cloud is not covered by every defined word is halved up to ``shrink`` times.
    Proper discontinuity is tested on ladders x0 + 2^-j r u: any word that moves
    a ladder point back within 4 |x_j - x0| of x0 must fix x0.
    """
    X0 = np.atleast_2d(np.asarray(X0, float))
    _require_inside(algebra.domain, X0)
    rng = philox(seed)
    decks = spec.deck_elements(K)
    nz = len(decks)
    dist = algebra.domain.signed_distance(X0)
    if strict and np.any(dist <= r):
        bad = int(np.flatnonzero(dist <= r)[0])
        raise BallExitsDomain(f"ball of radius {r} around {X0[bad].tolist()} leaves the domain")
    radii = np.minimum(r, 0.5 * dist)
    d = X0.shape[1]
    ladders_u = rng.normal(size=(len(X0), d))
    ladders_u /= np.linalg.norm(ladders_u, axis=1, keepdims=True)
    clouds = np.array([_cloud(rng, X0[i], 1.0) - X0[i] for i in range(len(X0))])  # unit-radius offsets

    reports: list[UniformityReport | None] = [None] * len(X0)
    pending = list(range(len(X0)))
    for _ in range(shrink + 1):
        if not pending:
            break
        rows_x, rows_d = [], []
        for i in pending:
            x0, rad = X0[i], radii[i]
            pts = np.concatenate([x0[None, :], x0 + rad * clouds[i],
                                  x0 + np.array([2.0 ** -j for j in LADDER])[:, None] * rad * ladders_u[i]])
            rows_x.append(np.repeat(pts, nz, axis=0))
            rows_d.append(np.tile(decks, (len(pts), 1)))
        Y, ok = straight_endpoints(algebra, np.concatenate(rows_x), np.concatenate(rows_d))
        per = 1 + CLOUD + len(LADDER)
        still = []
        for q, i in enumerate(pending):
            blk = slice(q * per * nz, (q + 1) * per * nz)
            Yq = Y[blk].reshape(per, nz, d)
            okq = ok[blk].reshape(per, nz)
            x0, rad = X0[i], radii[i]
            defined = okq[0]
            uniform = bool(np.all(okq[1:1 + CLOUD][:, defined]))
            if not uniform:
                radii[i] = rad / 2
                still.append(i)
                continue
            fixing = defined & (np.linalg.norm(Yq[0] - x0, axis=1) <= tol)
            # classes of fixing words by their action on the cloud
            reps: list[np.ndarray] = []
            for j in np.flatnonzero(fixing):
                img = Yq[1:1 + CLOUD, j]
                if not any(np.max(np.linalg.norm(img - rimg, axis=1)) <= tol for rimg in reps):
                    reps.append(img)
            pd_ok = True
            for li, j in enumerate(LADDER):
                pts = Yq[1 + CLOUD + li]
                src = x0 + 2.0 ** -j * rad * ladders_u[i]
                near = okq[1 + CLOUD + li] & (np.linalg.norm(pts - x0, axis=1) <= 4 * np.linalg.norm(src - x0) + tol)
                if np.any(near & ~fixing):
                    pd_ok = False
            reports[i] = UniformityReport(x0.copy(), float(rad), True, pd_ok, len(reps), int(defined.sum()), K)
        pending = still
    for i in pending:
        reports[i] = UniformityReport(X0[i].copy(), float(radii[i]), False, False, 0, 0, K)
    return reports


def uniformity_check(algebra, spec: GroupSpec, x0, r: float = 0.05, K: int = 8, seed: int = 0) -> UniformityReport:
    return uniformity_many(algebra, spec, np.asarray(x0, float)[None, :], r, K, seed, strict=True)[0]
