"""Command-line front end: runs lifts, recurrence, atlases and checks and writes reports."""

from __future__ import annotations

import argparse
import csv
import json
import math
import os
import sys
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import catalog
from .bundle import homomorphism_defect, lift_path_on_bundle, linearity_defect, projectability_check, tangent_lift
from .catalog import NAMES, Scenario, oracle_compare, scenario
from .completion import build_atlas, default_grid, generate_families, hausdorff_check, orbifold_check
from .errors import InvalidConfig, InvalidParameter, LeafspaceError, UnknownScenario
from .group import GroupPath, flatness_defect
from .lift import POINT_TOL, lift_path
from .properness import (
    MetricField, build_slice, isotropy_compactness, killing_defect, proper_check, recapture_families,
)
from .recurrence import philox, recurrence_sets
from .scenario_file import load_lift, load_scenario

CHECKS = ("hausdorff", "proper", "orbifold", "killing", "slice", "bundle")
EXIT_OK, EXIT_FAIL, EXIT_INVALID = 0, 1, 2


@dataclass
class RunConfig:
    command: str
    scenario: str
    n: int | None = None
    group: str = "circle"
    K: int = catalog.DEFAULT_K
    B: float = catalog.DEFAULT_B
    grid: int = catalog.DEFAULT_GRID
    samples: int = 20
    tol: float | None = None
    seed: int = 0
    out: str = "leafspace-out"
    at: list = field(default_factory=list)
    to: float = 1.0
    checks: list = field(default_factory=list)
    recurrence: bool = False
    lift: bool = False
    atlas: bool = False
    threads: int = 1

    def to_dict(self) -> dict:
        d = dict(self.__dict__)
        d.pop("out")
        return d


@dataclass
class Report:
    verdicts: dict = field(default_factory=dict)
    residuals: dict = field(default_factory=dict)
    witnesses: dict = field(default_factory=dict)
    details: dict = field(default_factory=dict)
    errors: list = field(default_factory=list)
    leaves: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return not self.errors and all(v is not False for v in self.verdicts.values())


# -- argument handling -----------------------------------------------------------------------


def _threads() -> int:
    raw = os.environ.get("LEAFSPACE_THREADS")
    if raw is None:
        return 1
    try:
        v = int(raw)
    except ValueError:
        v = 0
    if v < 1:
        raise InvalidConfig(f"LEAFSPACE_THREADS must be a positive integer, got {raw!r}")
    return v


def _parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--scenario", help="scenario JSON file or catalog name")
    common.add_argument("--n", type=int, help="rotation order for disc scenarios")
    common.add_argument("--group", choices=("circle", "line"), default="circle",
                        help="compact circle R/Z or its cover R for disc scenarios")
    common.add_argument("--budget-K", dest="K", type=int, default=catalog.DEFAULT_K, help="deck window")
    common.add_argument("--window-B", dest="B", type=float, default=catalog.DEFAULT_B, help="group window")
    common.add_argument("--grid", type=int, default=catalog.DEFAULT_GRID, help="atlas grid size")
    common.add_argument("--samples", type=int, default=20, help="number of random sample points")
    common.add_argument("--tol", type=float, help="override the point tolerance")
    common.add_argument("--seed", type=int, default=0, help="seed for sampled points (unsigned)")
    common.add_argument("--out", default="leafspace-out", help="output directory")
    common.add_argument("--at", action="append", default=[],
                        help="point as comma-separated coordinates (r,theta in turns for disc scenarios)")
    common.add_argument("--to", type=float, default=1.0, help="end of the straight group path for lifts")

    p = argparse.ArgumentParser(prog="leafspace", description="Leaf spaces of infinitesimal actions.")
    sub = p.add_subparsers(dest="command", required=True)
    sub.add_parser("lift", parents=[common], help="lift a straight group path through the graph foliation")
    sub.add_parser("recurrence", parents=[common], help="recurrence sets I(e; e, x)")
    sub.add_parser("atlas", parents=[common], help="build the completion atlas")
    chk = sub.add_parser("check", parents=[common], help="run one checker")
    chk.add_argument("kind", choices=CHECKS)
    ex = sub.add_parser("example", parents=[common], help="run a catalog scenario")
    ex.add_argument("name", choices=NAMES)
    ex.add_argument("--check", dest="checks", action="append", choices=CHECKS, default=[])
    ex.add_argument("--recurrence", action="store_true")
    ex.add_argument("--lift", action="store_true")
    ex.add_argument("--atlas", action="store_true")
    return p


def parse_config(argv) -> RunConfig:
    parser = _parser()
    try:
        ns = parser.parse_args(argv)
    except SystemExit as e:
        if e.code == 0:
            raise
        raise InvalidConfig("invalid command line") from None
    name = ns.name if ns.command == "example" else ns.scenario
    if name is None:
        raise InvalidConfig("a scenario is required (--scenario <file|name>)")
    if ns.seed < 0:
        raise InvalidConfig("--seed must be an unsigned integer")
    if ns.K < 0 or ns.B <= 0 or ns.grid < 1 or ns.samples < 1:
        raise InvalidConfig("budgets must be positive")
    if ns.tol is not None and not ns.tol > 0:
        raise InvalidConfig("--tol must be positive")
    at = []
    for s in ns.at:
        try:
            at.append([float(v) for v in s.split(",")])
        except ValueError:
            raise InvalidConfig(f"cannot parse point {s!r}") from None
    checks = [ns.kind] if ns.command == "check" else list(getattr(ns, "checks", []))
    return RunConfig(ns.command, name, ns.n, ns.group, ns.K, ns.B, ns.grid, ns.samples, ns.tol, ns.seed, ns.out,
                     at, ns.to, checks, getattr(ns, "recurrence", False), getattr(ns, "lift", False),
                     getattr(ns, "atlas", False), _threads())


def resolve_scenario(cfg: RunConfig) -> tuple[Scenario, object]:
    path = Path(cfg.scenario)
    if path.suffix == ".json" or path.exists():
        sc = load_scenario(path)
        return sc, load_lift(path, sc)
    if cfg.scenario not in NAMES:
        raise UnknownScenario(f"unknown scenario {cfg.scenario!r}; expected a JSON file or one of {', '.join(NAMES)}")
    return scenario(cfg.scenario, cfg.n, cfg.group), None


def _points(sc: Scenario, cfg: RunConfig) -> np.ndarray:
    pts = []
    for c in cfg.at:
        try:
            p = sc.point(c)
        except (IndexError, ValueError):
            raise InvalidConfig(f"point {c} does not fit the scenario coordinates") from None
        if p.shape[0] != sc.algebra.dimension:
            raise InvalidConfig(f"point {c} has the wrong dimension")
        pts.append(p)
    return np.array(pts).reshape(-1, sc.algebra.dimension)


def _samples(sc: Scenario, cfg: RunConfig, margin: float = 0.05) -> np.ndarray:
    return sc.domain.sample(philox(cfg.seed), cfg.samples, margin)


def _tol(cfg: RunConfig, default: float) -> float:
    return default if cfg.tol is None else cfg.tol


# -- commands ------------------------------------------------------------------------------


def _do_lift(sc: Scenario, cfg: RunConfig, rep: Report) -> None:
    pts = _points(sc, cfg)
    if not len(pts):
        raise InvalidConfig("lift needs at least one --at point")
    end = np.full(sc.group.k, cfg.to)
    path = GroupPath.linear(np.zeros(sc.group.k), end)
    out = []
    for i, x in enumerate(pts):
        res = lift_path(sc.algebra, sc.group, path, x)
        entry = {"x0": x.tolist(), "liftable": res.liftable, "escape": res.escape,
                 "endpoint": None if not res.liftable else res.y_end.tolist()}
        rows = res.rows()
        # path parameter s to group element g = s * end
        leaf = np.concatenate([rows[:, :1], rows[:, :1] * end[None, :], rows[:, 1 + sc.group.k:]], axis=1)
        rep.leaves.append(leaf)
        if "trajectory" in sc.oracles:
            dev = float(np.max(np.linalg.norm(leaf[:, 1 + sc.group.k:] - sc.oracles["trajectory"](x, leaf[:, 1]),
                                              axis=1)))
            entry["oracle_deviation"] = dev
            rep.residuals[f"lift[{i}]"] = dev
            rep.verdicts[f"lift_oracle[{i}]"] = dev <= _tol(cfg, POINT_TOL)
        out.append(entry)
    rep.details["lift"] = out


def _do_recurrence(sc: Scenario, cfg: RunConfig, rep: Report) -> None:
    pts = _points(sc, cfg)
    if not len(pts):
        pts = _samples(sc, cfg)
    sets = recurrence_sets(sc.algebra, sc.group, pts, cfg.K)
    rep.details["recurrence"] = [s.to_dict() for s in sets]
    rep.residuals["recurrence_sizes"] = [len(s) for s in sets]
    if "recurrence_set" in sc.oracles:
        r = oracle_compare(sc, "recurrence", pts, cfg.B, cfg.K)
        rep.residuals["recurrence_oracle"] = r.residual
        rep.verdicts["recurrence_oracle"] = r.residual <= _tol(cfg, r.tol)


def _do_atlas(sc: Scenario, cfg: RunConfig, rep: Report) -> None:
    S = _samples(sc, cfg)
    A = build_atlas(sc.algebra, sc.group, default_grid(sc.group, cfg.grid), S, cfg.K, seed=cfg.seed)
    rep.details["atlas"] = A.to_dict()
    rep.verdicts["atlas_consistent"] = A.consistent
    rep.residuals["triangle"] = A.triangle_residual
    rep.residuals["translation"] = A.translation_residual


def _check_hausdorff(sc, cfg, rep):
    fams = generate_families(sc.algebra, sc.group, sc.loci, cfg.K, n_random=cfg.samples, seed=cfg.seed)
    r = hausdorff_check(sc.algebra, sc.group, fams, cfg.K, _tol(cfg, 1e-4))
    rep.verdicts["hausdorff"] = r.passed
    rep.details["hausdorff"] = r.to_dict()
    if not r.passed:
        rep.witnesses["hausdorff"] = r.to_dict().get("counterexample")


def _check_proper(sc, cfg, rep):
    S = _samples(sc, cfg)
    pts = np.concatenate([S[:5]] + [np.atleast_2d(p) for p in sc.landmarks if sc.domain.contains(p[None, :])[0]])
    fams = generate_families(sc.algebra, sc.group, sc.loci, cfg.K, n_random=cfg.samples, seed=cfg.seed)
    if sc.group.k == 1:
        fams += recapture_families(sc.algebra, sc.group, pts, cfg.B, cfg.K)
    r = proper_check(sc.algebra, sc.group, fams, cfg.B, cfg.K)
    rep.verdicts["proper"] = r.proper
    rep.details["proper"] = r.to_dict()
    if not r.proper:
        rep.witnesses["proper"] = r.counterexample
    if sc.group.k == 1:
        iso = [isotropy_compactness(sc.algebra, sc.group, p, cfg.B, cfg.K).to_dict() for p in pts]
        rep.details["isotropy"] = iso
        rep.verdicts["isotropy_compact"] = all(i["compact"] for i in iso)


def _check_orbifold(sc, cfg, rep):
    r = orbifold_check(sc.algebra, sc.group, _samples(sc, cfg, 1e-3), K=cfg.K, seed=cfg.seed)
    rep.verdicts["orbifold_like"] = r["orbifold_like"]
    rep.details["orbifold"] = r
    if r["failing"]:
        rep.witnesses["orbifold"] = r["failing"][0]


def _check_killing(sc, cfg, rep):
    S = _samples(sc, cfg, 0.05)
    d = killing_defect(sc.algebra, MetricField.flat(sc.algebra.dimension), S, h=1e-4)
    tol = _tol(cfg, 1e-5)
    rep.residuals["killing_flat"] = d
    rep.verdicts["killing_flat"] = d <= tol


def _check_slice(sc, cfg, rep):
    S = _samples(sc, cfg, 0.05)
    pts = list(S) + [p for p in sc.landmarks if sc.domain.contains(p[None, :])[0]]
    out = []
    ok = True
    for i, p in enumerate(pts):
        r = min(0.1, 0.5 * float(sc.domain.signed_distance(p[None, :])[0]))
        s = build_slice(sc.algebra, p, r, seed=cfg.seed + i)
        out.append(s.to_dict())
        if not s.degenerate and not s.passed:
            ok = False
            rep.witnesses.setdefault("slice", s.to_dict())
    rep.verdicts["slice"] = ok
    rep.details["slice"] = out
    rep.residuals["slice_degenerate"] = [i for i, s in enumerate(out) if s["degenerate"]]


def _check_bundle(sc, cfg, rep, lift=None):
    path = GroupPath.linear(np.zeros(sc.group.k), np.full(sc.group.k, cfg.to))
    S = _samples(sc, cfg, 0.1)
    liftable = np.array([lift_path(sc.algebra, sc.group, path, x, record=False).liftable for x in S])
    rep.residuals["bundle_cases"] = int(liftable.sum())
    S = S[liftable]
    if not len(S):
        raise InvalidConfig("no sample point lifts along the requested path; choose a shorter --to")
    L = lift or tangent_lift(sc.algebra, at=S)
    proj = projectability_check(L, S)
    lin = linearity_defect(L, S, cfg.seed)
    rng = philox(cfg.seed)
    U = rng.normal(size=(len(S), L.rank))
    W = rng.normal(size=(len(S), L.rank))
    a, b = rng.normal(size=2)
    base = lift_path_on_bundle(L, sc.group, path, S, U)
    other = lift_path_on_bundle(L, sc.group, path, S, W)
    both = lift_path_on_bundle(L, sc.group, path, S, a * U + b * W)
    sup = float(np.max(np.abs(both.v - a * base.v - b * other.v)))
    ref = np.array([lift_path(sc.algebra, sc.group, path, x, record=False).y_end for x in S])
    comm = float(np.max(np.linalg.norm(ref - base.y, axis=1)))
    hom = max(homomorphism_defect(L, i, j, S[0], U[0]) for i in range(sc.algebra.dim) for j in range(sc.algebra.dim))
    rep.details["bundle"] = {"projectability": proj.to_dict(), "linearity": lin, "superposition": sup,
                             "projection_commutation": comm, "homomorphism": hom}
    rep.residuals.update(bundle_superposition=sup, bundle_projection=comm, bundle_linearity=lin)
    rep.verdicts["bundle"] = bool(proj.passed and lin <= 1e-9 and sup <= 1e-6 and comm <= _tol(cfg, POINT_TOL))


CHECKERS = {"hausdorff": _check_hausdorff, "proper": _check_proper, "orbifold": _check_orbifold,
            "killing": _check_killing, "slice": _check_slice, "bundle": _check_bundle}


def _default_example(sc: Scenario, cfg: RunConfig, rep: Report) -> None:
    """Oracle comparisons on the scenario loci plus every stored expected verdict."""
    pts = np.array([p for p, _ in sc.loci[::2]][:4]) if sc.loci else _samples(sc, cfg)[:4]
    if sc.coordinates == "polar":
        pts = np.concatenate([pts, [catalog.polar(1.5, 0.5), catalog.polar(0.5, 0.3)]])
    pts = pts[sc.domain.contains(pts)]
    for op, key in (("lift", "trajectory"), ("escape", "escape_interval"), ("recurrence", "recurrence_set")):
        if key in sc.oracles:
            r = oracle_compare(sc, op, pts, cfg.B, cfg.K)
            rep.residuals[f"oracle_{op}"] = r.residual
            rep.verdicts[f"oracle_{op}"] = r.passed
    if "abelian_compatible" in sc.expected:
        x = _samples(sc, cfg)[0]
        defect = flatness_defect(sc.algebra, sc.group, x)
        rep.residuals["flatness_defect"] = defect
        rep.verdicts["expected_abelian_compatible"] = (defect <= 1e-6) == sc.expected["abelian_compatible"]
    mapping = {"hausdorff": "hausdorff", "proper": "proper", "orbifold_like": "orbifold"}
    for key, chk in mapping.items():
        if key in sc.expected:
            sub = Report()
            CHECKERS[chk](sc, cfg, sub)
            got = sub.verdicts[key]
            rep.details[f"expected_{key}"] = {"expected": sc.expected[key], "observed": got}
            rep.verdicts[f"expected_{key}"] = got == sc.expected[key]
            rep.witnesses.update(sub.witnesses)


def execute(cfg: RunConfig) -> tuple[Report, Scenario]:
    sc, lift = resolve_scenario(cfg)
    rep = Report()
    steps = []
    if cfg.command == "lift" or cfg.lift:
        steps.append(("lift", lambda: _do_lift(sc, cfg, rep)))
    if cfg.command == "recurrence" or cfg.recurrence:
        steps.append(("recurrence", lambda: _do_recurrence(sc, cfg, rep)))
    if cfg.command == "atlas" or cfg.atlas:
        steps.append(("atlas", lambda: _do_atlas(sc, cfg, rep)))
    for kind in cfg.checks:
        if kind == "bundle":
            steps.append((kind, lambda: _check_bundle(sc, cfg, rep, lift)))
        else:
            steps.append((kind, lambda kind=kind: CHECKERS[kind](sc, cfg, rep)))
    if cfg.command == "example" and not steps:
        steps.append(("example", lambda: _default_example(sc, cfg, rep)))
    for name, fn in steps:
        try:
            fn()
        except (InvalidConfig, UnknownScenario):
            raise
        except LeafspaceError as e:
            rep.errors.append({"step": name, **e.to_dict()})
            rep.verdicts[name] = False
        except (ValueError, ArithmeticError, np.linalg.LinAlgError) as e:
            rep.errors.append({"step": name, "error": "numeric-failure", "message": str(e)})
            rep.verdicts[name] = False
    return rep, sc


# -- output --------------------------------------------------------------------------------


def _clean(obj):
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer, int)):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else ("inf" if v > 0 else "-inf" if v < 0 else "nan")
    return obj


def write_outputs(cfg: RunConfig, sc_budgets: dict, rep: Report) -> Path:
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    report = {
        "command": cfg.command,
        "config": cfg.to_dict(),
        "verdicts": rep.verdicts,
        "residuals": rep.residuals,
        "witnesses": rep.witnesses,
        "budgets": {"K": cfg.K, "B": cfg.B, "grid": cfg.grid, "samples": cfg.samples,
                    "tol": cfg.tol if cfg.tol is not None else POINT_TOL, "seed": cfg.seed},
        "details": rep.details,
        "errors": rep.errors,
        "passed": rep.passed,
        "timestamp": datetime.now(timezone.utc).isoformat(),
    }
    (out / "report.json").write_text(json.dumps(_clean(report), indent=2, sort_keys=True) + "\n")
    if rep.leaves:
        k = sc_budgets["k"]
        d = rep.leaves[0].shape[1] - 1 - k
        header = ["t"] + [f"g{i}" for i in range(k)] + [f"y{i}" for i in range(d)]
        with open(out / "trajectories.csv", "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["leaf"] + header)
            for i, leaf in enumerate(rep.leaves):
                for row in leaf:
                    w.writerow([i] + [repr(float(v)) for v in row])
        poly = out / "polylines"
        poly.mkdir(exist_ok=True)
        for i, leaf in enumerate(rep.leaves):
            with open(poly / f"leaf_{i:03d}.csv", "w", newline="") as fh:
                w = csv.writer(fh)
                w.writerow(header)
                for row in leaf:
                    w.writerow([repr(float(v)) for v in row])
    return out / "report.json"


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else argv
    try:
        cfg = parse_config(argv)
        rep, sc = execute(cfg)
    except (InvalidConfig, UnknownScenario, InvalidParameter) as e:
        print(f"leafspace: {e.code}: {e}", file=sys.stderr)
        return EXIT_INVALID
    path = write_outputs(cfg, {"k": sc.group.k}, rep)
    status = "pass" if rep.passed else "fail"
    print(f"{cfg.command}: {status} ({path})")
    return EXIT_OK if rep.passed else EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
