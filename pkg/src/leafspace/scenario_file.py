"""JSON scenario files: catalog references or inline polynomial vector fields.

An inline file looks like::

    {"name": "shear", "domain": {"dimension": 2, "base": {"type": "disc", "radius": 2.0}},
     "fields": [[[{"coeff": -1.0, "powers": [0, 1]}], [{"coeff": 1.0, "powers": [1, 0]}]]],
     "structure_constants": [[[0.0]]],
     "group": {"k": 1, "lattice_generators": [[1.0]]},
     "vertical": [[[[], [{"coeff": -1.0, "powers": [0, 0]}]], [[{"coeff": 1.0, "powers": [0, 0]}], []]]]}

Each field is a list of components and each component a list of monomials.
``vertical`` optionally gives one r x r matrix of polynomials per field.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .action import VectorFieldAlgebra
from .bundle import LinearLift
from .catalog import Scenario, scenario
from .domains import ChartDomain
from .errors import InvalidConfig, LeafspaceError
from .group import GroupSpec


def polynomial(terms, d: int):
    """Vectorized evaluation of sum coeff * prod x_j^p_j over rows."""
    coeffs = np.array([float(t["coeff"]) for t in terms])
    powers = np.array([[int(p) for p in t["powers"]] for t in terms], dtype=int).reshape(-1, d)
    if np.any(powers < 0):
        raise InvalidConfig("monomial powers must be non-negative")

    def f(P):
        P = np.atleast_2d(P)
        if not len(coeffs):
            return np.zeros(len(P))
        return (np.prod(P[:, None, :] ** powers[None, :, :], axis=2) * coeffs).sum(axis=1)
    return f


def _field(components, d: int):
    if len(components) != d:
        raise InvalidConfig(f"each field needs {d} components")
    polys = [polynomial(c, d) for c in components]

    def f(P):
        return np.stack([p(P) for p in polys], axis=1)
    return f


def _matrix(rows, d: int):
    r = len(rows)
    if any(len(row) != r for row in rows):
        raise InvalidConfig("vertical parts must be square matrices")
    polys = [[polynomial(c, d) for c in row] for row in rows]

    def A(P):
        P = np.atleast_2d(P)
        return np.stack([np.stack([p(P) for p in row], axis=1) for row in polys], axis=1)
    return A, r


def _read(src) -> dict:
    if isinstance(src, dict):
        return src
    try:
        return json.loads(Path(src).read_text())
    except (OSError, json.JSONDecodeError) as e:
        raise InvalidConfig(f"cannot read scenario file {src}: {e}") from None


def load_scenario(src) -> Scenario:
    """Scenario from a JSON file path or an already parsed dictionary."""
    data = _read(src)
    try:
        if "catalog" in data:
            ref = data["catalog"]
            return scenario(ref["name"], ref.get("n"), ref.get("group", "circle"))
        domain = ChartDomain.from_dict(data["domain"])
        d = domain.dimension
        fields = [_field(f, d) for f in data["fields"]]
        m = len(fields)
        c = np.asarray(data.get("structure_constants", np.zeros((m, m, m))), float)
        algebra = VectorFieldAlgebra(domain, fields, c, tuple(data.get("labels", ())))
        spec = GroupSpec.from_dict(data.get("group", {"k": m}))
        if spec.k != m:
            raise InvalidConfig("group dimension must equal the number of fields")
    except LeafspaceError:
        raise
    except (KeyError, TypeError, ValueError) as e:
        raise InvalidConfig(f"malformed scenario definition: {e}") from None
    sc = Scenario(data.get("name", "inline"), {"source": "file"}, domain, algebra, spec, "cartesian",
                  {}, dict(data.get("expected", {})), [])
    for key in ("K", "B", "grid"):
        if key in data.get("budgets", {}):
            sc.budgets[key] = data["budgets"][key]
    return sc


def load_lift(src, sc: Scenario) -> LinearLift | None:
    """The optional vertical parts of a scenario file as a linear lift."""
    data = _read(src)
    if "vertical" not in data:
        return None
    d = sc.algebra.dimension
    mats = [_matrix(rows, d) for rows in data["vertical"]]
    ranks = {r for _, r in mats}
    if len(ranks) != 1:
        raise InvalidConfig("all vertical parts must share one fiber rank")
    return LinearLift(sc.algebra, [A for A, _ in mats], ranks.pop(), label="file")
