"""Numerical leaf spaces of infinitesimal Lie algebra actions with incomplete flows."""

from .action import VectorFieldAlgebra, bracket_defect, evaluate, flow, jacobi_residual, transport
from .bundle import LinearLift, lift_path_on_bundle, projectability_check, tangent_lift
from .catalog import Scenario, oracle_compare, polar, scenario, to_polar
from .completion import (
    build_atlas, generate_families, hausdorff_check, limit_elements, orbifold_check, orbit_space, z_quotient_check,
)
from .domains import AnnularWedge, Box, ChartDomain, Disc, HalfSpace, Slit, whole_space
from .errors import LeafspaceError
from .group import GroupPath, GroupSpec, project
from .lift import HolonomyWord, holonomy_transform, leaf_range, lift_path
from .properness import (
    MetricField, average_metric, build_slice, isotropy_compactness, killing_defect, proper_check,
    recapture_families,
)
from .recurrence import (
    identity_check, intersection_set, philox, recurrence_partition, recurrence_sets, uniformity_check,
)
from .scenario_file import load_scenario

__version__ = "0.1.0"
