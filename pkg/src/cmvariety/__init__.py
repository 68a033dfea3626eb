"""Numerical toolkit for a four-punctured-sphere character variety carrying a
relativistic Calogero-Moser type system: chart map and inversion, membership
certificates, the duality involution, closed-form flows and two independent
Poisson brackets."""

from .chart import AltForm, ChartPoint, VarietyPoint, build_matrices, canonical_point, upsilon
from .duality import dual_alt, dual_point, second_chart_coords
from .dynamics import flow, flow_H, flow_h, pg_check, trajectory
from .params import ParamSet, char_dim, dual_params, eigendata, quiver_data, random_params
from .poisson import anti_poisson_check, bracket_chart, bracket_fr, compare_brackets
from .sampling import make_rng, random_chart_point, random_setup, trial_rng
from .variety import invert_chart, verify_membership, x_spectrum

__all__ = [
    "AltForm",
    "ChartPoint",
    "ParamSet",
    "VarietyPoint",
    "anti_poisson_check",
    "bracket_chart",
    "bracket_fr",
    "build_matrices",
    "canonical_point",
    "char_dim",
    "compare_brackets",
    "dual_alt",
    "dual_params",
    "dual_point",
    "eigendata",
    "flow",
    "flow_H",
    "flow_h",
    "invert_chart",
    "make_rng",
    "pg_check",
    "quiver_data",
    "random_chart_point",
    "random_params",
    "random_setup",
    "second_chart_coords",
    "trajectory",
    "trial_rng",
    "upsilon",
    "verify_membership",
    "x_spectrum",
]
