"""solarpen: penalized estimation with segment-and-ray penalties.

Build a penalty from unit directions and intervals, solve the penalized
least-squares problem once by dual coordinate descent, identify the
reflection group the base generates, and recover any group-invariant
exponential-family-style estimator from the same fit by a coordinate-wise
conjugate-gradient map.
"""

from .penalty import (
    ExtInterval,
    PenaltySpec,
    SolarBase,
    build_penalty,
    chain_edges,
    sum_penalties,
    support_function,
)
from .groups import (
    GroupReport,
    GroupStructure,
    MajorizationVerdict,
    Reflection,
    generate_group,
    majorizes,
    orbit,
    orbit_support,
    reflect,
)
from .dual import (
    DualState,
    MinNormResult,
    SolveOptions,
    coordinate_update,
    solve_min_norm,
)
from .fast import TautTube, pava, soft_threshold, taut_string, tube_check
from .families import (
    BoundarySolution,
    FitReport,
    GeneratorFamily,
    InvarianceError,
    InvarianceTag,
    check_invariance,
    fit,
    get_family,
    oracle_solve,
    reduce,
)
from .oracle import (
    SimplexLSProblem,
    gminimal_sample_check,
    lemma_suite,
    simplex_least_squares,
)

__version__ = "0.1.0"

__all__ = [
    "ExtInterval", "PenaltySpec", "SolarBase", "build_penalty", "chain_edges",
    "sum_penalties", "support_function",
    "GroupReport", "GroupStructure", "MajorizationVerdict", "Reflection",
    "generate_group", "majorizes", "orbit", "orbit_support", "reflect",
    "DualState", "MinNormResult", "SolveOptions", "coordinate_update", "solve_min_norm",
    "TautTube", "pava", "soft_threshold", "taut_string", "tube_check",
    "BoundarySolution", "FitReport", "GeneratorFamily", "InvarianceError",
    "InvarianceTag", "check_invariance", "fit", "get_family", "oracle_solve", "reduce",
    "SimplexLSProblem", "gminimal_sample_check", "lemma_suite", "simplex_least_squares",
]
