"""Approximate abstractions of interconnected linear control systems.

Build reduced-order abstractions of linear subsystems together with
quadratic deviation functions and interface maps, certify an
interconnection of such abstractions through a small-gain condition,
and validate the resulting trajectory bounds by co-simulation.
"""

from .abstraction import (
    AbstractionResult,
    ComparisonGains,
    PConditionReport,
    QuadraticSimFn,
    RelationReport,
    build_abstraction,
    check_P_conditions,
    check_relation,
    decay_certificate,
    graph_subspace,
    interface,
    simfn_from_relation,
)
from .compose import (
    ComposedSimFn,
    GainMatrices,
    OmegaPath,
    SmallGainError,
    compose_abstractions,
    compose_simfn,
    gain_matrices,
    small_gain,
)
from .geometry import Subspace, image, kernel, minimal_invariant
from .linalg import NumericsError, rel_tol
from .simulate import (
    BoundReport,
    RefinementRun,
    Signal,
    Trajectory,
    bound_report,
    integrate,
    refine_and_run,
    scalar_bound,
    vector_bound,
)
from .systems import (
    Interconnection,
    InternalChannel,
    LinearSystem,
    MonolithicSystem,
    build_monolithic,
)

__version__ = "0.1.0"

__all__ = [
    "AbstractionResult",
    "BoundReport",
    "ComparisonGains",
    "ComposedSimFn",
    "GainMatrices",
    "Interconnection",
    "InternalChannel",
    "LinearSystem",
    "MonolithicSystem",
    "NumericsError",
    "OmegaPath",
    "PConditionReport",
    "QuadraticSimFn",
    "RefinementRun",
    "RelationReport",
    "Signal",
    "SmallGainError",
    "Subspace",
    "Trajectory",
    "bound_report",
    "build_abstraction",
    "build_monolithic",
    "check_P_conditions",
    "check_relation",
    "compose_abstractions",
    "compose_simfn",
    "decay_certificate",
    "gain_matrices",
    "graph_subspace",
    "image",
    "integrate",
    "interface",
    "kernel",
    "minimal_invariant",
    "refine_and_run",
    "rel_tol",
    "scalar_bound",
    "simfn_from_relation",
    "small_gain",
    "vector_bound",
    "__version__",
]
