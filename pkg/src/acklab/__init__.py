"""acklab: finite-instance machinery for approximate-common-knowledge
topologies and belief-invariant correlated equilibria.

Core objects live in `acklab.core`; the ex-ante distances in `acklab.ack`;
equilibrium LPs and outcome polytopes in `acklab.equilibrium`; the grid,
infection, quantization, and embedding constructions in
`acklab.constructions`.
"""

from .ack import AckParams, ack_distance, dfg_distance, weak_exante_distance
from .belief import bp, cp, infection_chain
from .core import (
    BaseGame,
    DecisionRule,
    FiniteInformationStructure,
    Outcome,
    induced_outcome,
    interim_beliefs,
    load_game,
    make_game,
    validate_structure,
)
from .equilibrium import (
    OutcomePolytope,
    bne_search_tiny,
    design_extremes,
    icr,
    solve_bibce,
    strategic_distance,
    value_distance,
    verify_bne,
)
from .hierarchy import compute_hierarchies, is_simple, quotient
from .metric import DistanceInterval, MetricContext, UniversalPoint

__version__ = "0.1.0"

__all__ = [
    "AckParams", "ack_distance", "dfg_distance", "weak_exante_distance",
    "bp", "cp", "infection_chain",
    "BaseGame", "DecisionRule", "FiniteInformationStructure", "Outcome",
    "induced_outcome", "interim_beliefs", "load_game", "make_game",
    "validate_structure",
    "OutcomePolytope", "bne_search_tiny", "design_extremes", "icr",
    "solve_bibce", "strategic_distance", "value_distance", "verify_bne",
    "compute_hierarchies", "is_simple", "quotient",
    "DistanceInterval", "MetricContext", "UniversalPoint",
    "__version__",
]
