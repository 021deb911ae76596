"""Simulation toolkit for the configuration model in its critical window.

Builds the random multigraph from a degree sequence, explores components via
a depth-first walk, percolates across the critical window with coupled
constructions, simulates the multiplicative coalescent, and samples the
Brownian-excursion scaling limit for statistical comparison.
"""

from critcm.degrees import (
    DegreeSequence,
    DegreeStats,
    ProbabilityVector,
    sample_iid,
    stats,
    tune_to_critical,
)
from critcm.multigraph import (
    ComponentSummary,
    ComponentVector,
    HalfEdgeGraph,
    components,
    to_component_vector,
    uniform_match,
)
from critcm.exploration import (
    ExplorationTrace,
    HittingTimes,
    degree_discovery_counts,
    explore,
    hitting_times,
    replay,
    surplus_per_component,
)
from critcm.percolation import (
    CouplingGrid,
    ExplodedSequence,
    PercolationParams,
    coupled_grid,
    explode,
    p_critical,
    percolate_direct,
    percolate_via_explosion,
)
from critcm.dynamic import (
    DynamicResult,
    ModifiedResult,
    PoolSnapshot,
    run_dynamic,
    run_modified,
    t_map,
)
from critcm.coalescent import CoalescentState, simulate, subgraph_couple
from critcm.limit import (
    ExcursionSample,
    LimitParams,
    extract_excursions,
    limit_params,
    mark_excursions,
    percolation_limit_params,
    sample_limit_vector,
    sample_reflected,
)

__version__ = "0.1.0"
