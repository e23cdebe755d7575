"""rotorwalk: a simulation laboratory for rotor-router walks on
Galton-Watson trees with random initial rotor configurations."""

from .gw_tree import (
    ROOT,
    SINK,
    Node,
    OffspringDistribution,
    TreeArena,
    UsageError,
    ValidationError,
    new_tree,
)
from .rotor_config import (
    Classification,
    GoodChildrenLaw,
    RotorMatrix,
    classify,
    good_children,
    good_children_law,
    make_arena,
    parse_number,
    sample_rotor,
)
from .rotor_walk import (
    STEP_BUDGET,
    AdaptiveResult,
    EscapeStats,
    LegalOutcome,
    WalkKind,
    WalkOutcome,
    adaptive_escape_count,
    escape_count,
    rle_decode,
    rle_encode,
    run_legal_sequence,
    run_walk,
    step,
)
from .frontier import (
    FrontierState,
    build_frontier,
    complete_sink,
    extend_frontier,
    frontier_step,
    new_frontier_state,
    path_boundary_ratio,
)
from .srw_gamma import (
    DiscretizedCDF,
    FixedPointResult,
    GammaBounds,
    HittingSolution,
    apply_cdf_operator,
    cdf_fixed_point,
    gamma_bounds,
    gamma_regular,
    k_closed_form,
    k_constant,
    solve_hitting,
)

__version__ = "0.1.0"
