"""Toric-locus membership and complex-balanced equilibria for mass-action networks."""

from .equilibrium import (
    BirchOptions,
    BirchResult,
    InitialConditionMap,
    LogEquilibrium,
    birch_solve,
    equilibrium_from_initial,
    equilibrium_from_rates,
    smooth_dependence_probe,
    solve_log_equilibrium,
)
from .errors import (
    DegenerateBasis,
    MaxIterations,
    NonPositiveState,
    NotInToricLocus,
    NotWeaklyReversible,
    ParseError,
    SingularSystem,
    StepSizeUnderflow,
    StructureError,
    ToricNetError,
    UnbalancedFlux,
)
from .kirchhoff import kirchhoff_matrix, toric_membership, tree_constants
from .netmodel import (
    EGraph,
    StoichDecomp,
    connected_components,
    is_weakly_reversible,
    load_network,
    parse_network,
    stoich_decomp,
)

__version__ = "0.1.0"
