"""Eigensystems of Schrodinger operators from weighted-trace minimization on
orthonormal frames, with a Schrodinger-Poisson extension."""

from .grid import (
    ExternalPotential,
    GridDomain,
    GridFunction,
    SchrodingerOperator,
    assemble_operator,
    build_domain,
    realize_potential,
)
from .weights import WeightSequence, detect_degeneracy, make_weights
from .poisson import HartreePotentialResult, PoissonError, hartree_potential, solve_poisson
from .manifold import (
    Frame,
    SkewDirection,
    block_rotate,
    identity_frame,
    random_frame,
    reorthonormalize,
    retract,
)
from .functional import (
    FunctionalValue,
    GradientReport,
    eval_j0,
    eval_j1,
    eval_total,
    riemannian_gradient,
    stationarity_residual,
)
from .solvers import (
    HomotopyError,
    HomotopySolution,
    SelfConsistentSolution,
    SolverOptions,
    extract_spectrum,
    minimize_coupled,
    minimize_linear,
    scf_homotopy_1d,
)

__version__ = "0.1.0"
