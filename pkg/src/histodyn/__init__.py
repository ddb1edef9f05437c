"""histodyn: covariant Hamiltonian dynamics on a discretised evolution domain.

The package treats time dynamics and field theories uniformly. Fields and
their conjugate momenta are differential forms on an n-dimensional domain;
the evolution equations are the covariant pair dC = dH/dP, dP = -dH/dC,
derived symbolically from a model Hamiltonian or Lagrangian and integrated
with structure-preserving staggered schemes.
"""

from .grid import DomainGrid, Region, euclidean, minkowski
from .forms import (
    Form,
    boundary_integral,
    centered_derivative,
    exterior_derivative,
    hodge_star,
    integrate_region,
    interior_product,
    wedge,
)
from .multiindex import epsilon_sign
from .history import HamiltonianHistory, random_history
from .model import ModelSpec, Potential
from .expr import evaluate, infer_grade
from .calculus import (
    partial_wrt_C,
    partial_wrt_dC,
    partial_wrt_P,
    variation_oracle,
    vertical_derivative,
)
from .dynamics import (
    FieldEquations,
    action_stationarity_check,
    bracket,
    euler_lagrange,
    hamilton_equations,
    conjugate_momentum,
    legendre_transform,
    onshell_residual,
)
from .integrators import SimConfig, SimState, assemble_history, run_simulation
from .diagnostics import (
    ConservationReport,
    LinearizedSolution,
    Symmetry,
    hypersurface_independence,
    linearize,
    noether_current,
    symplectic_pairing,
)
from .modelfile import parse_model, print_expr, print_model

__all__ = [
    "DomainGrid",
    "Region",
    "Form",
    "euclidean",
    "minkowski",
    "wedge",
    "exterior_derivative",
    "centered_derivative",
    "hodge_star",
    "interior_product",
    "integrate_region",
    "boundary_integral",
    "epsilon_sign",
    "HamiltonianHistory",
    "random_history",
    "ModelSpec",
    "Potential",
    "evaluate",
    "infer_grade",
    "partial_wrt_C",
    "partial_wrt_P",
    "partial_wrt_dC",
    "variation_oracle",
    "vertical_derivative",
    "FieldEquations",
    "conjugate_momentum",
    "legendre_transform",
    "euler_lagrange",
    "hamilton_equations",
    "onshell_residual",
    "bracket",
    "action_stationarity_check",
    "SimConfig",
    "SimState",
    "run_simulation",
    "assemble_history",
    "LinearizedSolution",
    "ConservationReport",
    "Symmetry",
    "linearize",
    "symplectic_pairing",
    "hypersurface_independence",
    "noether_current",
    "parse_model",
    "print_model",
    "print_expr",
]

__version__ = "0.1.0"
