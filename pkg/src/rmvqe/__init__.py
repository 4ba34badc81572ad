"""Variational solution of inner-region R-matrix scattering problems on a simulated qubit register."""

from .ansatz import RegisterLayout, build_ansatz, build_cascade, clebsch_gordan_angle
from .errors import (
    ConfigError,
    ConvergenceError,
    DimensionError,
    DomainError,
    InputError,
    LayoutError,
    ParameterError,
    ParseError,
    PoleError,
    RMVQEError,
)
from .fermion import jordan_wigner, parse_fcidump, qubit_hamiltonian
from .pauli import PauliString, PauliSum
from .rmatrix import ScatteringSolution, r_matrix
from .solver import OptimiserConfig, VariationalProblem, solve, subspace_optimise, sum_of_variances_optimise

__version__ = "0.1.0"
