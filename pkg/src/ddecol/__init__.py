"""Periodic solutions of coupled renewal/delay-differential systems by
piecewise orthogonal collocation, with pseudo-arclength-free natural-parameter
continuation and convergence-order analysis tooling."""

from .analysis import (
    ConvergenceTable,
    StudyRow,
    convergence_study,
    default_m_rule,
    error_norm,
    estimate_order,
    reference_solution,
    restrict_reference,
)
from .collocation import (
    DiscreteSolution,
    assemble_jacobian,
    assemble_residual,
    eval_periodic,
    make_layout,
    pack,
    solution_from_values,
    unpack,
)
from .errors import (
    ConfigError,
    DdecolError,
    DelayExceedsPeriodError,
    DomainError,
    InsufficientDataError,
    NewtonNoConvergenceError,
    NonFiniteResidualError,
    NoPeriodicSolutionError,
    SingularJacobianError,
)
from .meshing import (
    AbscissaeKind,
    AbscissaeSet,
    CollocationGrid,
    PiecewisePolynomial,
    build_grid,
    eval_piecewise,
    make_abscissae,
    restrict_function,
)
from .problem import (
    AnchorPhase,
    CoupledSystem,
    IntegralPhase,
    QuadratureSpec,
    StateAccessor,
    accessor_from_functions,
    accessor_from_solution,
    kernel_integral,
    phase_residual,
)
from .models import (
    DAPHNIA_HOPF_BETA,
    DAPHNIA_HOPF_PERIOD,
    DaphniaParams,
    ExactSolution,
    PlantParams,
    daphnia_ansatz,
    daphnia_characteristic,
    daphnia_equilibrium,
    daphnia_model,
    find_v0,
    plant_equilibrium,
    plant_initial_guess,
    plant_model,
    quadratic_amplitude,
    quadratic_exact,
    quadratic_example,
    quadratic_sigma,
    simulate_plant,
)
from .quadrature import QuadratureKind, QuadratureRule, integrate, make_rule
from .solver import (
    Branch,
    BranchPoint,
    ContinuationOptions,
    NewtonDiagnostics,
    NewtonOptions,
    continue_branch,
    newton_solve,
)

__version__ = "0.1.0"
