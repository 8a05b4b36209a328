"""Heat kernels and Keller-Segel chemotaxis dynamics on compact metric graphs."""

__version__ = "0.1.0"

from .errors import (
    BoundViolated,
    ConvergenceFailure,
    DisconnectedGraph,
    GraphKSError,
    MeshMismatch,
    MeshTooCoarse,
    NonpositiveLength,
    NonpositiveTime,
    ParseError,
    PathBudgetExceeded,
    QuadratureUnderResolved,
    SolveFailure,
    StepUnstable,
    TimeOutOfRange,
    UnknownEdge,
)
from .graph import (
    DirectedEdge,
    Edge,
    EdgePoint,
    MetricGraph,
    Path,
    build_graph,
    interval_graph,
    load_graph,
    star_graph,
)
from .grid import GridFunction, Mesh
from .kernel import (
    HeatKernelPlan,
    apply_heat,
    apply_heat_dx,
    build_plan,
    eval_kernel,
    eval_kernel_dy,
    gaussian_kernel,
    truncation_radius,
)
from .laplacian import (
    DiscreteLaplacian,
    SpectralDecomposition,
    apply_fractional_power,
    assemble,
    eigendecompose,
    resolvent_solve,
    spectral_heat,
)
from .solver import (
    LogisticPreset,
    Nonlinearity,
    SolverConfig,
    SolveResult,
    detect_blowup,
    duhamel_phi,
    duhamel_psi,
    duhamel_theta,
    frozen_coefficients,
    minimal_model,
    solve_linear_nonautonomous,
    solve_mild,
    solve_reference,
)
from .diagnostics import (
    NormFitResult,
    OdeBound,
    check_logistic_bounds,
    fit_operator_norm,
    l1_ode_bound,
    lp_norm,
    w1p_norm,
)
