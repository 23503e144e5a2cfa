"""Graceful inscribed squares of star-shaped curves and equal-value tables
for scalar fields on the round sphere."""

__version__ = "0.1.0"

from .radial import (
    FitFailure,
    PositivityError,
    RadialFunction,
    StarCurve,
    curve_point,
    ellipse_radial,
    evaluate,
    fit_radial,
    random_radial,
    validate_positive,
)
from .squares import (
    DegenerateConfigurationError,
    QuadParam,
    SquareSolution,
    classify_graceful,
    quad_vertices,
    residual_jacobian,
    square_residual,
    z4_canonical,
)
from .pegs import (
    ContinuationTrace,
    DegenerateFamily,
    FoldEvent,
    GenericityFailure,
    ParityResult,
    PositivityLost,
    SolveConfig,
    SolverCoverageFailure,
    TrackingLoss,
    continue_from_ellipse,
    find_graceful_squares,
    parity,
)
from .sphere import (
    EvennessRequired,
    InjectivityRadiusExceeded,
    ScalarField,
    SpherePoint,
    TableSolution,
    TangentVector,
    antipodal_transport,
    exp_map,
    field_eval,
    frame_at,
    table_points,
)
from .tables import (
    BranchJump,
    CertificateFailure,
    FiberCurve,
    FiberParityReport,
    fiber_curve_at,
    fiber_graceful_squares,
    fiber_parity_sweep,
    find_tables_direct,
    find_tables_via_center,
    table_residual,
)
