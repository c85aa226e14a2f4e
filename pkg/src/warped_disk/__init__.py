"""Harmonic and biharmonic analysis on rotationally symmetric surfaces.

Build a metric profile (closed form or integrated from curvature),
compute the radial harmonic modes phi_m and their biharmonic partners
psi_m = z phi_m in overflow-safe log space, verify them against the
metric Laplacian, classify the surface into curvature regimes, and
solve the biharmonic Dirichlet problem on geodesic disks.
"""

from .asymptotics import (
    ADMITS_NONHARMONIC_BOUNDED,
    HYPERBOLIC,
    LIOUVILLE_TO_HARMONIC,
    PARABOLIC,
    RIGID,
    UNDETERMINED,
    ClassificationReport,
    classify_biharmonic,
    classify_harmonic,
    classify_surface,
    estimate_log_derivative_limit,
    fit_tail_exponent,
    numeric_evidence,
)
from .bvp import (
    BoundaryTrace,
    FourierSpectrum,
    ModeCoefficients,
    analyze_trace,
    evaluate_solution,
    solve_disk_biharmonic,
    synthesize_trace,
    verify_disk_solution,
)
from .errors import (
    AliasingWarning,
    ConjugatePointError,
    DomainError,
    IntegrationError,
    QuadratureError,
    WarpedDiskError,
)
from .geometry import (
    CurvatureProfile,
    MetricProfile,
    RadialGrid,
    Surface,
    TailDescriptor,
    builtin_profile,
    check_origin_smoothness,
    curvature_of,
    log_derivative,
    profile_from_curvature,
)
from .modes import (
    BiharmonicMode,
    LogMode,
    biharmonic_mode,
    comparison_tail_product,
    harmonic_log_mode,
    mean_integral_ratio,
    reduction_factor,
    verify_mode_residuals,
)
from .operators import RadialFunctionSamples, radial_laplacian_apply, sturm_compare

__version__ = "0.1.0"
