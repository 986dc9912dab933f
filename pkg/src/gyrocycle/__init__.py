"""gyrocycle: finite-time thermodynamic cycles of a Brownian gyrator.

Geometry of the constant-determinant Gaussian state manifold, thermodynamic
path functionals, isoperimetric work maximization, and independent Langevin
Monte Carlo verification.
"""

__version__ = "0.1.0"

from .errors import (
    ChartViolation,
    CollapsedCycle,
    DegenerateCurve,
    GyratorError,
    InconsistentDerivatives,
    LostPositivity,
    NoCrossing,
    NonSpdInput,
    UnstableIntegration,
)
from .functionals import (
    CovariancePath,
    Cycle,
    CycleFunctionals,
    area_line_integral,
    area_quadrature,
    cycle_functionals,
    cycle_indicator,
    cycle_length,
    efficiency_bound,
    heat_decomposition_covariance,
    isoperimetric_bound_negative_curvature,
    isoperimetric_bound_rotsym,
    resample_constant_speed,
    riemannian_area_quadrature,
)
from .manifold import (
    FLAT,
    R_MIN,
    WASSERSTEIN,
    MetricTensor,
    PolarPoint,
    ThermoParams,
    bures_w2,
    control_gain,
    gaussian_curvature,
    gaussian_geodesic,
    geodesic_curvature,
    geodesic_curvatures,
    geodesic_shoot,
    fft_derivative,
    fft_upsample,
    lyapunov_operator,
    metric,
    numeric_gaussian_curvature,
    polar_from_sigma,
    sigma_from_polar,
    spectral_geodesic_curvatures,
    temperature_matrix,
    work_density,
)
from .optimizer import (
    MuSweepRecord,
    OptimizationResult,
    OptimizerConfig,
    foc_statistics,
    initial_cycle,
    objective_and_gradient,
    operating_point_for_efficiency,
    optimize_cycle,
    perturbed_initial_cycle,
    self_intersects,
    sweep_mu,
)
from .simulator import (
    ComparisonReport,
    ControlSchedule,
    EnergeticsEstimate,
    EnsembleState,
    compare_report,
    propagate_lyapunov,
    schedule_from_cycle,
    simulate_ensemble,
    static_schedule,
)

__all__ = [name for name in dir() if not name.startswith("_")]
