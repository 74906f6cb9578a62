"""capdrop: equilibrium shapes, stability spectra, and relaxation dynamics
of two-dimensional sessile capillary droplets."""

from .energy import (
    PhysicalParams,
    VariationReport,
    curvature,
    discrete_gradient,
    energy,
    energy_eps,
    energy_lower_bound,
    first_variation,
    lagrange_multiplier,
    volume_functional,
)
from .equilibrium import (
    ContinuationReport,
    EquilibriumSolution,
    circular_cap,
    continuation,
    flat_cap,
    minimize_eps,
    rescale_to_volume,
    shoot_symmetric,
    verify_symmetry,
)
from .geometry import (
    AngularGrid,
    CartesianCurve,
    SurfaceProfile,
    derivative,
    from_cartesian,
    integrate,
    profile_from_csv,
    profile_to_csv,
    to_cartesian,
)
from .moving_frame import MovingFrameState, lambda_factor, pole_velocity, recentre
from .relax import RelaxationTrace, run, step
from .spectral import (
    KernelConstruction,
    SigmaForm,
    SpectralDecomposition,
    a_coefficients,
    build_Q,
    build_xi56,
    constrained_eigen,
    functional_calculus,
    kernel_ode_residual,
    second_variation,
    shift_function,
    sigma_form,
    spectral_truncation,
)

__version__ = "0.1.0"
