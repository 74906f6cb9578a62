"""Gravity-capillary energy, its regularized variant, curvature, and the
first variation with natural boundary residuals.

Sign conventions. The boundary energy term is -gamma_jump*(rho_lo + rho_hi),
so stationarity forces

    (sigma rho'/sqrt(rho^2+rho'^2) + eps rho')(theta_hi) = +gamma_jump
    (sigma rho'/sqrt(rho^2+rho'^2) + eps rho')(theta_lo) = -gamma_jump

and the reported equilibrium contact angle theta_eq (measured so that
cos(theta_eq) = -gamma_jump/sigma) is the supplement of the opening angle
through the fluid.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateProfileError, InvalidGridError
from .geometry import (
    AngularGrid,
    SurfaceProfile,
    derivative_transpose,
    derivative_values,
    integrate,
    second_derivative_values,
)

__all__ = [
    "PhysicalParams",
    "VariationReport",
    "volume_functional",
    "energy",
    "energy_eps",
    "curvature",
    "first_variation",
    "lagrange_multiplier",
    "energy_lower_bound",
    "discrete_gradient",
]


@dataclass(frozen=True)
class PhysicalParams:
    """Physical parameters of the droplet problem.

    gamma_jump is the wetting-energy jump (solid-vapor minus solid-fluid
    line energy); kappa is the linearized contact-point mobility W'(0) > 0.
    volume is the conserved value of the integral of rho^2 d(theta).
    """

    g: float
    sigma: float
    gamma_jump: float
    volume: float
    theta1: float = 0.0
    theta2: float = 0.0
    kappa: float = 1.0

    def __post_init__(self):
        if self.sigma <= 0.0:
            raise ValueError("sigma must be positive")
        if self.g < 0.0:
            raise ValueError("g must be nonnegative")
        if self.volume <= 0.0:
            raise ValueError("volume must be positive")
        if abs(self.gamma_jump) >= self.sigma:
            raise ValueError("|gamma_jump| must be < sigma (Young admissibility)")
        for name in ("theta1", "theta2"):
            v = getattr(self, name)
            if not (0.0 <= v < np.pi / 2.0):
                raise ValueError(f"{name} must lie in [0, pi/2)")
        if self.theta1 + self.theta2 >= np.pi:
            raise ValueError("theta1 + theta2 must be < pi")
        if self.kappa <= 0.0:
            raise ValueError("kappa must be positive")

    @property
    def theta_lo(self) -> float:
        return self.theta2

    @property
    def theta_hi(self) -> float:
        return float(np.pi - self.theta1)

    def grid(self, n_cells: int) -> AngularGrid:
        return AngularGrid.make(self.theta_lo, self.theta_hi, n_cells)

    @property
    def young_angle(self) -> float:
        """Equilibrium contact angle: cos(theta_eq) = -gamma_jump/sigma."""
        return float(np.arccos(-self.gamma_jump / self.sigma))


@dataclass(frozen=True)
class VariationReport:
    """First variation of the regularized energy at a profile.

    interior_gradient is the pointwise Euler-Lagrange field
    g rho^2 sin - sigma d/dtheta(rho'/sqrt) + sigma rho/sqrt - eps rho'' - P rho,
    with P the integral-identity multiplier. boundary_residual_* are the
    natural-boundary-condition defects at the two contact points.
    """

    interior_gradient: np.ndarray = field(repr=False)
    boundary_residual_lo: float
    boundary_residual_hi: float
    multiplier: float


def volume_functional(profile: SurfaceProfile) -> float:
    """Constrained quantity: integral of rho^2 (twice the enclosed area)."""
    return integrate(profile.grid, profile.rho ** 2)


def _arc_terms(profile: SurfaceProfile):
    rho = profile.rho
    rp = profile.derivative()
    return rho, rp, np.sqrt(rho ** 2 + rp ** 2)


def energy(profile: SurfaceProfile, params: PhysicalParams) -> float:
    """Gravity-capillary energy of a profile."""
    rho, _, root = _arc_terms(profile)
    grid = profile.grid
    grav = params.g / 3.0 * integrate(grid, rho ** 3 * np.sin(grid.nodes))
    surf = params.sigma * integrate(grid, root)
    wet = params.gamma_jump * (rho[0] + rho[-1])
    return grav + surf - wet


def energy_eps(profile: SurfaceProfile, params: PhysicalParams, eps: float) -> float:
    """Energy plus the (eps/2) * integral of rho'^2 regularization."""
    if eps == 0.0:
        return energy(profile, params)
    rp = profile.derivative()
    return energy(profile, params) + 0.5 * eps * integrate(profile.grid, rp ** 2)


def curvature(profile: SurfaceProfile) -> np.ndarray:
    """Mean curvature of the polar graph r = rho(theta):
    (2 rho'^2 - rho rho'' + rho^2) / (rho^2 + rho'^2)^(3/2)."""
    if len(profile.rho) < 5:
        raise InvalidGridError("curvature needs at least 5 nodes")
    rho, rp, root = _arc_terms(profile)
    rpp = profile.second_derivative()
    return (2.0 * rp ** 2 - rho * rpp + rho ** 2) / root ** 3


def lagrange_multiplier(profile: SurfaceProfile, params: PhysicalParams, eps: float = 0.0) -> float:
    """Capillary pressure from the integral identity obtained by pairing the
    Euler-Lagrange equation with rho.

    Exact at stationary profiles; a projection estimate otherwise.
    """
    grid = profile.grid
    rho, rp, root = _arc_terms(profile)
    vol = volume_functional(profile)
    if vol <= 1e-300:
        raise DegenerateProfileError("profile encloses no volume")
    num = (
        params.g * integrate(grid, rho ** 3 * np.sin(grid.nodes))
        + params.sigma * integrate(grid, root)
        + eps * integrate(grid, rp ** 2)
        - params.gamma_jump * (rho[0] + rho[-1])
    )
    return num / vol


def interior_gradient_raw(profile: SurfaceProfile, params: PhysicalParams, eps: float) -> np.ndarray:
    """Pointwise Euler-Lagrange field without the multiplier term."""
    grid = profile.grid
    rho, rp, root = _arc_terms(profile)
    flux = derivative_values(grid, rp / root)
    out = params.g * rho ** 2 * np.sin(grid.nodes) + params.sigma * (rho / root - flux)
    if eps != 0.0:
        out -= eps * second_derivative_values(grid, rho)
    return out


def boundary_residuals(profile: SurfaceProfile, params: PhysicalParams, eps: float = 0.0):
    """Natural boundary-condition defects (lower, upper):
    lower: (sigma rho'/sqrt + eps rho') + gamma_jump
    upper: (sigma rho'/sqrt + eps rho') - gamma_jump."""
    rho, rp, root = _arc_terms(profile)
    flux = params.sigma * rp / root + eps * rp
    return flux[0] + params.gamma_jump, flux[-1] - params.gamma_jump


def first_variation(profile: SurfaceProfile, params: PhysicalParams, eps: float = 0.0) -> VariationReport:
    """Pointwise first variation and boundary residuals at a profile."""
    p = lagrange_multiplier(profile, params, eps)
    interior = interior_gradient_raw(profile, params, eps) - p * profile.rho
    b_lo, b_hi = boundary_residuals(profile, params, eps)
    return VariationReport(interior, b_lo, b_hi, p)


def discrete_gradient(profile: SurfaceProfile, params: PhysicalParams, eps: float = 0.0) -> np.ndarray:
    """Exact gradient vector of the discrete (quadrature) energy.

    Satisfies energy_eps(rho + t h) - energy_eps(rho - t h) = 2 t g.h + O(t^3)
    to machine precision, which the pointwise form cannot do because the
    derivative stencil and the quadrature rule do not commute exactly.
    """
    grid = profile.grid
    w = grid.weights
    rho, rp, root = _arc_terms(profile)
    g = w * (params.g * rho ** 2 * np.sin(grid.nodes) + params.sigma * rho / root)
    g += derivative_transpose(grid, w * (params.sigma * rp / root + eps * rp))
    g[0] -= params.gamma_jump
    g[-1] -= params.gamma_jump
    return g


def energy_lower_bound(params: PhysicalParams) -> float:
    """Universal lower bound -2 sigma sqrt(V / (pi - theta1 - theta2))."""
    span = params.theta_hi - params.theta_lo
    return -2.0 * params.sigma * float(np.sqrt(params.volume / span))


# --- cell-based (staggered) discretization -------------------------------
#
# The nodal quadrature energy above is the reporting functional, but it is
# blind to grid-scale oscillation (wide centered stencils annihilate the
# checkerboard), so its unconstrained discrete minimizers are spurious.
# The optimizer therefore descends this cell-midpoint functional, which is
# coercive on all modes and consistent with the same continuum energy at
# O(h^2). Every term shares the same smooth cell weights, so its gradient
# carries no quadrature-weight oscillation into the minimizer.


def _cell_terms(profile: SurfaceProfile):
    grid = profile.grid
    rho = profile.rho
    h = grid.spacing
    mid = 0.5 * (rho[:-1] + rho[1:])
    slope = (rho[1:] - rho[:-1]) / h
    theta_mid = 0.5 * (grid.nodes[:-1] + grid.nodes[1:])
    return mid, slope, theta_mid, h


def cell_energy(profile: SurfaceProfile, params: PhysicalParams, eps: float = 0.0) -> float:
    mid, slope, tm, h = _cell_terms(profile)
    root = np.sqrt(mid ** 2 + slope ** 2)
    total = h * np.sum(
        params.g / 3.0 * mid ** 3 * np.sin(tm) + params.sigma * root + 0.5 * eps * slope ** 2
    )
    return total - params.gamma_jump * (profile.rho[0] + profile.rho[-1])


def cell_volume(profile: SurfaceProfile) -> float:
    mid, _, _, h = _cell_terms(profile)
    return float(h * np.sum(mid ** 2))


def cell_gradient(profile: SurfaceProfile, params: PhysicalParams, eps: float = 0.0) -> np.ndarray:
    mid, slope, tm, h = _cell_terms(profile)
    root = np.sqrt(mid ** 2 + slope ** 2)
    e_r = params.g * mid ** 2 * np.sin(tm) + params.sigma * mid / root
    e_s = params.sigma * slope / root + eps * slope
    g = np.zeros_like(profile.rho)
    g[:-1] += 0.5 * h * e_r - e_s
    g[1:] += 0.5 * h * e_r + e_s
    g[0] -= params.gamma_jump
    g[-1] -= params.gamma_jump
    return g


def cell_volume_gradient(profile: SurfaceProfile) -> np.ndarray:
    mid, _, _, h = _cell_terms(profile)
    g = np.zeros_like(profile.rho)
    g[:-1] += h * mid
    g[1:] += h * mid
    return g


def cell_lumped_weights(grid: AngularGrid) -> np.ndarray:
    """Per-node length weights of the cell discretization (trapezoid)."""
    h = grid.spacing
    w = np.full(len(grid.nodes), h)
    w[0] = w[-1] = 0.5 * h
    return w


def cell_hessian(profile: SurfaceProfile, params: PhysicalParams, eps: float = 0.0) -> np.ndarray:
    mid, slope, tm, h = _cell_terms(profile)
    root = np.sqrt(mid ** 2 + slope ** 2)
    e_rr = 2.0 * params.g * mid * np.sin(tm) + params.sigma * slope ** 2 / root ** 3
    e_ss = params.sigma * mid ** 2 / root ** 3 + eps
    e_rs = -params.sigma * mid * slope / root ** 3
    n = len(profile.rho)
    out = np.zeros((n, n))
    idx = np.arange(n - 1)
    quarter = 0.25 * h * e_rr
    stiff = e_ss / h
    np.add.at(out, (idx, idx), quarter + stiff - e_rs)
    np.add.at(out, (idx + 1, idx + 1), quarter + stiff + e_rs)
    np.add.at(out, (idx, idx + 1), quarter - stiff)
    np.add.at(out, (idx + 1, idx), quarter - stiff)
    return out


def cell_volume_hessian(grid: AngularGrid) -> np.ndarray:
    n = len(grid.nodes)
    h = grid.spacing
    out = np.zeros((n, n))
    idx = np.arange(n - 1)
    np.add.at(out, (idx, idx), 0.5 * h)
    np.add.at(out, (idx + 1, idx + 1), 0.5 * h)
    np.add.at(out, (idx, idx + 1), 0.5 * h)
    np.add.at(out, (idx + 1, idx), 0.5 * h)
    return out


def _dense_derivative_matrix(grid: AngularGrid) -> np.ndarray:
    """Dense matrix realization of derivative_values (same stencils)."""
    n = len(grid.nodes)
    h = grid.spacing
    d = np.zeros((n, n))
    idx = np.arange(1, n - 1)
    d[idx, idx + 1] = 1.0 / (2.0 * h)
    d[idx, idx - 1] = -1.0 / (2.0 * h)
    from .geometry import _EDGE1

    for k, c in enumerate(_EDGE1):
        d[0, k] = c / h
        d[-1, -1 - k] = -c / h
    return d


def discrete_hessian(profile: SurfaceProfile, params: PhysicalParams, eps: float = 0.0) -> np.ndarray:
    """Exact dense Hessian of the discrete (quadrature) energy."""
    grid = profile.grid
    w = grid.weights
    rho, rp, root = _arc_terms(profile)
    e_rr = 2.0 * params.g * rho * np.sin(grid.nodes) + params.sigma * rp ** 2 / root ** 3
    e_ss = params.sigma * rho ** 2 / root ** 3 + eps
    e_rs = -params.sigma * rho * rp / root ** 3
    d = _dense_derivative_matrix(grid)
    hess = np.diag(w * e_rr)
    hess += d.T @ (d * (w * e_ss)[:, None])
    cross = d * (w * e_rs)[:, None]
    hess += cross.T + cross
    return hess
