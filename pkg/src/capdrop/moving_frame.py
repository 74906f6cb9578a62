"""Moving polar frame: locate the pole that makes the perturbation of a
droplet curve orthogonal to the translation kernel, and evaluate the
pole-velocity formula."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize_scalar

from .errors import DegenerateFrameError, RecentreDomainError
from .geometry import CartesianCurve, SurfaceProfile, from_cartesian, integrate
from .spectral import shift_function

__all__ = ["MovingFrameState", "recentre", "lambda_factor", "pole_velocity"]


@dataclass(frozen=True)
class MovingFrameState:
    """Droplet surface re-expressed about the least-squares pole.

    lam is the normalisation factor 1 / integral(xi_s * xi3); ortho_residual
    is the kernel-orthogonality defect integral(xi * xi_s) at the minimizing
    pole. scan_minima lists the coarse-scan local minimizers inspected before
    polishing (non-uniqueness diagnostic).
    """

    pole_x: float
    profile_in_frame: SurfaceProfile
    perturbation: np.ndarray = field(repr=False)
    lam: float = float("nan")
    xi3: np.ndarray = field(repr=False, default=None)
    ortho_residual: float = float("nan")
    scan_minima: tuple = ()

    @property
    def l2_perturbation(self) -> float:
        grid = self.profile_in_frame.grid
        return float(np.sqrt(integrate(grid, self.perturbation ** 2)))


def _xi3_of(profile: SurfaceProfile) -> np.ndarray:
    """Frame-shift direction of an arbitrary profile: cos + (rho'/rho) sin."""
    th = profile.grid.nodes
    return np.cos(th) + profile.derivative() / profile.rho * np.sin(th)


def recentre(
    curve: CartesianCurve,
    rho0: SurfaceProfile,
    ortho_tol: float = 1e-6,
    scan_points: int = 41,
    bracket: tuple | None = None,
) -> MovingFrameState:
    """Minimize the L2 distance between the equilibrium and the curve
    resampled about a candidate pole; returns the frame at the minimizer.

    The 1-D search is a coarse scan (recording every local minimum) followed
    by bounded Brent polishing of the best candidate. The curve must be
    star-shaped about every pole the search evaluates.
    """
    grid = rho0.grid
    x1, x2 = float(curve.x[-1]), float(curve.x[0])
    if x1 > x2:
        x1, x2 = x2, x1
    margin = 0.02 * (x2 - x1)
    lo, hi = x1 + margin, x2 - margin
    if bracket is not None:
        lo, hi = max(lo, bracket[0]), min(hi, bracket[1])
    if not lo < hi:
        raise RecentreDomainError("contact points leave no admissible pole interval")

    def objective(c):
        prof = from_cartesian(curve, c, grid)
        return integrate(grid, (rho0.rho - prof.rho) ** 2)

    cs = np.linspace(lo, hi, scan_points)
    vals = np.array([objective(c) for c in cs])
    interior = (vals[1:-1] <= vals[:-2]) & (vals[1:-1] <= vals[2:])
    scan_minima = tuple(float(c) for c in cs[1:-1][interior])
    best = int(np.argmin(vals))
    if best == 0 or best == len(cs) - 1:
        raise RecentreDomainError("recentring objective has no interior minimizer")

    res = minimize_scalar(
        objective,
        bounds=(cs[best - 1], cs[best + 1]),
        method="bounded",
        options={"xatol": 1e-10},
    )
    pole = float(res.x)
    prof = from_cartesian(curve, pole, grid)
    xi = prof.rho - rho0.rho
    xis = shift_function(rho0)
    xi3 = _xi3_of(prof)
    denom = integrate(grid, xis * xi3)
    lam = 1.0 / denom if abs(denom) > 1e-8 else float("nan")
    return MovingFrameState(
        pole_x=pole,
        profile_in_frame=prof,
        perturbation=xi,
        lam=lam,
        xi3=xi3,
        ortho_residual=float(integrate(grid, xi * xis)),
        scan_minima=scan_minima,
    )


def lambda_factor(state: MovingFrameState, rho0: SurfaceProfile) -> float:
    """Pole-velocity normalisation 1 / integral(xi_s * xi3); errors out when
    the perturbation is too large for the frame to be invertible."""
    grid = rho0.grid
    denom = integrate(grid, shift_function(rho0) * state.xi3)
    if abs(denom) < 1e-8:
        raise DegenerateFrameError(
            f"frame normalisation integral {denom:.3e} below 1e-8"
        )
    return 1.0 / denom


def pole_velocity(state: MovingFrameState, rho0: SurfaceProfile, normal_speed) -> float:
    """Pole velocity lambda * integral(normal_speed * xi_s), where
    normal_speed is the static-frame kinematic rate (1/rho) u.N."""
    grid = rho0.grid
    ns = grid.require_field(np.asarray(normal_speed, dtype=float))
    return lambda_factor(state, rho0) * integrate(grid, ns * shift_function(rho0))
