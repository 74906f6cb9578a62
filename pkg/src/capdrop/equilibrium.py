"""Equilibrium profiles: regularized constrained minimization with
eps-continuation, an independent apex-shooting solver for the sessile case,
and symmetry verification.

The two solvers are deliberately independent so they can cross-validate:
the minimizer descends the discrete energy on the fixed-volume manifold,
while the shooting solver integrates the Euler-Lagrange ODE from the apex
and root-finds on (apex radius, pressure).
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import solve_ivp

from .energy import (
    PhysicalParams,
    boundary_residuals,
    cell_energy,
    cell_gradient,
    cell_hessian,
    cell_lumped_weights,
    cell_volume,
    cell_volume_gradient,
    cell_volume_hessian,
    energy_eps,
    first_variation,
    lagrange_multiplier,
    volume_functional,
)
from .errors import ConvergenceError, ShootingError
from .geometry import AngularGrid, SurfaceProfile, integrate

logger = logging.getLogger("capdrop")

__all__ = [
    "EquilibriumSolution",
    "ContinuationReport",
    "flat_cap",
    "circular_cap",
    "cap_radius_center",
    "rescale_to_volume",
    "contact_angles_of",
    "young_angles_of",
    "minimize_eps",
    "continuation",
    "shoot_symmetric",
    "verify_symmetry",
]


@dataclass(frozen=True)
class EquilibriumSolution:
    """Converged equilibrium profile with its pressure and residuals.

    el_residual is the solver's own convergence measure: the sup norm of the
    constraint-projected discrete gradient for the minimizer, and the root
    residual for the shooting solver. pde_residual is the sup norm of the
    pointwise Euler-Lagrange field, which plateaus at the O(h^2) consistency
    level of the stencils and is reported as a diagnostic only.

    contact_angles holds (gamma_lo, gamma_hi) with
    sin(gamma) = -rho'/sqrt(rho^2+rho'^2) at each endpoint; young_angles
    converts them to the contact angles satisfying cos = -gamma_jump/sigma
    at equilibrium.
    """

    profile: SurfaceProfile
    multiplier: float
    eps_used: float
    el_residual: float
    bc_residuals: tuple
    contact_angles: tuple
    pde_residual: float = float("nan")
    iterations: int = 0

    @property
    def young_angles(self) -> tuple:
        g_lo, g_hi = self.contact_angles
        return (np.pi / 2.0 + g_lo, np.pi / 2.0 - g_hi)


@dataclass(frozen=True)
class ContinuationReport:
    """Desk-scale record of the uniform-bound quantities along an
    eps-continuation run."""

    eps_schedule: list
    sup_rho_prime: list
    bv_norms: list
    multipliers: list
    energies: list


def rescale_to_volume(profile: SurfaceProfile, volume: float) -> SurfaceProfile:
    """Scale rho so the volume functional equals `volume` exactly."""
    c = volume_functional(profile)
    return profile.with_rho(profile.rho * np.sqrt(volume / c))


def flat_cap(params: PhysicalParams, n_cells: int = 400) -> SurfaceProfile:
    """Constant profile with the prescribed volume (exact equilibrium when
    g = 0 and gamma_jump = 0)."""
    grid = params.grid(n_cells)
    r = np.sqrt(params.volume / (grid.theta_hi - grid.theta_lo))
    return SurfaceProfile(grid, np.full(len(grid.nodes), r))


def cap_radius_center(young_angle: float, volume: float) -> tuple:
    """Radius R and center height b of the circular cap with the given
    contact angle (cos(theta_eq) = -gamma_jump/sigma convention) and volume.

    The fluid opening angle is pi - young_angle; the enclosed area is
    R^2 (phi - sin(phi) cos(phi)) with phi the opening angle, and the
    volume functional equals twice the area.
    """
    if not (0.0 < young_angle < np.pi):
        raise ValueError("young_angle must lie in (0, pi)")
    phi = np.pi - young_angle
    area_factor = phi - np.sin(phi) * np.cos(phi)
    radius = float(np.sqrt(volume / (2.0 * area_factor)))
    center = radius * float(np.cos(young_angle))
    return radius, center


def circular_cap(young_angle: float, volume: float, grid: AngularGrid) -> SurfaceProfile:
    """Analytic zero-gravity equilibrium: circle of radius R centered at
    (0, b), sampled as rho(theta) = b sin(theta) + sqrt(R^2 - b^2 cos^2)."""
    radius, center = cap_radius_center(young_angle, volume)
    th = grid.nodes
    rho = center * np.sin(th) + np.sqrt(radius ** 2 - center ** 2 * np.cos(th) ** 2)
    return SurfaceProfile(grid, rho)


def contact_angles_of(profile: SurfaceProfile) -> tuple:
    """(gamma_lo, gamma_hi) with sin(gamma) = -rho'/sqrt(rho^2+rho'^2)."""
    rho = profile.rho
    rp = profile.derivative()
    s = -rp / np.sqrt(rho ** 2 + rp ** 2)
    return (float(np.arcsin(s[0])), float(np.arcsin(s[-1])))


def young_angles_of(profile: SurfaceProfile) -> tuple:
    g_lo, g_hi = contact_angles_of(profile)
    return (np.pi / 2.0 + g_lo, np.pi / 2.0 - g_hi)


def _stationarity_residual(profile, params, eps):
    """(residual field, multiplier): the cell-energy gradient minus its
    projection onto the volume-gradient direction, lifted to flux units.

    This is the solver's convergence measure; it vanishes to machine
    precision at the discrete constrained minimizer, unlike the pointwise
    Euler-Lagrange field whose floor is the O(h^2) stencil consistency."""
    ge = cell_gradient(profile, params, eps)
    gc = cell_volume_gradient(profile)
    mu = float(np.dot(gc, ge) / np.dot(gc, gc))
    lump = cell_lumped_weights(profile.grid)
    return (ge - mu * gc) / lump, mu


def _rescale_cell(profile: SurfaceProfile, target: float) -> SurfaceProfile:
    return profile.with_rho(profile.rho * np.sqrt(target / cell_volume(profile)))


def _solution_from_profile(profile, params, eps, el_residual, iterations):
    report = first_variation(profile, params, eps)
    return EquilibriumSolution(
        profile=profile,
        multiplier=lagrange_multiplier(profile, params, eps),
        eps_used=eps,
        el_residual=el_residual,
        bc_residuals=boundary_residuals(profile, params, eps),
        contact_angles=contact_angles_of(profile),
        pde_residual=float(np.max(np.abs(report.interior_gradient))),
        iterations=iterations,
    )


def _gradient_phase(rho, params, eps, target, tol, max_iters):
    """Barzilai-Borwein projected descent with monotone Armijo backtracking
    on the cell energy, rescaling onto the cell-volume manifold after every
    step. Positivity-violating trials are rejected and halved like any
    failed backtracking step. Returns (profile, converged, iterations)."""
    grid = rho.grid
    lump = cell_lumped_weights(grid)
    e_cur = cell_energy(rho, params, eps)
    gproj, _ = _stationarity_residual(rho, params, eps)
    t_bb = 0.25 * grid.spacing ** 2 / (params.sigma + eps)
    prev_rho = prev_g = None

    for it in range(max_iters):
        if float(np.max(np.abs(gproj))) < tol:
            return rho, True, it
        if prev_rho is not None:
            drho = rho.rho - prev_rho
            dg = gproj - prev_g
            num = float(np.dot(lump * drho, drho))
            den = float(np.dot(lump * drho, dg))
            if den > 0.0 and np.isfinite(den):
                t_bb = min(max(num / den, 1e-14), 1e3)
        prev_rho, prev_g = rho.rho, gproj

        slope = float(np.dot(lump * gproj, gproj))
        t = t_bb
        accepted = False
        for _ in range(60):
            trial = rho.rho - t * gproj
            if np.min(trial) <= 0.0:
                t *= 0.5
                continue
            cand = _rescale_cell(SurfaceProfile(grid, trial), target)
            e_new = cell_energy(cand, params, eps)
            if e_new <= e_cur - 1e-4 * t * slope:
                rho, e_cur, accepted = cand, e_new, True
                break
            t *= 0.5
        if not accepted:
            return rho, False, it + 1
        gproj, _ = _stationarity_residual(rho, params, eps)
    return rho, False, max_iters


def _newton_polish(rho, params, eps, target, tol, max_newton=40):
    """Damped Newton on the constrained stationarity system
    (grad E = mu grad C, C = target) of the cell discretization."""
    grid = rho.grid
    lump = cell_lumped_weights(grid)
    n = len(rho.rho)
    x = rho.rho.copy()

    def assemble(vec):
        prof = SurfaceProfile(grid, vec)
        ge = cell_gradient(prof, params, eps)
        gc = cell_volume_gradient(prof)
        mu = float(np.dot(gc, ge) / np.dot(gc, gc))
        r1 = ge - mu * gc
        r2 = cell_volume(prof) - target
        norm = float(np.max(np.abs(r1 / lump))) + abs(r2)
        return prof, gc, mu, r1, r2, norm

    prof, gc, mu, r1, r2, norm = assemble(x)
    for _ in range(max_newton):
        if norm < 0.3 * tol:
            return prof, True
        jac = np.zeros((n + 1, n + 1))
        jac[:n, :n] = cell_hessian(prof, params, eps) - mu * cell_volume_hessian(grid)
        jac[:n, n] = -gc
        jac[n, :n] = gc
        try:
            delta = np.linalg.solve(jac, -np.concatenate((r1, [r2])))
        except np.linalg.LinAlgError:
            return prof, False
        damp = 1.0
        for _ in range(30):
            x_new = x + damp * delta[:n]
            if np.min(x_new) > 0.0:
                out_new = assemble(x_new)
                if out_new[-1] < norm:
                    x = x_new
                    prof, gc, mu, r1, r2, norm = out_new
                    break
            damp *= 0.5
        else:
            return prof, False
    return prof, norm < 0.3 * tol


def minimize_eps(
    params: PhysicalParams,
    eps: float,
    init: SurfaceProfile,
    tol_el: float = 1e-8,
    tol_bc: float = 1e-7,
    max_iters: int = 20000,
    gradient_iters: int = 600,
) -> EquilibriumSolution:
    """Constrained minimization of the regularized energy.

    Projected gradient descent (Barzilai-Borwein step with monotone Armijo
    backtracking, exact volume rescale after every step) drives the bulk of
    the decrease; a damped Newton iteration on the discrete stationarity
    system then polishes the iterate, since plain descent needs O(1e6)
    sweeps at this conditioning. The descent acts on the cell discretization
    of the energy (the nodal-quadrature form admits spurious grid-scale
    stationary points), and an outer secant loop calibrates the cell volume
    target so the reported quadrature volume equals params.volume exactly.

    Convergence requires the projected stationarity residual below
    tol_el*sigma, with the endpoint entries (the discrete natural boundary
    conditions) additionally below tol_bc*sigma. The pointwise flux defects
    at the contacts are reported in bc_residuals and sit at the O(h^2)
    consistency floor of the stencils, not at tol_bc.
    """
    if eps <= 0.0:
        raise ValueError("eps must be positive")
    sigma = params.sigma
    tol = tol_el * sigma
    rho = rescale_to_volume(init, params.volume)
    target = cell_volume(rho)
    total_iters = 0

    for outer in range(8):
        rho = _rescale_cell(rho, target)
        converged = False
        for round_idx in range(4):
            budget = gradient_iters if round_idx == 0 else 4 * gradient_iters
            budget = min(budget, max(max_iters - total_iters, 0))
            rho, converged, used = _gradient_phase(rho, params, eps, target, tol, budget)
            total_iters += used
            if not converged:
                rho, converged = _newton_polish(rho, params, eps, target, tol)
            if converged or total_iters >= max_iters:
                break
        res_field, _ = _stationarity_residual(rho, params, eps)
        res = float(np.max(np.abs(res_field)))
        bc_ok = abs(res_field[0]) < tol_bc * sigma and abs(res_field[-1]) < tol_bc * sigma
        if not (res < tol and bc_ok):
            raise ConvergenceError(
                f"no convergence after {total_iters} descent iterations (residual {res:.3e})",
                solution=_solution_from_profile(rho, params, eps, res, total_iters),
                eps=eps,
            )
        vol_gap = volume_functional(rho) - params.volume
        if abs(vol_gap) < 1e-13 * params.volume:
            break
        target -= vol_gap
    else:
        raise ConvergenceError(
            "cell-volume calibration did not settle",
            solution=_solution_from_profile(rho, params, eps, res, total_iters),
            eps=eps,
        )

    rho = rescale_to_volume(rho, params.volume)
    res_field, _ = _stationarity_residual(rho, params, eps)
    res = float(np.max(np.abs(res_field)))
    logger.debug("minimize_eps converged (res=%.3e, iters=%d)", res, total_iters)
    return _solution_from_profile(rho, params, eps, res, total_iters)


def continuation(params: PhysicalParams, eps_schedule, init: SurfaceProfile):
    """Warm-started minimize_eps down a decreasing eps schedule.

    Returns the solution at the smallest eps plus a report of the
    uniform-bound quantities (sup |rho'|, BV norm, multiplier, energy)
    recorded at each eps.
    """
    eps_schedule = [float(e) for e in eps_schedule]
    if any(e <= 0.0 for e in eps_schedule) or any(
        b >= a for a, b in zip(eps_schedule, eps_schedule[1:])
    ):
        raise ValueError("eps schedule must be strictly decreasing and positive")

    sup_rp, bv, mults, energies = [], [], [], []
    sol = None
    profile = init
    for eps in eps_schedule:
        try:
            sol = minimize_eps(params, eps, profile)
        except ConvergenceError as err:
            err.eps = eps
            raise
        profile = sol.profile
        rp = profile.derivative()
        sup_rp.append(float(np.max(np.abs(rp))))
        bv.append(integrate(profile.grid, np.abs(profile.rho) + np.abs(rp)))
        mults.append(sol.multiplier)
        energies.append(energy_eps(profile, params, eps))
    report = ContinuationReport(eps_schedule, sup_rp, bv, mults, energies)
    return sol, report


def _el_ode(params: PhysicalParams, pressure: float):
    """rho'' from the eps = 0 Euler-Lagrange equation, solved for the
    highest derivative."""
    sigma, g = params.sigma, params.g

    def rhs(theta, state):
        rho, rp, _ = state
        d2 = rho ** 2 + rp ** 2
        root3 = d2 ** 1.5
        rpp = (
            sigma * (2.0 * rp ** 2 + rho ** 2) / root3
            + g * rho * np.sin(theta)
            - pressure
        ) * root3 / (sigma * rho)
        return (rp, rpp, rho ** 2)

    return rhs


def _shoot_half(params, apex_rho, pressure, t_eval=None):
    """Integrate from the apex (pi/2, rho'(pi/2)=0) down to theta = 0."""
    t_start = np.pi / 2.0 if t_eval is None else float(t_eval[0])
    sol = solve_ivp(
        _el_ode(params, pressure),
        (t_start, 0.0),
        (apex_rho, 0.0, 0.0),
        method="RK45",
        rtol=1e-12,
        atol=1e-12,
        t_eval=t_eval,
        dense_output=False,
    )
    if not sol.success or np.any(sol.y[0] <= 0.0):
        raise ShootingError(f"apex integration failed: {sol.message}")
    return sol


def _shoot_residual(params, apex_rho, pressure):
    sol = _shoot_half(params, apex_rho, pressure)
    rho0, rp0, mass = sol.y[0, -1], sol.y[1, -1], sol.y[2, -1]
    # contact condition rho'/sqrt(rho^2+rho'^2) = -gamma_jump/sigma at theta_lo
    f1 = rp0 / np.hypot(rho0, rp0) + params.gamma_jump / params.sigma
    f2 = -2.0 * mass - params.volume
    return np.array([f1, f2])


def shoot_symmetric(params: PhysicalParams, n_cells: int = 400) -> EquilibriumSolution:
    """Two-parameter shooting for the sessile equilibrium (theta1=theta2=0).

    Unknowns are the apex radius and the pressure; the adaptive RK
    integration runs from the apex to theta = 0 and a Newton iteration with
    a numerical Jacobian matches the contact condition and the volume.
    The profile is mirrored about pi/2, so it is symmetric by construction.
    """
    if params.theta1 != 0.0 or params.theta2 != 0.0:
        raise ValueError("shooting solver covers the sessile case only")
    if n_cells % 2 != 0:
        raise ValueError("shooting grid needs an even cell count (apex node)")

    # zero-gravity analytic cap as the starting guess
    radius, center = cap_radius_center(params.young_angle, params.volume)
    x = np.array([center + radius, params.sigma / radius + params.g * (center + radius)])

    tol = 1e-12
    resid = _shoot_residual(params, *x)
    for _ in range(60):
        if np.max(np.abs(resid)) < tol:
            break
        jac = np.empty((2, 2))
        for j in range(2):
            step = 1e-7 * max(abs(x[j]), 1.0)
            xp = x.copy()
            xp[j] += step
            xm = x.copy()
            xm[j] -= step
            jac[:, j] = (_shoot_residual(params, *xp) - _shoot_residual(params, *xm)) / (2.0 * step)
        try:
            dx = np.linalg.solve(jac, -resid)
        except np.linalg.LinAlgError as exc:
            raise ShootingError("singular shooting Jacobian", residual=resid) from exc
        damp = 1.0
        for _ in range(30):
            x_new = x + damp * dx
            if x_new[0] > 0.0:
                try:
                    resid_new = _shoot_residual(params, *x_new)
                except ShootingError:
                    resid_new = None
                if resid_new is not None and np.max(np.abs(resid_new)) < np.max(np.abs(resid)):
                    x, resid = x_new, resid_new
                    break
            damp *= 0.5
        else:
            raise ShootingError("shooting line search stalled", residual=resid)
    else:
        raise ShootingError("shooting Newton did not converge", residual=resid)

    grid = params.grid(n_cells)
    half_nodes = grid.nodes[: n_cells // 2 + 1]
    sol = _shoot_half(params, x[0], x[1], t_eval=half_nodes[::-1])
    rho = np.empty(n_cells + 1)
    rho[: n_cells // 2 + 1] = sol.y[0][::-1]
    rho[n_cells // 2 :] = rho[: n_cells // 2 + 1][::-1]
    profile = rescale_to_volume(SurfaceProfile(grid, rho), params.volume)

    report = first_variation(profile, params, 0.0)
    return EquilibriumSolution(
        profile=profile,
        multiplier=float(x[1]),
        eps_used=0.0,
        el_residual=float(np.max(np.abs(resid))),
        bc_residuals=boundary_residuals(profile, params, 0.0),
        contact_angles=contact_angles_of(profile),
        pde_residual=float(np.max(np.abs(report.interior_gradient))),
        iterations=0,
    )


def verify_symmetry(sol: EquilibriumSolution) -> dict:
    """Check rho(pi/2 - t) = rho(pi/2 + t) on the node pairs of a sessile
    solution; passes when the defect is <= 1e-8 * max(rho)."""
    rho = sol.profile.rho
    asym = float(np.max(np.abs(rho - rho[::-1])))
    scale = float(np.max(rho))
    return {"max_asymmetry": asym, "scale": scale, "passed": bool(asym <= 1e-8 * scale)}
