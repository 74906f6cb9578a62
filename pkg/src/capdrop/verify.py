"""Self-contained invariant suite behind the `verify` command.

Each check returns a dict with its measured value and threshold so failures
are diagnosable from the JSON report alone. Checks marked gating=False are
recorded as data (known discretization-level discrepancies) and do not
affect the overall pass/fail."""

from __future__ import annotations

import numpy as np

from . import equilibrium as eq
from .energy import (
    PhysicalParams,
    discrete_gradient,
    energy,
    energy_eps,
    energy_lower_bound,
    first_variation,
    lagrange_multiplier,
    volume_functional,
)
from .geometry import SurfaceProfile, from_cartesian, integrate, to_cartesian
from .moving_frame import lambda_factor, pole_velocity, recentre
from .relax import run as relax_run
from .relax import step as relax_step
from .spectral import (
    a_coefficients,
    build_Q,
    build_xi56,
    constrained_eigen,
    literal_form_discrepancy,
    second_variation,
    shift_function,
    sigma_form,
)

SCHEMA_VERSION = 1


def _entry(name, value, tol, passed, gating=True, info=""):
    return {
        "name": name,
        "value": float(value),
        "tolerance": None if tol is None else float(tol),
        "passed": bool(passed),
        "gating": bool(gating),
        "info": info,
    }


def _mass_admissible(rho0, pert):
    scaled = rho0.rho + pert
    prof = SurfaceProfile(rho0.grid, scaled)
    return eq.rescale_to_volume(prof, volume_functional(rho0))


def run_verification(params: PhysicalParams, n_cells: int = 400, seed: int = 0) -> dict:
    checks = []
    rng = np.random.default_rng(seed)
    grid = params.grid(n_cells)
    th = grid.nodes
    sigma = params.sigma

    # quadrature and stencil exactness
    base = PhysicalParams(g=0.0, sigma=1.0, gamma_jump=0.0, volume=np.pi)
    g0 = base.grid(n_cells)
    v = abs(integrate(g0, np.sin(g0.nodes)) - 2.0)
    checks.append(_entry("quadrature_sin", v, 1e-8, v <= 1e-8))
    flat = eq.flat_cap(base, n_cells)
    rt = from_cartesian(to_cartesian(flat), 0.0, g0)
    v = float(np.max(np.abs(rt.rho - flat.rho)))
    checks.append(_entry("polar_cartesian_round_trip", v, 1e-10, v <= 1e-10))

    # flat-cap stationarity and multiplier
    rep = first_variation(flat, base, 0.0)
    v = float(np.max(np.abs(rep.interior_gradient)))
    checks.append(_entry("flat_cap_stationary", v, 1e-12, v <= 1e-12))
    v = abs(rep.multiplier - 1.0)
    checks.append(_entry("flat_cap_multiplier", v, 1e-12, v <= 1e-12))

    # gradient consistency: finite differences of the discrete energy
    pert = sum(rng.normal() * np.cos(k * th) for k in range(1, 6))
    prof = _mass_admissible(eq.flat_cap(params, n_cells), 0.05 * pert / np.max(np.abs(pert)))
    h_dir = sum(rng.normal() * np.cos(k * th) for k in range(1, 6))
    h_dir -= prof.rho * integrate(grid, prof.rho * h_dir) / integrate(grid, prof.rho ** 2)
    eps, t = 1e-3, 1e-5
    fd = (
        energy_eps(SurfaceProfile(grid, prof.rho + t * h_dir), params, eps)
        - energy_eps(SurfaceProfile(grid, prof.rho - t * h_dir), params, eps)
    ) / (2.0 * t)
    paired = float(np.dot(discrete_gradient(prof, params, eps), h_dir))
    v = abs(fd - paired) / max(abs(fd), 1e-300)
    checks.append(_entry("gradient_fd_consistency", v, 1e-6, v <= 1e-6))

    # energy lower bound on random volume-normalized profiles
    bound = energy_lower_bound(params)
    worst = np.inf
    for _ in range(200):
        bumps = sum(rng.normal(0.0, 0.3) * np.cos(k * th) for k in range(0, 7))
        cand = eq.rescale_to_volume(
            SurfaceProfile(grid, np.exp(bumps - np.max(bumps))), params.volume
        )
        worst = min(worst, energy(cand, params) - bound)
    checks.append(_entry("energy_lower_bound_margin", worst, 0.0, worst >= 0.0))

    # spectral gap and kernel signature at the flat cap
    form = sigma_form(flat, base)
    dec_d = constrained_eigen(form, "doubly-constrained")
    v = abs(dec_d.eigenvalues[0] - 3.0) / 3.0
    checks.append(_entry("flat_cap_gap_3sigma", v, 0.02, v <= 0.02))
    dec_m = constrained_eigen(form, "mass-constrained")
    lam0 = dec_m.eigenvalues[0]
    checks.append(_entry("mass_constrained_near_zero", abs(lam0), 1e-3, abs(lam0) <= 1e-3))
    xis = shift_function(flat)
    mode = dec_m.eigenvectors[:, 0]
    w = g0.weights
    align = abs(np.dot(w * mode, xis)) / np.sqrt(
        np.dot(w * mode, mode) * np.dot(w * xis, xis)
    )
    checks.append(_entry("kernel_alignment", align, 0.99, align >= 0.99))

    # kernel mode properties at a g=1 shooting equilibrium
    heavy = PhysicalParams(g=1.0, sigma=1.0, gamma_jump=-0.3, volume=np.pi)
    sol_g = eq.shoot_symmetric(heavy, n_cells if n_cells % 2 == 0 else n_cells + 1)
    rho_g = sol_g.profile
    xis_g = shift_function(rho_g)
    ortho = abs(integrate(rho_g.grid, xis_g * rho_g.rho))
    checks.append(_entry("kernel_mass_orthogonality", ortho, 1e-8, ortho <= 1e-8))
    from .geometry import derivative_values

    h1 = integrate(rho_g.grid, xis_g ** 2 + derivative_values(rho_g.grid, xis_g) ** 2)
    f0 = abs(second_variation(rho_g, heavy, xis_g)) / h1
    checks.append(_entry("kernel_second_variation", f0, 1e-4, f0 <= 1e-4))

    # second-difference consistency against the quadratic form
    xi_t = np.cos(2 * th) + 0.3 * np.cos(4 * th)
    xi_t -= prof.rho * integrate(grid, prof.rho * xi_t) / integrate(grid, prof.rho ** 2)
    flat_p = eq.flat_cap(params, n_cells)
    a0 = -0.5 * integrate(grid, xi_t ** 2) / integrate(grid, flat_p.rho ** 2)
    tt = 1e-3
    e0 = energy(flat_p, params)
    ep = energy(SurfaceProfile(grid, flat_p.rho + tt * xi_t + tt ** 2 * a0 * flat_p.rho), params)
    em = energy(SurfaceProfile(grid, flat_p.rho - tt * xi_t + tt ** 2 * a0 * flat_p.rho), params)
    second_diff = (ep - 2.0 * e0 + em) / tt ** 2
    f0_val = second_variation(flat_p, params, xi_t)
    v = abs(second_diff - f0_val) / max(abs(f0_val), 1e-300)
    checks.append(_entry("second_difference_consistency", v, 1e-4, v <= 1e-4))

    # stability-form variants: measured data, not a gate
    gap = literal_form_discrepancy(rho_g, heavy, np.cos(2.0 * rho_g.grid.nodes))
    checks.append(
        _entry(
            "sigma_form_literal_vs_polarized",
            gap["relative_gap"],
            None,
            True,
            gating=False,
            info="relative gap between the two coefficient conventions; the "
            "polarized variant is the energy Hessian and is the one used",
        )
    )

    # translation-kernel dichotomy of the explicit ODE branches
    kc400 = build_xi56(flat)
    kc800 = build_xi56(eq.flat_cap(base, 2 * n_cells))
    s400 = float(np.nanmax(np.abs(kc400.xi5)))
    s800 = float(np.nanmax(np.abs(kc800.xi5)))
    v = abs(s800 - s400) / s400
    checks.append(_entry("xi5_sup_stable", v, 0.05, v <= 0.05))
    m = kc400.masked_index
    nodes = flat.grid.nodes
    ratios = []
    prev = None
    for h_dist in (0.4, 0.2, 0.1, 0.05):
        i = int(np.argmin(np.abs(nodes - (np.pi / 2 - h_dist))))
        val = abs(kc400.chi6[i])
        if prev is not None:
            ratios.append(val / prev)
        prev = val
    v = min(ratios)
    checks.append(_entry("xi6_multiplier_growth", v, 1.5, v >= 1.5))
    jump = abs(kc400.xi6[m - 1] - kc400.xi6[m + 1])
    checks.append(_entry("xi6_jump_nonzero", jump, 0.1, jump >= 0.1))
    q = kc400.Q_values
    anti = np.nanmax(np.abs(q + q[::-1]))
    checks.append(_entry("Q_antisymmetry", anti, 1e-6, anti <= 1e-6))

    # moving frame: shift recovery and orthogonality
    worst_pole = 0.0
    worst_ortho = 0.0
    nx = np.sqrt(integrate(g0, xis ** 2))
    for delta in (0.01, -0.05, 0.1):
        state = recentre(to_cartesian(flat).translated(delta), flat)
        worst_pole = max(worst_pole, abs(state.pole_x - delta))
        rel = abs(state.ortho_residual) / max(state.l2_perturbation * nx, 1e-30)
        worst_ortho = max(worst_ortho, min(rel / 1e-6, abs(state.ortho_residual) / 1e-12))
    checks.append(_entry("recentre_shift_recovery", worst_pole, 1e-3, worst_pole <= 1e-3))
    checks.append(_entry("recentre_orthogonality", worst_ortho, 1.0, worst_ortho <= 1.0,
                         info="min(relative residual / 1e-6, absolute / 1e-12)"))

    state0 = recentre(to_cartesian(flat), flat)
    lam = lambda_factor(state0, flat)
    v = abs(lam - 1.0 / integrate(g0, xis ** 2))
    checks.append(_entry("lambda_at_equilibrium", v, 1e-10, v <= 1e-10))
    v = abs(pole_velocity(state0, flat, xis) - 1.0)
    checks.append(_entry("pole_velocity_normalisation", v, 1e-10, v <= 1e-10))

    # volume-compatibility coefficients
    xi_p = _mass_admissible(flat, 0.05 * np.cos(2 * g0.nodes)).rho - flat.rho
    a0, _, _ = a_coefficients(flat, xi_p, np.zeros_like(xi_p), np.zeros_like(xi_p))
    v = abs(integrate(g0, flat.rho * (xi_p - a0 * flat.rho)))
    checks.append(_entry("mass_compatibility_identity", v, 1e-10, v <= 1e-10))

    # relaxation: fixed point, Lyapunov, conservation on a short run
    stepped = relax_step(flat, base, 1e-5)
    v = float(np.max(np.abs(stepped.rho - flat.rho)))
    checks.append(_entry("relax_fixed_point", v, 1e-10, v <= 1e-10))
    pert_prof = SurfaceProfile(g0, flat.rho + 0.05 * np.cos(2 * g0.nodes))
    trace = relax_run(pert_prof, base, t_end=0.25, dt0=1e-5, equilibrium=flat, n_snapshots=25)
    mono = bool(np.all(np.diff(trace.energies) <= 0.0))
    checks.append(_entry("relax_energy_monotone", 0.0 if mono else 1.0, 0.5, mono))
    v = float(np.max(np.abs(trace.volumes - np.pi)) / np.pi)
    checks.append(_entry("relax_volume_conservation", v, 1e-8, v <= 1e-8))

    gating = [c for c in checks if c["gating"]]
    return {
        "schema_version": SCHEMA_VERSION,
        "n_cells": n_cells,
        "checks": checks,
        "all_passed": bool(all(c["passed"] for c in gating)),
    }
