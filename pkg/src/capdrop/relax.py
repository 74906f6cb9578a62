"""Quasi-static volume-preserving relaxation of a perturbed droplet with a
linear dynamic contact-point law.

This is an explicit L2 gradient flow sharing the energy-dissipation skeleton
of the physical problem (interior motion down the constrained energy
gradient, endpoint motion proportional to the natural boundary residuals),
not a discretization of the coupled fluid equations. Each accepted step must
not increase the energy, and the volume is restored exactly by rescaling.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .energy import PhysicalParams, boundary_residuals, energy, interior_gradient_raw
from .errors import PositivityError, StiffnessError
from .geometry import SurfaceProfile, integrate, to_cartesian
from .moving_frame import recentre

__all__ = ["RelaxationTrace", "step", "run"]


@dataclass(frozen=True)
class RelaxationTrace:
    """Time series of a relaxation run plus tail-fit decay diagnostics."""

    times: np.ndarray = field(repr=False)
    energies: np.ndarray = field(repr=False)
    volumes: np.ndarray = field(repr=False)
    pole_positions: np.ndarray = field(repr=False)
    contact_rhos: np.ndarray = field(repr=False)
    l2_distance_to_equilibrium: np.ndarray = field(repr=False)
    decay_rate: float = float("nan")
    fit_r2: float = float("nan")

    @property
    def final_pole(self) -> float:
        return float(self.pole_positions[-1])

    @property
    def final_distance(self) -> float:
        return float(self.l2_distance_to_equilibrium[-1])


def _flow_rate(profile: SurfaceProfile, params: PhysicalParams):
    """(d rho/dt, P(t)): interior L2 descent projected to conserve the
    volume functional to first order, endpoints driven by the natural
    boundary residuals with mobility 1/kappa."""
    grid = profile.grid
    rho = profile.rho
    raw = interior_gradient_raw(profile, params, 0.0)
    p_t = integrate(grid, raw * rho) / integrate(grid, rho ** 2)
    rate = -(raw - p_t * rho)
    b_lo, b_hi = boundary_residuals(profile, params, 0.0)
    # the variational boundary coefficients are (-b_lo, +b_hi); moving each
    # contact point down its own coefficient dissipates the boundary energy
    # at rate kappa * (d rho/dt)^2
    rate[0] = b_lo / params.kappa
    rate[-1] = -b_hi / params.kappa
    return rate, p_t


def step(profile: SurfaceProfile, params: PhysicalParams, dt: float) -> SurfaceProfile:
    """One explicit step of the relaxation flow followed by an exact volume
    rescale. Raises PositivityError when the update would cross zero."""
    if dt <= 0.0:
        raise ValueError("dt must be positive")
    rate, _ = _flow_rate(profile, params)
    trial = profile.rho + dt * rate
    if np.min(trial) <= 0.0:
        raise PositivityError("relaxation step lost positivity")
    new = SurfaceProfile(profile.grid, trial)
    c = integrate(profile.grid, new.rho ** 2)
    return new.with_rho(new.rho * np.sqrt(params.volume / c))


def _stable_dt(profile: SurfaceProfile, params: PhysicalParams) -> float:
    """Explicit-stability estimate for the interior update (the contact-point
    update is slower by a factor ~h/kappa and never binds for kappa >= h)."""
    rho = profile.rho
    rp = profile.derivative()
    coef = params.sigma * np.max(rho ** 2 / (rho ** 2 + rp ** 2) ** 1.5)
    return 0.45 * profile.grid.spacing ** 2 / coef


def _fit_tail(times, dists):
    """Least-squares slope of log(distance) on the tail half of the run."""
    t = np.asarray(times)
    d = np.asarray(dists)
    keep = (t >= 0.5 * t[-1]) & (d > 1e-13)
    if np.count_nonzero(keep) < 3:
        return float("nan"), float("nan")
    x = t[keep]
    y = np.log(d[keep])
    coef = np.polyfit(x, y, 1)
    resid = y - np.polyval(coef, x)
    ss_tot = float(np.sum((y - np.mean(y)) ** 2))
    r2 = 1.0 - float(np.sum(resid ** 2)) / ss_tot if ss_tot > 0 else float("nan")
    return float(-coef[0]), r2


def run(
    profile: SurfaceProfile,
    params: PhysicalParams,
    t_end: float,
    dt0: float,
    equilibrium: SurfaceProfile | None = None,
    n_snapshots: int = 200,
) -> RelaxationTrace:
    """Relax a profile with adaptive explicit stepping.

    Steps are accepted only if the energy does not increase; rejected steps
    halve dt, accepted runs of steps let it grow back. Snapshots recentre the
    surface on the moving frame against `equilibrium` (computed from the
    parameters when not supplied) and record energy, volume, pole position,
    contact radii, and the L2 distance to the recentred equilibrium. The
    decay rate is fitted on the tail half of the distance history.
    """
    from .equilibrium import continuation, flat_cap

    grid = profile.grid
    if equilibrium is None:
        if params.g == 0.0 and params.gamma_jump == 0.0:
            equilibrium = flat_cap(params, grid.n_cells)
        else:
            sol, _ = continuation(
                params, [1e-2, 1e-3, 1e-4, 1e-5, 1e-6], flat_cap(params, grid.n_cells)
            )
            equilibrium = sol.profile

    current = profile.with_rho(
        profile.rho * np.sqrt(params.volume / integrate(grid, profile.rho ** 2))
    )
    t = 0.0
    dt_cap = _stable_dt(current, params)
    dt = min(dt0, dt_cap)
    dt_min = min(dt0, dt_cap) * 1e-10
    e_cur = energy(current, params)
    frozen = False
    snap_every = t_end / n_snapshots
    next_snap = 0.0
    pole_hint = None

    times, energies, volumes, poles, contacts, dists = [], [], [], [], [], []

    def record(t_now, prof, e_now):
        nonlocal pole_hint
        bracket = None
        if pole_hint is not None:
            half = 0.25 * np.max(prof.rho)
            bracket = (pole_hint - half, pole_hint + half)
        state = recentre(to_cartesian(prof), equilibrium, bracket=bracket, scan_points=17)
        pole_hint = state.pole_x
        times.append(t_now)
        energies.append(e_now)
        volumes.append(integrate(grid, prof.rho ** 2))
        poles.append(state.pole_x)
        contacts.append((prof.rho[0], prof.rho[-1]))
        dists.append(state.l2_perturbation)

    record(t, current, e_cur)
    next_snap += snap_every
    growth_run = 0

    while t < t_end - 1e-14:
        dt = min(dt, t_end - t)
        if not frozen:
            try:
                cand = step(current, params, dt)
            except PositivityError:
                dt *= 0.5
                growth_run = 0
                if dt < dt_min:
                    raise StiffnessError("time step underflow (positivity)")
                continue
            e_new = energy(cand, params)
            if e_new > e_cur:
                dt *= 0.5
                growth_run = 0
                if dt < dt_min:
                    # the flow reached its discrete fixed point: any further
                    # motion is below energy roundoff
                    if abs(e_new - e_cur) < 1e3 * np.finfo(float).eps * abs(e_cur):
                        frozen = True
                        dt = min(snap_every, t_end - t)
                        continue
                    raise StiffnessError("time step underflow (energy increase)")
                continue
            current, e_cur = cand, e_new
        t += dt
        growth_run += 1
        if growth_run >= 8 and dt < dt_cap:
            dt = min(1.3 * dt, dt_cap)
            growth_run = 0
        if t >= next_snap - 1e-14:
            record(t, current, e_cur)
            next_snap += snap_every

    if times[-1] < t:
        record(t, current, e_cur)
    rate, r2 = _fit_tail(times, dists)
    return RelaxationTrace(
        times=np.array(times),
        energies=np.array(energies),
        volumes=np.array(volumes),
        pole_positions=np.array(poles),
        contact_rhos=np.array(contacts),
        l2_distance_to_equilibrium=np.array(dists),
        decay_rate=rate,
        fit_r2=r2,
    )
