"""Shared fixtures. Expensive solves are session-scoped and reused by the
module tests and the acceptance suite."""

import numpy as np
import pytest

import capdrop as cd


@pytest.fixture(scope="session")
def flat_params():
    return cd.PhysicalParams(g=0.0, sigma=1.0, gamma_jump=0.0, volume=np.pi)


@pytest.fixture(scope="session")
def flat400(flat_params):
    return cd.flat_cap(flat_params, 400)


@pytest.fixture(scope="session")
def cap_params():
    return cd.PhysicalParams(g=0.0, sigma=1.0, gamma_jump=-0.5, volume=np.pi)


@pytest.fixture(scope="session")
def cap_solution(cap_params):
    """Zero-gravity circular-cap equilibrium from the eps-continuation path."""
    sol, report = cd.continuation(
        cap_params, [1e-2, 1e-3, 1e-4, 1e-5, 1e-6], cd.flat_cap(cap_params, 400)
    )
    return sol, report


@pytest.fixture(scope="session")
def heavy_params():
    return cd.PhysicalParams(g=1.0, sigma=1.0, gamma_jump=-0.3, volume=np.pi)


@pytest.fixture(scope="session")
def heavy_shoot400(heavy_params):
    return cd.shoot_symmetric(heavy_params, 400)


@pytest.fixture(scope="session")
def heavy_shoot800(heavy_params):
    return cd.shoot_symmetric(heavy_params, 800)


@pytest.fixture(scope="session")
def heavy_continuation(heavy_params):
    return cd.continuation(
        heavy_params, [1e-2, 1e-3, 1e-4, 1e-5, 1e-6], cd.flat_cap(heavy_params, 400)
    )


@pytest.fixture(scope="session")
def relax_symmetric(flat_params, flat400):
    grid = flat400.grid
    start = cd.SurfaceProfile(grid, flat400.rho + 0.05 * np.cos(2 * grid.nodes))
    return cd.run(start, flat_params, t_end=6.0, dt0=1e-5, equilibrium=flat400)


@pytest.fixture(scope="session")
def relax_asymmetric_timed(flat_params, flat400):
    """5% mass-conserving asymmetric perturbation, with the wall time of the
    full relaxation run (criterion: under two minutes)."""
    import time

    grid = flat400.grid
    bump = 0.05 * (np.cos(2 * grid.nodes) + 0.5 * np.cos(3 * grid.nodes))
    start = cd.SurfaceProfile(grid, flat400.rho + bump)
    t0 = time.perf_counter()
    trace = cd.run(start, flat_params, t_end=6.0, dt0=1e-5, equilibrium=flat400)
    return trace, time.perf_counter() - t0


@pytest.fixture(scope="session")
def relax_asymmetric(relax_asymmetric_timed):
    return relax_asymmetric_timed[0]
