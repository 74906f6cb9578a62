import numpy as np
import pytest

import capdrop as cd
from capdrop.errors import DegenerateFrameError, RecentreDomainError
from capdrop.geometry import integrate
from capdrop.moving_frame import MovingFrameState


def renormalized(profile, bump):
    prof = cd.SurfaceProfile(profile.grid, profile.rho + bump)
    return cd.rescale_to_volume(prof, integrate(profile.grid, profile.rho ** 2))


class TestRecentre:
    def test_no_shift(self, flat400):
        state = cd.recentre(cd.to_cartesian(flat400), flat400)
        assert abs(state.pole_x) < 1e-8
        assert state.l2_perturbation < 1e-10

    def test_translated_equilibria(self, flat400, heavy_shoot400):
        for prof in (flat400, heavy_shoot400.profile):
            xis = cd.shift_function(prof)
            nx = np.sqrt(integrate(prof.grid, xis ** 2))
            for delta in (0.01, -0.01, 0.05, -0.05, 0.1, -0.1):
                state = cd.recentre(cd.to_cartesian(prof).translated(delta), prof)
                assert abs(state.pole_x - delta) <= 1e-3
                assert state.l2_perturbation <= 1e-3
                # orthogonality up to quadrature roundoff when xi ~ 0
                tol = 1e-6 * state.l2_perturbation * nx + 1e-12
                assert abs(state.ortho_residual) <= tol

    def test_perturbed_orthogonality(self, flat400):
        bump = 0.02 * np.cos(2 * flat400.grid.nodes)
        state = cd.recentre(cd.to_cartesian(renormalized(flat400, bump)), flat400)
        assert abs(state.ortho_residual) <= 1e-6

    def test_frame_consistency(self, heavy_shoot400):
        prof = heavy_shoot400.profile
        state = cd.recentre(cd.to_cartesian(prof).translated(0.07), prof)
        again = cd.recentre(cd.to_cartesian(state.profile_in_frame), prof)
        assert abs(again.pole_x) <= 1e-8

    def test_scan_reports_minima(self, flat400):
        state = cd.recentre(cd.to_cartesian(flat400).translated(0.05), flat400)
        assert len(state.scan_minima) >= 1
        assert min(abs(c - 0.05) for c in state.scan_minima) < 0.1

    def test_translation_found_anywhere(self, flat400):
        # the objective compares shapes about the candidate pole, so even a
        # far translation has its interior minimizer at the right place
        far = cd.to_cartesian(flat400).translated(5.0)
        state = cd.recentre(far, flat400)
        assert abs(state.pole_x - 5.0) < 1e-6

    def test_star_shape_violation_propagates(self, flat400):
        # a deep-waisted curve stops being star-shaped about offset poles
        grid = flat400.grid
        kidney = cd.SurfaceProfile(grid, 1.0 + 0.8 * np.cos(2 * grid.nodes) ** 2)
        curve = cd.to_cartesian(kidney)
        with pytest.raises(RecentreDomainError):
            cd.recentre(curve, flat400, bracket=(0.55, 0.95), scan_points=9)


class TestLambdaFactor:
    def test_flat_value(self, flat400):
        state = cd.recentre(cd.to_cartesian(flat400), flat400)
        assert abs(state.lam - 2.0 / np.pi) < 1e-10
        assert abs(cd.lambda_factor(state, flat400) - 2.0 / np.pi) < 1e-10

    def test_equilibrium_identity(self, heavy_shoot400):
        prof = heavy_shoot400.profile
        state = cd.recentre(cd.to_cartesian(prof), prof)
        xis = cd.shift_function(prof)
        expect = 1.0 / integrate(prof.grid, xis ** 2)
        assert abs(cd.lambda_factor(state, prof) - expect) < 1e-8

    def test_perturbation_continuity(self, flat400):
        grid = flat400.grid
        bump = 0.004 * np.cos(2 * grid.nodes) + 0.002 * np.cos(3 * grid.nodes)
        state = cd.recentre(cd.to_cartesian(renormalized(flat400, bump)), flat400)
        xis = cd.shift_function(flat400)
        lam0 = 1.0 / integrate(grid, xis ** 2)
        lam = cd.lambda_factor(state, flat400)
        assert abs(lam - lam0) <= 0.05 * lam
        assert lam > 0

    def test_positive_for_moderate_perturbations(self, flat400):
        rng = np.random.default_rng(17)
        grid = flat400.grid
        for _ in range(10):
            amps = rng.normal(0.0, 0.01, size=5)
            bump = sum(a * np.cos(k * grid.nodes) for k, a in enumerate(amps, start=1))
            state = cd.recentre(cd.to_cartesian(renormalized(flat400, bump)), flat400)
            assert cd.lambda_factor(state, flat400) > 0

    def test_degenerate_frame_rejected(self, flat400):
        doctored = MovingFrameState(
            pole_x=0.0,
            profile_in_frame=flat400,
            perturbation=np.zeros(401),
            xi3=np.cos(2 * flat400.grid.nodes),  # orthogonal to cos(theta)
        )
        with pytest.raises(DegenerateFrameError):
            cd.lambda_factor(doctored, flat400)


class TestPoleVelocity:
    def test_zero_speed(self, flat400):
        state = cd.recentre(cd.to_cartesian(flat400), flat400)
        assert cd.pole_velocity(state, flat400, np.zeros(401)) == 0.0

    def test_pure_translation_rate(self, flat400):
        state = cd.recentre(cd.to_cartesian(flat400), flat400)
        xis = cd.shift_function(flat400)
        assert abs(cd.pole_velocity(state, flat400, xis) - 1.0) < 1e-12

    def test_mode_overlaps(self, flat400):
        # cos(2 theta) is orthogonal to the translation mode on (0, pi); only
        # the cos(theta) component moves the pole
        state = cd.recentre(cd.to_cartesian(flat400), flat400)
        th = flat400.grid.nodes
        assert abs(cd.pole_velocity(state, flat400, np.cos(2 * th))) < 1e-10
        speed = cd.pole_velocity(state, flat400, 0.3 * np.cos(th) + np.cos(2 * th))
        assert abs(speed - 0.3) < 1e-10
