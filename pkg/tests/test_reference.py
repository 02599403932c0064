import math

import numpy as np
import pytest

from fourier_ocp.errors import ArgumentError
from fourier_ocp.problems import OcpDefinition, build_circulant_game, lq_particle_problem, rps_problem
from fourier_ocp.reference import (
    direct_transcription_reference,
    integrate_pontryagin,
    lq_analytic_control,
    lq_analytic_cost,
    lq_analytic_state,
    rk4_simulate,
    rps_shooting_reference,
)

U0 = (7 / 30, 1 / 3, 13 / 30)


def growth_problem():
    return OcpDefinition(
        name="growth", state_dim=1, horizon=1.0, control_weight=1.0,
        dynamics_rhs=lambda u, g: [u[0]], running_cost=lambda u, g, t=None: 0.0 * u[0],
    )


@pytest.fixture(scope="module")
def rps():
    return rps_problem(build_circulant_game(3), 6.0, 1.0)


@pytest.fixture(scope="module")
def shot(rps):
    return rps_shooting_reference(rps, U0)


class TestParticleAnalytic:
    def test_control_endpoints(self):
        assert lq_analytic_control(0.0, (0, 0), (1, 0), 1.0) == pytest.approx(6.0)
        assert lq_analytic_control(1.0, (0, 0), (1, 0), 1.0) == pytest.approx(-6.0)

    def test_drift_reaches_target(self):
        x0 = (0.5, 1.5)
        xT = (0.5 + 2.0 * 1.5, 1.5)
        t = np.linspace(0, 2, 7)
        np.testing.assert_allclose(lq_analytic_control(t, x0, xT, 2.0), 0.0, atol=1e-14)
        assert lq_analytic_cost(x0, xT, 1.0, 2.0) == pytest.approx(0.0, abs=1e-24)

    def test_cost_values(self):
        assert lq_analytic_cost((0, 0), (1, 0), 1.0, 1.0) == pytest.approx(12.0)
        assert lq_analytic_cost((0, 0), (1, 0), 4.0, 1.0) == pytest.approx(48.0)

    def test_state_hits_boundaries(self):
        x0, xT, T = (1.3, 1.0), (5.0, 0.0), 5.0
        s = lq_analytic_state([0.0, T], x0, xT, T)
        np.testing.assert_allclose(s, [x0, xT], atol=1e-12)

    def test_simulation_agrees(self):
        p = lq_particle_problem(5.0, 4.0, (5.0, 0.0))
        x0 = (2.0, 1.0)
        sim = rk4_simulate(p, x0, lambda t: lq_analytic_control(t, x0, (5.0, 0.0), 5.0))
        np.testing.assert_allclose(sim.states[-1], [5.0, 0.0], atol=1e-10)
        assert sim.cost == pytest.approx(lq_analytic_cost(x0, (5.0, 0.0), 4.0, 5.0), rel=1e-10)

    def test_time_outside(self):
        with pytest.raises(ArgumentError):
            lq_analytic_control(2.0, (0, 0), (1, 0), 1.0)


class TestRk4:
    def test_exponential(self):
        sim = rk4_simulate(growth_problem(), [1.0], 0.0, 1000)
        assert abs(sim.states[-1, 0] - math.e) < 1e-9

    def test_fourth_order(self):
        errs = [abs(rk4_simulate(growth_problem(), [1.0], 0.0, n).states[-1, 0] - math.e) for n in (20, 40)]
        assert 14 <= errs[0] / errs[1] <= 18

    def test_equilibrium_constant(self, rps):
        sim = rk4_simulate(rps, rps.target, lambda t: np.sin(t), 500)
        np.testing.assert_allclose(sim.states, np.tile(rps.target, (501, 1)), atol=1e-15)

    def test_simplex_invariance_long_horizon(self):
        p = rps_problem(build_circulant_game(3), 20.0, 1.0)
        sim = rk4_simulate(p, U0, 0.0, 4000)
        assert np.max(np.abs(sim.states.sum(axis=1) - 1)) <= 1e-6

    def test_rejects_few_steps(self):
        with pytest.raises(ArgumentError):
            rk4_simulate(growth_problem(), [1.0], 0.0, 5)


class TestShooting:
    def test_equilibrium_start(self, rps):
        res = rps_shooting_reference(rps, rps.target)
        assert res.cost == pytest.approx(0.0, abs=1e-20)
        np.testing.assert_allclose(res.trajectory.control, 0.0, atol=1e-14)
        np.testing.assert_allclose(res.costate, 0.0, atol=1e-14)

    def test_terminal_condition(self, shot):
        assert shot.terminal_residual <= 1e-8
        assert np.linalg.norm(shot.costate[-1]) <= 1e-8

    def test_stationarity(self, rps, shot):
        assert np.max(np.abs(shot.control_gradient(rps))) <= 1e-8

    def test_hamiltonian_nearly_constant(self, rps, shot):
        H = shot.hamiltonian(rps)
        assert H.max() - H.min() <= 1e-4

    def test_sensitivity(self, rps, shot):
        _, lam_t = integrate_pontryagin(rps, U0, shot.costate0 + 1e-6, 2000)
        assert np.linalg.norm(lam_t) > 1e-9

    def test_cost_below_uncontrolled(self, rps, shot):
        free = rk4_simulate(rps, U0, 0.0, 2000).cost
        assert 0 < shot.cost < free

    def test_needs_game(self):
        with pytest.raises(ArgumentError):
            rps_shooting_reference(lq_particle_problem(1.0, 1.0, (0, 0)), (0, 0))

    def test_transcription_agrees(self, rps, shot):
        j, gamma = direct_transcription_reference(rps, U0, intervals=500)
        assert gamma.shape == (500,)
        assert j == pytest.approx(shot.cost, rel=5e-3)
