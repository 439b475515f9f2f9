"""Single-shooting cost assembly and the adjoint gradient."""

import dataclasses

import numpy as np
import pytest

import refimpl
from mavmpc import load_scenario
from mavmpc.dynamics import ModelParams, hover_input
from mavmpc.obstacles import CornerPointSet, Ellipsoid, ObstacleSpec
from mavmpc.ocp import (CostWeights, DivergedTrajectoryError, OcpConfig,
                        ShootingProblem, grad_total_cost, reference_state,
                        shoot, stage_cost, terminal_cost, total_cost)

G = 9.81


@pytest.fixture(scope="module")
def flight_cfg():
    return load_scenario("cylinder").ocp


def free_cfg(horizon=5, **kw):
    """Obstacle-free problem with the flight weights."""
    return OcpConfig(horizon=horizon, dt=0.05,
                     weights=CostWeights.flight_defaults(),
                     params=ModelParams(), **kw)


def hover_state(p):
    x = np.zeros(8)
    x[0:3] = p
    return x


def random_state(rng):
    x = np.empty(8)
    x[0:2] = rng.uniform(-3, 3, 2)
    x[2] = rng.uniform(0.2, 2.5)
    x[3:6] = rng.uniform(-1, 1, 3)
    x[6:8] = rng.uniform(-0.3, 0.3, 2)
    return x


class TestStageCost:
    def test_zero_at_reference(self, flight_cfg):
        cfg = dataclasses.replace(flight_cfg,
                                  x_ref=reference_state([5.0, 5.0, 1.0]))
        x = hover_state([5.0, 5.0, 1.0])  # far from the obstacle
        assert stage_cost(x, hover_input(cfg.params), None, 0, cfg) == 0.0
        assert terminal_cost(x, cfg) == 0.0

    def test_position_deviation_weight(self):
        cfg = free_cfg(x_ref=reference_state([0.0, 0.0, 1.0]))
        x = hover_state([1.0, 0.0, 1.0])
        assert stage_cost(x, hover_input(cfg.params), None, 0, cfg) \
            == pytest.approx(3.0, abs=1e-12)

    def test_penalty_contribution_inside_cylinder(self, flight_cfg):
        cfg = dataclasses.replace(flight_cfg, x_ref=reference_state([0, 0, 1]))
        x = hover_state([0.0, 0.0, 1.0])  # on the obstacle axis
        val = stage_cost(x, hover_input(cfg.params), None, 0, cfg)
        assert val == pytest.approx(1e4 * 0.26736328125, rel=1e-12)

    def test_rate_term(self):
        cfg = free_cfg(x_ref=reference_state([0, 0, 1]))
        cfg = dataclasses.replace(
            cfg, weights=dataclasses.replace(cfg.weights,
                                             r_delta=np.array([1.0, 2.0, 3.0])))
        x = hover_state([0, 0, 1])
        u = hover_input(cfg.params)
        u_prev = u + np.array([0.5, 0.1, -0.2])
        with_rate = stage_cost(x, u, u_prev, 0, cfg)
        without = stage_cost(x, u, None, 0, cfg)
        assert with_rate - without == pytest.approx(
            1.0 * 0.25 + 2.0 * 0.01 + 3.0 * 0.04, rel=1e-12)


class TestShoot:
    def test_equilibrium_invariance(self, flight_cfg):
        x0 = hover_state([-2.0, 0.01, 1.0])
        u = np.tile(hover_input(flight_cfg.params), flight_cfg.horizon)
        xs = shoot(u, x0, flight_cfg)
        assert xs.shape == (flight_cfg.horizon + 1, 8)
        for k in range(xs.shape[0]):
            np.testing.assert_array_equal(xs[k], x0)

    def test_single_step_composition(self):
        cfg = free_cfg(horizon=1)
        x0 = hover_state([0, 0, 1.0])
        x0[3] = 1.0
        u = hover_input(cfg.params)
        xs = shoot(u, x0, cfg)
        np.testing.assert_allclose(xs[1], refimpl.euler_step(x0, u, 0.05),
                                   atol=1e-14)

    def test_length_contract(self, flight_cfg):
        u = np.tile(hover_input(flight_cfg.params), flight_cfg.horizon)
        assert shoot(u, hover_state([-2, 0, 1]), flight_cfg).shape[0] == 41

    def test_length_mismatch_rejected(self, flight_cfg):
        with pytest.raises(ValueError):
            shoot(np.zeros(7), hover_state([0, 0, 1]), flight_cfg)

    def test_diverged_trajectory_raises(self):
        params = ModelParams(tau_r=1e-9)  # absurdly stiff attitude loop
        cfg = OcpConfig(horizon=40, dt=0.05,
                        weights=CostWeights.flight_defaults(), params=params,
                        u_upper=np.array([2 * G, 0.5, 0.5]))
        u = np.tile([G, 0.5, 0.5], 40)
        with pytest.raises(DivergedTrajectoryError):
            shoot(u, hover_state([0, 0, 1]), cfg)
        with pytest.raises(DivergedTrajectoryError):
            total_cost(u, hover_state([0, 0, 1]), cfg)


class TestTotalCost:
    def test_zero_at_hover_reference(self):
        cfg = free_cfg(horizon=10, x_ref=reference_state([1.0, 2.0, 1.5]))
        x0 = hover_state([1.0, 2.0, 1.5])
        u = np.tile(hover_input(cfg.params), 10)
        assert total_cost(u, x0, cfg) == 0.0

    def test_matches_stage_summation(self, flight_cfg):
        cfg = dataclasses.replace(flight_cfg,
                                  x_ref=reference_state([2.0, 0.0, 1.5]))
        rng = np.random.default_rng(17)
        lower, upper = cfg.input_box()
        for _ in range(5):
            x0 = random_state(rng)
            u = rng.uniform(lower, upper)
            xs = shoot(u, x0, cfg)
            by_stages = sum(stage_cost(xs[k], u[3 * k:3 * k + 3], None, k, cfg)
                            for k in range(cfg.horizon))
            by_stages += terminal_cost(xs[cfg.horizon], cfg)
            assert total_cost(u, x0, cfg) == pytest.approx(by_stages, rel=1e-12)

    def test_matches_independent_reimplementation(self, flight_cfg):
        x_ref_p = [2.0, 0.0, 1.5]
        cfg = dataclasses.replace(flight_cfg, x_ref=reference_state(x_ref_p))
        rng = np.random.default_rng(23)
        lower, upper = cfg.input_box()
        x0 = hover_state([-2.0, 0.0, 1.0])
        for _ in range(5):
            u = rng.uniform(lower, upper)
            expected = refimpl.total_cost(u, x0, reference_state(x_ref_p), 40)
            assert total_cost(u, x0, cfg) == pytest.approx(expected, rel=1e-10)
            x0 = random_state(rng)

    def test_purity(self, flight_cfg):
        rng = np.random.default_rng(2)
        lower, upper = flight_cfg.input_box()
        u = rng.uniform(lower, upper)
        x0 = random_state(rng)
        a = total_cost(u, x0, flight_cfg)
        b = total_cost(u, x0, flight_cfg)
        assert a == b


class TestGradient:
    def test_zero_at_interior_minimizer(self):
        cfg = free_cfg(horizon=1, x_ref=reference_state([0.0, 0.0, 1.0]))
        x0 = hover_state([0.0, 0.0, 1.0])
        g = grad_total_cost(hover_input(cfg.params), x0, cfg)
        assert np.max(np.abs(g)) < 1e-8

    # the difference-quotient noise floor scales with the cost magnitude,
    # which grows with the horizon; tolerances reflect that
    @pytest.mark.parametrize("horizon,tol", [(1, 1e-6), (5, 1e-6), (40, 1e-5)])
    def test_finite_difference_agreement(self, flight_cfg, horizon, tol):
        cfg = dataclasses.replace(flight_cfg, horizon=horizon,
                                  x_ref=reference_state([2.0, 0.0, 1.5]))
        rng = np.random.default_rng(31 + horizon)
        lower, upper = cfg.input_box()
        for _ in range(5):
            x0 = random_state(rng)
            u = rng.uniform(lower, upper)
            problem = ShootingProblem(cfg, x0)
            _, g = problem.cost_and_grad(u)
            g_fd = refimpl.fd_gradient(problem.cost, u)
            rel = np.abs(g - g_fd) / np.maximum(1.0, np.abs(g_fd))
            assert rel.max() < tol

    def test_finite_difference_agreement_rk4(self):
        cfg = free_cfg(horizon=5, integrator="rk4",
                       x_ref=reference_state([1.0, 0.0, 1.5]))
        rng = np.random.default_rng(41)
        lower, upper = cfg.input_box()
        x0 = random_state(rng)
        u = rng.uniform(lower, upper)
        problem = ShootingProblem(cfg, x0)
        _, g = problem.cost_and_grad(u)
        g_fd = refimpl.fd_gradient(problem.cost, u)
        assert (np.abs(g - g_fd) / np.maximum(1, np.abs(g_fd))).max() < 1e-6

    def test_finite_difference_agreement_rate_term(self):
        weights = dataclasses.replace(CostWeights.flight_defaults(),
                                      r_delta=np.array([0.5, 4.0, 4.0]))
        cfg = OcpConfig(horizon=6, dt=0.05, weights=weights,
                        params=ModelParams(),
                        x_ref=reference_state([1.0, 0.0, 1.0]),
                        u_prev=np.array([G, 0.1, -0.1]))
        rng = np.random.default_rng(53)
        lower, upper = cfg.input_box()
        x0 = random_state(rng)
        u = rng.uniform(lower, upper)
        problem = ShootingProblem(cfg, x0)
        _, g = problem.cost_and_grad(u)
        g_fd = refimpl.fd_gradient(problem.cost, u)
        assert (np.abs(g - g_fd) / np.maximum(1, np.abs(g_fd))).max() < 1e-6

    def test_finite_difference_agreement_moving_obstacle(self):
        ball = ObstacleSpec(
            constraints=(Ellipsoid(center=lambda t: np.array([0.5 * t, 0.0, 1.0]),
                                   m=np.eye(3) / 0.6 ** 2),),
            weight=100.0, terminal_weight=100.0)
        cfg = OcpConfig(horizon=8, dt=0.05,
                        weights=CostWeights.flight_defaults(),
                        params=ModelParams(), obstacles=(ball,),
                        corners=CornerPointSet(),
                        x_ref=reference_state([1.0, 0.0, 1.0]))
        x0 = hover_state([0.0, 0.05, 1.0])
        rng = np.random.default_rng(59)
        lower, upper = cfg.input_box()
        u = rng.uniform(lower, upper)
        problem = ShootingProblem(cfg, x0, t0=0.3)
        _, g = problem.cost_and_grad(u)
        g_fd = refimpl.fd_gradient(problem.cost, u)
        assert (np.abs(g - g_fd) / np.maximum(1, np.abs(g_fd))).max() < 1e-6

    def test_trailing_perturbation_leaves_trajectory_prefix(self, flight_cfg):
        cfg = dataclasses.replace(flight_cfg, horizon=10,
                                  x_ref=reference_state([2.0, 0.0, 1.5]))
        rng = np.random.default_rng(61)
        lower, upper = cfg.input_box()
        x0 = random_state(rng)
        u = rng.uniform(lower, upper)
        u2 = u.copy()
        u2[-3:] += np.array([0.1, -0.05, 0.05])
        xs1 = shoot(u, x0, cfg)
        xs2 = shoot(u2, x0, cfg)
        # states up to the last stage are untouched by the last input block
        np.testing.assert_array_equal(xs1[:-1], xs2[:-1])
        for k in range(cfg.horizon - 1):
            a = stage_cost(xs1[k], u[3 * k:3 * k + 3], None, k, cfg)
            b = stage_cost(xs2[k], u2[3 * k:3 * k + 3], None, k, cfg)
            assert a == b

    def test_trailing_perturbation_gradient_identity_input_only_cost(self):
        # with no state coupling in the cost the gradient blocks decouple
        weights = CostWeights(q=np.zeros(8), r=np.array([2.0, 10.0, 10.0]),
                              qf=np.zeros(8))
        cfg = OcpConfig(horizon=6, dt=0.05, weights=weights, params=ModelParams())
        rng = np.random.default_rng(67)
        lower, upper = cfg.input_box()
        x0 = random_state(rng)
        u = rng.uniform(lower, upper)
        u2 = u.copy()
        u2[-3:] += np.array([0.2, -0.1, 0.1])
        g1 = grad_total_cost(u, x0, cfg)
        g2 = grad_total_cost(u2, x0, cfg)
        np.testing.assert_array_equal(g1[:-3], g2[:-3])


class TestConfig:
    def test_default_input_box(self):
        cfg = free_cfg()
        np.testing.assert_allclose(cfg.u_lower, [0.0, -0.5, -0.5])
        np.testing.assert_allclose(cfg.u_upper, [2 * G, 0.5, 0.5])
        lower, upper = cfg.input_box()
        assert lower.shape == (cfg.n_inputs,) == (3 * cfg.horizon,)

    def test_default_reference_input_is_hover(self):
        cfg = free_cfg()
        np.testing.assert_allclose(cfg.u_ref, [G, 0.0, 0.0])

    def test_validation(self):
        with pytest.raises(ValueError):
            free_cfg(horizon=0)
        with pytest.raises(ValueError):
            OcpConfig(horizon=1, dt=-1.0, weights=CostWeights.flight_defaults())
        with pytest.raises(ValueError):
            free_cfg(integrator="verlet")
        with pytest.raises(ValueError):
            CostWeights(q=np.full(8, -1.0), r=np.ones(3), qf=np.ones(8))

    def test_with_reference(self):
        cfg = free_cfg().with_reference([1.0, 2.0, 3.0])
        np.testing.assert_array_equal(cfg.x_ref[:3], [1.0, 2.0, 3.0])
        np.testing.assert_array_equal(cfg.x_ref[3:], np.zeros(5))
