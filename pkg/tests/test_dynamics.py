"""Vehicle model: rotation matrices, derivatives, integration steps and
their Jacobians."""

import math

import numpy as np
import pytest

import refimpl
from mavmpc.dynamics import (ControlInput, MavState, ModelParams, derivative,
                             hover_input, rotation_matrix, step,
                             step_jacobians)

PARAMS = ModelParams()


def hover_state(p=(0.0, 0.0, 1.0)):
    x = np.zeros(8)
    x[0:3] = p
    return x


class TestRotationMatrix:
    def test_zero_angles_identity(self):
        np.testing.assert_array_equal(rotation_matrix(0.0, 0.0), np.eye(3))

    @pytest.mark.parametrize("theta_r", [-0.4, 0.1, 0.5])
    def test_roll_only_thrust_column(self, theta_r):
        t = 7.3
        out = rotation_matrix(theta_r, 0.0) @ np.array([0.0, 0.0, t])
        expected = np.array([0.0, -t * math.sin(theta_r), t * math.cos(theta_r)])
        np.testing.assert_allclose(out, expected, atol=1e-14)

    @pytest.mark.parametrize("theta_p", [-0.5, 0.2, 0.45])
    def test_pitch_only_thrust_column(self, theta_p):
        t = 11.0
        out = rotation_matrix(0.0, theta_p) @ np.array([0.0, 0.0, t])
        expected = np.array([t * math.sin(theta_p), 0.0, t * math.cos(theta_p)])
        np.testing.assert_allclose(out, expected, atol=1e-14)

    def test_orthogonality_and_determinant(self):
        rng = np.random.default_rng(12)
        for _ in range(1000):
            tr, tp = rng.uniform(-math.pi / 2, math.pi / 2, 2)
            r = rotation_matrix(tr, tp)
            assert np.max(np.abs(r.T @ r - np.eye(3))) < 1e-12
            assert abs(np.linalg.det(r) - 1.0) < 1e-12

    def test_matches_reference_construction(self):
        rng = np.random.default_rng(5)
        for _ in range(50):
            tr, tp = rng.uniform(-1.5, 1.5, 2)
            np.testing.assert_allclose(rotation_matrix(tr, tp),
                                       refimpl.rotation(tr, tp), atol=1e-14)


class TestDerivative:
    def test_hover_equilibrium_is_exact_zero(self):
        for p in ([0, 0, 0], [3.0, -2.0, 1.5]):
            x = hover_state(p)
            np.testing.assert_array_equal(
                derivative(x, hover_input(PARAMS), PARAMS), np.zeros(8))

    def test_drag_term(self):
        x = hover_state()
        x[3] = 1.0  # vx
        out = derivative(x, hover_input(PARAMS), PARAMS)
        np.testing.assert_allclose(out[3:6], [-0.1, 0.0, 0.0], atol=1e-15)

    def test_attitude_lag(self):
        x = hover_state()
        x[6] = 0.2
        out = derivative(x, np.array([PARAMS.g, 0.0, 0.0]), PARAMS)
        assert out[6] == pytest.approx(-0.4, abs=1e-15)

    def test_matches_reference_model(self):
        rng = np.random.default_rng(77)
        for _ in range(200):
            x = rng.uniform(-2, 2, 8)
            u = np.array([rng.uniform(0, 20), *rng.uniform(-0.5, 0.5, 2)])
            np.testing.assert_allclose(derivative(x, u, PARAMS),
                                       refimpl.deriv(x, u), atol=1e-13)


class TestStep:
    def test_equilibrium_fixed_point(self):
        x = hover_state([0.0, 0.0, 1.0])
        u = hover_input(PARAMS)
        for method in ("euler", "rk4"):
            for dt in (0.01, 0.05, 0.5):
                np.testing.assert_array_equal(step(x, u, PARAMS, dt, method), x)

    def test_euler_single_step_arithmetic(self):
        x = hover_state([0.0, 0.0, 1.0])
        x[3] = 1.0
        out = step(x, hover_input(PARAMS), PARAMS, 0.05, "euler")
        np.testing.assert_allclose(out[0:3], [0.05, 0.0, 1.0], atol=1e-15)
        assert out[3] == pytest.approx(1.0 - 0.05 * 0.1, abs=1e-15)

    def test_deterministic(self):
        rng = np.random.default_rng(3)
        x = rng.uniform(-1, 1, 8)
        u = np.array([9.0, 0.1, -0.2])
        for method in ("euler", "rk4"):
            a = step(x, u, PARAMS, 0.05, method)
            b = step(x, u, PARAMS, 0.05, method)
            np.testing.assert_array_equal(a, b)

    def test_rejects_bad_dt_and_method(self):
        with pytest.raises(ValueError):
            step(hover_state(), hover_input(PARAMS), PARAMS, 0.0)
        with pytest.raises(ValueError):
            step(hover_state(), hover_input(PARAMS), PARAMS, 0.05, "heun")

    def test_rk4_observed_order(self):
        """One-second integration with held inputs per coarse interval;
        halving dt must shrink the endpoint error at fourth order
        (observed >= 3.5)."""
        def input_at(t):
            return np.array([PARAMS.g + 2.0 * math.sin(t),
                             0.3 * math.sin(2 * t),
                             0.2 * math.cos(t)])

        def endpoint(dt, substeps):
            x = hover_state([0.0, 0.0, 1.0])
            t = 0.0
            n = int(round(1.0 / dt))
            for _ in range(n):
                u = input_at(t)
                if substeps == 1:
                    x = step(x, u, PARAMS, dt, "rk4")
                else:
                    for _ in range(substeps):
                        x = step(x, u, PARAMS, dt / substeps, "rk4")
                t += dt
            return x

        errs = []
        for dt in (0.05, 0.025, 0.0125):
            ref = endpoint(dt, 100)
            errs.append(np.max(np.abs(endpoint(dt, 1) - ref)))
        orders = [math.log2(errs[i] / errs[i + 1]) for i in range(2)]
        assert min(orders) >= 3.5


class TestStepJacobians:
    @pytest.mark.parametrize("method", ["euler", "rk4"])
    def test_matches_finite_differences(self, method):
        rng = np.random.default_rng(11)
        for _ in range(20):
            x = rng.uniform(-1.5, 1.5, 8)
            u = np.array([rng.uniform(0, 19), *rng.uniform(-0.5, 0.5, 2)])
            a, b = step_jacobians(x, u, PARAMS, 0.05, method)
            eps = 1e-7
            for i in range(8):
                dx = np.zeros(8)
                dx[i] = eps
                col = (step(x + dx, u, PARAMS, 0.05, method)
                       - step(x - dx, u, PARAMS, 0.05, method)) / (2 * eps)
                np.testing.assert_allclose(a[:, i], col, atol=1e-7)
            for j in range(3):
                du = np.zeros(3)
                du[j] = eps
                col = (step(x, u + du, PARAMS, 0.05, method)
                       - step(x, u - du, PARAMS, 0.05, method)) / (2 * eps)
                np.testing.assert_allclose(b[:, j], col, atol=1e-7)


class TestTypes:
    def test_model_params_validation(self):
        with pytest.raises(ValueError):
            ModelParams(tau_r=0.0)
        with pytest.raises(ValueError):
            ModelParams(a_x=-0.1)
        with pytest.raises(ValueError):
            ModelParams(g=0.0)

    def test_state_round_trip(self):
        s = MavState(p=[1, 2, 3], v=[0.1, 0.2, 0.3], theta_r=0.05, theta_p=-0.1)
        np.testing.assert_array_equal(MavState.from_vector(s.as_vector()).as_vector(),
                                      s.as_vector())
        assert s.attitude_ok()

    def test_state_rejects_non_finite(self):
        with pytest.raises(ValueError):
            MavState(p=[np.nan, 0, 0])

    def test_control_input_thrust_sign(self):
        with pytest.raises(ValueError):
            ControlInput(t_d=-0.1)
        np.testing.assert_array_equal(ControlInput(9.81).as_vector(),
                                      [9.81, 0.0, 0.0])
