"""Tests for the constraint potential, its gradient, and decay fitting."""

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from manifold_ctrl.embedding import (
    DecayFit,
    StabilizationParams,
    fit_decay_rate,
    grad_tilde_v,
    modified_rhs,
    tilde_v,
)
from manifold_ctrl.errors import AllBelowFloor, TooFewSamples
from manifold_ctrl.matlib import frob, hat, orthogonality_residual, rot_exp
from manifold_ctrl.odesim import rk4_step

from _helpers import random_rotation

P1 = StabilizationParams(1.0)

mat3s = arrays(np.float64, (3, 3),
               elements=st.floats(-3.0, 3.0, allow_nan=False, allow_infinity=False))


def _rigid_base(t, state, u):
    R, Omega = state
    return R @ hat(Omega), u


def _flat_modified_field(u_of_t, p):
    field = modified_rhs(_rigid_base, p)

    def flat(t, y):
        dR, dOm = field(t, (y[:9].reshape(3, 3), y[9:]), u_of_t(t))
        return np.concatenate([dR.ravel(), dOm])

    return flat


class TestStabilizationParams:
    def test_rejects_nonpositive_gain(self):
        with pytest.raises(ValueError):
            StabilizationParams(0.0)
        with pytest.raises(ValueError):
            StabilizationParams(-1.0)


class TestTildeV:
    def test_zero_on_rotations(self):
        assert tilde_v(rot_exp(np.array([0.0, 0.0, 1.0]), 1.2), P1) < 1e-30

    def test_doubled_identity(self):
        assert tilde_v(2.0 * np.eye(3), P1) == pytest.approx(6.75, abs=1e-14)

    def test_zero_matrix_with_gain_four(self):
        assert tilde_v(np.zeros((3, 3)), StabilizationParams(4.0)) == pytest.approx(
            3.0, abs=1e-15
        )

    @given(mat3s)
    def test_nonnegative_and_vanishes_only_on_constraint(self, R):
        v = tilde_v(R, P1)
        assert v >= 0.0
        residual = orthogonality_residual(R)
        if residual > 1e-6:
            assert v > 0.0
        assert v == pytest.approx(0.25 * residual**2, rel=1e-9, abs=1e-15)

    def test_on_rotation_is_floating_zero(self, rng):
        assert tilde_v(random_rotation(rng), P1) < 1e-28


class TestGradTildeV:
    def test_vanishes_on_rotations(self, rng):
        g = grad_tilde_v(random_rotation(rng), P1)
        assert np.linalg.norm(g) < 1e-13

    def test_doubled_identity(self):
        assert np.allclose(grad_tilde_v(2.0 * np.eye(3), P1), 6.0 * np.eye(3))

    def test_matches_central_finite_differences(self, rng):
        # 20 random points and directions, step 1e-6, relative error < 1e-6.
        h = 1e-6
        p = StabilizationParams(1.7)
        for _ in range(20):
            R = rng.standard_normal((3, 3))
            D = rng.standard_normal((3, 3))
            fd = (tilde_v(R + h * D, p) - tilde_v(R - h * D, p)) / (2.0 * h)
            exact = frob(grad_tilde_v(R, p), D)
            assert fd == pytest.approx(exact, rel=1e-6, abs=1e-9)


class TestModifiedRhs:
    def test_coincides_with_base_on_constraint_set(self, rng):
        R = random_rotation(rng)
        Om = rng.standard_normal(3)
        u = rng.standard_normal(3)
        field = modified_rhs(_rigid_base, P1)
        dR, dOm = field(0.0, (R, Om), u)
        dR0, dOm0 = _rigid_base(0.0, (R, Om), u)
        assert np.allclose(dR, dR0, atol=1e-13)
        assert np.array_equal(dOm, dOm0)

    def test_rotation_block_correction_at_doubled_identity(self):
        field = modified_rhs(_rigid_base, P1)
        dR, dOm = field(0.0, (2.0 * np.eye(3), np.zeros(3)), np.zeros(3))
        assert np.allclose(dR, -6.0 * np.eye(3))
        assert np.array_equal(dOm, np.zeros(3))

    def test_potential_derivative_along_flow(self, rng):
        # d/dt V = <grad, dR> must equal -||grad||^2 pointwise since the
        # base field is tangent to the level sets of the potential.
        field = modified_rhs(_rigid_base, P1)
        for _ in range(10):
            R = rng.standard_normal((3, 3)) * 0.8 + np.eye(3)
            Om = rng.standard_normal(3)
            dR, _ = field(0.0, (R, Om), rng.standard_normal(3))
            g = grad_tilde_v(R, P1)
            assert frob(g, dR) == pytest.approx(-frob(g, g), rel=1e-10, abs=1e-12)

    def test_potential_monotone_and_reaches_floor(self, rng):
        # Arbitrary bounded control; starts inside the residual < 0.5 basin.
        def u_of_t(t):
            return np.array([np.sin(t), np.cos(2.0 * t), 0.5])

        flat = _flat_modified_field(u_of_t, P1)
        for _ in range(3):
            Q = random_rotation(rng)
            E = rng.standard_normal((3, 3))
            R = Q @ (np.eye(3) + 0.03 * (E + E.T))
            assert orthogonality_residual(R) < 0.5
            y = np.concatenate([R.ravel(), rng.standard_normal(3)])
            dt = 1e-3
            values = [tilde_v(R, P1)]
            for k in range(12000):
                y = rk4_step(flat, k * dt, y, dt)
                if (k + 1) % 10 == 0:
                    values.append(tilde_v(y[:9].reshape(3, 3), P1))
            values = np.array(values)
            assert np.all(np.diff(values) <= 1e-9)
            assert values[-1] < 1e-20

    def test_decay_rate_from_inflated_identity(self):
        # Transversal contraction pulls 1.1*I back to the constraint set at
        # an empirical rate near -4 for unit gain (rate 2*k_e on the
        # residual, squared in the potential).
        flat = _flat_modified_field(lambda t: np.zeros(3), P1)
        y = np.concatenate([(1.1 * np.eye(3)).ravel(), np.zeros(3)])
        dt = 1e-3
        times, values = [0.0], [tilde_v(1.1 * np.eye(3), P1)]
        for k in range(5000):
            y = rk4_step(flat, k * dt, y, dt)
            if (k + 1) % 10 == 0:
                times.append((k + 1) * dt)
                values.append(tilde_v(y[:9].reshape(3, 3), P1))
        fit = fit_decay_rate(times, values)
        assert fit.rate < -3.5
        assert fit.r2 > 0.99


class TestFitDecayRate:
    def test_exact_exponential(self):
        t = np.arange(0.0, 1.0001, 0.1)
        fit = fit_decay_rate(t, np.exp(-2.0 * t))
        assert fit.rate == pytest.approx(-2.0, abs=1e-9)
        assert fit.r2 == pytest.approx(1.0, abs=1e-12)
        assert fit.samples == 11

    def test_constant_series(self):
        fit = fit_decay_rate([0.0, 1.0, 2.0], [3.0, 3.0, 3.0])
        assert fit.rate == 0.0
        assert fit.r2 == 1.0

    def test_too_few_samples(self):
        with pytest.raises(TooFewSamples):
            fit_decay_rate([1.0], [1.0])

    def test_all_below_floor(self):
        with pytest.raises(AllBelowFloor):
            fit_decay_rate([0.0, 1.0], [1e-16, 1e-18])

    def test_floor_drops_noise_tail(self):
        t = np.arange(0.0, 3.0, 0.1)
        v = np.exp(-2.0 * t)
        v[-5:] = 1e-15  # simulated noise floor
        fit = fit_decay_rate(t, v)
        assert fit.rate == pytest.approx(-2.0, abs=1e-9)
        assert fit.samples == t.size - 5

    def test_returns_dataclass(self):
        fit = fit_decay_rate([0.0, 1.0], [1.0, 0.1])
        assert isinstance(fit, DecayFit)
