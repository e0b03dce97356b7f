"""Tests for the quadcopter reference, coordinate change, and control assembly.

The heavyweight check here differentiates the *nonlinear* closed loop at a
reference point numerically and verifies that, in the error coordinates,
its Jacobian decouples into the autonomous symmetric block and the
integrator chains with exactly the gain-placed companion structure. That
exercises every term of the exact feedback reduction at once.
"""

import dataclasses
import math

import numpy as np
import pytest

from manifold_ctrl.embedding import StabilizationParams
from manifold_ctrl.errors import InvalidGains, SingularB0
from manifold_ctrl.matlib import E2, E3, cross, hat, orthogonality_residual, rot_exp
from manifold_ctrl.odesim import rk4_step
from manifold_ctrl.quadcopter import (
    bias_matrix,
    QuadErrorCoords,
    QuadGains,
    QuadState,
    QuadStateMul,
    assemble_controls,
    disturbance,
    invert_coordinate_change,
    outer_loop_vw,
    quad_error_coords,
    quad_reference_arrays,
    quad_rhs_modified,
    quad_rhs_mul_ext,
    reference_quad,
    validate_quad_gains,
)
from manifold_ctrl.rigid_body import block_companion

P1 = StabilizationParams(1.0)
I3 = np.eye(3)

GAINS = QuadGains(K0=64 * I3, K1=64 * I3, K2=32 * I3, K3=8 * I3, a0=20.0, a1=8.0)


def _state_on_reference(ref) -> QuadState:
    return QuadState(R=ref.R0.copy(), Omega=ref.Omega0.copy(), x=ref.x0.copy(),
                     v=ref.x0dot.copy(), f=ref.f0, fdot=ref.f0dot)


def _zero_errors() -> QuadErrorCoords:
    z3 = np.zeros(3)
    return QuadErrorCoords(Z_s=np.zeros((3, 3)), z_k=z3, zk_dot=z3, dOmega=z3,
                           dx=z3, dxdot=z3, df=0.0, dfdot=0.0, dxddot=z3,
                           dxdddot=z3, Zs_dot=np.zeros((3, 3)))


class TestReference:
    def test_translational_consistency_on_grid(self):
        ts = np.linspace(0.0, 20.0, 2001)
        a = quad_reference_arrays(ts, g=1.0)
        want = -E3 + a["f0"][:, None] * a["R0"][:, :, 2]
        worst = np.abs(a["x0ddot"] - want).max()
        assert worst < 1e-9

    def test_values_at_zero(self):
        ref = reference_quad(0.0)
        assert np.allclose(ref.x0, 0.0)
        assert np.allclose(ref.x0ddot, [0.0, 0.0, 1.0], atol=1e-15)
        assert ref.f0 == 2.0 and ref.f0dot == 0.0 and ref.q0 == 0.0

    def test_constant_thrust_scales_with_gravity(self):
        ref = reference_quad(2.2, g=9.81)
        assert ref.f0 == pytest.approx(2 * 9.81)
        assert np.allclose(ref.B0, np.diag([ref.f0, -ref.f0, 1.0]))

    def test_rotation_block_invariants(self):
        for t in np.linspace(0.0, 20.0, 101):
            ref = reference_quad(t)
            assert orthogonality_residual(ref.R0) < 1e-12

    def test_derivatives_by_finite_differences(self):
        h = 1e-6
        for t in np.linspace(0.1, 19.9, 23):
            ref = reference_quad(t)
            plus, minus = reference_quad(t + h), reference_quad(t - h)
            assert np.allclose((plus.R0 - minus.R0) / (2 * h), ref.R0dot, atol=1e-7)
            assert np.allclose((plus.R0dot - minus.R0dot) / (2 * h), ref.R0ddot,
                               atol=1e-6)
            assert np.allclose((plus.A0 - minus.A0) / (2 * h), ref.A0dot, atol=1e-6)
            assert np.allclose((plus.A0dot - minus.A0dot) / (2 * h), ref.A0ddot,
                               atol=1e-5)
            assert np.allclose((plus.x0 - minus.x0) / (2 * h), ref.x0dot, atol=1e-7)
            assert np.allclose((plus.x0dot - minus.x0dot) / (2 * h), ref.x0ddot,
                               atol=1e-7)
            assert np.allclose((plus.u0 - minus.u0) / (2 * h), ref.u0dot, atol=1e-7)


class TestPlant:
    def test_hover_balances_gravity(self):
        s = QuadState(R=I3, Omega=np.zeros(3), x=np.zeros(3), v=np.zeros(3),
                      f=1.0, fdot=0.0)
        ds = quad_rhs_modified(s, np.zeros(3), 0.0, P1, g=1.0)
        assert np.allclose(ds.v, 0.0)
        assert np.allclose(ds.R, 0.0, atol=1e-15)

    def test_double_thrust_accelerates_upward(self):
        s = QuadState(R=I3, Omega=np.zeros(3), x=np.zeros(3), v=np.zeros(3),
                      f=2.0, fdot=0.0)
        ds = quad_rhs_modified(s, np.zeros(3), 0.0, P1, g=1.0)
        assert np.allclose(ds.v, [0.0, 0.0, 1.0])

    def test_disturbance_enters_both_blocks(self):
        s = QuadState(R=I3, Omega=np.zeros(3), x=np.zeros(3), v=np.zeros(3),
                      f=1.0, fdot=0.0)
        d = np.array([1.0, 1.0, 1.0])
        u = np.array([0.5, 0.0, 0.0])
        ds = quad_rhs_modified(s, u, 0.0, P1, g=1.0, d=d)
        assert np.allclose(ds.Omega, u + d)
        assert np.allclose(ds.v, d)

    def test_zero_disturbance_is_nominal(self, rng):
        s = QuadState(R=rng.standard_normal((3, 3)), Omega=rng.standard_normal(3),
                      x=rng.standard_normal(3), v=rng.standard_normal(3),
                      f=1.5, fdot=-0.2)
        a = quad_rhs_modified(s, np.ones(3), 0.3, P1, g=1.0)
        b = quad_rhs_modified(s, np.ones(3), 0.3, P1, g=1.0, d=np.zeros(3))
        assert np.allclose(a.R, b.R) and np.allclose(a.v, b.v)

    def test_multiplicative_extension_thrust_block(self):
        s = QuadStateMul(R=I3, Omega=np.zeros(3), x=np.zeros(3), v=np.zeros(3),
                         f=2.0, h=0.5)
        ds = quad_rhs_mul_ext(s, np.zeros(3), 0.0, P1, g=1.0)
        assert ds.f == 1.0  # df = f h
        s0 = QuadStateMul(R=I3, Omega=np.zeros(3), x=np.zeros(3), v=np.zeros(3),
                          f=2.0, h=0.0)
        assert quad_rhs_mul_ext(s0, np.zeros(3), 0.0, P1, g=1.0).f == 0.0


class TestDisturbanceSignal:
    def test_peak_at_quarter_period(self):
        assert np.allclose(disturbance(3.25), [1.0, 1.0, 1.0])

    def test_zero_outside_window(self):
        assert np.array_equal(disturbance(2.0), np.zeros(3))
        assert np.array_equal(disturbance(4.5), np.zeros(3))

    def test_continuous_at_boundaries(self):
        assert np.abs(disturbance(3.0)).max() <= 1e-15
        assert np.abs(disturbance(4.0)).max() <= 1e-15
        assert np.abs(disturbance(3.0 + 1e-9)).max() <= 1e-7
        assert np.abs(disturbance(4.0 - 1e-9)).max() <= 1e-7


class TestErrorCoords:
    def test_zero_on_reference(self):
        ref = reference_quad(1.1)
        e = quad_error_coords(_state_on_reference(ref), ref, P1)
        for field in dataclasses.fields(e):
            assert np.allclose(getattr(e, field.name), 0.0, atol=1e-13), field.name

    def test_pure_thrust_error_acceleration(self):
        ref = reference_quad(0.8)
        s = dataclasses.replace(_state_on_reference(ref), f=ref.f0 + 1.0)
        e = quad_error_coords(s, ref, P1)
        assert np.allclose(e.dxddot, ref.R0 @ E3, atol=1e-12)

    def test_zk_dot_follows_the_linearized_law(self, rng):
        ref = reference_quad(2.4)
        s = QuadState(R=ref.R0 @ rot_exp(E2, 0.3), Omega=ref.Omega0 + rng.standard_normal(3),
                      x=ref.x0, v=ref.x0dot, f=ref.f0, fdot=0.0)
        e = quad_error_coords(s, ref, P1)
        assert np.allclose(e.zk_dot, cross(e.z_k, ref.Omega0) + e.dOmega, atol=1e-14)

    def test_coordinate_round_trip(self, rng):
        # 100 random error states at 20 random times, recovered to 1e-10.
        times = rng.uniform(0.0, 20.0, size=20)
        for k in range(100):
            t = times[k % 20]
            ref = reference_quad(t)
            A = rng.standard_normal((3, 3))
            Z_s = 0.2 * (A + A.T)
            z_k = rng.standard_normal(3) * 0.5
            dOmega = rng.standard_normal(3)
            dx = rng.standard_normal(3)
            dxdot = rng.standard_normal(3)
            df, dfdot = rng.standard_normal(2)
            R = ref.R0 @ (I3 + Z_s + hat(z_k))
            s = QuadState(R=R, Omega=ref.Omega0 + dOmega, x=ref.x0 + dx,
                          v=ref.x0dot + dxdot, f=ref.f0 + df, fdot=ref.f0dot + dfdot)
            e = quad_error_coords(s, ref, P1)
            assert np.allclose(e.Z_s, Z_s, atol=1e-12)
            assert np.allclose(e.z_k, z_k, atol=1e-12)
            got = invert_coordinate_change(e.dxddot, e.dxdddot, e.Z_s, e.z_k[2],
                                           ref, P1)
            zk_dot = cross(z_k, ref.Omega0) + dOmega
            want = (z_k[1], z_k[0], df, zk_dot[1], zk_dot[0], dfdot)
            assert np.allclose(got, want, atol=1e-10)


class TestOuterLoop:
    def test_zero_errors_zero_commands(self):
        v, w = outer_loop_vw(GAINS, _zero_errors())
        assert np.allclose(v, 0.0) and w == 0.0

    def test_position_chain_poles(self):
        # The placed poles are defective (Jordan pairs), so raw eigenvalues
        # carry ~1e-7 solver noise; the symmetric splitting cancels in the
        # cluster means, and exact integer arithmetic certifies that the
        # minimal polynomial is (l^2 + 4 l + 8)^2.
        A = block_companion([GAINS.K0, GAINS.K1, GAINS.K2, GAINS.K3])
        eigs = np.linalg.eigvals(A)
        upper = eigs[eigs.imag > 0]
        lower = eigs[eigs.imag < 0]
        assert upper.size == 6 and lower.size == 6
        assert np.abs(upper - (-2 + 2j)).max() < 1e-6
        assert abs(upper.mean() - (-2 + 2j)) < 1e-9
        assert abs(lower.mean() - (-2 - 2j)) < 1e-9
        q = A @ A + 4.0 * A + 8.0 * np.eye(12)
        assert np.abs(q @ q).max() == 0.0

    def test_attitude_pair_poles(self):
        roots = np.sort_complex(np.roots([1.0, GAINS.a1, GAINS.a0]))
        assert np.allclose(roots, np.sort_complex(np.array([-4 - 2j, -4 + 2j])),
                           atol=1e-12)

    def test_pid_variant_needs_integrals(self):
        pid = dataclasses.replace(GAINS, K_I=16 * I3, a_I=10.0, pid=True)
        with pytest.raises(InvalidGains):
            outer_loop_vw(pid, _zero_errors(), (None, 0.0))
        v, w = outer_loop_vw(pid, _zero_errors(), (np.array([1.0, 0.0, 0.0]), 2.0))
        assert np.allclose(v, [-16.0, 0.0, 0.0])
        assert w == pytest.approx(-20.0)

    def test_validate_gains(self):
        validate_quad_gains(GAINS)
        with pytest.raises(InvalidGains):
            validate_quad_gains(dataclasses.replace(GAINS, a0=-1.0))
        with pytest.raises(InvalidGains):
            validate_quad_gains(dataclasses.replace(GAINS, K0=-64 * I3))
        with pytest.raises(InvalidGains):
            validate_quad_gains(dataclasses.replace(GAINS, pid=True))


class TestAssembleControls:
    def test_zero_error_returns_reference_controls(self):
        for t in np.linspace(0.0, 20.0, 41):
            ref = reference_quad(t)
            u, q = assemble_controls(np.zeros(3), 0.0, _zero_errors(), ref, P1)
            assert np.array_equal(u, ref.u0)
            assert q == ref.q0

    def test_mixing_matrix_inverse(self):
        ref = reference_quad(0.0)
        assert np.allclose(np.linalg.inv(ref.B0), np.diag([0.5, -0.5, 1.0]))

    def test_singular_reference_thrust_raises(self):
        ref = reference_quad(1.0)
        bad = dataclasses.replace(ref, f0=1e-9)
        with pytest.raises(SingularB0):
            assemble_controls(np.zeros(3), 0.0, _zero_errors(), bad, P1)

    def test_column_evaluation_matches_full_bias_matrix(self, rng):
        # assemble_controls evaluates C e3 column-wise; the full-matrix
        # form must agree with it for random error states.
        for _ in range(25):
            t = rng.uniform(0.0, 20.0)
            ref = reference_quad(t)
            A = rng.standard_normal((3, 3))
            s = QuadState(
                R=ref.R0 @ (I3 + 0.2 * (A + A.T) + hat(0.3 * rng.standard_normal(3))),
                Omega=ref.Omega0 + rng.standard_normal(3),
                x=ref.x0 + rng.standard_normal(3),
                v=ref.x0dot + rng.standard_normal(3),
                f=ref.f0 + rng.standard_normal(), fdot=rng.standard_normal(),
            )
            e = quad_error_coords(s, ref, P1)
            v = rng.standard_normal(3)
            w = rng.standard_normal()
            u, q = assemble_controls(v, w, e, ref, P1)
            c_col = bias_matrix(e, ref, P1) @ E3
            b0_inv = np.array([1.0 / ref.f0, -1.0 / ref.f0, 1.0])
            mixed = b0_inv * (ref.R0.T @ (v - c_col))
            ut = np.array([mixed[1], mixed[0], w])
            du = -cross(e.zk_dot, ref.Omega0) - cross(e.z_k, ref.u0) + ut
            assert np.allclose(u, ref.u0 + du, atol=1e-10)
            assert q == pytest.approx(ref.q0 + mixed[2], abs=1e-10)


# ---------------------------------------------------------------------------
# Jacobian structure of the nonlinear closed loop at a reference point.
# ---------------------------------------------------------------------------


def _closed_loop_field(gains: QuadGains, p: StabilizationParams, g: float):
    def field(t, y):
        s = QuadState(R=y[:9].reshape(3, 3), Omega=y[9:12], x=y[12:15],
                      v=y[15:18], f=y[18], fdot=y[19])
        ref = reference_quad(t, g)
        e = quad_error_coords(s, ref, p)
        v, w = outer_loop_vw(gains, e)
        u, q = assemble_controls(v, w, e, ref, p, g)
        ds = quad_rhs_modified(s, u, q, p, g)
        return np.concatenate([ds.R.ravel(), ds.Omega, ds.x, ds.v,
                               [ds.f, ds.fdot]])

    return field


def _coords(t: float, y: np.ndarray, p: StabilizationParams, g: float) -> np.ndarray:
    s = QuadState(R=y[:9].reshape(3, 3), Omega=y[9:12], x=y[12:15], v=y[15:18],
                  f=y[18], fdot=y[19])
    ref = reference_quad(t, g)
    e = quad_error_coords(s, ref, p)
    Zs = e.Z_s
    return np.concatenate([
        [Zs[0, 0], Zs[1, 1], Zs[2, 2], Zs[0, 1], Zs[0, 2], Zs[1, 2]],
        e.dx, e.dxdot, e.dxddot, e.dxdddot, [e.z_k[2], e.zk_dot[2]],
    ])


def _coords_inverse(t: float, xi: np.ndarray, p: StabilizationParams,
                    g: float) -> np.ndarray:
    ref = reference_quad(t, g)
    Zs = np.array([
        [xi[0], xi[3], xi[4]],
        [xi[3], xi[1], xi[5]],
        [xi[4], xi[5], xi[2]],
    ])
    dx, dxdot = xi[6:9], xi[9:12]
    dxddot, dxdddot = xi[12:15], xi[15:18]
    zk3, zk3_dot = xi[18], xi[19]
    z_k2, z_k1, df, zd_k2, zd_k1, dfdot = invert_coordinate_change(
        dxddot, dxdddot, Zs, zk3, ref, p
    )
    z_k = np.array([z_k1, z_k2, zk3])
    zk_dot = np.array([zd_k1, zd_k2, zk3_dot])
    R = ref.R0 @ (I3 + Zs + hat(z_k))
    Omega = ref.Omega0 + (zk_dot - cross(z_k, ref.Omega0))
    return np.concatenate([
        R.ravel(), Omega, ref.x0 + dx, ref.x0dot + dxdot,
        [ref.f0 + df, ref.f0dot + dfdot],
    ])


class TestClosedLoopLinearization:
    def test_error_jacobian_decouples_into_gain_placed_chains(self):
        p, g = P1, 1.0
        t_star, eps, h = 1.3, 1e-6, 1e-5
        field = _closed_loop_field(GAINS, p, g)

        # Coordinate map and its inverse agree at the probe radius.
        probe = np.full(20, eps)
        assert np.allclose(
            _coords(t_star, _coords_inverse(t_star, probe, p, g), p, g),
            probe, atol=1e-12,
        )

        def flow_derivative(xi0: np.ndarray) -> np.ndarray:
            # Second-order one-sided difference of t -> coords(t, flow_t(y)).
            y0 = _coords_inverse(t_star, xi0, p, g)
            y1 = rk4_step(field, t_star, y0, h)
            y2 = rk4_step(field, t_star + h, y1, h)
            c0 = _coords(t_star, y0, p, g)
            c1 = _coords(t_star + h, y1, p, g)
            c2 = _coords(t_star + 2 * h, y2, p, g)
            return (-3.0 * c0 + 4.0 * c1 - c2) / (2.0 * h)

        A = np.empty((20, 20))
        for j in range(20):
            xi = np.zeros(20)
            xi[j] = eps
            A[:, j] = (flow_derivative(xi) - flow_derivative(-xi)) / (2.0 * eps)

        chain = A[6:18, 6:18]
        want_chain = block_companion([GAINS.K0, GAINS.K1, GAINS.K2, GAINS.K3])
        assert np.allclose(chain, want_chain, atol=5e-3)

        att = A[18:20, 18:20]
        assert np.allclose(att, [[0.0, 1.0], [-GAINS.a0, -GAINS.a1]], atol=5e-3)

        # The symmetric block neither feeds the chains (the bias term C
        # cancels it exactly) nor is fed by them.
        assert np.abs(A[6:20, 0:6]).max() < 1e-2
        assert np.abs(A[0:6, 6:20]).max() < 1e-2
