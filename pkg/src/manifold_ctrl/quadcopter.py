"""Quadcopter with thrust dynamic extension and exact outer-loop reduction.

The plant is position/attitude dynamics ``ddx = -g e3 + f R e3`` with the
thrust-per-mass ``f`` promoted to a state through a double integrator
``ddf = q`` (or, alternatively, the sign-preserving extension
``df = f h, dh = q``). The rotational block reuses the rigid-body reference
and its transversal stabilization.

Around the reference, the error coordinates

    ``(Z_s, dx, dxdot, dxddot, dxdddot, z_k3, zdot_k3)``

globally replace the primary errors, and an exact feedback turns the
tracking problem into a chain of integrators ``dx'''' = v``,
``zddot_k3 = w`` plus the autonomous contraction of ``Z_s``. Pole placement
on those chains then gives exponential tracking for the nonlinear plant.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .embedding import StabilizationParams
from .errors import InvalidGains, SingularB0
from .matlib import E3, Mat3, Vec3, cross, decompose, hat, skew_vee
from .rigid_body import TOL_HURWITZ, block_companion, rigid_reference_arrays

#: The input-mixing matrix ``B0 = diag(f0, -f0, 1)`` is declared singular
#: when ``|f0| < B0_FLOOR_FACTOR * g``; far below the reference thrust,
#: this only catches genuinely degenerate configurations.
B0_FLOOR_FACTOR = 1e-6

_EYE3 = np.eye(3)
_EYE3.setflags(write=False)


@dataclass(frozen=True)
class QuadState:
    """Extended quadcopter state with double-integrator thrust.

    ``f`` is thrust per unit mass (m/s^2); the ambient model does not
    constrain its sign.
    """

    R: Mat3
    Omega: Vec3
    x: Vec3
    v: Vec3
    f: float
    fdot: float


@dataclass(frozen=True)
class QuadStateMul:
    """Quadcopter state under the multiplicative thrust extension.

    ``df = f h`` keeps ``f`` positive along any flow with ``f(0) > 0``.
    """

    R: Mat3
    Omega: Vec3
    x: Vec3
    v: Vec3
    f: float
    h: float


@dataclass(frozen=True)
class ReferenceSample:
    """All reference signals and derivatives needed by the controller.

    ``A0 = f0 R0`` and ``B0 = diag(f0, -f0, 1)``; the higher derivatives
    are computed analytically from the closed forms, never numerically.
    """

    R0: Mat3
    R0dot: Mat3
    R0ddot: Mat3
    Omega0: Vec3
    u0: Vec3
    u0dot: Vec3
    x0: Vec3
    x0dot: Vec3
    x0ddot: Vec3
    f0: float
    f0dot: float
    f0ddot: float
    q0: float
    A0: Mat3
    A0dot: Mat3
    A0ddot: Mat3
    B0: Mat3


@dataclass(frozen=True)
class QuadErrorCoords:
    """Primary tracking errors plus the derived acceleration errors.

    ``zk_dot`` is the derivative of the attitude-error vector under the
    linearized error dynamics, ``z_k x Omega0 + dOmega``, and ``Zs_dot``
    the matching rate ``[Z_s, hat(Omega0)] - 2 k_e Z_s`` of the symmetric
    block. ``dxddot`` and ``dxdddot`` are the linearized second and third
    position-error derivatives reconstructed from the primary errors.
    """

    Z_s: Mat3
    z_k: Vec3
    zk_dot: Vec3
    dOmega: Vec3
    dx: Vec3
    dxdot: Vec3
    df: float
    dfdot: float
    dxddot: Vec3
    dxdddot: Vec3
    Zs_dot: Mat3


@dataclass(frozen=True)
class QuadGains:
    """Outer-loop gains: position chain ``K0..K3`` and yaw-error pair
    ``a0, a1``; optional integral gains activate the PID variant."""

    K0: Mat3
    K1: Mat3
    K2: Mat3
    K3: Mat3
    a0: float
    a1: float
    K_I: Mat3 | None = None
    a_I: float | None = None
    pid: bool = False


def quad_reference_arrays(ts: np.ndarray, g: float = 1.0) -> dict[str, np.ndarray]:
    """Vectorized quadcopter reference over an array of times.

    The rotational part is shared with the rigid-body reference; the
    position reference satisfies ``x0ddot = -g e3 + f0 R0 e3`` with the
    constant thrust ``f0 = 2 g``.
    """
    ts = np.asarray(ts, dtype=float)
    rot = rigid_reference_arrays(ts)
    R0, Omega0, u0 = rot["R0"], rot["Omega0"], rot["u0"]
    s, c = np.sin(ts), np.cos(ts)
    n = ts.shape[0]

    u0dot = np.stack([s, c - 4 * s * c, s + 2 * (c * c - s * s)], axis=1)

    hat_Om0 = np.zeros((n, 3, 3))
    hat_Om0[:, 0, 1] = -Omega0[:, 2]
    hat_Om0[:, 0, 2] = Omega0[:, 1]
    hat_Om0[:, 1, 0] = Omega0[:, 2]
    hat_Om0[:, 1, 2] = -Omega0[:, 0]
    hat_Om0[:, 2, 0] = -Omega0[:, 1]
    hat_Om0[:, 2, 1] = Omega0[:, 0]
    hat_u0 = np.zeros((n, 3, 3))
    hat_u0[:, 0, 1] = -u0[:, 2]
    hat_u0[:, 0, 2] = u0[:, 1]
    hat_u0[:, 1, 0] = u0[:, 2]
    hat_u0[:, 1, 2] = -u0[:, 0]
    hat_u0[:, 2, 0] = -u0[:, 1]
    hat_u0[:, 2, 1] = u0[:, 0]

    R0dot = R0 @ hat_Om0
    R0ddot = R0 @ (hat_Om0 @ hat_Om0 + hat_u0)

    f0 = np.full(n, 2.0 * g)
    zeros = np.zeros(n)
    A0 = 2.0 * g * R0
    A0dot = 2.0 * g * R0dot
    A0ddot = 2.0 * g * R0ddot

    x0 = g * np.stack(
        [
            0.5 * ts * ts + (4 / 9) * s - 0.5 * s * s + (2 / 9) * s * c * c,
            4 / 9 - (4 / 9) * c - 0.5 * c * s - (2 / 9) * c * s * s,
            0.5 * s * s,
        ],
        axis=1,
    )
    x0dot = g * np.stack(
        [
            ts + (4 / 9) * c - s * c + (2 / 9) * (c**3 - 2 * s * s * c),
            (4 / 9) * s - 0.5 * (c * c - s * s) + (2 / 9) * (s**3 - 2 * s * c * c),
            s * c,
        ],
        axis=1,
    )
    x0ddot = g * np.stack(
        [
            1 - (4 / 9) * s - (c * c - s * s) + (2 / 9) * (2 * s**3 - 7 * s * c * c),
            (4 / 9) * c + 2 * s * c + (2 / 9) * (7 * s * s * c - 2 * c**3),
            c * c - s * s,
        ],
        axis=1,
    )

    B0 = np.zeros((n, 3, 3))
    B0[:, 0, 0] = f0
    B0[:, 1, 1] = -f0
    B0[:, 2, 2] = 1.0

    return {
        "R0": R0,
        "R0dot": R0dot,
        "R0ddot": R0ddot,
        "Omega0": Omega0,
        "u0": u0,
        "u0dot": u0dot,
        "x0": x0,
        "x0dot": x0dot,
        "x0ddot": x0ddot,
        "f0": f0,
        "f0dot": zeros,
        "f0ddot": zeros,
        "q0": zeros,
        "A0": A0,
        "A0dot": A0dot,
        "A0ddot": A0ddot,
        "B0": B0,
    }


def sample_from_arrays(arrays: dict[str, np.ndarray], i: int) -> ReferenceSample:
    """Build a :class:`ReferenceSample` from row ``i`` of stacked arrays."""
    return ReferenceSample(
        R0=arrays["R0"][i],
        R0dot=arrays["R0dot"][i],
        R0ddot=arrays["R0ddot"][i],
        Omega0=arrays["Omega0"][i],
        u0=arrays["u0"][i],
        u0dot=arrays["u0dot"][i],
        x0=arrays["x0"][i],
        x0dot=arrays["x0dot"][i],
        x0ddot=arrays["x0ddot"][i],
        f0=float(arrays["f0"][i]),
        f0dot=float(arrays["f0dot"][i]),
        f0ddot=float(arrays["f0ddot"][i]),
        q0=float(arrays["q0"][i]),
        A0=arrays["A0"][i],
        A0dot=arrays["A0dot"][i],
        A0ddot=arrays["A0ddot"][i],
        B0=arrays["B0"][i],
    )


def reference_quad(t: float, g: float = 1.0) -> ReferenceSample:
    """Full reference sample at a single time ``t >= 0``."""
    return sample_from_arrays(quad_reference_arrays(np.array([t]), g=g), 0)


def disturbance(t: float) -> Vec3:
    """Pulse disturbance ``sin(2 pi (t - 3)) (1, 1, 1)`` on ``3 <= t <= 4``.

    Zero elsewhere; continuous on all of the real line since the sine
    vanishes at both window ends.
    """
    if 3.0 <= t <= 4.0:
        a = math.sin(2.0 * math.pi * (t - 3.0))
        return np.array([a, a, a])
    return np.zeros(3)


def quad_rhs_modified(
    s: QuadState,
    u: Vec3,
    q: float,
    p: StabilizationParams,
    g: float = 1.0,
    d: Vec3 | None = None,
) -> QuadState:
    """Derivative of the transversally stabilized extended quadcopter.

    With a disturbance ``d`` the angular-velocity block sees ``u + R^T d``
    and the translational block ``-g e3 + f R e3 + d``; ``d = None`` (or
    zero) recovers the nominal system. The returned :class:`QuadState`
    carries the block derivatives.
    """
    R = s.R
    dR = R @ hat(s.Omega) - p.k_e * (R @ (R.T @ R - _EYE3))
    accel = -g * E3 + s.f * R[:, 2]
    u_eff = np.asarray(u, dtype=float)
    if d is not None:
        u_eff = u_eff + R.T @ d
        accel = accel + d
    return QuadState(R=dR, Omega=u_eff, x=s.v, v=accel, f=s.fdot, fdot=q)


def quad_rhs_mul_ext(
    s: QuadStateMul,
    u: Vec3,
    q: float,
    p: StabilizationParams,
    g: float = 1.0,
    d: Vec3 | None = None,
) -> QuadStateMul:
    """Derivative under the multiplicative thrust extension ``df = f h``.

    Identical to :func:`quad_rhs_modified` except for the thrust block;
    ``q`` drives ``dh`` directly.
    """
    R = s.R
    dR = R @ hat(s.Omega) - p.k_e * (R @ (R.T @ R - _EYE3))
    accel = -g * E3 + s.f * R[:, 2]
    u_eff = np.asarray(u, dtype=float)
    if d is not None:
        u_eff = u_eff + R.T @ d
        accel = accel + d
    return QuadStateMul(R=dR, Omega=u_eff, x=s.v, v=accel, f=s.f * s.h, h=q)


def _commutator(A: Mat3, B: Mat3) -> Mat3:
    return A @ B - B @ A


def quad_error_coords(
    s: QuadState, ref: ReferenceSample, p: StabilizationParams
) -> QuadErrorCoords:
    """Error coordinates of a state against a reference sample.

    Primary errors are plain subtractions; the derived fields follow the
    linearized error dynamics:

        ``zk_dot  = z_k x Omega0 + dOmega``
        ``dxddot  = (df R0 + A0 (Z_k + Z_s)) e3``
        ``dxdddot = (dfdot R0 + A0 Zk_dot + df R0dot + A0dot (Z_s + Z_k)
                     + A0 Zs_dot) e3``

    with ``Zs_dot = [Z_s, hat(Omega0)] - 2 k_e Z_s``.
    """
    Z = ref.R0.T @ s.R - _EYE3
    Z_s, Z_k = decompose(Z)
    z_k = skew_vee(Z)
    dOmega = s.Omega - ref.Omega0
    zk_dot = cross(z_k, ref.Omega0) + dOmega
    df = s.f - ref.f0
    dfdot = s.fdot - ref.f0dot
    hat_Om0 = hat(ref.Omega0)
    Zs_dot = _commutator(Z_s, hat_Om0) - 2.0 * p.k_e * Z_s
    # Only the action on e3 is needed, so the matrix products reduce to
    # matrix-vector ones; hat(w) e3 = (w_2, -w_1, 0).
    zk_col = np.array([z_k[1], -z_k[0], 0.0])
    zkd_col = np.array([zk_dot[1], -zk_dot[0], 0.0])
    dxddot = df * ref.R0[:, 2] + ref.A0 @ (zk_col + Z_s[:, 2])
    dxdddot = (
        dfdot * ref.R0[:, 2]
        + ref.A0 @ zkd_col
        + df * ref.R0dot[:, 2]
        + ref.A0dot @ (Z_s[:, 2] + zk_col)
        + ref.A0 @ Zs_dot[:, 2]
    )
    return QuadErrorCoords(
        Z_s=Z_s,
        z_k=z_k,
        zk_dot=zk_dot,
        dOmega=dOmega,
        dx=s.x - ref.x0,
        dxdot=s.v - ref.x0dot,
        df=df,
        dfdot=dfdot,
        dxddot=dxddot,
        dxdddot=dxdddot,
        Zs_dot=Zs_dot,
    )


def invert_coordinate_change(
    dxddot: Vec3,
    dxdddot: Vec3,
    Z_s: Mat3,
    z_k3: float,
    ref: ReferenceSample,
    p: StabilizationParams,
) -> tuple[float, float, float, float, float, float]:
    """Recover ``(z_k1, z_k2, df, zdot_k1, zdot_k2, dfdot)`` from the
    acceleration errors.

    Inverse of the derived-field map of :func:`quad_error_coords`:

        ``[z_k2, z_k1, df]^T    = B0^-1 R0^T (dxddot - A0 Z_s e3)``
        ``[zd_k2, zd_k1, dfdot]^T = B0^-1 R0^T (dxdddot
            - (df R0dot + A0dot (Z_s + Z_k) + A0 Zs_dot) e3)``

    where ``Z_k`` is reassembled from the recovered ``z_k1, z_k2`` and the
    retained coordinate ``z_k3``.
    """
    b0_inv = np.array([1.0 / ref.f0, -1.0 / ref.f0, 1.0])
    first = b0_inv * (ref.R0.T @ (dxddot - ref.A0 @ (Z_s @ E3)))
    z_k2, z_k1, df = float(first[0]), float(first[1]), float(first[2])
    Z_k = hat(np.array([z_k1, z_k2, z_k3]))
    hat_Om0 = hat(ref.Omega0)
    Zs_dot = _commutator(Z_s, hat_Om0) - 2.0 * p.k_e * Z_s
    bias = (df * ref.R0dot + ref.A0dot @ (Z_s + Z_k) + ref.A0 @ Zs_dot) @ E3
    second = b0_inv * (ref.R0.T @ (dxdddot - bias))
    return z_k2, z_k1, df, float(second[0]), float(second[1]), float(second[2])


def bias_matrix(e: QuadErrorCoords, ref: ReferenceSample,
                p: StabilizationParams) -> Mat3:
    """Error-linear bias matrix of the fourth position-error derivative.

    Differentiating the third derivative once more along the linearized
    error flow yields ``dx'''' = ddf R0 e3 + A0 Zk_ddot e3 + C e3`` with

        ``C = 2 dfdot R0dot + 2 A0dot (Zs_dot + Zk_dot) + df R0ddot
            + A0ddot (Z_s + Z_k) + A0 ([Zs_dot, hat(Omega0)]
            + [Z_s, hat(u0)] - 2 k_e Zs_dot)``.

    This is the reference (full-matrix) form; :func:`assemble_controls`
    evaluates the equivalent single column ``C e3`` directly.
    """
    hat_Om0 = hat(ref.Omega0)
    Z_k = hat(e.z_k)
    Zk_dot = hat(e.zk_dot)
    Zs_dot = e.Zs_dot
    return (
        2.0 * e.dfdot * ref.R0dot
        + 2.0 * (ref.A0dot @ (Zs_dot + Zk_dot))
        + e.df * ref.R0ddot
        + ref.A0ddot @ (e.Z_s + Z_k)
        + ref.A0
        @ (
            _commutator(Zs_dot, hat_Om0)
            + _commutator(e.Z_s, hat(ref.u0))
            - 2.0 * p.k_e * Zs_dot
        )
    )


def outer_loop_vw(
    g: QuadGains,
    e: QuadErrorCoords,
    integrals: tuple[Vec3, float] = (None, 0.0),
) -> tuple[Vec3, float]:
    """Virtual inputs for the integrator chains.

    ``v = -K3 dxdddot - K2 dxddot - K1 dxdot - K0 dx`` and
    ``w = -a1 zdot_k3 - a0 z_k3``; the PID variant subtracts
    ``K_I * integral(dx)`` and ``a_I * integral(z_k3)`` on top. Gains are
    assumed validated (see :func:`validate_quad_gains`).
    """
    v = -(g.K3 @ e.dxdddot) - g.K2 @ e.dxddot - g.K1 @ e.dxdot - g.K0 @ e.dx
    w = -g.a1 * e.zk_dot[2] - g.a0 * e.z_k[2]
    if g.pid:
        int_dx, int_zk3 = integrals
        if int_dx is None:
            raise InvalidGains("PID variant needs the integral of dx")
        v = v - g.K_I @ int_dx
        w = w - g.a_I * int_zk3
    return v, w


def assemble_controls(
    v: Vec3,
    w: float,
    e: QuadErrorCoords,
    ref: ReferenceSample,
    p: StabilizationParams,
    g: float = 1.0,
) -> tuple[Vec3, float]:
    """Map the virtual inputs back to the physical controls ``(u, q)``.

    Solves ``[ut_2, ut_1, dq]^T = B0^-1 R0^T (v - C e3)`` with ``ut_3 = w``
    and ``C`` the error-linear bias of :func:`bias_matrix` (only its third
    column is needed, so it is evaluated column-wise here); then
    ``du = -zk_dot x Omega0 - z_k x u0 + ut`` and finally ``u = u0 + du``,
    ``q = q0 + dq``. With zero errors this returns exactly ``(u0, q0)``.
    Raises :class:`SingularB0` when ``|f0|`` is below its floor.
    """
    if abs(ref.f0) < B0_FLOOR_FACTOR * g:
        raise SingularB0(f"reference thrust f0 = {ref.f0:.3e} is below the floor")
    Zs_dot = e.Zs_dot
    zk_col = np.array([e.z_k[1], -e.z_k[0], 0.0])          # hat(z_k) e3
    zkd_col = np.array([e.zk_dot[1], -e.zk_dot[0], 0.0])   # hat(zk_dot) e3
    om_col = np.array([ref.Omega0[1], -ref.Omega0[0], 0.0])
    u0_col = np.array([ref.u0[1], -ref.u0[0], 0.0])
    zs_col = e.Z_s[:, 2]
    zsd_col = Zs_dot[:, 2]
    comm_col = (
        Zs_dot @ om_col - cross(ref.Omega0, zsd_col)       # [Zs_dot, hat(Om0)] e3
        + e.Z_s @ u0_col - cross(ref.u0, zs_col)           # [Z_s, hat(u0)] e3
        - 2.0 * p.k_e * zsd_col
    )
    c_col = (
        2.0 * e.dfdot * ref.R0dot[:, 2]
        + 2.0 * (ref.A0dot @ (zsd_col + zkd_col))
        + e.df * ref.R0ddot[:, 2]
        + ref.A0ddot @ (zs_col + zk_col)
        + ref.A0 @ comm_col
    )
    b0_inv = np.array([1.0 / ref.f0, -1.0 / ref.f0, 1.0])
    mixed = b0_inv * (ref.R0.T @ (v - c_col))
    ut = np.array([mixed[1], mixed[0], w])
    dq = float(mixed[2])
    du = -cross(e.zk_dot, ref.Omega0) - cross(e.z_k, ref.u0) + ut
    return ref.u0 + du, ref.q0 + dq


def _poly_hurwitz(coeffs: Sequence[float]) -> bool:
    roots = np.roots(np.asarray(coeffs, dtype=float))
    return bool(roots.real.max() < -TOL_HURWITZ)


def validate_quad_gains(g: QuadGains) -> None:
    """Raise :class:`InvalidGains` unless the outer-loop gains place every
    pole strictly in the left half plane.

    Checks the quartic (quintic for PID) matrix polynomial through its
    block companion and the scalar attitude polynomial through its roots.
    """
    required = ["K0", "K1", "K2", "K3", "a0", "a1"] + (["K_I", "a_I"] if g.pid else [])
    missing = [name for name in required if getattr(g, name) is None]
    if missing:
        raise InvalidGains(f"missing gain fields {missing}")
    if g.pid:
        companion = block_companion([g.K_I, g.K0, g.K1, g.K2, g.K3])
        scalar = [1.0, g.a1, g.a0, g.a_I]
    else:
        companion = block_companion([g.K0, g.K1, g.K2, g.K3])
        scalar = [1.0, g.a1, g.a0]
    if not bool(np.linalg.eigvals(companion).real.max() < -TOL_HURWITZ):
        raise InvalidGains("position-chain matrix polynomial is not Hurwitz")
    if not _poly_hurwitz(scalar):
        raise InvalidGains("attitude polynomial is not Hurwitz")
