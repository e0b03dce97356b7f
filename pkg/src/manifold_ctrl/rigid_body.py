"""Fully actuated rigid body: ambient dynamics, reference, and tracking laws.

The plant evolves on rotation matrices crossed with body angular velocity
but is treated as a system on all of 3x3-matrix space; the transversal term
of :mod:`manifold_ctrl.embedding` keeps the rotation block attracted to the
orthogonal matrices. Tracking errors are expressed through

    ``Z = R0(t)^T R - I``,   ``Z_s = Sym(Z)``,   ``z_k = vee(Skew(Z))``,

whose closed-loop dynamics decouple: the symmetric part contracts at rate
``2 k_e`` regardless of control, and the five feedback variants place the
poles of the ``(z_k, dOmega)`` subsystem.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np

from .embedding import StabilizationParams
from .errors import BadGains, InvalidGains, NearSingular
from .matlib import Mat3, Vec3, cross, decompose, hat, skew_vee

#: Eigenvalues with real part above this (i.e. in ``(-TOL_HURWITZ, 0]``) are
#: rejected: marginal stability must fail validation deterministically.
TOL_HURWITZ = 1e-9

#: Controller variant tags. ``p2`` is the PID form carrying an integral of
#: the attitude-error vector; ``lee`` is the nonlinear comparison law.
VARIANTS = ("p1", "p2", "p3", "p4", "p5", "lee")

_EYE3 = np.eye(3)
_EYE3.setflags(write=False)


@dataclass(frozen=True)
class RigidState:
    """Ambient rigid-body state: orientation matrix and body angular velocity.

    No orthogonality constraint is imposed on ``R``; it lives in the full
    matrix space.
    """

    R: Mat3
    Omega: Vec3


@dataclass(frozen=True)
class Inertia:
    """Symmetric positive definite moment-of-inertia matrix (kg m^2)."""

    I_mat: Mat3

    def __post_init__(self):
        I_mat = np.asarray(self.I_mat, dtype=float)
        object.__setattr__(self, "I_mat", I_mat)
        if np.linalg.norm(I_mat - I_mat.T) > 1e-12:
            raise ValueError("inertia matrix must be symmetric")
        if np.linalg.eigvalsh(I_mat).min() <= 0:
            raise ValueError("inertia matrix must be positive definite")


@dataclass(frozen=True)
class ErrorCoords:
    """Tracking error split into symmetric, skew, and velocity parts."""

    Z_s: Mat3
    z_k: Vec3
    dOmega: Vec3


@dataclass(frozen=True)
class RigidGains:
    """Gain set for one controller variant; unused fields stay ``None``.

    p1:  K_P, K_D             (block pair Hurwitz)
    p2:  K_P, K_D, K_I        (cubic matrix polynomial Hurwitz)
    p3:  k_P, K_D             (k_P > 0, K_D SPD)
    p4:  k_P, K_D, eps        (additionally eps below its upper bound)
    p5:  k_R, k_Omega         (both positive)
    lee: k_R, k_Omega         (both positive)
    """

    variant: str
    K_P: Mat3 | None = None
    K_D: Mat3 | None = None
    K_I: Mat3 | None = None
    k_P: float | None = None
    k_R: float | None = None
    k_Omega: float | None = None
    eps: float | None = None


class RigidRef(NamedTuple):
    """Reference orientation, angular velocity, and its derivative at one time."""

    R0: Mat3
    Omega0: Vec3
    u0: Vec3


def rigid_reference_arrays(ts: np.ndarray) -> dict[str, np.ndarray]:
    """Vectorized reference signals over an array of times.

    Returns stacked arrays ``R0 (n,3,3)``, ``Omega0 (n,3)``, ``u0 (n,3)``.
    ``u0`` is the analytic time derivative of ``Omega0``; the closed forms
    are implemented exactly as given, never by numeric differentiation.
    """
    ts = np.asarray(ts, dtype=float)
    s, c = np.sin(ts), np.cos(ts)
    n = ts.shape[0]
    R0 = np.empty((n, 3, 3))
    R0[:, 0, 0] = c * c
    R0[:, 0, 1] = (1 + s) * c * s
    R0[:, 0, 2] = (s - c * c) * s
    R0[:, 1, 0] = -s * c
    R0[:, 1, 1] = c * c - s**3
    R0[:, 1, 2] = (1 + s) * c * s
    R0[:, 2, 0] = s
    R0[:, 2, 1] = -c * s
    R0[:, 2, 2] = c * c
    Omega0 = np.stack([-1 - s, (-1 + s) * c, -s - c * c], axis=1)
    u0 = np.stack([-c, s + c * c - s * s, -c + 2 * c * s], axis=1)
    return {"R0": R0, "Omega0": Omega0, "u0": u0}


def reference_rigid(t: float) -> RigidRef:
    """Reference sample at a single time ``t >= 0``.

    ``R0`` is a rotation matrix by construction and satisfies
    ``d/dt R0 = R0 hat(Omega0)`` with ``u0 = d/dt Omega0``.
    """
    a = rigid_reference_arrays(np.array([t], dtype=float))
    return RigidRef(a["R0"][0], a["Omega0"][0], a["u0"][0])


def omega0_sup(t_end: float = 20.0, step: float = 0.01) -> float:
    """Max of ``||Omega0(t)||`` sampled on ``[0, t_end]`` with ``step``."""
    ts = np.arange(0.0, t_end + 0.5 * step, step)
    om = rigid_reference_arrays(ts)["Omega0"]
    return float(np.sqrt((om * om).sum(axis=1).max()))


def rigid_rhs_modified(
    s: RigidState, u: Vec3, p: StabilizationParams
) -> tuple[Mat3, Vec3]:
    """Time derivative of the transversally stabilized rigid body.

    ``dR = R hat(Omega) - k_e R (R^T R - I)`` and ``dOmega = u``. On
    orthogonal ``R`` the correction vanishes and the flow is the plain
    rigid-body kinematics.
    """
    R = s.R
    dR = R @ hat(s.Omega) - p.k_e * (R @ (R.T @ R - _EYE3))
    return dR, np.asarray(u, dtype=float)


def torque_from_u(s: RigidState, u: Vec3, inertia: Inertia) -> Vec3:
    """Body torque realizing the acceleration command ``dOmega = u``.

    Cancels the gyroscopic term: ``tau = I u - (I Omega) x Omega``.
    """
    I_mat = inertia.I_mat
    return I_mat @ u - cross(I_mat @ s.Omega, s.Omega)


def error_coords(s: RigidState, ref: RigidRef | tuple) -> ErrorCoords:
    """Error coordinates of a state against a reference sample.

    ``Z = R0^T R - I`` is split into ``Z_s`` (symmetric) and the vector
    ``z_k`` of its skew part, with ``dOmega = Omega - Omega0``.
    """
    R0, Omega0 = ref[0], ref[1]
    Z = R0.T @ s.R - _EYE3
    Z_s, _ = decompose(Z)
    return ErrorCoords(Z_s=Z_s, z_k=skew_vee(Z), dOmega=s.Omega - Omega0)


def rigid_delta_u(
    g: RigidGains,
    e: ErrorCoords,
    Omega0: Vec3,
    u0: Vec3,
    integral_zk: Vec3 | None = None,
) -> Vec3:
    """Feedback correction ``du`` for the selected variant; ``u = u0 + du``.

    ``integral_zk`` is the running integral of ``z_k`` and is only consulted
    by the PID variant ``p2``. Gains are assumed validated (see
    :func:`validate_rigid_gains`).
    """
    zk, dOm = e.z_k, e.dOmega
    v = g.variant
    if v == "p1" or v == "p2":
        zk_dot = cross(zk, Omega0) + dOm
        du = -(g.K_P @ zk) - g.K_D @ zk_dot - cross(zk_dot, Omega0) - cross(zk, u0)
        if v == "p2":
            if integral_zk is None:
                raise InvalidGains("variant p2 needs the integral of z_k")
            du = du - g.K_I @ integral_zk
        return du
    if v == "p3":
        return -g.k_P * zk - g.K_D @ dOm
    if v == "p4":
        return -g.k_P * zk - g.K_D @ dOm - g.eps * cross(zk, Omega0)
    if v == "p5":
        return -g.k_R * zk - g.k_Omega * dOm + cross(dOm, Omega0)
    raise InvalidGains(f"unknown controller variant {v!r}")


def lee_u(s: RigidState, ref: RigidRef | tuple, k_R: float, k_Omega: float) -> Vec3:
    """Nonlinear comparison attitude-tracking law (full control, not a delta).

    Uses the normalized attitude error
    ``e_R = Skew(R0^T R)^vee / sqrt(1 + trace(R0^T R))`` and
    ``e_Om = Omega - R^T R0 Omega0``. Raises :class:`NearSingular` when
    ``1 + trace(R0^T R) < 1e-6``.
    """
    R0, Omega0, dOmega0 = ref[0], ref[1], ref[2]
    R = s.R
    Q = R0.T @ R
    denom = 1.0 + float(np.trace(Q))
    if denom < 1e-6:
        raise NearSingular(f"1 + trace(R0^T R) = {denom:.3e} is too close to zero")
    e_R = skew_vee(Q) / math.sqrt(denom)
    RtR0_Om0 = R.T @ (R0 @ Omega0)
    e_Om = s.Omega - RtR0_Om0
    return -k_R * e_R - k_Omega * e_Om - cross(s.Omega, RtR0_Om0) + R.T @ (R0 @ dOmega0)


def block_companion(coeffs: Sequence[Mat3]) -> np.ndarray:
    """Companion embedding of ``lam^p I + lam^(p-1) C[p-1] + ... + C[0]``.

    ``coeffs`` lists the matrix coefficients from lowest to highest order
    below the leading identity. The returned ``3p x 3p`` matrix has the
    polynomial's spectrum.
    """
    p = len(coeffs)
    n = 3 * p
    A = np.zeros((n, n))
    for i in range(p - 1):
        A[3 * i : 3 * i + 3, 3 * (i + 1) : 3 * (i + 1) + 3] = np.eye(3)
    for j, C in enumerate(coeffs):
        A[n - 3 : n, 3 * j : 3 * j + 3] = -np.asarray(C, dtype=float)
    return A


def _is_hurwitz(A: np.ndarray, tol: float = TOL_HURWITZ) -> bool:
    return bool(np.linalg.eigvals(A).real.max() < -tol)


def check_hurwitz_pair(K_P: Mat3, K_D: Mat3) -> bool:
    """True iff ``[[0, I], [-K_P, -K_D]]`` has spectrum strictly left of
    ``-TOL_HURWITZ``."""
    return _is_hurwitz(block_companion([K_P, K_D]))


def check_hurwitz_triple(K_P: Mat3, K_D: Mat3, K_I: Mat3) -> bool:
    """True iff ``lam^3 I + lam^2 K_D + lam K_P + K_I`` is Hurwitz.

    The determinant polynomial's roots are the eigenvalues of the block
    companion ``[[0, I, 0], [0, 0, I], [-K_I, -K_P, -K_D]]``.
    """
    return _is_hurwitz(block_companion([K_I, K_P, K_D]))


def _eps_bound(k_P: float, K_D: Mat3, M: float) -> float:
    if not k_P > 0:
        raise BadGains(f"k_P must be positive, got {k_P}")
    K_D = np.asarray(K_D, dtype=float)
    if np.linalg.norm(K_D - K_D.T) > 1e-12:
        raise BadGains("K_D must be symmetric")
    ev = np.linalg.eigvalsh(K_D)
    if ev.min() <= 0:
        raise BadGains("K_D must be positive definite")
    lam_min, lam_max = float(ev.min()), float(ev.max())
    return min(math.sqrt(k_P), 4 * k_P * lam_min / (4 * k_P + (M + lam_max) ** 2))


def check_eps_condition(
    variant: str,
    k_P: float,
    K_D: Mat3,
    eps: float | None = None,
    M_bound: float = 0.0,
) -> bool | float:
    """Cross-coupling weight admissibility for the p3/p4 variants.

    The bound is ``min(sqrt(k_P), 4 k_P lam_min(K_D) /
    (4 k_P + (M + lam_max(K_D))^2))`` with ``M = M_bound`` for ``p3`` and
    ``M = 0`` for ``p4``.

    For ``p4`` the explicit ``eps`` is checked against the strict
    inequality and a bool is returned. For ``p3`` the weight is internal to
    the stability argument, so a usable value (0.9 times the bound) is
    returned for diagnostics. Raises :class:`BadGains` for ``k_P <= 0`` or
    non-SPD ``K_D``.
    """
    if variant == "p4":
        bound = _eps_bound(k_P, K_D, 0.0)
        if eps is None:
            raise BadGains("variant p4 requires an explicit eps")
        return bool(0.0 < eps < bound)
    if variant == "p3":
        return 0.9 * _eps_bound(k_P, K_D, M_bound)
    raise BadGains(f"eps condition applies to p3/p4 only, got {variant!r}")


def validate_rigid_gains(g: RigidGains, M_bound: float | None = None) -> None:
    """Raise :class:`InvalidGains` unless the gain set passes its check.

    ``M_bound`` (a bound on ``||Omega0||``) is only consulted for ``p3``
    diagnostics; when omitted it is sampled from the built-in reference.
    """
    v = g.variant
    required = {
        "p1": ("K_P", "K_D"),
        "p2": ("K_P", "K_D", "K_I"),
        "p3": ("k_P", "K_D"),
        "p4": ("k_P", "K_D", "eps"),
        "p5": ("k_R", "k_Omega"),
        "lee": ("k_R", "k_Omega"),
    }
    if v not in required:
        raise InvalidGains(f"unknown controller variant {v!r}")
    missing = [name for name in required[v] if getattr(g, name) is None]
    if missing:
        raise InvalidGains(f"{v}: missing gain fields {missing}")
    try:
        if v == "p1":
            ok = check_hurwitz_pair(g.K_P, g.K_D)
            detail = "block pair [[0, I], [-K_P, -K_D]] is not Hurwitz"
        elif v == "p2":
            ok = check_hurwitz_triple(g.K_P, g.K_D, g.K_I)
            detail = "matrix polynomial l^3 I + l^2 K_D + l K_P + K_I is not Hurwitz"
        elif v == "p3":
            if M_bound is None:
                M_bound = omega0_sup()
            check_eps_condition("p3", g.k_P, g.K_D, M_bound=M_bound)
            ok, detail = True, ""
        elif v == "p4":
            ok = bool(check_eps_condition("p4", g.k_P, g.K_D, eps=g.eps))
            detail = f"eps = {g.eps} violates its admissibility bound"
        else:
            ok = g.k_R > 0 and g.k_Omega > 0
            detail = "k_R and k_Omega must both be positive"
    except BadGains as exc:
        raise InvalidGains(f"{v}: {exc}") from exc
    if not ok:
        raise InvalidGains(f"{v}: {detail}")
