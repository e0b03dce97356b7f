"""Dense 3x3 / 3-vector algebra for rotation-matrix dynamics.

A ``Vec3`` is a float ndarray of shape ``(3,)`` and a ``Mat3`` a float
ndarray of shape ``(3, 3)`` indexed ``A[i, j]`` row-major. All functions are
pure, never mutate their inputs, and are safe for concurrent use.

The norm and inner product used throughout the package are the Frobenius
(Euclidean) ones: ``<A, B> = sum_ij A_ij B_ij = tr(A^T B)``.
"""

from __future__ import annotations

import math

import numpy as np

Vec3 = np.ndarray
Mat3 = np.ndarray

from .errors import BadAxis, NotSkew

#: Absolute tolerance on ``||A + A^T||`` accepted by :func:`vee`. Far above
#: double-precision noise, far below any physically meaningful skew defect.
TOL_SKEW = 1e-9

#: Tolerance on ``| ||axis|| - 1 |`` accepted by :func:`rot_exp`.
TOL_AXIS = 1e-12

E1 = np.array([1.0, 0.0, 0.0])
E2 = np.array([0.0, 1.0, 0.0])
E3 = np.array([0.0, 0.0, 1.0])


def hat(v: Vec3) -> Mat3:
    """Map a 3-vector to its skew-symmetric matrix.

    Satisfies ``hat(v) @ w == cross(v, w)`` for every ``w``.
    """
    return np.array(
        [
            [0.0, -v[2], v[1]],
            [v[2], 0.0, -v[0]],
            [-v[1], v[0], 0.0],
        ]
    )


def vee(A: Mat3) -> Vec3:
    """Inverse of :func:`hat`: extract the vector from a skew matrix.

    Near-skew input is symmetrized to ``(A - A^T)/2`` before read-off so the
    result is deterministic. Raises :class:`NotSkew` when
    ``||A + A^T|| > TOL_SKEW``.
    """
    A = np.asarray(A, dtype=float)
    defect = float(np.linalg.norm(A + A.T))
    if defect > TOL_SKEW:
        raise NotSkew(f"matrix is not skew-symmetric: ||A + A^T|| = {defect:.3e}")
    S = 0.5 * (A - A.T)
    return np.array([S[2, 1], S[0, 2], S[1, 0]])


def skew_vee(A: Mat3) -> Vec3:
    """Vector of the skew part of ``A``, i.e. ``vee((A - A^T)/2)``.

    Unlike :func:`vee` this never raises; it is the read-off used by the
    attitude-error computations, where the argument is a full matrix whose
    skew part is wanted.
    """
    return 0.5 * np.array([A[2, 1] - A[1, 2], A[0, 2] - A[2, 0], A[1, 0] - A[0, 1]])


def cross(u: Vec3, v: Vec3) -> Vec3:
    """Cross product ``u x v`` (equals ``hat(u) @ v``)."""
    return np.array(
        [
            u[1] * v[2] - u[2] * v[1],
            u[2] * v[0] - u[0] * v[2],
            u[0] * v[1] - u[1] * v[0],
        ]
    )


def decompose(A: Mat3) -> tuple[Mat3, Mat3]:
    """Split ``A`` into its symmetric and skew-symmetric parts.

    Returns ``(sym, skew)``; each part lies exactly in its subspace
    (``sym == sym.T`` and ``skew == -skew.T`` hold bitwise), they are
    orthogonal under :func:`frob`, and they recompose to ``A`` up to one
    rounding.
    """
    A = np.asarray(A, dtype=float)
    At = A.T
    return 0.5 * (A + At), 0.5 * (A - At)


def frob(A: np.ndarray, B: np.ndarray) -> float:
    """Frobenius inner product ``sum_ij A_ij B_ij`` (also valid for vectors)."""
    return float(np.sum(np.asarray(A) * np.asarray(B)))


def rot_exp(axis: Vec3, angle: float) -> Mat3:
    """Rotation matrix about a unit ``axis`` through ``angle`` radians.

    Rodrigues form ``I + sin(angle) K + (1 - cos(angle)) K^2`` with
    ``K = hat(axis)``. Raises :class:`BadAxis` when ``||axis||`` deviates
    from 1 by more than ``TOL_AXIS``.
    """
    axis = np.asarray(axis, dtype=float)
    norm = float(np.linalg.norm(axis))
    if abs(norm - 1.0) > TOL_AXIS:
        raise BadAxis(f"axis must be unit length, got ||axis|| = {norm!r}")
    K = hat(axis)
    return np.eye(3) + math.sin(angle) * K + (1.0 - math.cos(angle)) * (K @ K)


def orthogonality_residual(R: Mat3) -> float:
    """Frobenius norm ``||R^T R - I||``, zero exactly on the orthogonal group."""
    R = np.asarray(R, dtype=float)
    return float(np.linalg.norm(R.T @ R - np.eye(3)))
