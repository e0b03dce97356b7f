"""Transversal stabilization of the rotation-group constraint.

The constraint potential ``V(R) = (k_e / 4) ||R^T R - I||^2`` vanishes
exactly on rotation matrices. Subtracting its gradient from any vector
field that keeps the constraint set invariant leaves the on-set dynamics
untouched while making the set exponentially attractive; the decay of the
potential along such modified flows is what :func:`fit_decay_rate`
measures empirically.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .errors import AllBelowFloor, TooFewSamples
from .matlib import Mat3

_EYE3 = np.eye(3)
_EYE3.setflags(write=False)

#: Values at or below this floor are dropped before log-fitting a decay
#: rate; below it the double-precision noise floor corrupts the slope.
DECAY_FIT_FLOOR = 1e-14


@dataclass(frozen=True)
class StabilizationParams:
    """Transversal gain of the constraint-restoring term."""

    k_e: float = 1.0

    def __post_init__(self):
        if not self.k_e > 0:
            raise ValueError(f"k_e must be positive, got {self.k_e}")


@dataclass(frozen=True)
class DecayFit:
    """Least-squares exponent fitted to ``log(values)`` against time."""

    rate: float
    r2: float
    samples: int


def tilde_v(R: Mat3, p: StabilizationParams) -> float:
    """Constraint potential ``(k_e / 4) ||R^T R - I||^2``.

    Nonnegative everywhere; zero exactly when ``R^T R = I``.
    """
    E = R.T @ R - _EYE3
    return 0.25 * p.k_e * float(np.sum(E * E))


def grad_tilde_v(R: Mat3, p: StabilizationParams) -> Mat3:
    """Gradient of :func:`tilde_v` with respect to ``R``.

    Equals ``k_e R (R^T R - I)``; vanishes on the orthogonal group.
    """
    return p.k_e * (R @ (R.T @ R - _EYE3))


def modified_rhs(
    base_rhs: Callable[..., tuple], p: StabilizationParams
) -> Callable[..., tuple]:
    """Subtract the constraint-potential gradient from a vector field.

    ``base_rhs(t, state, u)`` must take the ambient state as a tuple whose
    first element is the rotation-block matrix and return a tuple of block
    derivatives of matching shapes. The returned field coincides with
    ``base_rhs`` wherever the rotation block is orthogonal and otherwise
    steers it back toward the constraint set.
    """

    def tilde_field(t, state, u):
        d = base_rhs(t, state, u)
        return (d[0] - grad_tilde_v(state[0], p),) + tuple(d[1:])

    return tilde_field


def fit_decay_rate(
    times: Sequence[float],
    values: Sequence[float],
    floor: float = DECAY_FIT_FLOOR,
) -> DecayFit:
    """Fit ``values ~ exp(rate * t)`` by least squares on the log.

    Values at or below ``floor`` are dropped first. Raises
    :class:`TooFewSamples` with fewer than two usable samples and
    :class:`AllBelowFloor` when the floor removes everything.
    """
    t = np.asarray(times, dtype=float)
    v = np.asarray(values, dtype=float)
    if t.shape != v.shape or t.ndim != 1:
        raise ValueError("times and values must be 1-d sequences of equal length")
    if t.size < 2:
        raise TooFewSamples(f"need at least 2 samples, got {t.size}")
    keep = v > floor
    if not keep.any():
        raise AllBelowFloor(f"all {t.size} values are at or below the floor {floor:g}")
    if keep.sum() < 2:
        raise TooFewSamples("fewer than 2 samples remain above the floor")
    t = t[keep]
    ln = np.log(v[keep])
    tm = t - t.mean()
    denom = float(np.dot(tm, tm))
    if denom == 0.0:
        raise TooFewSamples("all usable samples share one time instant")
    rate = float(np.dot(tm, ln - ln.mean())) / denom
    resid = ln - (ln.mean() + rate * tm)
    ss_res = float(np.dot(resid, resid))
    ss_tot = float(np.dot(ln - ln.mean(), ln - ln.mean()))
    if ss_tot > 0.0:
        r2 = max(0.0, min(1.0, 1.0 - ss_res / ss_tot))
    else:
        # Constant series: the flat fit is exact.
        r2 = 1.0 if math.isclose(ss_res, 0.0, abs_tol=1e-20) else 0.0
    return DecayFit(rate=rate, r2=r2, samples=int(t.size))
