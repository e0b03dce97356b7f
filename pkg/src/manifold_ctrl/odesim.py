"""Deterministic fixed-step simulation of the closed-loop systems.

One classical Runge-Kutta integrator drives every scenario over a flat
state vector; reference signals are precomputed on the half-step grid the
stages touch, so a run is bit-reproducible and cheap. The rotation block is
never renormalized or projected during integration: keeping the constraint
set attractive is exactly the job of the transversal term, and projecting
would mask it.

Flat state layouts (row-major rotation block first):

    rigid:     R[9], Omega[3]                  (+ int_zk[3] for p2)
    quad:      R[9], Omega[3], x[3], xdot[3], f, fdot
               (fdot is h under the multiplicative extension;
                + int_dx[3], int_zk3 for the PID outer loop)
    zs-decay:  Z_s[9]
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import quadcopter as quad
from . import rigid_body as rigid
from .embedding import DecayFit, StabilizationParams, fit_decay_rate, tilde_v
from .errors import AllBelowFloor, EmptyTrajectory, NonFiniteState, TooFewSamples
from .matlib import E2, orthogonality_residual, rot_exp

#: Error threshold used for settling-time extraction.
SETTLE_THRESHOLD = 1e-3

SCENARIOS = ("rigid", "quad", "zs-decay")


@dataclass(frozen=True)
class SimConfig:
    """Everything one closed-loop run needs; immutable and hashable-free.

    ``gains`` and ``initial`` are scenario-typed: :class:`RigidGains` and
    :class:`RigidState` for ``rigid``; :class:`QuadGains` and
    :class:`QuadState` (or :class:`QuadStateMul` with
    ``extension="multiplicative"``) for ``quad``; a symmetric 3x3 array for
    ``zs-decay`` (no gains).
    """

    scenario: str
    t_end: float
    dt: float = 1e-3
    record_stride: int = 10
    k_e: float = 1.0
    g: float = 1.0
    controller: str = "p4"
    gains: object | None = None
    initial: object | None = None
    disturb: bool = False
    extension: str = "additive"


@dataclass
class Trajectory:
    """Time-indexed record of one run on a uniform output grid."""

    scenario: str
    times: np.ndarray
    states: np.ndarray
    controls: np.ndarray
    control_names: tuple[str, ...]
    metrics: dict[str, np.ndarray]
    state_layout: tuple[tuple[str, int], ...] = field(default=())


def rk4_step(field_fn: Callable, t: float, y: np.ndarray, h: float) -> np.ndarray:
    """One classical 4th-order Runge-Kutta step of ``dy/dt = field_fn(t, y)``.

    Raises :class:`NonFiniteState` if any component of the result is not
    finite.
    """
    half = 0.5 * h
    k1 = field_fn(t, y)
    k2 = field_fn(t + half, y + half * k1)
    k3 = field_fn(t + half, y + half * k2)
    k4 = field_fn(t + h, y + h * k3)
    out = y + (h / 6.0) * (k1 + 2.0 * (k2 + k3) + k4)
    if not np.isfinite(out).all():
        raise NonFiniteState(f"non-finite state after step at t = {t!r}", time=t)
    return out


class _HalfGrid:
    """Index lookup for signals tabulated on the half-step grid."""

    def __init__(self, n_steps: int, dt: float):
        self.half = 0.5 * dt
        self.n_max = 2 * n_steps
        self.times = np.arange(self.n_max + 1) * self.half

    def index(self, t: float) -> int:
        i = int(round(t / self.half))
        if 0 <= i <= self.n_max and abs(i * self.half - t) <= 1e-9 + 1e-9 * abs(t):
            return i
        return -1


def _validate(cfg: SimConfig) -> int:
    if cfg.scenario not in SCENARIOS:
        raise ValueError(f"unknown scenario tag {cfg.scenario!r}")
    if not 0.0 < cfg.dt <= 1e-2:
        raise ValueError(f"dt must lie in (0, 1e-2], got {cfg.dt}")
    if not cfg.t_end > 0:
        raise ValueError(f"t_end must be positive, got {cfg.t_end}")
    if int(cfg.record_stride) < 1:
        raise ValueError(f"record_stride must be >= 1, got {cfg.record_stride}")
    n = int(round(cfg.t_end / cfg.dt))
    if n < 1 or abs(n * cfg.dt - cfg.t_end) > 1e-6:
        raise ValueError("t_end must be an integer multiple of dt")
    return n


# --------------------------------------------------------------------------
# Scenario drivers: each returns (y0, field, observe, control_names, layout).
# ``observe(i_half, t, y)`` -> (metrics dict, controls tuple) at a record
# point; ``i_half`` indexes the half-step reference tables (-1 = off grid).
# --------------------------------------------------------------------------


def _rigid_driver(cfg: SimConfig, grid: _HalfGrid):
    gains = cfg.gains
    rigid.validate_rigid_gains(gains)
    state0 = cfg.initial
    if not isinstance(state0, rigid.RigidState):
        raise ValueError("rigid scenario needs a RigidState initial condition")
    p = StabilizationParams(cfg.k_e)
    tab = rigid.rigid_reference_arrays(grid.times)
    R0s, Om0s, u0s = tab["R0"], tab["Omega0"], tab["u0"]
    use_pid = gains.variant == "p2"
    dim = 15 if use_pid else 12

    y0 = np.empty(dim)
    y0[:9] = np.asarray(state0.R, dtype=float).ravel()
    y0[9:12] = np.asarray(state0.Omega, dtype=float)
    if use_pid:
        y0[12:15] = 0.0

    def ref_at(i: int, t: float) -> rigid.RigidRef:
        if i >= 0:
            return rigid.RigidRef(R0s[i], Om0s[i], u0s[i])
        return rigid.reference_rigid(t)

    def control(i: int, t: float, y: np.ndarray, e=None, ref=None):
        s = rigid.RigidState(R=y[:9].reshape(3, 3), Omega=y[9:12])
        ref = ref if ref is not None else ref_at(i, t)
        if gains.variant == "lee":
            return rigid.lee_u(s, ref, gains.k_R, gains.k_Omega), None
        e = e if e is not None else rigid.error_coords(s, ref)
        integral = y[12:15] if use_pid else None
        du = rigid.rigid_delta_u(gains, e, ref.Omega0, ref.u0, integral)
        return ref.u0 + du, e

    def field_fn(t: float, y: np.ndarray) -> np.ndarray:
        i = grid.index(t)
        ref = ref_at(i, t)
        s = rigid.RigidState(R=y[:9].reshape(3, 3), Omega=y[9:12])
        u, e = control(i, t, y, ref=ref)
        dR, dOm = rigid.rigid_rhs_modified(s, u, p)
        out = np.empty(dim)
        out[:9] = dR.ravel()
        out[9:12] = dOm
        if use_pid:
            z_k = e.z_k if e is not None else rigid.error_coords(s, ref).z_k
            out[12:15] = z_k
        return out

    def observe(i: int, t: float, y: np.ndarray):
        ref = ref_at(i, t)
        R = y[:9].reshape(3, 3)
        u, _ = control(i, t, y, ref=ref)
        metrics = {
            "err_R": float(np.linalg.norm(R - ref.R0)),
            "err_Omega": float(np.linalg.norm(y[9:12] - ref.Omega0)),
            "ortho_residual": orthogonality_residual(R),
            "V_tilde": tilde_v(R, p),
        }
        return metrics, (u[0], u[1], u[2])

    layout = (("R", 9), ("Omega", 3)) + ((("int_zk", 3),) if use_pid else ())
    return y0, field_fn, observe, ("u1", "u2", "u3"), layout


def _quad_driver(cfg: SimConfig, grid: _HalfGrid):
    gains = cfg.gains
    quad.validate_quad_gains(gains)
    p = StabilizationParams(cfg.k_e)
    g = cfg.g
    mul = cfg.extension == "multiplicative"
    if cfg.extension not in ("additive", "multiplicative"):
        raise ValueError(f"unknown thrust extension {cfg.extension!r}")
    state0 = cfg.initial
    if mul and not isinstance(state0, quad.QuadStateMul):
        raise ValueError("multiplicative extension needs a QuadStateMul initial")
    if not mul and not isinstance(state0, quad.QuadState):
        raise ValueError("quad scenario needs a QuadState initial condition")
    if mul and not state0.f > 0:
        raise ValueError("multiplicative extension requires f(0) > 0")
    use_pid = gains.pid
    base = 20
    dim = base + (4 if use_pid else 0)
    tab = quad.quad_reference_arrays(grid.times, g=g)

    y0 = np.empty(dim)
    y0[:9] = np.asarray(state0.R, dtype=float).ravel()
    y0[9:12] = np.asarray(state0.Omega, dtype=float)
    y0[12:15] = np.asarray(state0.x, dtype=float)
    y0[15:18] = np.asarray(state0.v, dtype=float)
    y0[18] = state0.f
    y0[19] = state0.h if mul else state0.fdot
    if use_pid:
        y0[base:] = 0.0

    def ref_at(i: int, t: float) -> quad.ReferenceSample:
        if i >= 0:
            return quad.sample_from_arrays(tab, i)
        return quad.reference_quad(t, g=g)

    def unpack(y: np.ndarray):
        # The controller sees fdot = f*h under the multiplicative extension.
        fdot = y[18] * y[19] if mul else y[19]
        return quad.QuadState(
            R=y[:9].reshape(3, 3), Omega=y[9:12], x=y[12:15], v=y[15:18],
            f=y[18], fdot=fdot,
        )

    def control(i: int, t: float, y: np.ndarray, ref=None):
        ref = ref if ref is not None else ref_at(i, t)
        s = unpack(y)
        e = quad.quad_error_coords(s, ref, p)
        integrals = (y[base : base + 3], y[base + 3]) if use_pid else (None, 0.0)
        v, w = quad.outer_loop_vw(gains, e, integrals)
        u, q = quad.assemble_controls(v, w, e, ref, p, g=g)
        if mul:
            # Exact thrust-loop matching: choose dh so that d2f/dt2 equals
            # the double-integrator command (f stays positive structurally).
            q = (q - y[18] * y[19] ** 2) / y[18]
        return u, q, e

    def field_fn(t: float, y: np.ndarray) -> np.ndarray:
        i = grid.index(t)
        ref = ref_at(i, t)
        u, q, e = control(i, t, y, ref=ref)
        d = quad.disturbance(t) if cfg.disturb else None
        out = np.empty(dim)
        if mul:
            s = quad.QuadStateMul(
                R=y[:9].reshape(3, 3), Omega=y[9:12], x=y[12:15], v=y[15:18],
                f=y[18], h=y[19],
            )
            ds = quad.quad_rhs_mul_ext(s, u, q, p, g=g, d=d)
            out[19] = ds.h
        else:
            s = quad.QuadState(
                R=y[:9].reshape(3, 3), Omega=y[9:12], x=y[12:15], v=y[15:18],
                f=y[18], fdot=y[19],
            )
            ds = quad.quad_rhs_modified(s, u, q, p, g=g, d=d)
            out[19] = ds.fdot
        out[:9] = ds.R.ravel()
        out[9:12] = ds.Omega
        out[12:15] = ds.x
        out[15:18] = ds.v
        out[18] = ds.f
        if use_pid:
            out[base : base + 3] = e.dx
            out[base + 3] = e.z_k[2]
        return out

    def observe(i: int, t: float, y: np.ndarray):
        ref = ref_at(i, t)
        R = y[:9].reshape(3, 3)
        u, q, e = control(i, t, y, ref=ref)
        metrics = {
            "err_R": float(np.linalg.norm(R - ref.R0)),
            "err_Omega": float(np.linalg.norm(y[9:12] - ref.Omega0)),
            "err_x": float(np.linalg.norm(y[12:15] - ref.x0)),
            "err_xdot": float(np.linalg.norm(y[15:18] - ref.x0dot)),
            "f": float(y[18]),
            "ortho_residual": orthogonality_residual(R),
            "V_tilde": tilde_v(R, p),
        }
        return metrics, (u[0], u[1], u[2], q)

    thrust_rate = "h" if mul else "fdot"
    layout = (("R", 9), ("Omega", 3), ("x", 3), ("xdot", 3), ("f", 1), (thrust_rate, 1))
    if use_pid:
        layout += (("int_dx", 3), ("int_zk3", 1))
    return y0, field_fn, observe, ("u1", "u2", "u3", "q"), layout


def _zs_driver(cfg: SimConfig, grid: _HalfGrid):
    Zs0 = np.asarray(cfg.initial, dtype=float)
    if Zs0.shape != (3, 3) or np.linalg.norm(Zs0 - Zs0.T) > 1e-12:
        raise ValueError("zs-decay scenario needs a symmetric 3x3 initial matrix")
    two_ke = 2.0 * cfg.k_e
    tab = rigid.rigid_reference_arrays(grid.times)
    Om0s = tab["Omega0"]

    def field_fn(t: float, y: np.ndarray) -> np.ndarray:
        i = grid.index(t)
        Om0 = Om0s[i] if i >= 0 else rigid.reference_rigid(t).Omega0
        Zs = y.reshape(3, 3)
        H = np.array(
            [
                [0.0, -Om0[2], Om0[1]],
                [Om0[2], 0.0, -Om0[0]],
                [-Om0[1], Om0[0], 0.0],
            ]
        )
        return (Zs @ H - H @ Zs - two_ke * Zs).ravel()

    def observe(i: int, t: float, y: np.ndarray):
        norm = float(np.linalg.norm(y))
        return {"zs_norm": norm, "V": norm * norm}, ()

    return Zs0.ravel().copy(), field_fn, observe, (), (("Z_s", 9),)


_DRIVERS = {"rigid": _rigid_driver, "quad": _quad_driver, "zs-decay": _zs_driver}


def simulate(cfg: SimConfig) -> Trajectory:
    """Integrate one closed-loop scenario and record its output grid.

    Gains are validated before any integration starts; controller integral
    states are advanced inside the augmented state vector. Identical
    configurations produce bit-identical trajectories.
    """
    n = _validate(cfg)
    grid = _HalfGrid(n, cfg.dt)
    y0, field_fn, observe, control_names, layout = _DRIVERS[cfg.scenario](cfg, grid)

    stride = int(cfg.record_stride)
    times, states, metric_rows, control_rows = [], [], [], []

    def record(step: int, y: np.ndarray) -> None:
        t = step * cfg.dt
        metrics, controls = observe(2 * step, t, y)
        times.append(t)
        states.append(y.copy())
        metric_rows.append(metrics)
        control_rows.append(controls)

    y = y0
    record(0, y)
    for k in range(n):
        y = rk4_step(field_fn, k * cfg.dt, y, cfg.dt)
        if (k + 1) % stride == 0:
            record(k + 1, y)

    metric_names = tuple(metric_rows[0].keys())
    metrics = {
        name: np.array([row[name] for row in metric_rows]) for name in metric_names
    }
    return Trajectory(
        scenario=cfg.scenario,
        times=np.array(times),
        states=np.array(states),
        controls=np.array(control_rows).reshape(len(times), len(control_names)),
        control_names=control_names,
        metrics=metrics,
        state_layout=layout,
    )


def _try_fit(times: np.ndarray, values: np.ndarray) -> DecayFit | None:
    try:
        return fit_decay_rate(times, values)
    except (TooFewSamples, AllBelowFloor):
        return None


def total_error(traj: Trajectory) -> np.ndarray:
    """Sum of the trajectory's error metrics at each record point."""
    names = [k for k in traj.metrics if k.startswith("err_")] or ["zs_norm"]
    total = np.zeros_like(traj.times)
    for name in names:
        total = total + traj.metrics[name]
    return total


def metrics_summary(traj: Trajectory) -> dict:
    """Scalar summary of a trajectory: final/max errors, thrust floor,
    settling time, and fitted decay rates.

    The settling time is the earliest record time after which the summed
    error metrics stay below ``SETTLE_THRESHOLD``; ``None`` when the run
    never settles. Decay rates are least-squares exponents of the
    constraint potential and of the summed error norm (``None`` whenever a
    fit is impossible, e.g. all values at the noise floor).
    """
    if traj.times.size == 0:
        raise EmptyTrajectory("trajectory has no recorded samples")
    final = {name: float(vals[-1]) for name, vals in traj.metrics.items()}
    peak = {name: float(vals.max()) for name, vals in traj.metrics.items()}
    total = total_error(traj)

    bad = np.flatnonzero(total >= SETTLE_THRESHOLD)
    if bad.size == 0:
        settling = 0.0
    elif bad[-1] == total.size - 1:
        settling = None
    else:
        settling = float(traj.times[bad[-1] + 1])

    v_name = "V_tilde" if "V_tilde" in traj.metrics else "V"
    fit_v = _try_fit(traj.times, traj.metrics[v_name]) if v_name in traj.metrics else None
    fit_err = _try_fit(traj.times, total)

    if traj.controls.size:
        max_u = float(np.linalg.norm(traj.controls, axis=1).max())
    else:
        max_u = None

    def fit_dict(fit: DecayFit | None):
        if fit is None:
            return None
        return {"rate": fit.rate, "r2": fit.r2, "samples": fit.samples}

    return {
        "final": final,
        "max": peak,
        "min_f": float(traj.metrics["f"].min()) if "f" in traj.metrics else None,
        "settling_time": settling,
        "decay_v": fit_dict(fit_v),
        "decay_error": fit_dict(fit_err),
        "max_control_norm": max_u,
    }


def default_rigid_initial(angle: float = 0.99 * np.pi) -> rigid.RigidState:
    """Built-in rigid initial condition: rotation about e2, Omega=(-1,-1,-1)."""
    return rigid.RigidState(R=rot_exp(E2, angle), Omega=np.array([-1.0, -1.0, -1.0]))


def default_quad_initial(g: float = 1.0, multiplicative: bool = False):
    """Built-in quad initial condition at a quarter-turn attitude offset."""
    R = rot_exp(E2, 0.25 * np.pi)
    zero = np.zeros(3)
    x0 = np.array([-0.5 * g, -0.5 * g, 0.0])
    if multiplicative:
        return quad.QuadStateMul(R=R, Omega=zero, x=x0, v=zero.copy(), f=2.0 * g, h=0.0)
    return quad.QuadState(R=R, Omega=zero, x=x0, v=zero.copy(), f=2.0 * g, fdot=0.0)
