"""Tracking control on embedded state-space manifolds.

The package stabilizes the rotation-matrix constraint transversally in
ambient matrix space, designs tracking controllers by linearization there,
and ships the rigid-body and quadcopter benchmark scenarios behind a CLI.
"""

__version__ = "0.1.0"

from .embedding import (
    DecayFit,
    StabilizationParams,
    fit_decay_rate,
    grad_tilde_v,
    modified_rhs,
    tilde_v,
)
from .matlib import (
    cross,
    decompose,
    frob,
    hat,
    orthogonality_residual,
    rot_exp,
    skew_vee,
    vee,
)
from .odesim import SimConfig, Trajectory, metrics_summary, rk4_step, simulate
from .quadcopter import (
    QuadErrorCoords,
    QuadGains,
    QuadState,
    QuadStateMul,
    ReferenceSample,
    assemble_controls,
    disturbance,
    outer_loop_vw,
    quad_error_coords,
    quad_rhs_modified,
    quad_rhs_mul_ext,
    reference_quad,
)
from .rigid_body import (
    ErrorCoords,
    Inertia,
    RigidGains,
    RigidState,
    check_eps_condition,
    check_hurwitz_pair,
    check_hurwitz_triple,
    error_coords,
    lee_u,
    reference_rigid,
    rigid_delta_u,
    rigid_rhs_modified,
    torque_from_u,
)

__all__ = [name for name in dir() if not name.startswith("_")]
