import numpy as np

from manifold_ctrl.matlib import rot_exp


def random_rotation(rng) -> np.ndarray:
    axis = rng.standard_normal(3)
    axis /= np.linalg.norm(axis)
    return rot_exp(axis, rng.uniform(-np.pi, np.pi))
