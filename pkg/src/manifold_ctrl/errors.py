"""Exception types raised across the package.

Every error that callers are expected to handle derives from
:class:`ManifoldCtrlError`, so the CLI can map categories to exit codes in
one place.
"""


class ManifoldCtrlError(Exception):
    """Base class for all package-specific errors."""


class NotSkew(ManifoldCtrlError):
    """Matrix handed to ``vee`` is not skew-symmetric within tolerance."""


class BadAxis(ManifoldCtrlError):
    """Rotation axis is not a unit vector within tolerance."""


class TooFewSamples(ManifoldCtrlError):
    """Decay-rate fit needs at least two usable samples."""


class AllBelowFloor(ManifoldCtrlError):
    """Every value in a decay-rate fit sits below the noise floor."""


class InvalidGains(ManifoldCtrlError):
    """Controller gains fail their stability (Hurwitz/positivity) check."""


class BadGains(ManifoldCtrlError):
    """Gain arguments are structurally unusable (non-SPD, non-positive)."""


class NearSingular(ManifoldCtrlError):
    """Attitude-error formula evaluated too close to its singularity."""


class SingularB0(ManifoldCtrlError):
    """Reference thrust too small to invert the input-mixing matrix."""


class NonFiniteState(ManifoldCtrlError):
    """Integration produced a non-finite state component.

    Carries the time at which the step failed in :attr:`time`.
    """

    def __init__(self, message: str, time: float):
        super().__init__(message)
        self.time = time


class EmptyTrajectory(ManifoldCtrlError):
    """Summary statistics requested for a trajectory with no samples."""


class MissingColumn(ManifoldCtrlError):
    """A CSV input lacks a column the consumer requires."""


class ConfigError(ManifoldCtrlError):
    """Scenario configuration is malformed or inconsistent."""
