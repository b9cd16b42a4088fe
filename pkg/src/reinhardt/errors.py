"""Exception types shared across the package."""


class ReinhardtError(Exception):
    """Base class for all package errors."""


class ConstraintError(ReinhardtError, ValueError):
    """A value violates a structural constraint (e.g. det g != 1)."""


class StarViolation(ReinhardtError):
    """A state left the star domain, or a control fails the star condition."""

    def __init__(self, message: str, time: float | None = None):
        super().__init__(message if time is None else f"{message} (t={time:.12g})")
        self.time = time


class SingularApproach(ReinhardtError):
    """An extremal approached the singular locus or sat on a persistent edge."""


class ConventionViolation(ReinhardtError, ValueError):
    """Sign conventions of a coordinate chart are inconsistent with the input."""


class DegenerateControl(ReinhardtError):
    """The optimal-control equation has no well-defined root (e.g. c = 0)."""


class WallHit(ReinhardtError):
    """A circular Fuller trajectory reached z3 = 0."""


class NoSwitch(ReinhardtError):
    """No switching time was found in the search window."""


class RankDeficiency(ReinhardtError):
    """A linear system that should be full rank is singular."""
