"""Exception hierarchy shared by all modules."""

from __future__ import annotations


class SolitonForgeError(Exception):
    """Base class. ``exit_code`` is what the command line reports."""

    exit_code = 3


class InvalidParameters(SolitonForgeError):
    exit_code = 2


class DegeneratePoint(SolitonForgeError):
    pass


class OutOfRange(SolitonForgeError):
    pass


class IntegrationFailure(SolitonForgeError):
    """Integration stopped early. ``partial`` holds what was computed so far."""

    def __init__(self, message: str, partial=None):
        super().__init__(message)
        self.partial = partial


class BlowUp(IntegrationFailure):
    pass


class MonotonicityViolation(IntegrationFailure):
    pass


class StepLimitExceeded(IntegrationFailure):
    pass


class NotReached(SolitonForgeError):
    pass


class NotConverged(SolitonForgeError):
    pass


class NeverConical(SolitonForgeError):
    pass


class NoneFound(SolitonForgeError):
    pass


class JacobianSingular(SolitonForgeError):
    pass


class BracketFailure(SolitonForgeError):
    pass


class LevelSetNotFound(SolitonForgeError):
    pass


class Refine(SolitonForgeError):
    pass


class OnTarget(SolitonForgeError):
    pass
