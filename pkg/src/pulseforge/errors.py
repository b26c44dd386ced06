"""Exception hierarchy.

Everything raised on purpose by the package derives from ``PulseForgeError``.
``ConstraintViolation`` marks failures of the mathematical admissibility
conditions (the cli maps these to exit code 3); ``VerificationFailure`` marks
oracle disagreements (exit code 4); plain ``PulseForgeError`` subclasses that are
neither are treated as bad input (exit code 2).
"""


class PulseForgeError(Exception):
    pass


class InvalidParameter(PulseForgeError, ValueError):
    pass


class ConstraintViolation(PulseForgeError):
    pass


class VerificationFailure(PulseForgeError):
    pass


# core
class IndeterminateAxis(PulseForgeError):
    pass


# qfamilies
class DomainEmpty(ConstraintViolation):
    pass


class NoClosedForm(PulseForgeError):
    pass


class SingularPoint(PulseForgeError):
    pass


class InitialConditionError(ConstraintViolation):
    pass


# wgen
class NonIntegrable(ConstraintViolation):
    pass


class OutOfRange(ConstraintViolation):
    pass


class StuckAtZero(ConstraintViolation):
    pass


# synth
class OriginCrossing(ConstraintViolation):
    pass


class InequalityViolated(ConstraintViolation):
    pass


class BranchSingular(ConstraintViolation):
    pass


class OutsideDomain(ConstraintViolation):
    pass


# verify
class StepTooLarge(VerificationFailure):
    pass


class GridTooCoarse(PulseForgeError):
    pass


# rotation
class NotEven(ConstraintViolation):
    pass


class WindowInsidePulse(ConstraintViolation):
    pass


class Unreachable(ConstraintViolation):
    pass


class NoSaturation(ConstraintViolation):
    pass
