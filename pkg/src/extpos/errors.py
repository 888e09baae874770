"""Exception hierarchy. Everything raised on purpose derives from ExtPosError."""


class ExtPosError(Exception):
    pass


class DimensionError(ExtPosError, ValueError):
    pass


class SpecError(ExtPosError, ValueError):
    """A user-supplied design parameter is out of range."""


class AssumptionViolation(ExtPosError):
    """A standing assumption on the plant or the data does not hold."""


class NotObservable(AssumptionViolation):
    pass


class NoRelativeDegree(AssumptionViolation):
    pass


class RankConditionError(AssumptionViolation):
    """The data-rank requirement for direct synthesis fails (or the data is MIMO)."""


class LmiError(ExtPosError):
    """Malformed LMI problem or assignment."""


class SynthesisInfeasible(ExtPosError):
    """Raised when no certificate could be found.

    ``family`` names the constraint family that failed last: ``"psd"`` when even
    the stabilization LMI alone is infeasible, ``"equality"`` when only the
    monotonicity rows are to blame.
    """

    def __init__(self, message, family=None, solution=None):
        super().__init__(message)
        self.family = family
        self.solution = solution
