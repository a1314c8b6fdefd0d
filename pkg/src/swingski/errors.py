"""Exception hierarchy shared by all modules."""


class SwingSkiError(Exception):
    """Base class for every error raised by the package."""


class InvalidParams(SwingSkiError, ValueError):
    pass


class ControlOutOfRange(SwingSkiError, ValueError):
    pass


class DenominatorZero(SwingSkiError, ZeroDivisionError):
    pass


class DegenerateDirection(SwingSkiError):
    pass


class NotOrdinary(SwingSkiError):
    pass


class SingularDenominator(SwingSkiError):
    pass


class StepFailure(SwingSkiError, RuntimeError):
    pass


class LeftTurnpike(SwingSkiError):
    """A singular arc drifted off its locus or needed a saturated control."""


class EventNotFound(SwingSkiError):
    pass


class GVanishes(SwingSkiError):
    pass


class SingularIntegrand(SwingSkiError):
    pass


class NotMonotone(SwingSkiError):
    pass


class RegionNotClassified(SwingSkiError):
    pass


class BackboneLeavesDomain(SwingSkiError):
    pass


class NoSwitchSeed(SwingSkiError):
    pass


class TargetUnreachable(SwingSkiError):
    pass


class NoTransversalRoot(SwingSkiError):
    def __init__(self, message, psi_endpoints=None, best=None):
        super().__init__(message)
        self.psi_endpoints = psi_endpoints
        self.best = best


class NoIntersection(SwingSkiError):
    pass
