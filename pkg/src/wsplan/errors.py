"""Exception hierarchy shared by all planner modules."""


class PlannerError(Exception):
    """Base class for every error raised by wsplan."""


class DegenerateInputError(PlannerError, ValueError):
    pass


class SceneParseError(PlannerError, ValueError):
    pass


class SceneValidationError(PlannerError, ValueError):
    pass


class PreconditionError(PlannerError, ValueError):
    pass


class InvalidEndpointError(PlannerError):
    """Start or goal is in collision (or otherwise unusable)."""


class NoPathError(PlannerError):
    pass


class DisconnectedError(NoPathError):
    """No route exists between two regions of the adjacency graph."""


class InfeasibleStateError(PlannerError):
    """A key-point could not be moved to a collision-free position."""


class PlanningFailure(PlannerError):
    pass


class ValidationFailure(PlanningFailure):
    """Coordinated trajectory still fails validation after subdivision."""


class NonConvergenceError(PlannerError):
    def __init__(self, message, residual):
        super().__init__(message)
        self.residual = residual


class DegenerateLinkError(PlannerError):
    pass


class SingularConfigurationError(PlannerError):
    pass
