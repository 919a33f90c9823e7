"""Exception hierarchy. The CLI maps each family onto an exit status."""


class BubbleTowerError(Exception):
    exit_code = 3


class ConfigError(BubbleTowerError, ValueError):
    exit_code = 2


class InvalidPotentialError(ConfigError):
    pass


class NumericalError(BubbleTowerError, RuntimeError):
    exit_code = 3


class NoGroundStateError(NumericalError):
    pass


class IntegrationError(NumericalError):
    pass


class TailNotConvergedError(NumericalError):
    pass


class QuadratureError(NumericalError):
    pass


class DegenerateLayerError(NumericalError, ValueError):
    pass


class SearchFailure(NumericalError):
    pass


class ResolutionError(NumericalError):
    pass


class ShapeError(BubbleTowerError, ValueError):
    exit_code = 2
