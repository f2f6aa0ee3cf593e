"""Exception types raised across the package."""


class KahlerLabError(Exception):
    pass


class NonPositiveMetricError(KahlerLabError):
    """The metric ``i ddbar(potential)`` fails to be positive definite at some node."""

    def __init__(self, message, node=None, point=None, eigenvalue=None):
        super().__init__(message)
        self.node = node
        self.point = point
        self.eigenvalue = eigenvalue


class DegenerateInputError(KahlerLabError):
    """The request needs a larger complex dimension than the model has (e.g. j = 2 on a curve)."""


class UnsupportedModelError(KahlerLabError):
    pass


class QuadratureError(KahlerLabError):
    pass


class NodeMismatchError(KahlerLabError):
    pass


class ConditioningError(KahlerLabError):
    """Gram matrix too ill-conditioned; raise the quadrature level or lower k."""


class FitError(KahlerLabError):
    pass


class FlowError(KahlerLabError):
    pass


class ConfigError(KahlerLabError):
    def __init__(self, message, key=None, line=None):
        super().__init__(message)
        self.key = key
        self.line = line
