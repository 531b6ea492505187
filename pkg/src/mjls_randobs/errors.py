"""Exception types raised across the package."""


class MjlsError(Exception):
    """Base class for all errors raised by this package."""


class NonStochastic(MjlsError, ValueError):
    pass


class DimensionMismatch(MjlsError, ValueError):
    pass


class DegenerateDistribution(MjlsError, ValueError):
    pass


class LambdaNotRecurrent(MjlsError, ValueError):
    """Some closed communicating class of the observation chain avoids the observation set."""


class SingularG(MjlsError, ArithmeticError):
    pass


class ConfigError(MjlsError, ValueError):
    """Invalid problem configuration.

    ``path`` is the dotted field path of the offending entry, e.g. ``system.P``.
    """

    def __init__(self, path, message):
        self.path = path
        super().__init__(f"{path}: {message}")
