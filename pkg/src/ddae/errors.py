"""Exception hierarchy shared by the library and the command line."""


class DDAEError(Exception):
    """Base class for every error raised by this package."""


class ShapeError(DDAEError, ValueError):
    pass


class ParameterError(DDAEError, ValueError):
    pass


class NonFiniteError(DDAEError, ArithmeticError):
    pass


class UnsupportedConfigError(DDAEError):
    pass


class StateError(DDAEError):
    pass


class DivergenceError(DDAEError):
    def __init__(self, message, epoch=None, layer=None):
        super().__init__(message)
        self.epoch = epoch
        self.layer = layer


class DataError(DDAEError):
    """Anything wrong with an input file or dataset."""


class FormatError(DataError):
    pass


class ConsistencyError(DataError):
    pass


class ConfigError(DDAEError):
    pass


class DomainError(DDAEError, ValueError):
    pass
