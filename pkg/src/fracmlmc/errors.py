"""Exception hierarchy shared by all modules."""


class FracMlmcError(Exception):
    """Base class for every error raised by this package."""


class DomainError(FracMlmcError, ValueError):
    """A scalar argument lies outside the admissible range."""


class GridMismatchError(FracMlmcError, ValueError):
    """Two grids or a grid and a vector are structurally incompatible."""


class CflError(FracMlmcError, ValueError):
    """The time step violates the stability restriction of the scheme."""


class NewtonConvergenceError(FracMlmcError, RuntimeError):
    def __init__(self, message, residual):
        super().__init__(f"{message} (last residual {residual:.3e})")
        self.message = message
        self.residual = residual

    def __reduce__(self):
        return type(self), (self.message, self.residual)


class SingularJacobianError(FracMlmcError, RuntimeError):
    pass


class ToleranceTooSmallError(FracMlmcError, ValueError):
    """The MLMC tolerance is below the bias floor of the finest level."""


class UnsupportedConfigurationError(FracMlmcError, ValueError):
    pass


class SampleFailure(FracMlmcError, RuntimeError):
    """A deterministic solve inside an estimator failed."""

    def __init__(self, level, index, cause):
        super().__init__(f"sample (level={level}, index={index}) failed: {cause}")
        self.level = level
        self.index = index
        self.cause = cause

    def __reduce__(self):
        return type(self), (self.level, self.index, self.cause)


class ConfigError(FracMlmcError, ValueError):
    def __init__(self, message, line=None, key=None):
        where = []
        if line is not None:
            where.append(f"line {line}")
        if key is not None:
            where.append(f"key '{key}'")
        prefix = f"{', '.join(where)}: " if where else ""
        super().__init__(prefix + message)
        self.message = message
        self.line = line
        self.key = key

    def __reduce__(self):
        return type(self), (self.message, self.line, self.key)
