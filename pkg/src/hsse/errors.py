"""Exception hierarchy shared by all modules."""


class HsseError(Exception):
    """Base class for every error raised by this package."""


class DomainError(HsseError, ValueError):
    """An argument lies outside the domain of the operation."""


class SingularEvaluationError(DomainError):
    """A kernel was evaluated at coincident source and receiver points."""


class MeshError(HsseError, ValueError):
    """A mesh could not be built or failed validation."""


class AssemblyError(HsseError, RuntimeError):
    """Matrix assembly failed (quadrature or element geometry)."""


class FactorizationError(HsseError, RuntimeError):
    """A linear system is singular or numerically rank deficient.

    Parameters
    ----------
    message : str
        Human readable description.
    condition : float
        Estimated 2-norm condition number of the offending matrix.
    """

    def __init__(self, message, condition=float("inf")):
        super().__init__(f"{message} (condition estimate {condition:.3e})")
        self.condition = condition


class SynthesisError(HsseError, ValueError):
    """Frequency samples are unsuitable for time-domain synthesis."""


class ConfigError(HsseError, ValueError):
    """A run configuration is invalid.

    Parameters
    ----------
    message : str
        What is wrong.
    field : str, optional
        Dotted path of the offending key, e.g. ``"wave.angle"``.
    line : int, optional
        One-based line of the key in the configuration file.
    """

    def __init__(self, message, field=None, line=None):
        text = f"{field}: {message}" if field else message
        if line is not None:
            text = f"line {line}: {text}"
        super().__init__(text)
        self.message = message
        self.field = field
        self.line = line
