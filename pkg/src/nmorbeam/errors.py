"""Exception and warning types shared across the package."""


class NmorError(Exception):
    """Base class for all package errors."""


class NonConvergence(NmorError):
    pass


class AllMasked(NmorError):
    pass


class DegenerateFrame(NmorError):
    pass


class MaskMismatch(NmorError):
    pass


class NoSignChange(NmorError):
    pass


class SingularJacobian(NmorError):
    pass


class DegenerateInput(NmorError):
    pass


class ConfigError(NmorError):
    """Invalid scenario or command-line configuration.

    ``line`` is the 1-based line in the scenario file when known.
    """

    def __init__(self, message, field=None, line=None):
        self.field = field
        self.line = line
        prefix = f"line {line}: " if line is not None else ""
        super().__init__(prefix + message)


class ApproximationDomainWarning(UserWarning):
    """The closed-form signal is used outside ``exp(-L^2/4w^2) << 1``."""


class ValidityWarning(UserWarning):
    """A small-shift formula is evaluated outside its validity range."""


class SaturationWarning(UserWarning):
    pass
