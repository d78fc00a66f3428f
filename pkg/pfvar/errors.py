"""
Exception hierarchy for pfvar.

Every error raised on purpose by the library derives from PfvarError so the
CLI can map it to an exit code without catching unrelated failures.
"""


class PfvarError(Exception):
    """Base class for all pfvar errors."""

    exit_code = 1


# ---------- Configuration ----------

class ConfigError(PfvarError, ValueError):
    """Invalid configuration, with a field-level message when available."""

    exit_code = 2

    def __init__(self, message: str, field: str = ""):
        self.field = field
        super().__init__(f"{field}: {message}" if field else message)


class InvalidConfig(ConfigError):
    pass


class InvalidParams(ConfigError):
    pass


class InvalidLevel(ConfigError):
    pass


# ---------- Numerics ----------

class NumericalError(PfvarError, ArithmeticError):
    exit_code = 3


class NonFinitePotential(NumericalError):
    pass


class DegenerateWeights(NumericalError):
    pass


class WeightsUnset(DegenerateWeights):
    """Filter-flow quantity requested before the particles were weighted."""


class NumericalUnderflow(NumericalError):
    pass


class ModelNotTractable(NumericalError):
    """The requested computation needs a model class the config does not provide."""


# ---------- Lookups ----------

class RowNotInWindow(PfvarError, LookupError):
    exit_code = 3


class IndexOutOfRange(PfvarError, IndexError):
    exit_code = 3
