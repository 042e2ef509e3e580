# numcore/errors.py


class LabError(Exception):
    """Base class for every error raised by the lab."""


# ============================================================
# Validation errors (CLI exit code 1)
# ============================================================
class ValidationError(LabError):
    pass


class ShapeError(ValidationError):
    def __init__(self, op: str, a: tuple, b: tuple):
        super().__init__(f"{op}: incompatible shapes {a} and {b}")
        self.op = op
        self.shapes = (a, b)


class UsageError(ValidationError):
    pass


class ConfigError(ValidationError):
    pass


# ============================================================
# Numerical errors (CLI exit code 2)
# ============================================================
class NumericalError(LabError):
    pass


class NonFiniteError(NumericalError):
    pass


class DivergenceError(NumericalError):
    def __init__(self, message: str, epoch: int | None = None, index: int | None = None):
        super().__init__(message)
        self.epoch = epoch
        self.index = index
