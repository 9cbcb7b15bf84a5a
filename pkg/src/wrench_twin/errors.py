"""Typed exceptions shared across the toolkit.

The CLI maps these onto exit codes: configuration, schema, and validity
problems exit with 2; numerical failures (identification, conditioning,
training) exit with 3.
"""


class WrenchTwinError(Exception):
    """Base class for every error raised by this package."""


class ConfigError(WrenchTwinError):
    """A configuration value is missing, unknown, or violates an invariant."""

    def __init__(self, message: str, field: str | None = None):
        self.field = field
        super().__init__(f"{field}: {message}" if field else message)


class SchemaError(WrenchTwinError):
    """A dataset or model file does not match the expected schema."""

    def __init__(self, message: str, columns: tuple[str, ...] = ()):
        self.columns = tuple(columns)
        super().__init__(message)


class SaturationError(WrenchTwinError):
    """Slit displacement left the linear half-margin of the bi-cell."""

    def __init__(self, message: str, clamped: float):
        self.clamped = clamped  # value after clipping to the half-margin
        super().__init__(message)


class DegenerateSignalError(WrenchTwinError):
    """Photocurrent sum is non-positive; the normalized signal is undefined."""


class BoundaryViolationError(WrenchTwinError):
    """Support point does not lie strictly between the wrench reference and the tip."""


class ValidityError(WrenchTwinError):
    """Load state outside the single-contact regime the linear model assumes."""

    def __init__(self, message: str, status: "object" = None):
        self.status = status
        super().__init__(message)


class PartitionError(WrenchTwinError):
    """Requested dataset split is infeasible."""


class IdentificationError(WrenchTwinError):
    """Parameter identification failed; carries per-start diagnostics."""

    def __init__(self, message: str, diagnostics: list | None = None):
        self.diagnostics = diagnostics or []
        super().__init__(message)


class EmptyResidualError(WrenchTwinError):
    """Every dataset row was excluded before building the residual."""


class UnboundedNominalError(WrenchTwinError):
    """Nominal boundary compliance is unbounded (zero support stiffness)."""


class ConditioningError(WrenchTwinError):
    """Resolving matrix condition number exceeds the configured cap."""

    def __init__(self, message: str, cond: float = float("inf")):
        self.cond = cond
        super().__init__(message)


class TrainingError(WrenchTwinError):
    """Training diverged; carries the last epoch with finite loss."""

    def __init__(self, message: str, last_finite_epoch: int = -1):
        self.last_finite_epoch = last_finite_epoch
        super().__init__(message)


class ConstantReferenceError(WrenchTwinError):
    """Reference series has zero range; normalized deviation is undefined."""
