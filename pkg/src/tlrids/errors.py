"""Exception hierarchy for the tlrids package."""


class TlridsError(Exception):
    """Base class for all tlrids errors."""


class TraceParseError(TlridsError):
    """A trace or log file line could not be parsed."""

    def __init__(self, message: str, line_no: int | None = None):
        if line_no is not None:
            message = f"line {line_no}: {message}"
        super().__init__(message)
        self.line_no = line_no


class SignalSchemaError(TraceParseError):
    """A signal log names a signal outside the known catalog."""


class SyscallRangeError(TraceParseError):
    """A syscall number falls outside the configured universe."""


class SessionValidationError(TlridsError):
    """A session violates an invariant (ordering, duration, label)."""


class DatasetError(TlridsError):
    """A dataset manifest is missing, malformed, or inconsistent."""


class ProfileError(TlridsError):
    """A synthetic-generation or trained profile is invalid."""


class TrainingLabelError(TlridsError):
    """Non-normal session offered as training input."""


class SignalCapacityError(TlridsError):
    """More distinct signals set than the tissue can track."""


class UnknownSignalError(TlridsError):
    """A signal name outside the catalog (or required but absent)."""


class EmptyPermissibleSetError(TlridsError):
    """Training saw every antigen value; no anomaly space remains."""


class ScenarioError(TlridsError):
    """A scenario or roster request cannot be satisfied."""
