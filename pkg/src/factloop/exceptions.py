"""Exception taxonomy shared across the pipeline.

Configuration problems abort a run; per-case problems (bad completions,
unreachable backends for a single case) are handled by the runner and never
raise past it.
"""


class FactloopError(Exception):
    """Base class for all errors raised by this package."""


class SchemaError(FactloopError):
    """Input file does not match the declared table schema."""


class TableParseError(FactloopError):
    """A cell value cannot be parsed; carries the offending row index."""

    def __init__(self, message: str, row: int | None = None):
        super().__init__(message)
        self.row = row


class ConfigurationError(FactloopError):
    """Invalid or inconsistent configuration; aborts the run."""


class SamplingError(FactloopError):
    """Balanced sampling cannot be satisfied with the given counts."""


class ContractViolation(FactloopError):
    """A caller broke an operation precondition."""


class TransportError(FactloopError):
    """Network failure that persisted past the retry budget."""


class BackendError(FactloopError):
    """Inference server answered with a non-success status."""

    def __init__(self, message: str, status: int | None = None, body: str = ""):
        super().__init__(message)
        self.status = status
        self.body = body


class MockError(FactloopError):
    """No scripted matcher covers the prompt a mock backend received."""


class ProtocolError(FactloopError):
    """A scorer answered outside the scoring protocol (e.g. prob not in [0,1])."""


class LeakageError(FactloopError):
    """A score was produced by a scorer trained on the case's own fold."""


class IncompleteAnnotationError(FactloopError):
    """Oracle feedback requested while some reasoning points lack annotations."""

    def __init__(self, message: str, missing: list[int] | None = None):
        super().__init__(message)
        self.missing = missing or []


class StartupError(FactloopError):
    """A service could not start (e.g. port already bound)."""
