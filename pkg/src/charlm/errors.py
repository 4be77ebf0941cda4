"""Exception hierarchy shared across the engine."""


class CharlmError(Exception):
    """Base class for all engine errors."""


class DimensionError(CharlmError):
    """Operand shapes are incompatible with the requested operation."""


class DataError(CharlmError):
    """Bad user-supplied data: empty corpus, out-of-range ids, undersized splits."""


class ContractError(CharlmError):
    """An internal API precondition was violated by the caller."""


class NumericsError(CharlmError):
    """An operation produced NaN or Inf. Carries the operation kind."""

    def __init__(self, op_kind, message=None):
        self.op_kind = op_kind
        super().__init__(message or f"non-finite values produced by operation '{op_kind}'")


class FormatError(CharlmError):
    """A serialized artifact (checkpoint, protocol frame) is malformed."""
