"""Exception types raised by fedgat.

Every error carries enough context in its message to identify the offending
input (shapes, client ids, epochs) without a debugger.
"""


class FedgatError(Exception):
    """Base class for all fedgat errors."""


class DimensionError(FedgatError, ValueError):
    """Matrix shapes are incompatible for the requested operation."""


class DegenerateNeighborhoodError(FedgatError, ValueError):
    """A softmax row has no active entries (isolated node without self-loop)."""


class EmptyMaskError(FedgatError, ValueError):
    """An operation that needs a nonempty node subset received an empty one."""


class DeterminismError(FedgatError, RuntimeError):
    """A function that must be deterministic returned differing values."""


class FormatError(FedgatError, ValueError):
    """An input file does not conform to the documented CSV schema."""


class ReferentialIntegrityError(FedgatError, ValueError):
    """An edge references a node id that is not present in the node table."""


class FeatureConflictError(FedgatError, ValueError):
    """Overlapping nodes disagree on the value of a shared feature column."""


class InfeasiblePartitionError(FedgatError, ValueError):
    """The partition spec cannot be satisfied on the given graph."""


class DivergenceError(FedgatError, RuntimeError):
    """Training produced a non-finite loss."""

    def __init__(self, message: str, epoch: int | None = None,
                 client_id: str | int | None = None):
        super().__init__(message)
        self.epoch = epoch
        self.client_id = client_id


class AggregationError(FedgatError, ValueError):
    """Client parameter records are incompatible for aggregation."""


class IllPosedAttackError(FedgatError, ValueError):
    """The attack candidate set lacks members or non-members."""


class ConfigError(FedgatError, ValueError):
    """An experiment configuration failed validation."""
