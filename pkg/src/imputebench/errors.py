"""Exception hierarchy shared across the package."""


class ImputeBenchError(Exception):
    pass


class IngestionError(ImputeBenchError, ValueError):
    pass


class EmptyDatasetError(IngestionError):
    pass


class UndefinedRangeError(ImputeBenchError, ValueError):
    def __init__(self, column):
        super().__init__(f"column {column!r} has no observed value in the selected rows")
        self.column = column


class InfeasibleFoldsError(ImputeBenchError, ValueError):
    pass


class MaskOverlapError(ImputeBenchError, ValueError):
    pass


class InfeasibleQuotaError(ImputeBenchError, ValueError):
    pass


class PairingError(ImputeBenchError, ValueError):
    pass


class SpecError(ImputeBenchError, ValueError):
    """An invalid configuration object (amputation spec, synth spec, run config)."""


class UnimputableColumnError(ImputeBenchError, ValueError):
    pass


class DegenerateRangeError(ImputeBenchError, ValueError):
    pass


class LedgerCorruptionError(ImputeBenchError, ValueError):
    pass


class ConfigurationError(ImputeBenchError):
    pass


class TransportError(ImputeBenchError):
    """Base of every retryable provider failure."""


class TransportTimeout(TransportError):
    pass


class ConnectionRefused(TransportError):
    pass


class RateLimited(TransportError):
    pass
