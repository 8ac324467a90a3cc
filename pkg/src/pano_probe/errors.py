"""Exception types shared across the package."""


class PanoProbeError(Exception):
    """Base class for all errors raised by this package."""


class ManifestError(PanoProbeError):
    """Manifest file is malformed or violates a corpus invariant."""


class ValidationError(PanoProbeError):
    """An input value violates a documented precondition."""


class TransformError(PanoProbeError):
    """Image decode failure or dimension mismatch during variant generation."""

    def __init__(self, message, pair_id=None):
        super().__init__(message)
        self.pair_id = pair_id


class StoreFormatError(PanoProbeError):
    """Embedding store file violates the store format."""


class MissingEmbeddingError(PanoProbeError):
    """Provider has no record for the requested key."""

    def __init__(self, pair_id, kind, variant):
        self.key = (pair_id, kind, variant)
        super().__init__(
            f"no embedding for pair_id={pair_id!r} kind={kind!r} variant={variant!r}"
        )


class ServiceTransportError(PanoProbeError):
    """Remote embedding service unreachable after bounded retries."""


class DegenerateSampleError(PanoProbeError):
    """All paired differences are zero; the signed-rank test is undefined."""


class NoKneeError(PanoProbeError):
    """Loss curve has no detectable knee (flat or linear difference curve)."""
