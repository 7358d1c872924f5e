"""Exception types shared across the transport pipeline."""


class PrivisError(Exception):
    """Base class for all pipeline errors."""


class ValidationError(PrivisError):
    """Domain-object or argument contract violated (bad range, NaN, ...)."""


class ConfigError(PrivisError):
    """Invalid or mutually inconsistent configuration values."""


class FrameParseError(PrivisError):
    """Malformed frame file; message names the offending line."""


class AuthFailure(PrivisError):
    """AEAD tag verification failed; no plaintext was released."""


class MalformedHeader(PrivisError):
    """Sealed unit cannot be parsed (bad magic, lengths, truncation)."""


class NonceReuseError(PrivisError):
    """A (key, nonce) pair was about to be used twice; sealing refused."""


class InsufficientData(PrivisError):
    """Too few samples for a statistical estimate."""


class BudgetExceededWarning(UserWarning):
    """Protection cost exceeds the frame budget even at the floor policy."""


class OrderingError(PrivisError):
    """Benchmark latency ordering contract violated."""
