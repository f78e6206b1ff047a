"""Exception hierarchy shared across chunklab modules."""


class ChunklabError(Exception):
    """Base class for all chunklab errors."""


class ParseError(ChunklabError):
    """A file could not be parsed; message carries path and line number."""


class ValidationError(ChunklabError):
    """An invariant or argument precondition was violated."""


class ConfigError(ChunklabError):
    """An experiment or prompt configuration is invalid."""


class ProviderError(ChunklabError):
    """A model provider call failed.

    ``retryable`` distinguishes transport/5xx failures (worth retrying)
    from permanent rejections such as schema errors.
    """

    def __init__(self, message: str, retryable: bool = True):
        super().__init__(message)
        self.retryable = retryable
