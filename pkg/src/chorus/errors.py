"""Exception types shared across the package."""


class ChorusError(Exception):
    """Base class for all package-specific errors."""


class UnknownCharacter(ChorusError):
    """Text contains a character (or word) the tokenizer cannot encode."""

    def __init__(self, text: str, position: int):
        self.position = position
        snippet = text[position : position + 8]
        super().__init__(f"no tokenization at position {position}: {snippet!r}")


class InvalidTokenId(ChorusError):
    """A token id is outside the vocabulary."""


class EmptyCorpus(ChorusError):
    """A corpus with no usable text was supplied."""


class FingerprintMismatch(ChorusError):
    """Two objects that must share a vocabulary fingerprint do not."""


class ParseError(ChorusError):
    """A file does not conform to its wire format."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class SchemaVersionMismatch(ParseError):
    """A dump or transcript file declares an unsupported schema version."""


class InvalidKernelParam(ChorusError):
    """A consistency kernel parameter is outside its valid range."""


class AllZeroScores(ChorusError):
    """Every model produced a zero consistency score; weights are undefined."""


class EndpointFailure(ChorusError):
    """An assistant endpoint failed to produce a distribution."""

    def __init__(self, endpoint_id: str, cause: Exception | None = None):
        self.endpoint_id = endpoint_id
        self.cause = cause
        super().__init__(f"endpoint {endpoint_id!r} failed: {cause}")


class MainEndpointFailure(ChorusError):
    """The main endpoint failed; decoding cannot continue."""


class DegenerateAfterClamp(ChorusError):
    """Noise injection zeroed out an entire distribution, twice."""


class ConfigError(ChorusError):
    """An experiment configuration field is missing or invalid."""

    def __init__(self, field_path: str, message: str):
        self.field_path = field_path
        super().__init__(f"{field_path}: {message}")


class MissingLabels(ChorusError):
    """Transcripts lack the ground-truth labels diagnostics need."""
