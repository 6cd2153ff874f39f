"""Exception hierarchy shared across the engine."""


class EngineError(Exception):
    """Base class for all engine errors."""


# corpus loading ------------------------------------------------------------

class MissingFileError(EngineError):
    pass


class MalformedJsonError(EngineError):
    def __init__(self, position, message="malformed JSON"):
        self.position = position
        super().__init__(f"{message} at position {position}")


class DuplicateChunkIdError(EngineError):
    def __init__(self, chunk_id):
        self.chunk_id = chunk_id
        super().__init__(f"duplicate chunk_id: {chunk_id!r}")


class SchemaViolationError(EngineError):
    def __init__(self, field, chunk_id, detail=""):
        self.field = field
        self.chunk_id = chunk_id
        msg = f"schema violation on field {field!r} (chunk {chunk_id!r})"
        if detail:
            msg += f": {detail}"
        super().__init__(msg)


# embedding -----------------------------------------------------------------

class UnknownEncoderError(EngineError):
    def __init__(self, name):
        self.name = name
        super().__init__(f"unknown encoder: {name!r}")


class ZeroVectorError(EngineError):
    pass


# dense index ---------------------------------------------------------------

class DimensionMismatchError(EngineError):
    pass


class UnnormalizedVectorError(EngineError):
    def __init__(self, position):
        self.position = position
        super().__init__(f"vector at position {position} is not unit-norm")


class EmptyIndexError(EngineError):
    pass


class IndexWriteFailureError(EngineError):
    pass


class IndexCorruptError(EngineError):
    """Persisted index unreadable or inconsistent; caller should rebuild."""


# generation gateway --------------------------------------------------------

class BackendUnavailableError(EngineError):
    pass


class GenerationTimeoutError(EngineError):
    pass


class MissingCredentialsError(EngineError):
    pass


class MissingPromptFileError(EngineError):
    def __init__(self, path):
        self.path = path
        super().__init__(f"prompt file not found: {path}")


class MalformedBackendJsonError(EngineError):
    pass


class InvalidReasoningLevelError(EngineError):
    def __init__(self, value):
        self.value = value
        super().__init__(f"invalid reasoning_level: {value!r}")


# indicator workflow --------------------------------------------------------

class MissingFieldError(EngineError):
    def __init__(self, field):
        self.field = field
        super().__init__(f"missing operation input field: {field!r}")


class InvalidValueError(EngineError):
    def __init__(self, field, value):
        self.field = field
        self.value = value
        super().__init__(f"invalid value {value!r} for field {field!r}")


class MalformedIndicatorJsonError(EngineError):
    pass


# audit ---------------------------------------------------------------------

class StorageFailureError(EngineError):
    pass


class UnknownAuditIdError(EngineError):
    pass


# evaluation ----------------------------------------------------------------

class EmptySetError(EngineError):
    pass


class LengthMismatchError(EngineError):
    pass


class FewerThanTwoError(EngineError):
    pass


class UnparsableCitationError(EngineError):
    def __init__(self, marker):
        self.marker = marker
        super().__init__(f"citation marker does not resolve: {marker!r}")
