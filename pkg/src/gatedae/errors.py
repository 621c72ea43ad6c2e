"""Exception types shared across the package."""


class GaeError(Exception):
    """Base class for every error raised by gatedae."""


class ShapeError(GaeError, ValueError):
    pass


class InputError(GaeError, ValueError):
    """Non-finite or otherwise invalid numeric input."""


class UsageError(GaeError, ValueError):
    """A precondition on arguments or configuration was violated."""


class CapabilityError(GaeError, NotImplementedError):
    """Requested feature (activation, model kind, ...) is not supported."""


class DivergenceError(GaeError, RuntimeError):
    def __init__(self, message, epoch=None, trace=None):
        super().__init__(message)
        self.epoch = epoch
        self.trace = trace


class ParseError(GaeError, ValueError):
    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class ArchiveError(GaeError, IOError):
    pass


class ChecksumError(ArchiveError):
    pass


class VersionError(ArchiveError):
    pass
