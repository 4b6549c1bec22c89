"""Exception hierarchy shared across the package.

Every failure raised by this package derives from BevSegError, so callers
(and the CLI) can catch one base type. File readers additionally guarantee
they never raise anything outside this hierarchy plus the builtin
FileNotFoundError, no matter what bytes they are fed.
"""


class BevSegError(Exception):
    """Base class for all errors raised by bevseg."""


class InvalidConfigError(BevSegError):
    """A configuration value or config file violates its invariants."""


class InvalidInputError(BevSegError):
    """An argument fails the operation's preconditions."""


class InvalidStateError(BevSegError):
    """An object is in the wrong state for the operation (e.g. wrong frame)."""


class GenerationError(BevSegError):
    """Scene generation could not satisfy the requested layout."""


class UndefinedMetricError(BevSegError):
    """A metric has no defined value for the given inputs."""


class FileFormatError(BevSegError):
    """Base class for errors while decoding a serialized artifact."""


class MalformedFileError(FileFormatError):
    """Bad magic, unparseable header, or structurally invalid content."""


class TruncatedFileError(FileFormatError):
    """The payload is shorter (or longer) than the header declares."""


class InvalidLabelError(FileFormatError):
    """A label value is outside the declared class table."""
