"""Exception types shared across the package.

Everything raised on purpose derives from DippmError so callers (and the CLI)
can catch one base class and map it to a nonzero exit status.
"""


class DippmError(Exception):
    """Base class for all errors raised by this package."""


# -- graph document / IR errors -------------------------------------------

class MalformedDocument(DippmError):
    """Input is not valid JSON or violates the graph document schema."""


class CyclicGraph(DippmError):
    """Node inputs form a cycle."""


class DanglingReference(DippmError):
    """A node input or graph output references an id that does not exist."""


class BadShape(DippmError):
    """Tensor shape has a non-positive entry or an unsupported rank."""


class InvalidSpec(DippmError):
    """Zoo model specification (or equivalent config) is out of range."""


# -- shape inference / featurization ---------------------------------------

class ShapeMismatch(DippmError):
    """Operand shapes are incompatible for the requested operation."""


class Underspecified(DippmError):
    """A required attribute or shape is missing, so a value cannot be derived."""


class EmptyGraph(DippmError):
    """Graph contains no operator nodes."""


# -- numerics / training ----------------------------------------------------

class NonFinite(DippmError):
    """A loss or intermediate value became NaN or infinite."""


class EmptyDataset(DippmError):
    """Training requires at least one record."""


# -- dataset / metrics ------------------------------------------------------

class TooFew(DippmError):
    """Not enough records to split."""


class LengthMismatch(DippmError):
    """Paired sequences have different lengths."""


class ZeroActual(DippmError):
    """Percentage error is undefined against a zero actual value."""


class MalformedRecord(DippmError):
    """A dataset line cannot be decoded into a record."""


# -- persistence ------------------------------------------------------------

class IoFailure(DippmError):
    """File could not be read, written, or decoded."""


class VersionMismatch(DippmError):
    """Stored model was built against a different feature vocabulary."""
