"""Exception and warning types shared across the toolkit."""


class CcnzError(Exception):
    """Base class for every error raised by this package."""


class MagicMismatch(CcnzError):
    """File does not start with the expected magic bytes."""


class VersionUnsupported(CcnzError):
    """File declares a format version this build cannot read."""


class TruncatedFile(CcnzError):
    """File ended before the declared content was fully read."""


class CorruptStream(CcnzError):
    """Serialized content is structurally invalid or inconsistent."""


class ChecksumMismatch(CcnzError):
    """Stored CRC32 does not match the payload."""


class NonFiniteWeight(CcnzError):
    """A weight component is NaN or infinite."""


class DuplicateLayer(CcnzError):
    """Two layers in one model share a name."""


class IoFailure(CcnzError):
    """Underlying OS-level read or write failed."""


class ShapeMismatch(CcnzError):
    """Declared shape is inconsistent with the data it describes."""


class EmptyInput(CcnzError):
    """An operation that needs at least one point received none."""


class EmptyHistogram(CcnzError):
    """Cannot build a code table from zero symbols."""


class UnknownSymbol(CcnzError):
    """Symbol to encode is absent from the code table."""


class IndexOutOfRange(CcnzError):
    """A stored index points past the end of its codebook or dictionary."""


class SizeExceeded(CcnzError):
    """Input is larger than a brute-force oracle is allowed to accept."""


class ConfigError(CcnzError):
    """Pipeline configuration violates its own consistency rules."""


class PipelineError(CcnzError):
    """A compression stage failed; the message names layer and stage."""


class AllPrunedWarning(UserWarning):
    """Every weight of a layer fell below the pruning threshold."""
