"""Exception hierarchy shared by all granur modules."""


class GranurError(Exception):
    """Base class for all errors raised by this package."""


class ConfigError(GranurError):
    """Invalid pipeline configuration (bad key, bad value, bad config file)."""


class DataError(GranurError):
    """Invalid or unusable input data."""


class EmptyDocument(DataError):
    """Document tokenizes to zero tokens."""


class EmptyCorpus(DataError):
    """An index build received no chunks."""


class CorpusFormatError(DataError):
    """Malformed corpus/QA/label file (bad JSON, duplicate ids, missing fields)."""


class EmptyText(DataError):
    """Embedding requested for text that is empty after trimming."""


class OutOfRange(DataError):
    """Chunk ordinal, level, or node id outside its valid range."""


class DomainError(DataError):
    """Numeric argument outside the mathematical domain of an operation."""


class NoCandidates(DataError):
    """Soft-label construction got no scored candidate at any level."""


class InconsistentPyramid(DataError):
    """A retrieval hit references a chunk unknown to the corpus it came from."""


class EmptyMatrix(DataError):
    """Selection requested on a relevance matrix with no rows."""


class CheckpointError(DataError):
    """Malformed router checkpoint file."""


class RemoteUnavailable(GranurError):
    """The remote embedding service could not be reached or answered non-200."""


class DimMismatch(GranurError):
    """A vector's length disagrees with the configured/expected dimension."""
