"""
Domain exceptions.

Every message names the constraint that was violated so CLI output is
actionable without a traceback.
"""
from typing import Sequence


class EmphasisError(Exception):
    """Base class for all toolkit errors"""


# Audio

class AudioNotFoundError(EmphasisError):
    pass


class UnsupportedFormatError(EmphasisError):
    pass


class StorageError(EmphasisError):
    """Reading or writing an artifact failed at the filesystem level"""


class InvalidInputError(EmphasisError):
    pass


class TooShortError(EmphasisError):
    pass


# Features / classifier

class DegenerateUtteranceError(EmphasisError):
    pass


class SingleClassDataError(EmphasisError):
    pass


class NonFiniteLossError(EmphasisError):
    pass


class DimensionMismatchError(EmphasisError):
    pass


class FingerprintMismatchError(EmphasisError):
    pass


class EmptySpanError(EmphasisError):
    pass


class SpanOutOfRangeError(EmphasisError):
    pass


class OverlappingSpansError(EmphasisError):
    pass


class EmptyDatasetError(EmphasisError):
    pass


# Segmentation

class OverlappingTimestampsError(EmphasisError):
    pass


class NegativeTimeError(EmphasisError):
    pass


class SegmentCountMismatchError(EmphasisError):
    def __init__(self, found: int, expected: int):
        self.found = found
        self.expected = expected
        super().__init__(f"SegmentCountMismatch(found={found}, expected={expected})")


# Alignment

class NotIdenticalError(EmphasisError):
    pass


class EmptyCorpusError(EmphasisError):
    pass


class UnknownScorerError(EmphasisError):
    def __init__(self, name: str, valid: Sequence[str]):
        self.name = name
        self.valid = tuple(valid)
        super().__init__(f"unknown aligner {name!r}; valid values: {', '.join(self.valid)}")


class MissingExternalScoresError(EmphasisError):
    pass


class IndexOutOfBoundsError(EmphasisError):
    pass


# Pipeline / generator

class IdMismatchError(EmphasisError):
    pass


class UnknownIdError(EmphasisError):
    pass


class InvalidIndexError(EmphasisError):
    pass


class UnmappedTokenError(EmphasisError):
    pass
