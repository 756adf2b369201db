"""Exception types shared across the package.

Every error raised on bad data or bad usage derives from AbsatagError so the
CLI can catch one base class and exit nonzero with the message.
"""


class AbsatagError(Exception):
    """Base class for all package errors."""


class UnknownLabel(AbsatagError):
    """A label string does not name any tag in the tag set."""


class EmptySentence(AbsatagError):
    """A sentence with zero words was passed where at least one is required."""


class AuxiliaryLabelInInput(AbsatagError):
    """Word-level input labels may only use the five original BIO tags."""


class SentenceTooLong(AbsatagError):
    """Subword sequence exceeds the configured cap; rejected, never truncated."""


class LengthMismatch(AbsatagError):
    """Two parallel sequences that must have equal length do not."""


class GoldViolatesMask(AbsatagError):
    """A gold label sequence uses a transition forbidden by the active mask."""


class NoLegalPath(AbsatagError):
    """Constrained decoding found no sequence satisfying the mask."""


class MissingSentence(AbsatagError):
    """An external-logits file has no record for a corpus sentence."""


class SubwordMismatch(AbsatagError):
    """External-logits subwords diverge from the aligned sentence.

    ``position`` is the first index where the two sequences differ.
    """

    def __init__(self, message: str, position: int):
        super().__init__(message)
        self.position = position


class MalformedRecord(AbsatagError):
    """An external-logits line could not be parsed or fails validation."""


class MalformedLine(AbsatagError):
    """A corpus file line could not be parsed.

    ``line_number`` is 1-based.
    """

    def __init__(self, message: str, line_number: int):
        super().__init__(message)
        self.line_number = line_number


class EmptyFile(AbsatagError):
    """A corpus file contains no sentences."""


class InsufficientData(AbsatagError):
    """Not enough sentences to perform the requested split."""


class EmptySplit(AbsatagError):
    """A required corpus split has no sentences."""


class NonFiniteLoss(AbsatagError):
    """Training loss became NaN or infinite; aborted with diagnostics."""


class EmptyTraining(AbsatagError):
    """The frequency baseline needs a non-empty training split."""
