"""Word-to-subword label projection and its inverse.

A word keeps its own label on its first subword; trailing subwords take the
auxiliary tag of the word's family ("tempatnya" B-ASPECT -> ["tempat",
"##nya"] labeled [B-ASPECT, X-ASPECT]; "utk" O -> ["ut", "##k"] labeled
[O, Y]).  The sequence is wrapped in [CLS]/[SEP] markers labeled A and Z.

``collapse`` inverts the projection: each word receives the prediction at
its first subword, with auxiliary predictions landing there repaired to the
original tag they shadow.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

from .errors import (
    AuxiliaryLabelInInput,
    EmptySentence,
    LengthMismatch,
    SentenceTooLong,
)
from .labels import TRAILING_TAG, Tag

CLS = "[CLS]"
SEP = "[SEP]"

DEFAULT_SUBWORD_CAP = 512

Segmenter = Callable[[str], list[str]]

# Auxiliary prediction on a first-subword position -> original tag emitted.
REPAIR_TABLE: dict[Tag, Tag] = {
    Tag.X_ASPECT: Tag.I_ASPECT,
    Tag.X_SENTIMENT: Tag.I_SENTIMENT,
    Tag.Y: Tag.O,
    Tag.A: Tag.O,
    Tag.Z: Tag.O,
}


@dataclass(frozen=True)
class AlignedSentence:
    """Parallel word- and subword-level views of one sentence.

    ``spans[i] = (start, end)`` are inclusive indices into ``subwords`` for
    word i; span starts carry the word's own label, the rest its trailing
    auxiliary.  ``word_labels``/``subword_labels`` are None for unlabeled
    sentences (tagging input).
    """

    words: tuple[str, ...]
    word_labels: tuple[Tag, ...] | None
    subwords: tuple[str, ...]
    subword_labels: tuple[Tag, ...] | None
    spans: tuple[tuple[int, int], ...]
    sid: str = ""

    def __len__(self) -> int:
        return len(self.subwords)


def whole_word_segmenter(word: str) -> list[str]:
    """Fallback used when no vocabulary is given: one subword per word."""
    return [word]


class WordpieceSegmenter:
    """Greedy longest-match segmentation against a vocabulary.

    Continuation pieces carry the "##" prefix.  A word with no match at some
    position falls back to a deterministic character split, so every word
    yields at least one subword and alignment is always possible.
    """

    def __init__(self, vocab: Sequence[str], lowercase: bool = True):
        self.vocab = frozenset(vocab)
        self.lowercase = lowercase

    @classmethod
    def from_file(cls, path: str, lowercase: bool = True) -> "WordpieceSegmenter":
        with open(path, encoding="utf-8") as fh:
            vocab = [line.rstrip("\n") for line in fh if line.strip()]
        return cls(vocab, lowercase=lowercase)

    def __call__(self, word: str) -> list[str]:
        text = word.lower() if self.lowercase else word
        pieces: list[str] = []
        start = 0
        while start < len(text):
            end = len(text)
            found = None
            while start < end:
                piece = text[start:end]
                if start > 0:
                    piece = "##" + piece
                if piece in self.vocab:
                    found = piece
                    break
                end -= 1
            if found is None:
                return _character_split(text)
            pieces.append(found)
            start = end
        return pieces


def _character_split(text: str) -> list[str]:
    return [text[0]] + ["##" + ch for ch in text[1:]]


def segment_sentence(
    words: Sequence[str],
    segmenter: Segmenter,
    max_subwords: int = DEFAULT_SUBWORD_CAP,
    sid: str = "",
) -> AlignedSentence:
    """Build the unlabeled subword view of a sentence (markers included)."""
    segments = [list(segmenter(w)) for w in words]
    return from_segments(words, None, segments, max_subwords=max_subwords, sid=sid)


def project(
    words: Sequence[str],
    word_labels: Sequence[Tag],
    segmenter: Segmenter,
    max_subwords: int = DEFAULT_SUBWORD_CAP,
    sid: str = "",
) -> AlignedSentence:
    """Project word-level labels onto the segmented subword sequence."""
    segments = [list(segmenter(w)) for w in words]
    return from_segments(
        words, word_labels, segments, max_subwords=max_subwords, sid=sid
    )


def from_segments(
    words: Sequence[str],
    word_labels: Sequence[Tag] | None,
    segments: Sequence[Sequence[str]],
    max_subwords: int = DEFAULT_SUBWORD_CAP,
    sid: str = "",
) -> AlignedSentence:
    """Like ``project`` but with per-word subword lists already computed.

    This is the entry point for externally tokenized input (segmentation
    sidecars), where the segmenter ran out of process.
    """
    if len(words) == 0:
        raise EmptySentence("sentence has no words")
    if len(words) != len(segments):
        raise LengthMismatch(
            f"{len(words)} words but {len(segments)} segment lists"
        )
    if word_labels is not None:
        if len(word_labels) != len(words):
            raise LengthMismatch(
                f"{len(words)} words but {len(word_labels)} labels"
            )
        for label in word_labels:
            if label.is_auxiliary:
                raise AuxiliaryLabelInInput(
                    f"word-level input may not carry auxiliary tag {label.value}"
                )

    subwords: list[str] = [CLS]
    subword_labels: list[Tag] | None = [Tag.A] if word_labels is not None else None
    spans: list[tuple[int, int]] = []
    for i, pieces in enumerate(segments):
        if len(pieces) == 0:
            raise EmptySentence(f"segmenter returned no subwords for word {words[i]!r}")
        start = len(subwords)
        subwords.extend(pieces)
        spans.append((start, start + len(pieces) - 1))
        if word_labels is not None and subword_labels is not None:
            label = word_labels[i]
            subword_labels.append(label)
            subword_labels.extend([TRAILING_TAG[label]] * (len(pieces) - 1))
    subwords.append(SEP)
    if subword_labels is not None:
        subword_labels.append(Tag.Z)

    if len(subwords) > max_subwords:
        raise SentenceTooLong(
            f"sentence {sid or '<unnamed>'} has {len(subwords)} subwords "
            f"(cap {max_subwords}); rejected rather than truncated"
        )

    return AlignedSentence(
        words=tuple(words),
        word_labels=tuple(word_labels) if word_labels is not None else None,
        subwords=tuple(subwords),
        subword_labels=tuple(subword_labels) if subword_labels is not None else None,
        spans=tuple(spans),
        sid=sid,
    )


def collapse(
    aligned: AlignedSentence, predicted_subword_labels: Sequence[Tag]
) -> list[Tag]:
    """Word-level labels from subword predictions (first-subword rule)."""
    labels, _ = collapse_with_repairs(aligned, predicted_subword_labels)
    return labels


def collapse_with_repairs(
    aligned: AlignedSentence, predicted_subword_labels: Sequence[Tag]
) -> tuple[list[Tag], int]:
    """Collapse and also report how many first-subword predictions needed repair.

    Predictions at trailing-subword and marker positions are discarded; an
    auxiliary prediction at a span start is mapped through REPAIR_TABLE and
    counted.  Projected gold labels never trigger repairs.
    """
    if len(predicted_subword_labels) != len(aligned.subwords):
        raise LengthMismatch(
            f"{len(predicted_subword_labels)} predictions for "
            f"{len(aligned.subwords)} subwords"
        )
    labels: list[Tag] = []
    repairs = 0
    for start, _ in aligned.spans:
        label = predicted_subword_labels[start]
        if label.is_auxiliary:
            label = REPAIR_TABLE[label]
            repairs += 1
        labels.append(label)
    return labels, repairs
