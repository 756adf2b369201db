"""Tag set and transition grammar for subword-aware BIO tagging.

The tag space has ten entries: the five original BIO tags used to annotate
words (O, B-ASPECT, I-ASPECT, B-SENTIMENT, I-SENTIMENT) plus five auxiliary
tags that only ever appear on subword sequences: A marks [CLS], Z marks
[SEP], X-ASPECT / X-SENTIMENT mark trailing subwords of aspect / sentiment
words, and Y marks trailing subwords of O words.

The index order is fixed (model files depend on it):

    0 O, 1 B-ASPECT, 2 I-ASPECT, 3 B-SENTIMENT, 4 I-SENTIMENT,
    5 A, 6 Z, 7 X-ASPECT, 8 X-SENTIMENT, 9 Y
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from .errors import UnknownLabel


class Tag(Enum):
    O = "O"
    B_ASPECT = "B-ASPECT"
    I_ASPECT = "I-ASPECT"
    B_SENTIMENT = "B-SENTIMENT"
    I_SENTIMENT = "I-SENTIMENT"
    A = "A"
    Z = "Z"
    X_ASPECT = "X-ASPECT"
    X_SENTIMENT = "X-SENTIMENT"
    Y = "Y"

    def __repr__(self) -> str:  # keeps test failure output short
        return f"<{self.value}>"

    @property
    def is_original(self) -> bool:
        return self in ORIGINAL_TAGS

    @property
    def is_auxiliary(self) -> bool:
        return not self.is_original

    @property
    def family(self) -> str | None:
        """Entity family this tag belongs to: "ASPECT", "SENTIMENT", or None."""
        if self in (Tag.B_ASPECT, Tag.I_ASPECT, Tag.X_ASPECT):
            return "ASPECT"
        if self in (Tag.B_SENTIMENT, Tag.I_SENTIMENT, Tag.X_SENTIMENT):
            return "SENTIMENT"
        return None


ORIGINAL_TAGS: tuple[Tag, ...] = (
    Tag.O,
    Tag.B_ASPECT,
    Tag.I_ASPECT,
    Tag.B_SENTIMENT,
    Tag.I_SENTIMENT,
)

AUXILIARY_TAGS: tuple[Tag, ...] = (Tag.A, Tag.Z, Tag.X_ASPECT, Tag.X_SENTIMENT, Tag.Y)

ALL_TAGS: tuple[Tag, ...] = ORIGINAL_TAGS + AUXILIARY_TAGS

NUM_TAGS = len(ALL_TAGS)

# Auxiliary tag carried by trailing subwords, keyed by the word's tag.
TRAILING_TAG: dict[Tag, Tag] = {
    Tag.O: Tag.Y,
    Tag.B_ASPECT: Tag.X_ASPECT,
    Tag.I_ASPECT: Tag.X_ASPECT,
    Tag.B_SENTIMENT: Tag.X_SENTIMENT,
    Tag.I_SENTIMENT: Tag.X_SENTIMENT,
}

_ALIASES = {"OTHER": Tag.O}


def parse_tag(text: str) -> Tag:
    """Parse a label string; case-insensitive, "O" and "OTHER" are the same tag."""
    name = text.strip().upper()
    if not name:
        raise UnknownLabel("empty label string")
    if name in _ALIASES:
        return _ALIASES[name]
    for tag in ALL_TAGS:
        if tag.value == name:
            return tag
    raise UnknownLabel(f"unknown label {text!r}")


def to_string(tag: Tag) -> str:
    return tag.value


@dataclass(frozen=True)
class ConstraintMask:
    """Boolean transition grammar over the ten tags.

    ``transition[i, j]`` is True iff tag j may immediately follow tag i.
    ``start[i]`` / ``end[i]`` say whether a sequence may begin / end at tag i.
    """

    transition: np.ndarray  # (NUM_TAGS, NUM_TAGS) bool
    start: np.ndarray  # (NUM_TAGS,) bool
    end: np.ndarray  # (NUM_TAGS,) bool

    def allows(self, prev: int, nxt: int) -> bool:
        return bool(self.transition[prev, nxt])

    def violations(self, indices: list[int]) -> list[tuple[int, str]]:
        """Positions where the index sequence breaks the grammar.

        Position 0 is reported when the start tag is not allowed to start;
        position t > 0 when the (t-1, t) bigram is forbidden; the last
        position (again) when it may not end a sequence.
        """
        out: list[tuple[int, str]] = []
        if not indices:
            return out
        if not self.start[indices[0]]:
            out.append((0, f"start:{ALL_TAGS[indices[0]].value}"))
        for t in range(1, len(indices)):
            if not self.transition[indices[t - 1], indices[t]]:
                bigram = f"{ALL_TAGS[indices[t - 1]].value}->{ALL_TAGS[indices[t]].value}"
                out.append((t, bigram))
        if not self.end[indices[-1]]:
            out.append((len(indices) - 1, f"end:{ALL_TAGS[indices[-1]].value}"))
        return out


# Tags legal as the first / following word-level label of a well-formed BIO
# sentence.  I-X may only continue a B-X/I-X run; sentences never start with it.
_SENTENCE_INITIAL = (Tag.O, Tag.B_ASPECT, Tag.B_SENTIMENT)
_WORD_SUCCESSORS: dict[Tag, tuple[Tag, ...]] = {
    Tag.O: (Tag.O, Tag.B_ASPECT, Tag.B_SENTIMENT),
    Tag.B_ASPECT: (Tag.O, Tag.B_ASPECT, Tag.I_ASPECT, Tag.B_SENTIMENT),
    Tag.I_ASPECT: (Tag.O, Tag.B_ASPECT, Tag.I_ASPECT, Tag.B_SENTIMENT),
    Tag.B_SENTIMENT: (Tag.O, Tag.B_ASPECT, Tag.B_SENTIMENT, Tag.I_SENTIMENT),
    Tag.I_SENTIMENT: (Tag.O, Tag.B_ASPECT, Tag.B_SENTIMENT, Tag.I_SENTIMENT),
}


def default_constraint_mask() -> ConstraintMask:
    """The closure of the subword projection rules over well-formed sentences.

    Every sequence the projection can produce from a valid BIO sentence is
    legal under this mask, and nothing else is:

    - sequences start at A ([CLS]) and end at Z ([SEP]); Z is terminal;
    - A is followed by a tag legal at sentence start (O, B-ASPECT, B-SENTIMENT);
    - an original tag is followed by its trailing auxiliary (X-ASPECT /
      X-SENTIMENT / Y), by any word label legal after it, or by Z;
    - a trailing auxiliary repeats itself, and otherwise behaves like the
      word tag it shadows (X-* like I-*, Y like O) for outgoing edges.
    """
    idx = {tag: i for i, tag in enumerate(ALL_TAGS)}
    transition = np.zeros((NUM_TAGS, NUM_TAGS), dtype=bool)
    start = np.zeros(NUM_TAGS, dtype=bool)
    end = np.zeros(NUM_TAGS, dtype=bool)

    start[idx[Tag.A]] = True
    end[idx[Tag.Z]] = True

    for tag in _SENTENCE_INITIAL:
        transition[idx[Tag.A], idx[tag]] = True

    # Outgoing edges shared by a word tag and the auxiliary shadowing it.
    shadow = {
        Tag.O: Tag.Y,
        Tag.I_ASPECT: Tag.X_ASPECT,
        Tag.I_SENTIMENT: Tag.X_SENTIMENT,
    }
    for word_tag, successors in _WORD_SUCCESSORS.items():
        sources = [word_tag]
        if word_tag in shadow:
            sources.append(shadow[word_tag])
        # B-X words also produce X-X trailing subwords, but the X-X row is
        # already covered by the I-X shadow (identical successor sets).
        for src in sources:
            transition[idx[src], idx[TRAILING_TAG[word_tag]]] = True
            transition[idx[src], idx[Tag.Z]] = True
            for nxt in successors:
                transition[idx[src], idx[nxt]] = True

    return ConstraintMask(transition=transition, start=start, end=end)


class LabelSpace:
    """Fixed tag ordering with index mapping and the default transition mask."""

    def __init__(self) -> None:
        self.tags: tuple[Tag, ...] = ALL_TAGS
        self.index_of: dict[Tag, int] = {tag: i for i, tag in enumerate(ALL_TAGS)}
        self.mask: ConstraintMask = default_constraint_mask()

    def __len__(self) -> int:
        return NUM_TAGS

    def encode(self, tags: list[Tag]) -> list[int]:
        return [self.index_of[t] for t in tags]

    def decode(self, indices: list[int]) -> list[Tag]:
        return [self.tags[i] for i in indices]

    def render_mask_table(self) -> str:
        """Plain-text table of the transition grammar for CLI inspection."""
        names = [t.value for t in self.tags]
        width = max(len(n) for n in names) + 1
        header = " " * (width + 6) + " ".join(n.ljust(width) for n in names)
        lines = [header]
        for i, row_name in enumerate(names):
            cells = " ".join(
                ("yes" if self.mask.transition[i, j] else ".").ljust(width)
                for j in range(NUM_TAGS)
            )
            prefix = ("->" if self.mask.start[i] else "  ") + (
                "<-" if self.mask.end[i] else "  "
            )
            lines.append(f"{prefix} {row_name.ljust(width)} {cells}")
        lines.append("(-> may start a sequence, <- may end one)")
        return "\n".join(lines)
