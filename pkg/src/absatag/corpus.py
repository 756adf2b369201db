"""Corpus ingestion, splitting, statistics, and synthetic data.

The file format is CoNLL-style: one ``token<TAB>label`` pair per line, blank
line between sentences.  Tagging input may omit labels (token-only lines).
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import (
    EmptyFile,
    InsufficientData,
    MalformedLine,
    UnknownLabel,
)
from .labels import ORIGINAL_TAGS, Tag, parse_tag

TRAIN, VALIDATION, TEST = "train", "validation", "test"


@dataclass(frozen=True)
class Sentence:
    sid: str
    words: tuple[str, ...]
    labels: tuple[Tag, ...] | None
    split: str = TRAIN


@dataclass
class Corpus:
    sentences: list[Sentence] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.sentences)

    def split(self, name: str) -> list[Sentence]:
        return [s for s in self.sentences if s.split == name]

    def splits_present(self) -> list[str]:
        seen: list[str] = []
        for s in self.sentences:
            if s.split not in seen:
                seen.append(s.split)
        return seen


def read_conll(
    path: str,
    split: str = TRAIN,
    allow_unlabeled: bool = False,
    sid_prefix: str = "",
) -> Corpus:
    """Parse a CoNLL-style file into one split of a corpus.

    Word-level labels must be original tags; an auxiliary tag in the file is
    malformed input.  With ``allow_unlabeled`` every sentence must be either
    fully labeled or fully label-free.
    """
    sentences: list[Sentence] = []
    words: list[str] = []
    labels: list[Tag] = []
    unlabeled = False

    def flush() -> None:
        nonlocal words, labels, unlabeled
        if not words:
            return
        sid = f"{sid_prefix}{len(sentences)}"
        sentences.append(
            Sentence(
                sid=sid,
                words=tuple(words),
                labels=None if unlabeled else tuple(labels),
                split=split,
            )
        )
        words, labels = [], []
        unlabeled = False

    with open(path, encoding="utf-8") as fh:
        for line_number, raw in enumerate(fh, start=1):
            line = raw.rstrip("\n")
            if not line.strip():
                flush()
                continue
            parts = line.split("\t")
            if len(parts) == 1:
                if not allow_unlabeled:
                    raise MalformedLine(
                        f"line {line_number}: expected 'token<TAB>label', got {line!r}",
                        line_number=line_number,
                    )
                if labels:
                    raise MalformedLine(
                        f"line {line_number}: sentence mixes labeled and "
                        "unlabeled tokens",
                        line_number=line_number,
                    )
                unlabeled = True
                words.append(parts[0])
                continue
            if len(parts) != 2 or not parts[0] or not parts[1]:
                raise MalformedLine(
                    f"line {line_number}: expected 'token<TAB>label', got {line!r}",
                    line_number=line_number,
                )
            if unlabeled:
                raise MalformedLine(
                    f"line {line_number}: sentence mixes labeled and unlabeled tokens",
                    line_number=line_number,
                )
            try:
                label = parse_tag(parts[1])
            except UnknownLabel as exc:
                raise MalformedLine(
                    f"line {line_number}: {exc}", line_number=line_number
                ) from None
            if label.is_auxiliary:
                raise MalformedLine(
                    f"line {line_number}: auxiliary tag {label.value} is not a "
                    "word-level label",
                    line_number=line_number,
                )
            words.append(parts[0])
            labels.append(label)
    flush()

    if not sentences:
        raise EmptyFile(f"{path}: no sentences")
    return Corpus(sentences=sentences)


def write_conll(sentences: list[Sentence], path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for sentence in sentences:
            if sentence.labels is None:
                for word in sentence.words:
                    fh.write(f"{word}\n")
            else:
                for word, label in zip(sentence.words, sentence.labels):
                    fh.write(f"{word}\t{label.value}\n")
            fh.write("\n")


def merge(*corpora: Corpus) -> Corpus:
    out = Corpus()
    for c in corpora:
        out.sentences.extend(c.sentences)
    return out


def split_train_validation(corpus: Corpus, n_train: int, seed: int) -> Corpus:
    """Reassign the train split into train/validation with a seeded shuffle.

    Other splits pass through untouched.  Deterministic: the same seed
    always produces the same assignment.
    """
    train = corpus.split(TRAIN)
    if not 0 < n_train < len(train):
        raise InsufficientData(
            f"cannot take {n_train} training sentences from a pool of "
            f"{len(train)}; validation would be empty"
        )
    order = np.random.default_rng(seed).permutation(len(train))
    keep = set(order[:n_train].tolist())
    assignment = {
        s.sid: (TRAIN if i in keep else VALIDATION) for i, s in enumerate(train)
    }
    sentences = [
        replace(s, split=assignment[s.sid]) if s.split == TRAIN else s
        for s in corpus.sentences
    ]
    return Corpus(sentences=sentences)


@dataclass
class CorpusStats:
    label_counts: dict[str, dict[Tag, int]]  # split -> tag -> count
    token_totals: dict[str, int]
    unique_tokens: dict[str, int]
    overlap_percent: float | None  # test uniques found in train, if both exist
    sentence_counts: dict[str, int]


def stats(corpus: Corpus) -> CorpusStats:
    """Word-level label distribution and vocabulary overlap per split."""
    label_counts: dict[str, dict[Tag, int]] = {}
    token_totals: dict[str, int] = {}
    vocab: dict[str, set[str]] = {}
    sentence_counts: dict[str, int] = {}
    for split in corpus.splits_present():
        counts: Counter[Tag] = Counter()
        tokens: set[str] = set()
        total = 0
        n = 0
        for sentence in corpus.split(split):
            n += 1
            tokens.update(sentence.words)
            total += len(sentence.words)
            if sentence.labels is not None:
                counts.update(sentence.labels)
        label_counts[split] = {tag: counts.get(tag, 0) for tag in ORIGINAL_TAGS}
        token_totals[split] = total
        vocab[split] = tokens
        sentence_counts[split] = n

    overlap = None
    if TRAIN in vocab and TEST in vocab and vocab[TEST]:
        overlap = 100.0 * len(vocab[TEST] & vocab[TRAIN]) / len(vocab[TEST])
    return CorpusStats(
        label_counts=label_counts,
        token_totals=token_totals,
        unique_tokens={k: len(v) for k, v in vocab.items()},
        overlap_percent=overlap,
        sentence_counts=sentence_counts,
    )


def render_stats(s: CorpusStats) -> str:
    """Aligned label-distribution table plus machine-readable key=value lines."""
    splits = list(s.label_counts.keys())
    name = {Tag.O: "OTHER"}
    rows = [(name.get(t, t.value), t) for t in ORIGINAL_TAGS]
    width = max(len("Label"), *(len(r[0]) for r in rows))
    lines = ["Label".ljust(width) + "".join(f"{split:>12}" for split in splits)]
    for display, tag in rows:
        lines.append(
            display.ljust(width)
            + "".join(f"{s.label_counts[split][tag]:>12}" for split in splits)
        )
    lines.append(
        "Total".ljust(width)
        + "".join(f"{s.token_totals[split]:>12}" for split in splits)
    )
    lines.append("")
    for split in splits:
        lines.append(f"sentences.{split}={s.sentence_counts[split]}")
        lines.append(f"tokens.{split}={s.token_totals[split]}")
        lines.append(f"unique_tokens.{split}={s.unique_tokens[split]}")
        for display, tag in rows:
            lines.append(f"count.{split}.{display}={s.label_counts[split][tag]}")
    if s.overlap_percent is not None:
        lines.append(f"overlap_percent={s.overlap_percent:.1f}")
    return "\n".join(lines)


# --- synthetic data ---------------------------------------------------------

# Closed word inventory with a deterministic token -> label mapping; every
# inventory word is also segmentable by the vocabulary from synth_vocab(), so
# generated corpora exercise the full auxiliary-label path.
_ASPECT_HEADS = [
    "kamar", "lokasi", "wifi", "kasur", "pelayanan", "harga", "tempatnya",
    "kamarnya", "sarapan", "stafnya", "acnya", "airnya", "parkiran", "lobi",
    "toiletnya",
]
_ASPECT_TAILS = {"kamar": ["mandi", "tidur"], "tempatnya": [], "lokasi": []}
_SENTIMENT_HEADS = [
    "bersih", "nyaman", "bagus", "oke", "murah", "ramah", "cepat", "luas",
    "kotor", "lambat", "mahal", "berisik", "strategis", "dingin", "enak",
    "bagusnya", "murahnya",
]
_SENTIMENT_TAILS = ["banget", "sekali", "bgt", "pol"]
_FILLERS = [
    "dan", "yang", "utk", "di", "ke", "tapi", "juga", "dekat", "dari", "ada",
    "dgn", "buat", "klo", "krn", "deh",
]

# Inventory words segmented into stem + suffix by the synthetic vocabulary;
# everything else stays whole.  Keeps the auxiliary labels exercised.
_MULTI_PIECE = {
    "tempatnya", "kamarnya", "stafnya", "acnya", "airnya", "toiletnya",
    "bagusnya", "murahnya", "parkiran",
}
_STEMS = ["tempat", "kamar", "staf", "ac", "air", "toilet", "bagus", "murah",
          "parkir"]


def synth_vocab() -> list[str]:
    """Subword vocabulary for the generator's inventory."""
    inventory = (
        set(_ASPECT_HEADS)
        | {w for tails in _ASPECT_TAILS.values() for w in tails}
        | set(_SENTIMENT_HEADS)
        | set(_SENTIMENT_TAILS)
        | set(_FILLERS)
    )
    return sorted((inventory - _MULTI_PIECE) | set(_STEMS)) + ["##nya", "##an"]


def synth_corpus(n_train: int, n_test: int, seed: int) -> Corpus:
    """Template-generated hotel-review-like sentences with gold spans.

    Token -> label is deterministic by construction (each inventory word
    plays exactly one role), which makes the frequency baseline exact on
    data drawn from the same inventory.
    """
    rng = np.random.default_rng(seed)
    sentences: list[Sentence] = []

    def aspect_phrase() -> tuple[list[str], list[Tag]]:
        head = _ASPECT_HEADS[rng.integers(len(_ASPECT_HEADS))]
        words, labels = [head], [Tag.B_ASPECT]
        tails = _ASPECT_TAILS.get(head, [])
        if tails and rng.random() < 0.35:
            tail = tails[rng.integers(len(tails))]
            words.append(tail)
            labels.append(Tag.I_ASPECT)
        return words, labels

    def sentiment_phrase() -> tuple[list[str], list[Tag]]:
        head = _SENTIMENT_HEADS[rng.integers(len(_SENTIMENT_HEADS))]
        words, labels = [head], [Tag.B_SENTIMENT]
        if rng.random() < 0.3:
            tail = _SENTIMENT_TAILS[rng.integers(len(_SENTIMENT_TAILS))]
            words.append(tail)
            labels.append(Tag.I_SENTIMENT)
        return words, labels

    def filler() -> tuple[list[str], list[Tag]]:
        return [_FILLERS[rng.integers(len(_FILLERS))]], [Tag.O]

    def make(split: str, index: int) -> Sentence:
        words: list[str] = []
        labels: list[Tag] = []
        clauses = 1 + int(rng.random() < 0.4)
        for c in range(clauses):
            if c > 0:
                w, l = filler()
                words += w
                labels += l
            if rng.random() < 0.3:
                w, l = filler()
                words += w
                labels += l
            w, l = aspect_phrase()
            words += w
            labels += l
            if rng.random() < 0.25:
                w, l = filler()
                words += w
                labels += l
            w, l = sentiment_phrase()
            words += w
            labels += l
        if rng.random() < 0.2:
            w, l = filler()
            words += w
            labels += l
        return Sentence(
            sid=f"{split}-{index}",
            words=tuple(words),
            labels=tuple(labels),
            split=split,
        )

    for i in range(n_train):
        sentences.append(make(TRAIN, i))
    for i in range(n_test):
        sentences.append(make(TEST, i))
    return Corpus(sentences=sentences)
