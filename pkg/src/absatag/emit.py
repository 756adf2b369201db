"""Emission scores per subword position.

Two sources are supported: a trainable hashed-feature linear model (keeps
the toolkit self-contained, no neural encoder required) and externally
computed per-subword logits read from a line-oriented file, e.g. scores
exported from a pretrained transformer's token-classification head.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from typing import Iterable

import numpy as np

from .align import CLS, SEP, AlignedSentence
from .errors import MalformedRecord, MissingSentence, SubwordMismatch, UnknownLabel
from .labels import ALL_TAGS, NUM_TAGS, ORIGINAL_TAGS, Tag, parse_tag

DEFAULT_HASH_DIM = 1 << 16
DEFAULT_HASH_SEED = 20240001

_BOUNDARY_BEFORE = "<bos>"
_BOUNDARY_AFTER = "<eos>"

# Column index receiving each auxiliary tag's score when a five-column
# record is expanded: X-* copy the matching I-* column, Y copies O,
# A and Z start at zero (transitions learn to place the markers).
_EXPANSION_SOURCE = {
    Tag.A: None,
    Tag.Z: None,
    Tag.X_ASPECT: Tag.I_ASPECT,
    Tag.X_SENTIMENT: Tag.I_SENTIMENT,
    Tag.Y: Tag.O,
}


def hash_feature(name: str, hash_dim: int, seed: int) -> int:
    """Stable feature hash; independent of PYTHONHASHSEED and platform."""
    digest = hashlib.blake2b(
        name.encode("utf-8"), digest_size=8, key=seed.to_bytes(8, "little")
    ).digest()
    return int.from_bytes(digest, "little") & (hash_dim - 1)


def featurize(aligned: AlignedSentence, position: int) -> list[str]:
    """Feature strings firing at one subword position.

    Templates: subword identity, owning word identity (lowercased), word
    prefixes/suffixes of lengths 1-3, continuation indicator, marker
    indicators, neighbor subword identities, and first-subword-of-word.
    """
    subwords = aligned.subwords
    sw = subwords[position]
    feats = [f"sw={sw}"]

    word = None
    first_of_word = False
    for w, (start, end) in zip(aligned.words, aligned.spans):
        if start <= position <= end:
            word = w.lower()
            first_of_word = position == start
            break

    if word is not None:
        feats.append(f"w={word}")
        for k in (1, 2, 3):
            if len(word) >= k:
                feats.append(f"wp{k}={word[:k]}")
                feats.append(f"ws{k}={word[-k:]}")
    if sw.startswith("##"):
        feats.append("cont")
    if sw == CLS:
        feats.append("cls")
    if sw == SEP:
        feats.append("sep")
    prev_sw = subwords[position - 1] if position > 0 else _BOUNDARY_BEFORE
    next_sw = subwords[position + 1] if position + 1 < len(subwords) else _BOUNDARY_AFTER
    feats.append(f"sw[-1]={prev_sw}")
    feats.append(f"sw[+1]={next_sw}")
    if first_of_word:
        feats.append("first")
    return feats


@dataclass
class FeatureEmitter:
    """Linear model over hashed sparse features.

    ``weights`` is dense (hash_dim, NUM_TAGS) in memory so the optimizer's
    decoupled weight decay applies uniformly; rows of features never seen in
    training stay exactly zero and are dropped at serialization time.
    """

    hash_dim: int = DEFAULT_HASH_DIM
    hash_seed: int = DEFAULT_HASH_SEED
    weights: np.ndarray = field(default=None)  # type: ignore[assignment]

    def __post_init__(self) -> None:
        if self.hash_dim < (1 << 16) or self.hash_dim & (self.hash_dim - 1):
            raise ValueError("hash_dim must be a power of two >= 2**16")
        if self.weights is None:
            self.weights = np.zeros((self.hash_dim, NUM_TAGS))

    def feature_ids(self, aligned: AlignedSentence, position: int) -> np.ndarray:
        names = set(featurize(aligned, position))
        ids = {hash_feature(n, self.hash_dim, self.hash_seed) for n in names}
        return np.fromiter(sorted(ids), dtype=int)

    def sentence_feature_ids(self, aligned: AlignedSentence) -> list[np.ndarray]:
        return [self.feature_ids(aligned, t) for t in range(len(aligned))]

    def emit(self, aligned: AlignedSentence) -> np.ndarray:
        """(T, NUM_TAGS) emission matrix: row t sums the firing feature rows."""
        return self.emit_from_ids(self.sentence_feature_ids(aligned))

    def emit_from_ids(self, ids_per_position: list[np.ndarray]) -> np.ndarray:
        out = np.zeros((len(ids_per_position), NUM_TAGS))
        for t, ids in enumerate(ids_per_position):
            if ids.size:
                out[t] = self.weights[ids].sum(axis=0)
        return out

    def accumulate_gradient(
        self,
        grad_weights: np.ndarray,
        ids_per_position: list[np.ndarray],
        grad_emissions: np.ndarray,
    ) -> None:
        """Chain rule through the linear map: scatter-add emission gradients."""
        for t, ids in enumerate(ids_per_position):
            if ids.size:
                np.add.at(grad_weights, ids, grad_emissions[t])

    def nonzero_rows(self) -> dict[int, list[float]]:
        idx = np.flatnonzero(np.any(self.weights != 0.0, axis=1))
        return {int(i): [float(x) for x in self.weights[i]] for i in idx}


@dataclass(frozen=True)
class LogitsRecord:
    sid: str
    subwords: tuple[str, ...]
    scores: np.ndarray  # (T, NUM_TAGS), already expanded to ten columns


def expand_scores(scores: np.ndarray, tag_order: list[Tag]) -> np.ndarray:
    """Reorder record columns to canonical order, widening 5 -> 10 if needed."""
    by_tag = {tag: scores[:, i] for i, tag in enumerate(tag_order)}
    out = np.zeros((scores.shape[0], NUM_TAGS))
    for j, tag in enumerate(ALL_TAGS):
        if tag in by_tag:
            out[:, j] = by_tag[tag]
        else:
            source = _EXPANSION_SOURCE[tag]
            if source is not None:
                out[:, j] = by_tag[source]
    return out


def _parse_record(line: str, line_number: int) -> LogitsRecord:
    try:
        raw = json.loads(line)
    except json.JSONDecodeError as exc:
        raise MalformedRecord(f"line {line_number}: not valid JSON ({exc})") from None
    if not isinstance(raw, dict):
        raise MalformedRecord(f"line {line_number}: record must be an object")
    for key in ("id", "subwords", "scores", "tag_order"):
        if key not in raw:
            raise MalformedRecord(f"line {line_number}: missing field {key!r}")
    subwords = raw["subwords"]
    scores = raw["scores"]
    try:
        tag_order = [parse_tag(str(t)) for t in raw["tag_order"]]
    except UnknownLabel as exc:
        raise MalformedRecord(f"line {line_number}: bad tag_order ({exc})") from None
    if len(tag_order) not in (len(ORIGINAL_TAGS), NUM_TAGS):
        raise MalformedRecord(
            f"line {line_number}: tag_order must list 5 or 10 tags, "
            f"got {len(tag_order)}"
        )
    if len(set(tag_order)) != len(tag_order):
        raise MalformedRecord(f"line {line_number}: duplicate tags in tag_order")
    if len(tag_order) == len(ORIGINAL_TAGS) and set(tag_order) != set(ORIGINAL_TAGS):
        raise MalformedRecord(
            f"line {line_number}: five-column records must use the original tags"
        )
    matrix = np.asarray(scores, dtype=float)
    if matrix.ndim != 2 or matrix.shape != (len(subwords), len(tag_order)):
        raise MalformedRecord(
            f"line {line_number}: scores must be {len(subwords)}x{len(tag_order)}"
        )
    if not np.all(np.isfinite(matrix)):
        raise MalformedRecord(f"line {line_number}: non-finite score")
    return LogitsRecord(
        sid=str(raw["id"]),
        subwords=tuple(str(s) for s in subwords),
        scores=expand_scores(matrix, tag_order),
    )


def read_logits(path: str) -> dict[str, LogitsRecord]:
    records: dict[str, LogitsRecord] = {}
    with open(path, encoding="utf-8") as fh:
        for line_number, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            record = _parse_record(line, line_number)
            if record.sid in records:
                raise MalformedRecord(
                    f"line {line_number}: duplicate record id {record.sid!r}"
                )
            records[record.sid] = record
    return records


def write_logits(
    path: str,
    records: Iterable[tuple[str, Iterable[str], np.ndarray]],
    tag_order: tuple[Tag, ...] = ALL_TAGS,
) -> None:
    """Write records in the line format read back by ``read_logits``.

    Scores serialize as shortest round-tripping decimal floats, so a
    write/read cycle is bit-exact.
    """
    with open(path, "w", encoding="utf-8") as fh:
        for sid, subwords, scores in records:
            record = {
                "id": sid,
                "subwords": list(subwords),
                "tag_order": [t.value for t in tag_order],
                "scores": [[float(x) for x in row] for row in np.asarray(scores)],
            }
            fh.write(json.dumps(record, ensure_ascii=False) + "\n")


def load_external(
    path: str, sentences: list[AlignedSentence]
) -> dict[str, np.ndarray]:
    """Validated emission matrices for every aligned sentence, keyed by sid.

    Record subwords must match the aligned subwords exactly, markers
    included; the first divergent position is reported on mismatch.
    """
    records = read_logits(path)
    out: dict[str, np.ndarray] = {}
    for sentence in sentences:
        record = records.get(sentence.sid)
        if record is None:
            raise MissingSentence(f"no logits record for sentence {sentence.sid!r}")
        if record.subwords != sentence.subwords:
            position = 0
            for i, (a, b) in enumerate(zip(record.subwords, sentence.subwords)):
                if a != b:
                    position = i
                    break
            else:
                position = min(len(record.subwords), len(sentence.subwords))
            raise SubwordMismatch(
                f"sentence {sentence.sid!r}: record subwords diverge at position "
                f"{position} (record has "
                f"{record.subwords[position] if position < len(record.subwords) else '<end>'!r}, "
                f"sentence has "
                f"{sentence.subwords[position] if position < len(sentence.subwords) else '<end>'!r})",
                position=position,
            )
        out[sentence.sid] = record.scores
    return out
