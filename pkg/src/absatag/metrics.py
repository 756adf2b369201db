"""Token- and entity-level scoring, the frequency baseline, and the BIO audit.

Token-level scores use the full five-tag word-level scheme.  Entity-level
scores come in two definitions: "collapsed-token" strips the B-/I- prefixes
and scores per token, "span-exact" extracts maximal B-then-I runs and only
credits exact boundary and type matches.  O prints as OTHER in reports.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field

from .errors import EmptyTraining, LengthMismatch
from .labels import ORIGINAL_TAGS, Tag

FAMILIES = ("ASPECT", "SENTIMENT")

_DISPLAY = {tag: ("OTHER" if tag is Tag.O else tag.value) for tag in ORIGINAL_TAGS}


@dataclass(frozen=True)
class Prf:
    precision: float
    recall: float
    f1: float

    @classmethod
    def from_counts(cls, tp: int, n_pred: int, n_gold: int) -> "Prf":
        p = tp / n_pred if n_pred else 0.0
        r = tp / n_gold if n_gold else 0.0
        f1 = 2 * p * r / (p + r) if p + r else 0.0
        return cls(precision=p, recall=r, f1=f1)


def _check_lengths(gold: list[list[Tag]], pred: list[list[Tag]]) -> None:
    if len(gold) != len(pred):
        raise LengthMismatch(f"{len(gold)} gold sentences vs {len(pred)} predicted")
    for i, (g, p) in enumerate(zip(gold, pred)):
        if len(g) != len(p):
            raise LengthMismatch(
                f"sentence {i}: {len(g)} gold labels vs {len(p)} predicted"
            )


def token_f1(
    gold: list[list[Tag]], pred: list[list[Tag]]
) -> tuple[dict[Tag, Prf], Prf]:
    """Per-label P/R/F1 plus the micro average, counted over the whole corpus."""
    _check_lengths(gold, pred)
    tp: Counter[Tag] = Counter()
    n_pred: Counter[Tag] = Counter()
    n_gold: Counter[Tag] = Counter()
    for g_sent, p_sent in zip(gold, pred):
        for g, p in zip(g_sent, p_sent):
            n_gold[g] += 1
            n_pred[p] += 1
            if g == p:
                tp[g] += 1
    per_label = {
        tag: Prf.from_counts(tp[tag], n_pred[tag], n_gold[tag])
        for tag in ORIGINAL_TAGS
    }
    total = sum(n_gold.values())
    micro = Prf.from_counts(sum(tp.values()), total, total)
    return per_label, micro


def _family(tag: Tag) -> str:
    return tag.family or "OTHER"


def collapsed_token_entity_f1(
    gold: list[list[Tag]], pred: list[list[Tag]]
) -> dict[str, Prf]:
    """Score per token after collapsing B-/I- prefixes into the family name."""
    _check_lengths(gold, pred)
    tp: Counter[str] = Counter()
    n_pred: Counter[str] = Counter()
    n_gold: Counter[str] = Counter()
    for g_sent, p_sent in zip(gold, pred):
        for g, p in zip(g_sent, p_sent):
            gf, pf = _family(g), _family(p)
            n_gold[gf] += 1
            n_pred[pf] += 1
            if gf == pf:
                tp[gf] += 1
    return {
        fam: Prf.from_counts(tp[fam], n_pred[fam], n_gold[fam]) for fam in FAMILIES
    }


@dataclass(frozen=True)
class Span:
    family: str
    start: int
    end: int  # inclusive
    valid_start: bool  # False when the run begins with a stray I-X


def extract_spans(labels: list[Tag]) -> list[Span]:
    """Maximal same-family B/I runs; a stray I-X opens an invalid-start span."""
    spans: list[Span] = []
    current: Span | None = None
    for i, tag in enumerate(labels):
        fam = tag.family
        begin = tag in (Tag.B_ASPECT, Tag.B_SENTIMENT)
        inside = tag in (Tag.I_ASPECT, Tag.I_SENTIMENT)
        if begin:
            if current:
                spans.append(current)
            current = Span(family=fam, start=i, end=i, valid_start=True)
        elif inside and current is not None and current.family == fam:
            current = Span(current.family, current.start, i, current.valid_start)
        elif inside:
            if current:
                spans.append(current)
            current = Span(family=fam, start=i, end=i, valid_start=False)
        else:
            if current:
                spans.append(current)
            current = None
    if current:
        spans.append(current)
    return spans


def span_exact_entity_f1(
    gold: list[list[Tag]], pred: list[list[Tag]]
) -> dict[str, Prf]:
    """Exact-match span scoring.

    Invalid-start predicted spans count toward precision's denominator but
    can never match a gold span, penalizing BIO-violating output.
    """
    _check_lengths(gold, pred)
    tp: Counter[str] = Counter()
    n_pred: Counter[str] = Counter()
    n_gold: Counter[str] = Counter()
    for g_sent, p_sent in zip(gold, pred):
        gold_spans = {
            (s.family, s.start, s.end) for s in extract_spans(g_sent)
        }
        for fam, _, _ in gold_spans:
            n_gold[fam] += 1
        for span in extract_spans(p_sent):
            n_pred[span.family] += 1
            if span.valid_start and (span.family, span.start, span.end) in gold_spans:
                tp[span.family] += 1
    return {
        fam: Prf.from_counts(tp[fam], n_pred[fam], n_gold[fam]) for fam in FAMILIES
    }


@dataclass(frozen=True)
class Violation:
    sid: str
    position: int
    bigram: str  # e.g. "O->I-ASPECT" or "<s>->I-ASPECT" at sentence start
    context: str  # e.g. "kost(O) nya(I-ASPECT)"


def audit_bio(
    pred: list[list[Tag]],
    sids: list[str] | None = None,
    words: list[list[str]] | None = None,
) -> list[Violation]:
    """Positions where I-X follows neither B-X nor I-X (sentence-initial counts)."""
    violations: list[Violation] = []
    for s, labels in enumerate(pred):
        sid = sids[s] if sids else str(s)
        for i, tag in enumerate(labels):
            if tag not in (Tag.I_ASPECT, Tag.I_SENTIMENT):
                continue
            prev = labels[i - 1] if i > 0 else None
            legal_prev = (
                (Tag.B_ASPECT, Tag.I_ASPECT)
                if tag is Tag.I_ASPECT
                else (Tag.B_SENTIMENT, Tag.I_SENTIMENT)
            )
            if prev in legal_prev:
                continue
            prev_name = prev.value if prev is not None else "<s>"
            if words is not None:
                w = words[s]
                left = f"{w[i - 1]}({prev.value}) " if i > 0 else ""
                context = f"{left}{w[i]}({tag.value})"
            else:
                context = ""
            violations.append(
                Violation(
                    sid=sid,
                    position=i,
                    bigram=f"{prev_name}->{tag.value}",
                    context=context,
                )
            )
    return violations


@dataclass
class EvalReport:
    token: dict[Tag, Prf]
    token_micro: Prf
    entity_collapsed: dict[str, Prf]
    entity_span: dict[str, Prf]
    violations: list[Violation]
    repair_count: int = 0

    def kv_lines(self) -> list[str]:
        lines = []
        for tag in ORIGINAL_TAGS:
            prf = self.token[tag]
            name = _DISPLAY[tag]
            lines.append(f"token_precision.{name}={prf.precision:.6f}")
            lines.append(f"token_recall.{name}={prf.recall:.6f}")
            lines.append(f"token_f1.{name}={prf.f1:.6f}")
        lines.append(f"token_f1.micro={self.token_micro.f1:.6f}")
        for fam in FAMILIES:
            lines.append(
                f"entity_f1.collapsed.{fam}={self.entity_collapsed[fam].f1:.6f}"
            )
            lines.append(f"entity_f1.span.{fam}={self.entity_span[fam].f1:.6f}")
        lines.append(f"bio_violations={len(self.violations)}")
        lines.append(f"collapse_repairs={self.repair_count}")
        return lines

    def render(self) -> str:
        width = max(len(_DISPLAY[t]) for t in ORIGINAL_TAGS)
        lines = ["Token level (BIO scheme)"]
        header = "Label".ljust(width) + f"{'P':>10}{'R':>10}{'F1':>10}"
        lines.append(header)
        for tag in ORIGINAL_TAGS:
            prf = self.token[tag]
            lines.append(
                _DISPLAY[tag].ljust(width)
                + f"{prf.precision:>10.3f}{prf.recall:>10.3f}{prf.f1:>10.3f}"
            )
        micro = self.token_micro
        lines.append(
            "micro".ljust(width)
            + f"{micro.precision:>10.3f}{micro.recall:>10.3f}{micro.f1:>10.3f}"
        )
        lines.append("")
        lines.append("Entity level")
        lines.append(
            "Family".ljust(width) + f"{'collapsed':>12}{'span-exact':>12}"
        )
        for fam in FAMILIES:
            lines.append(
                fam.ljust(width)
                + f"{self.entity_collapsed[fam].f1:>12.3f}"
                + f"{self.entity_span[fam].f1:>12.3f}"
            )
        lines.append("")
        lines.append(f"Invalid BIO cases: {len(self.violations)}")
        for v in self.violations[:10]:
            where = v.context or v.bigram
            lines.append(f"  sentence {v.sid} position {v.position}: {where}")
        if len(self.violations) > 10:
            lines.append(f"  ... {len(self.violations) - 10} more")
        if self.repair_count:
            lines.append(f"First-subword auxiliary repairs: {self.repair_count}")
        lines.append("")
        lines.extend(self.kv_lines())
        return "\n".join(lines)


def evaluate(
    gold: list[list[Tag]],
    pred: list[list[Tag]],
    sids: list[str] | None = None,
    words: list[list[str]] | None = None,
    repair_count: int = 0,
) -> EvalReport:
    per_label, micro = token_f1(gold, pred)
    return EvalReport(
        token=per_label,
        token_micro=micro,
        entity_collapsed=collapsed_token_entity_f1(gold, pred),
        entity_span=span_exact_entity_f1(gold, pred),
        violations=audit_bio(pred, sids=sids, words=words),
        repair_count=repair_count,
    )


@dataclass
class FrequencyTable:
    """Per-token label counts from a training split, with the global majority."""

    counts: dict[str, Counter]
    majority: Tag

    def predict_token(self, token: str) -> Tag:
        table = self.counts.get(token)
        if not table:
            return self.majority
        return _argmax_label(table)


def _argmax_label(table: Counter) -> Tag:
    # Ties break toward the lexicographically smaller label string.
    return min(table.items(), key=lambda kv: (-kv[1], kv[0].value))[0]


def baseline_fit(sentences: list[tuple[tuple[str, ...], tuple[Tag, ...]]]) -> FrequencyTable:
    """Count word-level labels per token over the training split."""
    if not sentences:
        raise EmptyTraining("frequency baseline needs a non-empty training split")
    counts: dict[str, Counter] = {}
    overall: Counter = Counter()
    for words, labels in sentences:
        for word, label in zip(words, labels):
            counts.setdefault(word, Counter())[label] += 1
            overall[label] += 1
    return FrequencyTable(counts=counts, majority=_argmax_label(overall))


def baseline_predict(table: FrequencyTable, words: list[str]) -> list[Tag]:
    return [table.predict_token(w) for w in words]
