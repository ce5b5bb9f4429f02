"""Span-level micro-averaged precision / recall / F1.

A true positive is an exact (start, end, type) match; counts are pooled
over all sentences before the rates are computed.  0/0 is defined as 0
throughout (conlleval convention).
"""

from __future__ import annotations

from dataclasses import dataclass

from .errors import DataError
from .tags import TagSequence, TagSet, decode_spans


@dataclass(frozen=True)
class Scores:
    precision: float
    recall: float
    f1: float
    tp: int
    fp: int
    fn: int

    @classmethod
    def from_counts(cls, tp: int, fp: int, fn: int) -> "Scores":
        p = tp / (tp + fp) if tp + fp else 0.0
        r = tp / (tp + fn) if tp + fn else 0.0
        f1 = 2 * p * r / (p + r) if p + r else 0.0
        return cls(p, r, f1, tp, fp, fn)

    def as_dict(self) -> dict[str, float]:
        return {
            "precision": self.precision,
            "recall": self.recall,
            "f1": self.f1,
            "tp": self.tp,
            "fp": self.fp,
            "fn": self.fn,
        }


def micro_prf(
    gold: list[TagSequence], pred: list[TagSequence], tagset: TagSet
) -> Scores:
    """Micro-averaged span P/R/F1 between aligned gold and predicted tags."""
    if len(gold) != len(pred):
        raise DataError(f"gold has {len(gold)} sentences, pred has {len(pred)}")
    tp = fp = fn = 0
    for i, (g, p) in enumerate(zip(gold, pred)):
        if len(g) != len(p):
            raise DataError(f"sentence {i}: gold length {len(g)} != pred length {len(p)}")
        g_spans = set(decode_spans(g, tagset))
        p_spans = set(decode_spans(p, tagset))
        tp += len(g_spans & p_spans)
        fp += len(p_spans - g_spans)
        fn += len(g_spans - p_spans)
    return Scores.from_counts(tp, fp, fn)


def average_last(history: list[Scores], m: int) -> Scores:
    """Arithmetic mean of the last ``min(m, len)`` entries' rates.

    Counts are summed for reference only; they do not re-derive the rates.
    """
    if not history:
        raise DataError("cannot average an empty history")
    tail = history[-m:] if m > 0 else history[:0]
    if not tail:
        raise DataError("m must be >= 1")
    k = len(tail)
    return Scores(
        precision=sum(s.precision for s in tail) / k,
        recall=sum(s.recall for s in tail) / k,
        f1=sum(s.f1 for s in tail) / k,
        tp=sum(s.tp for s in tail),
        fp=sum(s.fp for s in tail),
        fn=sum(s.fn for s in tail),
    )
