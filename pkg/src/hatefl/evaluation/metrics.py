from __future__ import annotations

import statistics
from collections.abc import Sequence
from dataclasses import dataclass

from hatefl.errors import EmptyInput, LengthMismatch

BINARY = (0, 1)


@dataclass(frozen=True)
class ClassCounts:
    tp: int
    fp: int
    fn: int
    tn: int

    @property
    def precision(self) -> float:
        return self.tp / (self.tp + self.fp) if self.tp + self.fp else 0.0

    @property
    def recall(self) -> float:
        return self.tp / (self.tp + self.fn) if self.tp + self.fn else 0.0

    @property
    def f1(self) -> float:
        p, r = self.precision, self.recall
        return 2 * p * r / (p + r) if p + r else 0.0


@dataclass(frozen=True)
class EvalResult:
    macro_f1: float
    per_class: dict[int, ClassCounts]

    def precision(self, cls: int) -> float:
        return self.per_class[cls].precision

    def recall(self, cls: int) -> float:
        return self.per_class[cls].recall

    def f1(self, cls: int) -> float:
        return self.per_class[cls].f1


def macro_f1(gold: Sequence[int], pred: Sequence[int]) -> EvalResult:
    """Unweighted mean of the two per-class F1 scores.

    A class with an empty precision or recall denominator scores 0, so a
    class absent from both gold and pred drags the macro average down.
    """
    if len(gold) != len(pred):
        raise LengthMismatch(len(gold), len(pred))
    if not gold:
        raise EmptyInput("gold labels")
    for y in (*gold, *pred):
        if int(y) not in BINARY:
            raise ValueError(f"label {y!r} is not in {BINARY}")
    per_class = {}
    for cls in BINARY:
        tp = sum(1 for g, p in zip(gold, pred) if g == cls and p == cls)
        fp = sum(1 for g, p in zip(gold, pred) if g != cls and p == cls)
        fn = sum(1 for g, p in zip(gold, pred) if g == cls and p != cls)
        per_class[cls] = ClassCounts(tp, fp, fn, len(gold) - tp - fp - fn)
    return EvalResult(sum(c.f1 for c in per_class.values()) / len(BINARY), per_class)


def aggregate_seeds(results: Sequence[EvalResult | float]) -> tuple[float, float]:
    """Mean and population standard deviation of macro-F1 across seeds."""
    if not results:
        raise EmptyInput("seed results")
    values = [r.macro_f1 if isinstance(r, EvalResult) else float(r) for r in results]
    return statistics.fmean(values), statistics.pstdev(values)
