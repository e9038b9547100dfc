"""Toxicity-threshold classification and the profanity breakdown table."""

from __future__ import annotations

import csv
from collections.abc import Sequence
from dataclasses import dataclass
from decimal import ROUND_HALF_UP, Decimal
from pathlib import Path

from hatefl.data import Label
from hatefl.errors import EmptyInput, LengthMismatch

DEFAULT_THRESHOLDS = (0.7, 0.9)


def classify_toxicity(score: float, threshold: float) -> Label:
    """Hateful iff ``score >= threshold``."""
    if not 0.0 <= score <= 1.0:
        raise ValueError(f"score must be in [0, 1], got {score}")
    if not 0.0 <= threshold <= 1.0:
        raise ValueError(f"threshold must be in [0, 1], got {threshold}")
    return Label.HATEFUL if score >= threshold else Label.NON_HATEFUL


def round_half_up(value: float, places: int = 2) -> float:
    quantum = Decimal(1).scaleb(-places)
    return float(Decimal(repr(value)).quantize(quantum, rounding=ROUND_HALF_UP))


@dataclass(frozen=True)
class CellBlock:
    """Percentages of the corpus in each (label, profanity) cell."""

    hateful_profane: float
    hateful_clean: float
    non_hateful_profane: float
    non_hateful_clean: float

    @classmethod
    def from_pairs(cls, pairs: Sequence[tuple[Label, bool]]) -> "CellBlock":
        n = len(pairs)
        counts = {(lab, prof): 0 for lab in Label for prof in (True, False)}
        for lab, prof in pairs:
            counts[(Label(lab), bool(prof))] += 1
        return cls(
            100.0 * counts[(Label.HATEFUL, True)] / n,
            100.0 * counts[(Label.HATEFUL, False)] / n,
            100.0 * counts[(Label.NON_HATEFUL, True)] / n,
            100.0 * counts[(Label.NON_HATEFUL, False)] / n,
        )

    @property
    def cells(self) -> tuple[float, float, float, float]:
        return (self.hateful_profane, self.hateful_clean, self.non_hateful_profane, self.non_hateful_clean)

    @property
    def total(self) -> float:
        return sum(self.cells)

    @property
    def hateful_share(self) -> float:
        return self.hateful_profane + self.hateful_clean

    @property
    def profane_share_of_hateful(self) -> float:
        """Percentage of hateful-labelled sentences that contain profanity."""
        return 100.0 * self.hateful_profane / self.hateful_share if self.hateful_share else 0.0

    def rounded(self) -> "CellBlock":
        return CellBlock(*(round_half_up(v) for v in self.cells))


@dataclass(frozen=True)
class ThresholdTable:
    thresholds: tuple[float, ...]
    predicted: dict[float, CellBlock]
    gold: CellBlock
    n: int

    def blocks(self) -> list[tuple[str, CellBlock]]:
        return [(f"API {t:g}", self.predicted[t]) for t in self.thresholds] + [("Gold", self.gold)]

    def rows(self) -> list[list[str]]:
        """The table laid out as label rows x (block, P+/P-) columns, two decimals."""
        header = [""]
        hateful = ["Hateful"]
        non = ["Not Hateful"]
        for name, block in self.blocks():
            r = block.rounded()
            header += [f"{name} P+", f"{name} P-"]
            hateful += [f"{r.hateful_profane:.2f}", f"{r.hateful_clean:.2f}"]
            non += [f"{r.non_hateful_profane:.2f}", f"{r.non_hateful_clean:.2f}"]
        return [header, hateful, non]

    def to_csv(self, path: str | Path) -> None:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            csv.writer(fh, lineterminator="\n").writerows(self.rows())


def threshold_table(
    examples: Sequence[tuple[Label, bool]],
    scores: Sequence[float],
    thresholds: Sequence[float] = DEFAULT_THRESHOLDS,
) -> ThresholdTable:
    """Cell percentages per threshold, plus the gold-label block.

    ``examples`` holds (gold label, profanity flag) pairs aligned with ``scores``.
    """
    if len(examples) != len(scores):
        raise LengthMismatch(len(examples), len(scores))
    if not examples:
        raise EmptyInput("examples")
    thresholds = tuple(sorted(thresholds))
    predicted = {}
    for t in thresholds:
        pairs = [(classify_toxicity(s, t), prof) for (_, prof), s in zip(examples, scores)]
        predicted[t] = CellBlock.from_pairs(pairs)
    gold = CellBlock.from_pairs([(lab, prof) for lab, prof in examples])
    return ThresholdTable(thresholds, predicted, gold, len(examples))
