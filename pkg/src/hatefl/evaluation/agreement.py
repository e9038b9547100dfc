"""Inter-annotator agreement for two annotators on nominal labels."""

from __future__ import annotations

from collections import Counter
from collections.abc import Hashable, Sequence
from dataclasses import dataclass

from hatefl.data import LabeledExample
from hatefl.errors import EmptyInput, IdMismatch, LengthMismatch


def _check(a: Sequence, b: Sequence) -> None:
    if len(a) != len(b):
        raise LengthMismatch(len(a), len(b))
    if not a:
        raise EmptyInput("annotations")


def cohens_kappa(a: Sequence[Hashable], b: Sequence[Hashable]) -> float:
    _check(a, b)
    n = len(a)
    p_o = sum(x == y for x, y in zip(a, b)) / n
    ca, cb = Counter(a), Counter(b)
    p_e = sum(ca[c] * cb[c] for c in ca.keys() | cb.keys()) / (n * n)
    if p_e == 1.0:
        return 1.0
    return (p_o - p_e) / (1.0 - p_e)


def krippendorff_alpha(a: Sequence[Hashable], b: Sequence[Hashable]) -> float:
    """Nominal alpha from the coincidence matrix; two values per unit, none missing."""
    _check(a, b)
    coincidences: Counter[tuple[Hashable, Hashable]] = Counter()
    for x, y in zip(a, b):
        # each unit holds m=2 values, so every ordered pair carries weight 1/(m-1) = 1
        coincidences[(x, y)] += 1
        coincidences[(y, x)] += 1
    marginals: Counter[Hashable] = Counter()
    for (c, _), v in coincidences.items():
        marginals[c] += v
    n = sum(marginals.values())
    observed = sum(v for (c, k), v in coincidences.items() if c != k) / n
    expected = sum(
        marginals[c] * marginals[k] for c in marginals for k in marginals if c != k
    ) / (n * (n - 1))
    if expected == 0:
        return 1.0
    return 1.0 - observed / expected


@dataclass(frozen=True)
class AgreementReport:
    scheme: str  # "three_class" or "two_class"
    kappa: float
    alpha: float
    n_units: int


def agreement_reports(
    annotations_a: Sequence[LabeledExample], annotations_b: Sequence[LabeledExample]
) -> list[AgreementReport]:
    """Kappa and alpha on polarity (three classes) and on the merged binary labels."""
    b_by_id = {ex.id: ex for ex in annotations_b}
    a_ids = {ex.id for ex in annotations_a}
    if a_ids != b_by_id.keys():
        raise IdMismatch(a_ids - b_by_id.keys(), b_by_id.keys() - a_ids)
    pairs = [(ex, b_by_id[ex.id]) for ex in annotations_a]
    three_a = [x.polarity.value for x, _ in pairs]
    three_b = [y.polarity.value for _, y in pairs]
    two_a = [int(x.label) for x, _ in pairs]
    two_b = [int(y.label) for _, y in pairs]
    return [
        AgreementReport("three_class", cohens_kappa(three_a, three_b), krippendorff_alpha(three_a, three_b), len(pairs)),
        AgreementReport("two_class", cohens_kappa(two_a, two_b), krippendorff_alpha(two_a, two_b), len(pairs)),
    ]
