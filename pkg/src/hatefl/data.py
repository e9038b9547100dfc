"""Corpus ingestion, leakage-filtered splits, few-shot sampling and corpus statistics."""

from __future__ import annotations

import csv
import enum
import json
import math
import re
from collections import Counter
from collections.abc import Iterable, Iterator, Sequence
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
from rapidfuzz import process
from rapidfuzz.distance import Levenshtein

from hatefl.errors import (
    DataError,
    DuplicateId,
    EmptyCorpus,
    IdMismatch,
    InsufficientCandidates,
    InvalidCategory,
    LeakageViolation,
    NotEnoughData,
    ParseError,
)


class Polarity(str, enum.Enum):
    POSITIVE = "positive"
    NEUTRAL = "neutral"
    HATEFUL = "hateful"


class Label(enum.IntEnum):
    NON_HATEFUL = 0
    HATEFUL = 1

    @property
    def slug(self) -> str:
        return self.name.lower()


def to_binary_label(polarity: Polarity | str) -> Label:
    """Positive and neutral collapse into the non-hateful class."""
    return Label.HATEFUL if Polarity(polarity) is Polarity.HATEFUL else Label.NON_HATEFUL


_LANG_RE = re.compile(r"^[a-z]{3}$")


@dataclass(frozen=True)
class LabeledExample:
    id: str
    text: str
    language: str
    target_group: str
    polarity: Polarity
    profanity: bool
    source: str | None = None
    ai_generated: bool = False

    @property
    def label(self) -> Label:
        return to_binary_label(self.polarity)

    @property
    def category(self) -> tuple[Polarity, bool]:
        return self.polarity, self.profanity

    def to_json(self) -> dict:
        out = asdict(self)
        out["polarity"] = self.polarity.value
        if self.source is None:
            del out["source"]
        return out


# --- ingestion ---------------------------------------------------------------------


@dataclass(frozen=True)
class Diagnostic:
    line: int
    message: str
    id: str | None = None

    def __str__(self) -> str:
        who = f" [{self.id}]" if self.id else ""
        return f"line {self.line}{who}: {self.message}"


def _as_bool(value: object, name: str, line: int) -> bool:
    if isinstance(value, bool):
        return value
    if isinstance(value, str) and value.strip().lower() in {"true", "1", "yes"}:
        return True
    if isinstance(value, str) and value.strip().lower() in {"false", "0", "no", ""}:
        return False
    if isinstance(value, int) and value in (0, 1):
        return bool(value)
    raise ParseError(line, f"field {name!r} must be a boolean, got {value!r}")


def _parse_record(obj: object, line: int) -> LabeledExample:
    if not isinstance(obj, dict):
        raise ParseError(line, "record is not an object")
    rid = obj.get("id")
    if not isinstance(rid, str) or not rid.strip():
        raise ParseError(line, "missing or empty 'id'")
    text = obj.get("text")
    if not isinstance(text, str) or not text.strip():
        raise ParseError(line, f"record {rid!r} has empty 'text'")
    language = obj.get("language")
    if not isinstance(language, str) or not _LANG_RE.match(language):
        raise ParseError(line, f"record {rid!r}: 'language' must be an ISO 639-3 code, got {language!r}")
    target = obj.get("target_group")
    if not isinstance(target, str) or not target.strip():
        raise ParseError(line, f"record {rid!r}: missing 'target_group'")
    try:
        polarity = Polarity(obj.get("polarity"))
    except ValueError:
        raise InvalidCategory(rid, f"polarity {obj.get('polarity')!r}", line) from None
    if "profanity" not in obj or obj["profanity"] is None:
        raise InvalidCategory(rid, "missing profanity flag", line)
    try:
        profanity = _as_bool(obj["profanity"], "profanity", line)
    except ParseError:
        raise InvalidCategory(rid, f"profanity {obj['profanity']!r}", line) from None
    source = obj.get("source")
    if source is not None and not isinstance(source, str):
        raise ParseError(line, f"record {rid!r}: 'source' must be a string")
    ai = _as_bool(obj.get("ai_generated", False), "ai_generated", line)
    return LabeledExample(rid, text, language, target, polarity, profanity, source or None, ai)


def _records(rows: Iterable[tuple[int, object]]) -> Iterator[tuple[int, LabeledExample | DataError]]:
    seen: dict[str, int] = {}
    for line, obj in rows:
        if isinstance(obj, DataError):
            yield line, obj
            continue
        try:
            ex = _parse_record(obj, line)
        except DataError as err:
            yield line, err
            continue
        if ex.id in seen:
            yield line, DuplicateId(ex.id, line)
            continue
        seen[ex.id] = line
        yield line, ex


def _jsonl_rows(path: Path) -> Iterator[tuple[int, object]]:
    with open(path, encoding="utf-8") as fh:
        for line_no, raw in enumerate(fh, start=1):
            if not raw.strip():
                continue
            try:
                yield line_no, json.loads(raw)
            except json.JSONDecodeError as exc:
                yield line_no, ParseError(line_no, f"invalid JSON: {exc.msg}")


def _csv_rows(path: Path) -> Iterator[tuple[int, object]]:
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        for row in reader:
            yield reader.line_num, {k: (v if v != "" else None) for k, v in row.items()}


def _rows(path: Path) -> Iterator[tuple[int, object]]:
    return _csv_rows(path) if path.suffix.lower() == ".csv" else _jsonl_rows(path)


def load_corpus(path: str | Path) -> list[LabeledExample]:
    """Load a JSONL (or ``.csv``) corpus, raising on the first invalid record."""
    out = []
    for _, item in _records(_rows(Path(path))):
        if isinstance(item, DataError):
            raise item
        out.append(item)
    return out


def load_corpus_csv(path: str | Path) -> list[LabeledExample]:
    out = []
    for _, item in _records(_csv_rows(Path(path))):
        if isinstance(item, DataError):
            raise item
        out.append(item)
    return out


def validate_corpus(path: str | Path) -> list[Diagnostic]:
    """Every problem in the file, one diagnostic per offending line."""
    diagnostics = []
    count = 0
    for line, item in _records(_rows(Path(path))):
        if isinstance(item, DataError):
            diagnostics.append(Diagnostic(line, str(item), getattr(item, "id", None)))
        else:
            count += 1
    if count == 0 and not diagnostics:
        diagnostics.append(Diagnostic(0, str(EmptyCorpus(str(path)))))
    return diagnostics


def write_corpus(path: str | Path, examples: Iterable[LabeledExample]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for ex in examples:
            fh.write(json.dumps(ex.to_json(), ensure_ascii=False, sort_keys=True) + "\n")


def read_id_list(path: str | Path) -> list[str]:
    """Ids from a JSON list or a plain file with one id per line."""
    path = Path(path)
    text = path.read_text(encoding="utf-8")
    if path.suffix.lower() == ".json":
        ids = json.loads(text)
        if not isinstance(ids, list) or not all(isinstance(i, str) for i in ids):
            raise DataError(f"{path}: expected a JSON list of id strings")
        return ids
    return [line.strip() for line in text.splitlines() if line.strip()]


# --- Levenshtein --------------------------------------------------------------------


def levenshtein_ratio(a: str, b: str) -> float:
    """1 - d(a, b) / max(|a|, |b|) with unit-cost edits over code points."""
    if not a and not b:
        return 1.0
    return 1.0 - Levenshtein.distance(a, b) / max(len(a), len(b))


def max_ratio(queries: Sequence[str], refs: Sequence[str]) -> np.ndarray:
    """For each query, the highest ratio against any reference (0.0 if no references)."""
    if not queries:
        return np.zeros(0)
    if not refs:
        return np.zeros(len(queries))
    scores = process.cdist(
        list(queries), list(refs), scorer=Levenshtein.normalized_similarity,
        dtype=np.float64, workers=1,
    )
    return scores.max(axis=1)


# --- splits -------------------------------------------------------------------------


@dataclass(frozen=True)
class SplitPolicy:
    dev_max_ratio: float = 0.5
    train_max_ratio: float = 0.5
    dev_size: int = 0

    def __post_init__(self) -> None:
        for name in ("dev_max_ratio", "train_max_ratio"):
            value = getattr(self, name)
            if not 0 < value <= 1:
                raise ValueError(f"{name} must be in (0, 1], got {value}")
        if self.dev_size < 0:
            raise ValueError(f"dev_size must be >= 0, got {self.dev_size}")


@dataclass(frozen=True)
class SplitSet:
    train: list[str] = field(default_factory=list)
    dev: list[str] = field(default_factory=list)
    test: list[str] = field(default_factory=list)

    def to_json(self) -> dict:
        return {"train": list(self.train), "dev": list(self.dev), "test": list(self.test)}


def build_splits(
    corpus: Sequence[LabeledExample],
    test_ids: Sequence[str],
    policy: SplitPolicy,
    seed: int,
) -> SplitSet:
    """Pick dev then train from the non-test pool, rejecting near-duplicates.

    Dev accepts a candidate only when its max ratio against every test
    sentence is below ``dev_max_ratio``; train then keeps the remaining
    candidates whose max ratio against test and dev is below
    ``train_max_ratio``.
    """
    by_id = {ex.id: ex for ex in corpus}
    test_set = set(test_ids)
    unknown = test_set - by_id.keys()
    if unknown:
        raise DataError(f"{len(unknown)} test ids not in corpus, e.g. {sorted(unknown)[0]!r}")
    test_texts = [by_id[i].text for i in test_ids]

    candidates = [ex for ex in corpus if ex.id not in test_set]
    order = np.random.default_rng(seed).permutation(len(candidates))
    shuffled = [candidates[i] for i in order]

    dev: list[LabeledExample] = []
    if policy.dev_size:
        vs_test = max_ratio([ex.text for ex in shuffled], test_texts)
        for ex, r in zip(shuffled, vs_test):
            if r < policy.dev_max_ratio:
                dev.append(ex)
                if len(dev) == policy.dev_size:
                    break
        if len(dev) < policy.dev_size:
            raise InsufficientCandidates("dev", policy.dev_size, len(dev))

    dev_ids = {ex.id for ex in dev}
    rest = [ex for ex in candidates if ex.id not in dev_ids]
    refs = test_texts + [ex.text for ex in dev]
    vs_refs = max_ratio([ex.text for ex in rest], refs)
    train = [ex.id for ex, r in zip(rest, vs_refs) if r < policy.train_max_ratio]
    return SplitSet(train=train, dev=[ex.id for ex in dev], test=list(test_ids))


def split_violations(corpus: Sequence[LabeledExample], splits: SplitSet, policy: SplitPolicy) -> list[str]:
    """Every broken split invariant, as human-readable strings."""
    by_id = {ex.id: ex for ex in corpus}
    problems = []
    parts = {"train": set(splits.train), "dev": set(splits.dev), "test": set(splits.test)}
    for a, b in (("train", "dev"), ("train", "test"), ("dev", "test")):
        overlap = parts[a] & parts[b]
        if overlap:
            problems.append(f"{a}/{b} overlap: {sorted(overlap)[:5]}")
    missing = set().union(*parts.values()) - by_id.keys()
    if missing:
        return problems + [f"ids not in corpus: {sorted(missing)[:5]}"]

    test_texts = [by_id[i].text for i in splits.test]
    dev_texts = [by_id[i].text for i in splits.dev]
    for i, r in zip(splits.dev, max_ratio(dev_texts, test_texts)):
        if r >= policy.dev_max_ratio:
            problems.append(f"dev {i!r} has ratio {r:.4f} >= {policy.dev_max_ratio} against test")
    train_texts = [by_id[i].text for i in splits.train]
    for i, r in zip(splits.train, max_ratio(train_texts, test_texts + dev_texts)):
        if r >= policy.train_max_ratio:
            problems.append(f"train {i!r} has ratio {r:.4f} >= {policy.train_max_ratio} against test/dev")
    return problems


def verify_splits(corpus: Sequence[LabeledExample], splits: SplitSet, policy: SplitPolicy) -> None:
    problems = split_violations(corpus, splits, policy)
    if problems:
        raise LeakageViolation("; ".join(problems[:5]))


def write_splits(path: str | Path, splits: SplitSet) -> None:
    Path(path).write_text(json.dumps(splits.to_json(), indent=2, ensure_ascii=False) + "\n", encoding="utf-8")


def read_splits(path: str | Path) -> SplitSet:
    raw = json.loads(Path(path).read_text(encoding="utf-8"))
    try:
        return SplitSet(train=list(raw["train"]), dev=list(raw.get("dev", [])), test=list(raw["test"]))
    except (KeyError, TypeError) as exc:
        raise DataError(f"{path}: malformed split file ({exc})") from exc


def select(corpus: Sequence[LabeledExample], ids: Iterable[str]) -> list[LabeledExample]:
    by_id = {ex.id: ex for ex in corpus}
    try:
        return [by_id[i] for i in ids]
    except KeyError as exc:
        raise DataError(f"split references unknown id {exc.args[0]!r}") from None


# --- sampling -----------------------------------------------------------------------


def sample_few_shot(train: Sequence[LabeledExample], n: int, seed: int) -> list[LabeledExample]:
    """Seeded, label-balanced sample of ``n`` training examples.

    With both classes present one class gets ceil(n/2) and the other
    floor(n/2) (which one is seeded); a class too small to cover its share is
    topped up from the other class.
    """
    if n < 0:
        raise ValueError(f"n must be >= 0, got {n}")
    if n == 0:
        return []
    if n > len(train):
        raise NotEnoughData(n, len(train))
    rng = np.random.default_rng(seed)
    hateful = [i for i, ex in enumerate(train) if ex.label is Label.HATEFUL]
    other = [i for i, ex in enumerate(train) if ex.label is Label.NON_HATEFUL]
    if hateful and other:
        k_hate = (n + 1) // 2 if rng.random() < 0.5 else n // 2
        k_hate = min(k_hate, len(hateful))
        k_other = min(n - k_hate, len(other))
        k_hate = n - k_other
        picked = list(rng.choice(hateful, size=k_hate, replace=False)) + list(
            rng.choice(other, size=k_other, replace=False)
        )
        picked = [picked[i] for i in rng.permutation(len(picked))]
    else:
        picked = list(rng.choice(len(train), size=n, replace=False))
    return [train[int(i)] for i in picked]


def intersect_agreed(
    annotations_a: Sequence[LabeledExample], annotations_b: Sequence[LabeledExample]
) -> list[LabeledExample]:
    """Units whose binary labels agree across both annotators, labelled as in ``annotations_a``."""
    b_by_id = {ex.id: ex for ex in annotations_b}
    a_ids = {ex.id for ex in annotations_a}
    if a_ids != b_by_id.keys():
        raise IdMismatch(a_ids - b_by_id.keys(), b_by_id.keys() - a_ids)
    return [ex for ex in annotations_a if ex.label is b_by_id[ex.id].label]


# --- statistics ---------------------------------------------------------------------


@dataclass(frozen=True)
class CorpusStats:
    sentence_count: int
    token_count: int
    vocab_size: int
    avg_sentence_len: float
    max_sentence_len: int
    min_sentence_len: int
    std_sentence_len: float
    avg_word_len: float
    type_token_ratio: float
    hapax_ratio: float

    # Column order of the corpus-statistics table.
    COLUMNS = (
        ("# Sentences", "sentence_count", "{:d}"),
        ("# Tokens", "token_count", "{:d}"),
        ("Vocab Size", "vocab_size", "{:d}"),
        ("Avg Sent Len (tok)", "avg_sentence_len", "{:.2f}"),
        ("Max Sent Len (tok)", "max_sentence_len", "{:d}"),
        ("Min Sent Len (tok)", "min_sentence_len", "{:d}"),
        ("Sent Len Std (tok)", "std_sentence_len", "{:.2f}"),
        ("Avg Word Len (char)", "avg_word_len", "{:.2f}"),
        ("TTR", "type_token_ratio", "{:.2f}"),
        ("Hapax Ratio", "hapax_ratio", "{:.2f}"),
    )

    def formatted(self) -> list[str]:
        return [fmt.format(getattr(self, attr)) for _, attr, fmt in self.COLUMNS]


def corpus_stats(corpus: Iterable[LabeledExample | str]) -> CorpusStats:
    texts = [c.text if isinstance(c, LabeledExample) else c for c in corpus]
    if not texts:
        raise EmptyCorpus()
    lengths = []
    counts: Counter[str] = Counter()
    for text in texts:
        tokens = text.split()
        lengths.append(len(tokens))
        counts.update(tokens)
    token_count = sum(lengths)
    mean = token_count / len(lengths)
    # fsum is exactly rounded, so the result does not depend on corpus order
    std = math.sqrt(math.fsum((n - mean) ** 2 for n in lengths) / len(lengths))
    chars = sum(len(tok) * c for tok, c in counts.items())
    hapax = sum(1 for c in counts.values() if c == 1)
    return CorpusStats(
        sentence_count=len(texts),
        token_count=token_count,
        vocab_size=len(counts),
        avg_sentence_len=mean,
        max_sentence_len=max(lengths),
        min_sentence_len=min(lengths),
        std_sentence_len=std,
        avg_word_len=chars / token_count if token_count else 0.0,
        type_token_ratio=len(counts) / token_count if token_count else 0.0,
        hapax_ratio=hapax / token_count if token_count else 0.0,
    )
