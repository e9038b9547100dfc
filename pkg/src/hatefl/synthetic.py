"""Synthetic non-i.i.d. clients for smoke tests and demos.

Every label owns two "dialects", each a small pool of invented marker words.
Clients differ in how often they draw from each dialect and in their filler
vocabulary, so no single client sees the whole distribution.
"""

from __future__ import annotations

import string
from dataclasses import dataclass

import numpy as np

from hatefl.data import LabeledExample, Polarity
from hatefl.seeding import rng_for


@dataclass(frozen=True)
class DialectTask:
    n_clients: int = 4
    train_per_client: int = 15
    test_per_client: int = 100
    markers_per_pool: int = 4
    markers_per_sentence: int = 3
    filler_vocab: int = 40
    fillers_per_sentence: int = 2
    dialect_bias: float = 0.8  # probability a client draws from its home dialect
    profanity_rate: float = 0.3


def _word(rng: np.random.Generator) -> str:
    return "".join(rng.choice(list(string.ascii_lowercase), size=int(rng.integers(4, 8))))


def make_clients(task: DialectTask = DialectTask(), seed: int = 0) -> dict[str, tuple[list[LabeledExample], list[LabeledExample]]]:
    """``client_id -> (train, test)``; labels alternate so both splits are balanced."""
    vocab_rng = rng_for("dialect-vocab", seed)
    pools = {(label, d): [_word(vocab_rng) for _ in range(task.markers_per_pool)] for label in (0, 1) for d in (0, 1)}
    filler = [_word(vocab_rng) for _ in range(task.filler_vocab)]

    out = {}
    for c in range(task.n_clients):
        cid = f"client{c}"
        rng = rng_for("dialect-client", seed, cid)
        home = c % 2
        own_filler = list(rng.choice(filler, size=task.filler_vocab // 2, replace=False))

        def sentence(label: int) -> str:
            dialect = home if rng.random() < task.dialect_bias else 1 - home
            words = list(rng.choice(own_filler, size=task.fillers_per_sentence))
            words += list(rng.choice(pools[(label, dialect)], size=task.markers_per_sentence))
            rng.shuffle(words)
            return " ".join(words)

        def examples(split: str, n: int) -> list[LabeledExample]:
            rows = []
            for i in range(n):
                label = i % 2
                polarity = Polarity.HATEFUL if label else (Polarity.NEUTRAL if i % 4 == 0 else Polarity.POSITIVE)
                rows.append(LabeledExample(
                    id=f"{cid}-{split}-{i:03d}", text=sentence(label), language="syn",
                    target_group=cid, polarity=polarity, profanity=bool(rng.random() < task.profanity_rate),
                ))
            return rows

        out[cid] = (examples("train", task.train_per_client), examples("test", task.test_per_client))
    return out
