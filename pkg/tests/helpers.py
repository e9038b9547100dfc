from __future__ import annotations

import json
from pathlib import Path

from hatefl.data import LabeledExample, Polarity


def make_example(i: int | str, text: str, polarity: str = "neutral", profanity: bool = False,
                 target: str = "grp") -> LabeledExample:
    return LabeledExample(str(i), text, "afr", target, Polarity(polarity), profanity)


def write_jsonl(path: Path, records: list[dict]) -> Path:
    path.write_text("".join(json.dumps(r) + "\n" for r in records), encoding="utf-8")
    return path


def record(i: int | str, text: str, polarity: str = "neutral", profanity: bool = False, **extra) -> dict:
    return {"id": str(i), "text": text, "language": "afr", "target_group": "grp", "polarity": polarity,
            "profanity": profanity, **extra}
