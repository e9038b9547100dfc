"""RunReport: per-client and server macro-F1 across seeds, with JSON round-trip."""

from __future__ import annotations

import json
import statistics
from dataclasses import dataclass, field
from pathlib import Path


@dataclass(frozen=True)
class SeedScores:
    per_seed_f1: list[float]

    @property
    def mean_f1(self) -> float:
        return statistics.fmean(self.per_seed_f1)

    @property
    def std_f1(self) -> float:
        return statistics.pstdev(self.per_seed_f1)


@dataclass
class RunReport:
    mode: str  # "fl", "baseline" or "api"
    strategy: str
    seeds: list[int]
    rounds: int
    config_digest: str
    per_client: dict[str, SeedScores] = field(default_factory=dict)
    server: SeedScores | None = None
    shots: int | None = None  # None: independent of the few-shot size (API baselines)
    threshold: float | None = None

    @property
    def setting(self) -> str:
        """Short label used in tables and plots."""
        if self.mode == "api":
            return f"api@{self.threshold:g}"
        if self.mode == "fl":
            return f"fl:{self.strategy}"
        return self.mode

    def to_json(self) -> dict:
        return {
            "config_digest": self.config_digest,
            "mode": self.mode,
            "strategy": self.strategy,
            "shots": self.shots,
            "threshold": self.threshold,
            "seeds": list(self.seeds),
            "rounds": self.rounds,
            "per_client": {
                cid: {"per_seed_f1": s.per_seed_f1, "mean_f1": s.mean_f1, "std_f1": s.std_f1}
                for cid, s in sorted(self.per_client.items())
            },
            "server": {
                "per_seed_f1": self.server.per_seed_f1 if self.server else None,
                "mean_f1": self.server.mean_f1 if self.server else None,
            },
        }

    def dumps(self) -> str:
        return json.dumps(self.to_json(), indent=2, sort_keys=True) + "\n"

    def save(self, path: str | Path) -> None:
        Path(path).write_text(self.dumps(), encoding="utf-8")

    @classmethod
    def from_json(cls, raw: dict) -> "RunReport":
        server = raw.get("server") or {}
        return cls(
            mode=raw["mode"],
            strategy=raw["strategy"],
            seeds=list(raw["seeds"]),
            rounds=raw["rounds"],
            config_digest=raw["config_digest"],
            per_client={cid: SeedScores(list(v["per_seed_f1"])) for cid, v in raw["per_client"].items()},
            server=SeedScores(list(server["per_seed_f1"])) if server.get("per_seed_f1") is not None else None,
            shots=raw.get("shots"),
            threshold=raw.get("threshold"),
        )

    @classmethod
    def load(cls, path: str | Path) -> "RunReport":
        return cls.from_json(json.loads(Path(path).read_text(encoding="utf-8")))
