"""FL-vs-baseline difference tables and per-client F1 series."""

from __future__ import annotations

import csv
from collections.abc import Mapping, Sequence
from dataclasses import dataclass
from pathlib import Path

from hatefl.errors import ClientMismatch, ShotCountMismatch
from hatefl.runreport import RunReport

SERVER = "server"


@dataclass(frozen=True)
class DeltaRow:
    baseline: str
    target: str  # client id or "server"
    shots: int
    fl_mean_f1: float
    baseline_mean_f1: float

    @property
    def delta(self) -> float:
        return self.fl_mean_f1 - self.baseline_mean_f1

    @property
    def improved(self) -> bool:
        return self.delta > 0


@dataclass(frozen=True)
class DeltaTable:
    rows: list[DeltaRow]

    def get(self, baseline: str, target: str, shots: int) -> DeltaRow:
        for row in self.rows:
            if (row.baseline, row.target, row.shots) == (baseline, target, shots):
                return row
        raise KeyError((baseline, target, shots))

    def to_csv(self, path: str | Path) -> None:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["baseline", "target", "shots", "fl_mean_f1", "baseline_mean_f1", "delta", "improved"])
            for r in self.rows:
                w.writerow([r.baseline, r.target, r.shots, f"{r.fl_mean_f1:.6f}", f"{r.baseline_mean_f1:.6f}",
                            f"{r.delta:+.6f}", int(r.improved)])


def _by_shots(reports: Sequence[RunReport], name: str) -> dict[int | None, RunReport]:
    out: dict[int | None, RunReport] = {}
    for rep in reports:
        if rep.shots in out:
            raise ShotCountMismatch(f"{name}: two reports for shot count {rep.shots}")
        out[rep.shots] = rep
    return out


def _targets(rep: RunReport) -> dict[str, float]:
    out = {cid: s.mean_f1 for cid, s in rep.per_client.items()}
    if rep.server is not None:
        out[SERVER] = rep.server.mean_f1
    return out


def delta_table(fl: Sequence[RunReport] | RunReport, baselines: Mapping[str, Sequence[RunReport] | RunReport]) -> DeltaTable:
    """``fl.mean_f1 - baseline.mean_f1`` per (baseline, client, shot count).

    A baseline report without a shot count (the API baselines) applies to
    every shot count.  The server row appears when both sides scored it.
    """
    fl_reports = [fl] if isinstance(fl, RunReport) else list(fl)
    fl_by_shots = _by_shots(fl_reports, "fl")
    rows = []
    for name, reps in baselines.items():
        reps = [reps] if isinstance(reps, RunReport) else list(reps)
        base_by_shots = _by_shots(reps, name)
        for shots, fl_rep in sorted(fl_by_shots.items(), key=lambda kv: (kv[0] is None, kv[0] or 0)):
            if shots in base_by_shots:
                base = base_by_shots[shots]
            elif None in base_by_shots:
                base = base_by_shots[None]
            else:
                raise ShotCountMismatch(f"baseline {name!r} has no report for shot count {shots}")
            fl_targets, base_targets = _targets(fl_rep), _targets(base)
            fl_clients = set(fl_rep.per_client)
            if fl_clients != set(base.per_client):
                missing = sorted(fl_clients ^ set(base.per_client))
                raise ClientMismatch(f"baseline {name!r} (shots={shots}) differs in clients: {missing}")
            for target in sorted(fl_targets.keys() & base_targets.keys()):
                rows.append(DeltaRow(name, target, shots, fl_targets[target], base_targets[target]))
    return DeltaTable(rows)


@dataclass(frozen=True)
class Series:
    """Mean/std F1 against shot count for one target, one column pair per setting."""

    target: str
    settings: list[str]
    shots: list[int]
    values: dict[str, dict[int, tuple[float, float]]]

    def to_csv(self, path: str | Path) -> None:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["shots"] + [f"{s}_{stat}" for s in self.settings for stat in ("mean", "std")])
            for n in self.shots:
                row: list[object] = [n]
                for s in self.settings:
                    mean, std = self.values[s].get(n, (float("nan"), float("nan")))
                    row += [f"{mean:.6f}", f"{std:.6f}"]
                w.writerow(row)


def build_series(reports: Sequence[RunReport]) -> dict[str, Series]:
    """One series per client (and the server, where scored) across all settings."""
    settings: list[str] = []
    shots = sorted({r.shots for r in reports if r.shots is not None})
    table: dict[str, dict[str, dict[int, tuple[float, float]]]] = {}
    for rep in reports:
        if rep.setting not in settings:
            settings.append(rep.setting)
        targets = dict(rep.per_client)
        if rep.server is not None:
            targets[SERVER] = rep.server
        for target, scores in targets.items():
            cells = table.setdefault(target, {}).setdefault(rep.setting, {})
            for n in ([rep.shots] if rep.shots is not None else shots):
                cells[n] = (scores.mean_f1, scores.std_f1)
    return {
        target: Series(target, [s for s in settings if s in by_setting], shots, by_setting)
        for target, by_setting in sorted(table.items())
    }
