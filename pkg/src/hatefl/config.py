"""Experiment configuration files and run manifests."""

from __future__ import annotations

import copy
import hashlib
import json
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Any

import yaml

from hatefl import __version__
from hatefl.data import SplitPolicy
from hatefl.errors import ConfigError
from hatefl.evaluation.toxicity import ToxicityConfig
from hatefl.federation import FEW_SHOT_SIZES, ClientConfig, FederationConfig
from hatefl.layout import FeaturizerConfig, ModelSpec
from hatefl.model import OptimizerConfig
from hatefl.params import PartitionSpec, Strategy

TOP_LEVEL_KEYS = {
    "output_dir", "seeds", "rounds", "shots", "strategy", "k_p", "max_workers", "model", "featurizer",
    "optimizer", "split_policy", "split_seed", "clients", "baselines", "toxicity", "report",
}


@dataclass
class ClientEntry:
    client_id: str
    corpus: Path
    test_ids: Path | None
    splits: Path
    split_policy: SplitPolicy


@dataclass
class ExperimentConfig:
    source: Path | None
    raw: dict[str, Any]
    output_dir: Path
    seeds: list[int]
    rounds: int
    shots: list[int]
    partition: PartitionSpec
    model: ModelSpec
    featurizer: FeaturizerConfig
    optimizer: OptimizerConfig
    clients: list[ClientEntry]
    split_seed: int = 0
    max_workers: int = 1
    single_target_baseline: bool = True
    api_baseline: bool = False
    toxicity: ToxicityConfig | None = None
    figures: bool = True
    digest: str = field(default="")

    def federation(self, shots: int) -> FederationConfig:
        return FederationConfig(
            clients=[ClientConfig(c.client_id, shots, corpus_path=c.corpus, split_path=c.splits) for c in self.clients],
            model=self.model,
            featurizer=self.featurizer,
            opt=self.optimizer,
            rounds=self.rounds,
            seeds=list(self.seeds),
            partition=self.partition,
            max_workers=self.max_workers,
            config_digest=self.digest,
        )


def config_digest(raw: dict[str, Any]) -> str:
    """Content hash of the experiment, independent of key order and output location."""
    content = {k: v for k, v in raw.items() if k != "output_dir"}
    blob = json.dumps(content, sort_keys=True, separators=(",", ":"), default=str)
    return hashlib.sha256(blob.encode("utf-8")).hexdigest()


def _section(raw: dict, name: str) -> dict:
    value = raw.get(name) or {}
    if not isinstance(value, dict):
        raise ConfigError(f"{name}: expected a mapping")
    return value


def _build(name: str, factory, kwargs: dict):
    try:
        return factory(**kwargs)
    except TypeError as exc:
        raise ConfigError(f"{name}: {exc}") from exc
    except (ValueError, ConfigError) as exc:
        raise ConfigError(f"{name}: {exc}") from exc


def _path(base: Path, value: Any, field_name: str) -> Path:
    if not isinstance(value, str) or not value:
        raise ConfigError(f"{field_name}: expected a path string")
    p = Path(value)
    return p if p.is_absolute() else base / p


def parse_config(
    raw: dict[str, Any],
    base_dir: Path = Path("."),
    *,
    seed_override: list[int] | None = None,
    output_override: Path | None = None,
    source: Path | None = None,
) -> ExperimentConfig:
    if not isinstance(raw, dict):
        raise ConfigError("config root must be a mapping")
    unknown = set(raw) - TOP_LEVEL_KEYS
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    raw = copy.deepcopy(raw)
    if seed_override is not None:
        raw["seeds"] = list(seed_override)

    seeds = raw.get("seeds", [0, 1, 2, 3, 4])
    if not isinstance(seeds, list) or not seeds or not all(isinstance(s, int) for s in seeds):
        raise ConfigError("seeds: expected a non-empty list of integers")
    rounds = raw.get("rounds", 5)
    if not isinstance(rounds, int) or rounds < 1:
        raise ConfigError("rounds: expected an integer >= 1")
    shots = raw.get("shots", list(FEW_SHOT_SIZES))
    if not isinstance(shots, list) or not shots or any(s not in FEW_SHOT_SIZES for s in shots):
        raise ConfigError(f"shots: expected a non-empty list drawn from {list(FEW_SHOT_SIZES)}")

    try:
        partition = PartitionSpec(Strategy(raw.get("strategy", "standard")), int(raw.get("k_p", 0)))
    except ValueError as exc:
        raise ConfigError(f"strategy/k_p: {exc}") from exc

    model = _build("model", ModelSpec, _section(raw, "model"))
    feat_kwargs = dict(_section(raw, "featurizer"))
    feat_kwargs.setdefault("hash_dim", model.hash_dim)
    featurizer = _build("featurizer", FeaturizerConfig, feat_kwargs)
    if featurizer.hash_dim != model.hash_dim:
        raise ConfigError("featurizer.hash_dim must equal model.hash_dim")
    try:
        partition.validate_for(model)
    except Exception as exc:
        raise ConfigError(f"strategy/k_p: {exc}") from exc
    optimizer = _build("optimizer", OptimizerConfig, _section(raw, "optimizer"))

    out_dir = output_override or _path(base_dir, raw.get("output_dir", "hatefl-out"), "output_dir")
    policy_defaults = _section(raw, "split_policy")

    clients_raw = raw.get("clients")
    if not isinstance(clients_raw, list) or not clients_raw:
        raise ConfigError("clients: expected a non-empty list")
    clients = []
    seen = set()
    for i, entry in enumerate(clients_raw):
        where = f"clients[{i}]"
        if not isinstance(entry, dict):
            raise ConfigError(f"{where}: expected a mapping")
        cid = entry.get("id")
        if not isinstance(cid, str) or not cid:
            raise ConfigError(f"{where}.id: missing")
        if cid in seen:
            raise ConfigError(f"{where}.id: duplicate client id {cid!r}")
        seen.add(cid)
        corpus = _path(base_dir, entry.get("corpus"), f"{where}.corpus")
        if not corpus.is_file():
            raise ConfigError(f"{where}.corpus: file not found: {corpus}")
        test_ids = None
        if entry.get("test_ids") is not None:
            test_ids = _path(base_dir, entry["test_ids"], f"{where}.test_ids")
            if not test_ids.is_file():
                raise ConfigError(f"{where}.test_ids: file not found: {test_ids}")
        splits = (
            _path(base_dir, entry["splits"], f"{where}.splits") if entry.get("splits")
            else out_dir / "splits" / f"{cid}.json"
        )
        policy_raw = {**policy_defaults, **(entry.get("split_policy") or {})}
        policy = _build(f"{where}.split_policy", SplitPolicy, policy_raw)
        clients.append(ClientEntry(cid, corpus, test_ids, splits, policy))

    baselines = _section(raw, "baselines")
    tox_raw = raw.get("toxicity")
    toxicity = None
    if tox_raw is not None:
        tox_kwargs = dict(_section(raw, "toxicity"))
        for key in ("thresholds", "languages"):
            if key in tox_kwargs:
                tox_kwargs[key] = tuple(tox_kwargs[key])
        toxicity = _build("toxicity", ToxicityConfig, tox_kwargs)

    return ExperimentConfig(
        source=source,
        raw=raw,
        output_dir=out_dir,
        seeds=seeds,
        rounds=rounds,
        shots=shots,
        partition=partition,
        model=model,
        featurizer=featurizer,
        optimizer=optimizer,
        clients=clients,
        split_seed=int(raw.get("split_seed", 0)),
        max_workers=int(raw.get("max_workers", 1)),
        single_target_baseline=bool(baselines.get("single_target", True)),
        api_baseline=bool(baselines.get("api", toxicity is not None)),
        toxicity=toxicity,
        figures=bool(_section(raw, "report").get("figures", True)),
        digest=config_digest(raw),
    )


def load_config(
    path: str | Path, *, seed_override: list[int] | None = None, output_override: Path | None = None
) -> ExperimentConfig:
    path = Path(path)
    try:
        raw = yaml.safe_load(path.read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}") from None
    except yaml.YAMLError as exc:
        raise ConfigError(f"{path}: cannot parse config: {exc}") from exc
    return parse_config(raw, path.parent, seed_override=seed_override, output_override=output_override, source=path)


class RunManifest:
    """``manifest.json`` in the output directory; one entry per command run."""

    def __init__(self, directory: Path) -> None:
        self.path = directory / "manifest.json"

    def record(self, cfg: ExperimentConfig | None, command: str, outputs: list[Path]) -> dict:
        data: dict[str, Any] = {}
        if self.path.exists():
            data = json.loads(self.path.read_text(encoding="utf-8"))
        if cfg is not None:
            data["config_digest"] = cfg.digest
            data["seeds"] = list(cfg.seeds)
        data["artifact_version"] = __version__
        data["timestamp"] = datetime.now(timezone.utc).isoformat(timespec="seconds")
        data.setdefault("outputs", {})[command] = [str(p) for p in outputs]
        self.path.parent.mkdir(parents=True, exist_ok=True)
        self.path.write_text(json.dumps(data, indent=2, sort_keys=True) + "\n", encoding="utf-8")
        return data
