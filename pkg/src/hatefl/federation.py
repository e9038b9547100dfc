"""Round-based FL simulation (standard, FedPer, adapters) and the single-target baseline."""

from __future__ import annotations

import hashlib
import json
import logging
from collections.abc import Callable, Sequence
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

from hatefl.data import LabeledExample, read_splits, sample_few_shot, select, load_corpus
from hatefl.errors import ClientError, ConfigError, HateFLError
from hatefl.evaluation.metrics import macro_f1
from hatefl.layout import FeaturizerConfig, ModelSpec, group_names
from hatefl.model import OptimizerConfig, SparseVector, featurize, init_params, predict, train_local
from hatefl.params import (
    ParameterMap,
    PartitionSpec,
    Strategy,
    client_owned_groups,
    fed_avg,
    matches_any,
    merge_shared,
    partition_keys,
    restrict,
    trainable_groups,
)
from hatefl.runreport import RunReport, SeedScores
from hatefl.seeding import derive_seed

log = logging.getLogger(__name__)

FEW_SHOT_SIZES = (0, 3, 9, 15)

PushHook = Callable[[int, str, ParameterMap, int], None]


@dataclass
class ClientConfig:
    """One simulated client.

    Data comes either from ``corpus_path`` + ``split_path`` or directly from
    ``train``/``test`` example lists.
    """

    client_id: str
    few_shot_n: int = 0
    corpus_path: Path | None = None
    split_path: Path | None = None
    train: list[LabeledExample] | None = None
    test: list[LabeledExample] | None = None

    def __post_init__(self) -> None:
        if self.few_shot_n not in FEW_SHOT_SIZES:
            raise ConfigError(f"client {self.client_id}: few_shot_n must be one of {FEW_SHOT_SIZES}")

    def resolve(self) -> tuple[list[LabeledExample], list[LabeledExample]]:
        if self.train is not None and self.test is not None:
            return self.train, self.test
        if self.corpus_path is None or self.split_path is None:
            raise ConfigError(f"client {self.client_id}: needs corpus_path and split_path, or train/test lists")
        corpus = load_corpus(self.corpus_path)
        splits = read_splits(self.split_path)
        return select(corpus, splits.train), select(corpus, splits.test)

    def fingerprint(self) -> dict:
        out: dict = {"client_id": self.client_id, "few_shot_n": self.few_shot_n}
        if self.train is not None and self.test is not None:
            h = hashlib.sha256()
            for ex in (*self.train, *self.test):
                h.update(json.dumps(ex.to_json(), sort_keys=True).encode("utf-8"))
            out["data"] = h.hexdigest()
        else:
            out["corpus_path"] = str(self.corpus_path)
            out["split_path"] = str(self.split_path)
        return out


@dataclass
class FederationConfig:
    clients: list[ClientConfig]
    model: ModelSpec = field(default_factory=ModelSpec)
    featurizer: FeaturizerConfig = field(default_factory=FeaturizerConfig)
    opt: OptimizerConfig = field(default_factory=OptimizerConfig)
    rounds: int = 5
    seeds: list[int] = field(default_factory=lambda: [0, 1, 2, 3, 4])
    partition: PartitionSpec = field(default_factory=PartitionSpec)
    max_workers: int = 1
    config_digest: str | None = None

    @property
    def strategy(self) -> Strategy:
        return self.partition.strategy

    def validate(self) -> None:
        if self.rounds < 1:
            raise ConfigError(f"rounds must be >= 1, got {self.rounds}")
        if not self.seeds:
            raise ConfigError("seeds must be non-empty")
        if not self.clients:
            raise ConfigError("at least one client is required")
        ids = [c.client_id for c in self.clients]
        if len(set(ids)) != len(ids):
            raise ConfigError(f"client ids must be unique, got {ids}")
        if self.model.hash_dim != self.featurizer.hash_dim:
            raise ConfigError(
                f"model.hash_dim ({self.model.hash_dim}) must equal featurizer.hash_dim ({self.featurizer.hash_dim})"
            )
        try:
            self.partition.validate_for(self.model)
        except (ValueError, HateFLError) as exc:
            raise ConfigError(str(exc)) from exc

    def digest(self) -> str:
        if self.config_digest is not None:
            return self.config_digest
        blob = {
            "clients": [c.fingerprint() for c in sorted(self.clients, key=lambda c: c.client_id)],
            "model": asdict(self.model),
            "featurizer": asdict(self.featurizer),
            "opt": asdict(self.opt),
            "rounds": self.rounds,
            "seeds": list(self.seeds),
            "partition": {"strategy": self.partition.strategy.value, "k_p": self.partition.k_p},
        }
        return hashlib.sha256(json.dumps(blob, sort_keys=True).encode("utf-8")).hexdigest()


@dataclass
class ClientState:
    client_id: str
    params: ParameterMap
    personal_keys: frozenset[str]
    data: list[tuple[SparseVector, int]] = field(default_factory=list)
    sample_count: int = 0


def _featurize_all(examples: Sequence[LabeledExample], cfg: FeaturizerConfig) -> list[tuple[SparseVector, int]]:
    return [(featurize(ex.text, cfg), int(ex.label)) for ex in examples]


def run_round(
    server: ParameterMap,
    states: Sequence[ClientState],
    cfg: FederationConfig,
    *,
    round_index: int,
    seed: int,
    on_push: PushHook | None = None,
) -> tuple[ParameterMap, list[ClientState]]:
    """Pull shared weights, train locally, push shared weights, aggregate.

    Clients with no data push nothing.  Under ``adapter_only`` nothing is
    shared, so the server never changes.
    """
    partition = partition_keys(cfg.model, cfg.partition)
    mask = trainable_groups(cfg.model, cfg.partition)
    epochs = cfg.opt.epochs_per_round

    def work(state: ClientState) -> ClientState:
        try:
            local = merge_shared(state.params, server, partition) if partition.shared else state.params
            params, n = train_local(
                cfg.model, local, state.data, cfg.opt, mask,
                seed=derive_seed(seed, state.client_id, "train"),
                epoch_offset=round_index * epochs,
            )
        except HateFLError as exc:
            raise ClientError(state.client_id, exc, seed=seed, round=round_index) from exc
        return replace(state, params=params, sample_count=n)

    if cfg.max_workers > 1 and len(states) > 1:
        with ThreadPoolExecutor(max_workers=cfg.max_workers) as pool:
            new_states = list(pool.map(work, states))
    else:
        new_states = [work(s) for s in states]

    if not partition.shared:
        return server, new_states
    pushes = sorted(
        ((s.client_id, restrict(s.params, partition.shared), s.sample_count) for s in new_states if s.sample_count > 0),
        key=lambda item: item[0],
    )
    for client_id, payload, n in pushes:
        if on_push is not None:
            on_push(round_index, client_id, payload, n)
    if not pushes:
        return server, new_states
    aggregated = fed_avg([(payload, n) for _, payload, n in pushes])
    return merge_shared(server, aggregated, partition), new_states


@dataclass
class _Prepared:
    client: ClientConfig
    train: list[LabeledExample]
    test: list[LabeledExample]
    test_features: list[SparseVector]
    test_labels: list[int]


def _prepare(cfg: FederationConfig) -> list[_Prepared]:
    out = []
    for client in cfg.clients:
        try:
            train, test = client.resolve()
        except HateFLError as exc:
            raise ClientError(client.client_id, exc) from exc
        if not test:
            raise ClientError(client.client_id, ConfigError("empty test split"))
        out.append(_Prepared(
            client, train, test,
            [featurize(ex.text, cfg.featurizer) for ex in test],
            [int(ex.label) for ex in test],
        ))
    return out


def _local_data(p: _Prepared, cfg: FederationConfig, seed: int) -> list[tuple[SparseVector, int]]:
    try:
        shots = sample_few_shot(p.train, p.client.few_shot_n, derive_seed(seed, p.client.client_id, "few-shot"))
    except HateFLError as exc:
        raise ClientError(p.client.client_id, exc, seed=seed) from exc
    return _featurize_all(shots, cfg.featurizer)


def server_init(cfg: FederationConfig, seed: int) -> ParameterMap:
    return init_params(cfg.model, derive_seed(seed, "server-init"))


def client_init(cfg: FederationConfig, seed: int, client_id: str, server: ParameterMap) -> ParameterMap:
    """Server weights everywhere except the client-owned groups, which get their own stream."""
    owned = client_owned_groups(cfg.model, cfg.partition)
    if not owned:
        return server
    own = init_params(cfg.model, derive_seed(seed, client_id, "client-init"))
    return server.updated({k: v for k, v in own.items() if matches_any(k, owned)})


def _evaluate(cfg: FederationConfig, params: ParameterMap, features: list[SparseVector], labels: list[int]) -> float:
    return macro_f1(labels, predict(cfg.model, params, features)).macro_f1


def run_federation(cfg: FederationConfig, *, on_push: PushHook | None = None) -> RunReport:
    """All seeds of one FL configuration; clients are scored on their own test split.

    The server is scored on the concatenated test splits under the standard
    strategy only; personalised strategies leave ``server`` absent.
    """
    cfg.validate()
    prepared = _prepare(cfg)
    per_client: dict[str, list[float]] = {p.client.client_id: [] for p in prepared}
    server_scores: list[float] = []
    personal = partition_keys(cfg.model, cfg.partition).personal
    evaluate_server = cfg.strategy is Strategy.STANDARD or (
        cfg.strategy is Strategy.FEDPER and cfg.partition.k_p == 0
    )
    for seed in cfg.seeds:
        server = server_init(cfg, seed)
        states = [
            ClientState(p.client.client_id, client_init(cfg, seed, p.client.client_id, server), personal,
                        _local_data(p, cfg, seed))
            for p in prepared
        ]
        for r in range(cfg.rounds):
            server, states = run_round(server, states, cfg, round_index=r, seed=seed, on_push=on_push)
            log.debug("seed %d round %d done", seed, r)
        by_id = {s.client_id: s for s in states}
        for p in prepared:
            cid = p.client.client_id
            per_client[cid].append(_evaluate(cfg, by_id[cid].params, p.test_features, p.test_labels))
        if evaluate_server:
            features = [x for p in prepared for x in p.test_features]
            labels = [y for p in prepared for y in p.test_labels]
            server_scores.append(_evaluate(cfg, server, features, labels))
    return RunReport(
        mode="fl",
        strategy=cfg.partition.label,
        seeds=list(cfg.seeds),
        rounds=cfg.rounds,
        config_digest=cfg.digest(),
        per_client={cid: SeedScores(v) for cid, v in per_client.items()},
        server=SeedScores(server_scores) if evaluate_server else None,
        shots=_common_shots(cfg),
    )


def run_single_target_baseline(cfg: FederationConfig) -> RunReport:
    """Each client fine-tunes its own copy for rounds x epochs_per_round epochs; no aggregation.

    Uses the same initial weights, few-shot sample and per-epoch shuffles as
    the FL run, so a lone standard-FL client reproduces it exactly.
    """
    cfg.validate()
    prepared = _prepare(cfg)
    per_client: dict[str, list[float]] = {p.client.client_id: [] for p in prepared}
    everything = group_names(cfg.model)
    for seed in cfg.seeds:
        init = server_init(cfg, seed)
        for p in prepared:
            cid = p.client.client_id
            try:
                params, _ = train_local(
                    cfg.model, init, _local_data(p, cfg, seed), cfg.opt, everything,
                    seed=derive_seed(seed, cid, "train"),
                    epochs=cfg.rounds * cfg.opt.epochs_per_round,
                )
            except HateFLError as exc:
                raise ClientError(cid, exc, seed=seed) from exc
            per_client[cid].append(_evaluate(cfg, params, p.test_features, p.test_labels))
    return RunReport(
        mode="baseline",
        strategy="single_target",
        seeds=list(cfg.seeds),
        rounds=cfg.rounds,
        config_digest=cfg.digest(),
        per_client={cid: SeedScores(v) for cid, v in per_client.items()},
        server=None,
        shots=_common_shots(cfg),
    )


def _common_shots(cfg: FederationConfig) -> int | None:
    sizes = {c.few_shot_n for c in cfg.clients}
    return sizes.pop() if len(sizes) == 1 else None
