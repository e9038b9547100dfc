"""Parameter containers, strategy-driven key partitioning and FedAvg."""

from __future__ import annotations

import enum
from collections.abc import Iterable, Iterator, Mapping, Sequence
from dataclasses import dataclass

import numpy as np

from hatefl.errors import EmptyUpdateSet, InvalidKP, NonFiniteValue, ShapeMismatch
from hatefl.layout import HEAD, ModelSpec, adapter_groups, block_group, group_names


class ParameterMap(Mapping[str, np.ndarray]):
    """Immutable, key-sorted map from ``group.tensor`` names to flat float32 vectors.

    Stored arrays are read-only, so sharing them between maps (and threads) is
    safe; every operation that changes a value builds a new map.
    """

    __slots__ = ("_entries",)

    def __init__(self, entries: Mapping[str, object] | Iterable[tuple[str, object]] = ()) -> None:
        items = entries.items() if isinstance(entries, Mapping) else entries
        staged: dict[str, np.ndarray] = {}
        for key, value in items:
            arr = np.array(value, dtype=np.float32).reshape(-1)
            if not np.isfinite(arr).all():
                raise NonFiniteValue(key)
            arr.flags.writeable = False
            staged[str(key)] = arr
        self._entries = {k: staged[k] for k in sorted(staged)}

    @classmethod
    def _wrap(cls, entries: dict[str, np.ndarray]) -> "ParameterMap":
        # Trusted path: arrays are float32, 1-D, read-only and already checked.
        obj = cls.__new__(cls)
        obj._entries = {k: entries[k] for k in sorted(entries)}
        return obj

    def __getitem__(self, key: str) -> np.ndarray:
        return self._entries[key]

    def __iter__(self) -> Iterator[str]:
        return iter(self._entries)

    def __len__(self) -> int:
        return len(self._entries)

    def __eq__(self, other: object) -> bool:
        """Bit-exact equality (``-0.0`` and ``0.0`` differ)."""
        if not isinstance(other, ParameterMap):
            return NotImplemented
        if self._entries.keys() != other._entries.keys():
            return False
        return all(self[k].tobytes() == other[k].tobytes() for k in self._entries)

    __hash__ = None  # type: ignore[assignment]

    def __repr__(self) -> str:
        body = ", ".join(f"{k}[{len(v)}]" for k, v in self._entries.items())
        return f"ParameterMap({body})"

    def lengths(self) -> dict[str, int]:
        return {k: len(v) for k, v in self._entries.items()}

    def shape_compatible(self, other: "ParameterMap") -> bool:
        return self.lengths() == other.lengths()

    def num_params(self) -> int:
        return sum(len(v) for v in self._entries.values())

    def updated(self, values: Mapping[str, np.ndarray]) -> "ParameterMap":
        """Copy with some entries replaced; replaced lengths must match."""
        entries = dict(self._entries)
        for k, v in values.items():
            if k not in entries:
                raise ShapeMismatch(k, None, len(v))
            if len(v) != len(entries[k]):
                raise ShapeMismatch(k, len(entries[k]), len(v))
        return ParameterMap._wrap({**entries, **_freeze(values)})

    def to_dict(self) -> dict[str, np.ndarray]:
        """Writable float32 copies."""
        return {k: v.copy() for k, v in self._entries.items()}


def _freeze(values: Mapping[str, object]) -> dict[str, np.ndarray]:
    out = {}
    for k, v in values.items():
        arr = np.asarray(v)
        if arr.dtype != np.float32 or arr.ndim != 1 or arr.flags.writeable:
            arr = np.array(arr, dtype=np.float32).reshape(-1)
            if not np.isfinite(arr).all():
                raise NonFiniteValue(k)
            arr.flags.writeable = False
        out[k] = arr
    return out


def under_prefix(key: str, prefix: str) -> bool:
    """Group-aware prefix test: ``block1`` covers ``block1.weight`` but not ``block10.bias``."""
    return key == prefix or key.startswith(prefix + ".")


def matches_any(key: str, prefixes: Iterable[str]) -> bool:
    return any(under_prefix(key, p) for p in prefixes)


# --- aggregation ------------------------------------------------------------


def check_compatible(expected: ParameterMap, got: ParameterMap) -> None:
    for key, arr in expected.items():
        if key not in got:
            raise ShapeMismatch(key, len(arr), None)
        if len(got[key]) != len(arr):
            raise ShapeMismatch(key, len(arr), len(got[key]))
    for key in got:
        if key not in expected:
            raise ShapeMismatch(key, None, len(got[key]))


def fed_avg(updates: Sequence[tuple[ParameterMap, int]]) -> ParameterMap:
    """Sample-count weighted mean of client updates.

    Callers pass updates sorted by client id; summation follows that order
    with float64 accumulators, so the result is reproducible bit for bit.
    """
    if not updates:
        raise EmptyUpdateSet()
    reference = updates[0][0]
    for params, n in updates:
        if n <= 0:
            raise ValueError(f"sample counts must be positive, got {n}")
        check_compatible(reference, params)
    total = float(sum(n for _, n in updates))
    weights = [n / total for _, n in updates]
    out: dict[str, np.ndarray] = {}
    for key in reference:
        acc = np.zeros(len(reference[key]), dtype=np.float64)
        for (params, _), w in zip(updates, weights):
            acc += w * params[key].astype(np.float64)
        result = acc.astype(np.float32)
        if not np.isfinite(result).all():
            raise NonFiniteValue(key)
        result.flags.writeable = False
        out[key] = result
    return ParameterMap._wrap(out)


# --- partitioning -----------------------------------------------------------


class Strategy(str, enum.Enum):
    STANDARD = "standard"
    FEDPER = "fedper"
    ADAPTER_FULL = "adapter_full"
    ADAPTER_ONLY = "adapter_only"


@dataclass(frozen=True)
class PartitionSpec:
    strategy: Strategy = Strategy.STANDARD
    k_p: int = 0

    def __post_init__(self) -> None:
        object.__setattr__(self, "strategy", Strategy(self.strategy))
        if self.k_p < 0:
            raise InvalidKP(self.k_p, 0)
        if self.strategy is not Strategy.FEDPER and self.k_p != 0:
            raise ValueError(f"k_p only applies to fedper, got k_p={self.k_p} for {self.strategy.value}")

    def validate_for(self, model: ModelSpec) -> None:
        if self.strategy is Strategy.FEDPER and self.k_p > model.block_count:
            raise InvalidKP(self.k_p, model.block_count)
        if self.strategy in (Strategy.ADAPTER_FULL, Strategy.ADAPTER_ONLY) and not model.has_adapters:
            raise ValueError(f"{self.strategy.value} needs a model with adapter_dim > 0")

    def k_b(self, model: ModelSpec) -> int:
        """Base (shared) layer groups: embedding + blocks + head, minus the private ones."""
        return model.block_count + 2 - self.k_p

    @property
    def label(self) -> str:
        if self.strategy is Strategy.FEDPER:
            return f"fedper-kp{self.k_p}"
        return self.strategy.value


@dataclass(frozen=True)
class KeyPartition:
    shared: frozenset[str]
    personal: frozenset[str]


def partition_keys(model: ModelSpec, spec: PartitionSpec) -> KeyPartition:
    """Split the model's layer groups into server-shared and client-private sets."""
    spec.validate_for(model)
    groups = group_names(model)
    adapters = set(adapter_groups(model))
    if spec.strategy is Strategy.STANDARD or (spec.strategy is Strategy.FEDPER and spec.k_p == 0):
        personal: set[str] = set()
    elif spec.strategy is Strategy.FEDPER:
        personal = {HEAD}
        top = model.block_count
        personal.update(block_group(top - j) for j in range(spec.k_p - 1))
    elif spec.strategy is Strategy.ADAPTER_FULL:
        personal = adapters
    else:
        # adapter_only: nothing is federated; the frozen backbone is private too.
        personal = set(groups)
    return KeyPartition(
        shared=frozenset(g for g in groups if g not in personal),
        personal=frozenset(personal),
    )


def trainable_groups(model: ModelSpec, spec: PartitionSpec) -> frozenset[str]:
    if spec.strategy is Strategy.ADAPTER_ONLY:
        return frozenset(adapter_groups(model))
    return frozenset(group_names(model))


def client_owned_groups(model: ModelSpec, spec: PartitionSpec) -> frozenset[str]:
    """Groups initialised from a per-client stream rather than the server's."""
    if spec.strategy is Strategy.ADAPTER_ONLY:
        return frozenset(adapter_groups(model))
    return partition_keys(model, spec).personal


# --- merging ------------------------------------------------------------------


def restrict(params: ParameterMap, prefixes: Iterable[str]) -> ParameterMap:
    prefixes = tuple(prefixes)
    return ParameterMap._wrap({k: v for k, v in params.items() if matches_any(k, prefixes)})


def merge_shared(local: ParameterMap, server: ParameterMap, partition: KeyPartition) -> ParameterMap:
    """Server values on shared keys, local values everywhere else."""
    out: dict[str, np.ndarray] = {}
    for key, value in local.items():
        if matches_any(key, partition.shared):
            if key not in server:
                raise ShapeMismatch(key, len(value), None)
            if len(server[key]) != len(value):
                raise ShapeMismatch(key, len(value), len(server[key]))
            out[key] = server[key]
        else:
            out[key] = value
    return ParameterMap._wrap(out)
