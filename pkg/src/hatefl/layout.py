"""Architecture descriptions and the derived parameter layout.

Every tensor is addressed as ``group.tensor``.  Groups are ordered bottom to
top: ``featurizer_embed``, then ``block1``/``adapter1`` ... ``blockB``/``adapterB``,
then ``head``.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass

EMBED = "featurizer_embed"
HEAD = "head"


def block_group(i: int) -> str:
    return f"block{i}"


def adapter_group(i: int) -> str:
    return f"adapter{i}"


def _is_power_of_two(n: int) -> bool:
    return n > 0 and (n & (n - 1)) == 0


@dataclass(frozen=True)
class FeaturizerConfig:
    ngram_min: int = 1
    ngram_max: int = 3
    hash_dim: int = 32768
    lowercase: bool = True

    def __post_init__(self) -> None:
        if not 1 <= self.ngram_min <= self.ngram_max <= 5:
            raise ValueError(
                f"need 1 <= ngram_min <= ngram_max <= 5, got {self.ngram_min}..{self.ngram_max}"
            )
        if not _is_power_of_two(self.hash_dim):
            raise ValueError(f"hash_dim must be a power of two, got {self.hash_dim}")


@dataclass(frozen=True)
class ModelSpec:
    hash_dim: int = 32768
    embed_dim: int = 64
    block_count: int = 4
    adapter_dim: int = 16
    class_count: int = 2

    def __post_init__(self) -> None:
        if self.hash_dim < 1 or self.embed_dim < 1:
            raise ValueError("hash_dim and embed_dim must be positive")
        if self.block_count < 1:
            raise ValueError(f"block_count must be >= 1, got {self.block_count}")
        if self.adapter_dim < 0:
            raise ValueError(f"adapter_dim must be >= 0, got {self.adapter_dim}")
        if self.class_count != 2:
            raise ValueError("only binary classification is supported (class_count=2)")

    @property
    def has_adapters(self) -> bool:
        return self.adapter_dim > 0

    def digest(self) -> str:
        blob = json.dumps(asdict(self), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode("utf-8")).hexdigest()


@dataclass(frozen=True)
class TensorSpec:
    key: str
    group: str
    shape: tuple[int, ...]
    kind: str  # "weight", "bias" or "adapter_up"
    fan_in: int = 0
    fan_out: int = 0

    @property
    def size(self) -> int:
        n = 1
        for d in self.shape:
            n *= d
        return n


def group_names(spec: ModelSpec) -> list[str]:
    groups = [EMBED]
    for i in range(1, spec.block_count + 1):
        groups.append(block_group(i))
        if spec.has_adapters:
            groups.append(adapter_group(i))
    groups.append(HEAD)
    return groups


def adapter_groups(spec: ModelSpec) -> list[str]:
    if not spec.has_adapters:
        return []
    return [adapter_group(i) for i in range(1, spec.block_count + 1)]


def layout(spec: ModelSpec) -> list[TensorSpec]:
    """All tensors of the model, in construction (bottom-to-top) order."""
    e, a, h = spec.embed_dim, spec.adapter_dim, spec.hash_dim
    out = [
        TensorSpec(f"{EMBED}.weight", EMBED, (h, e), "weight", h, e),
        TensorSpec(f"{EMBED}.bias", EMBED, (e,), "bias"),
    ]
    for i in range(1, spec.block_count + 1):
        g = block_group(i)
        out.append(TensorSpec(f"{g}.weight", g, (e, e), "weight", e, e))
        out.append(TensorSpec(f"{g}.bias", g, (e,), "bias"))
        if spec.has_adapters:
            ag = adapter_group(i)
            out.append(TensorSpec(f"{ag}.down", ag, (e, a), "weight", e, a))
            out.append(TensorSpec(f"{ag}.down_bias", ag, (a,), "bias"))
            out.append(TensorSpec(f"{ag}.up", ag, (a, e), "adapter_up", a, e))
            out.append(TensorSpec(f"{ag}.up_bias", ag, (e,), "bias"))
    out.append(TensorSpec(f"{HEAD}.weight", HEAD, (e, spec.class_count), "weight", e, spec.class_count))
    out.append(TensorSpec(f"{HEAD}.bias", HEAD, (spec.class_count,), "bias"))
    return out


def layout_keys(spec: ModelSpec) -> dict[str, TensorSpec]:
    return {t.key: t for t in layout(spec)}
