"""Compact residual text classifier over hashed character n-grams.

Forward pass, per example::

    h = x @ E + e                                   (featurizer_embed)
    for i in 1..B:
        h = relu(h @ W_i + b_i) + h                 (block_i)
        h = h + relu(h @ D_i + d_i) @ U_i + u_i     (adapter_i, when adapter_dim > 0)
    p = softmax(h @ H + c)                          (head)

Gradients are derived by hand; everything internal runs in float64 and is
stored back as float32.
"""

from __future__ import annotations

import functools
import hashlib
import math
from collections.abc import Iterable, Sequence
from dataclasses import dataclass

import numpy as np

from hatefl.errors import EmptyBatch, ShapeMismatch
from hatefl.layout import (
    EMBED,
    HEAD,
    FeaturizerConfig,
    ModelSpec,
    adapter_group,
    block_group,
    layout,
    layout_keys,
)
from hatefl.params import ParameterMap, check_compatible, matches_any
from hatefl.seeding import derive_seed


@dataclass(frozen=True)
class SparseVector:
    indices: np.ndarray  # int64, sorted, unique
    values: np.ndarray  # float64
    dim: int

    def __post_init__(self) -> None:
        self.indices.flags.writeable = False
        self.values.flags.writeable = False

    @property
    def nnz(self) -> int:
        return len(self.indices)

    def to_dense(self) -> np.ndarray:
        out = np.zeros(self.dim)
        out[self.indices] = self.values
        return out


@dataclass(frozen=True)
class OptimizerConfig:
    learning_rate: float = 0.05
    batch_size: int | None = None  # None: the whole local set is one batch
    epochs_per_round: int = 1

    def __post_init__(self) -> None:
        if not self.learning_rate > 0:
            raise ValueError(f"learning_rate must be > 0, got {self.learning_rate}")
        if self.batch_size is not None and self.batch_size < 1:
            raise ValueError(f"batch_size must be >= 1, got {self.batch_size}")
        if self.epochs_per_round < 1:
            raise ValueError(f"epochs_per_round must be >= 1, got {self.epochs_per_round}")


# --- featurization ---------------------------------------------------------------


def _ngram_hash(gram: str) -> int:
    return int.from_bytes(hashlib.blake2b(gram.encode("utf-8"), digest_size=8).digest(), "little")


@functools.lru_cache(maxsize=65536)
def featurize(text: str, cfg: FeaturizerConfig = FeaturizerConfig()) -> SparseVector:
    """L2-normalised counts of hashed character n-grams."""
    if cfg.lowercase:
        text = text.lower()
    counts: dict[int, int] = {}
    for n in range(cfg.ngram_min, cfg.ngram_max + 1):
        for i in range(len(text) - n + 1):
            idx = _ngram_hash(text[i:i + n]) % cfg.hash_dim
            counts[idx] = counts.get(idx, 0) + 1
    if not counts:
        return SparseVector(np.zeros(0, dtype=np.int64), np.zeros(0), cfg.hash_dim)
    indices = np.array(sorted(counts), dtype=np.int64)
    values = np.array([counts[i] for i in indices], dtype=np.float64)
    values /= np.sqrt(np.dot(values, values))
    return SparseVector(indices, values, cfg.hash_dim)


# --- parameters ------------------------------------------------------------------


def init_params(spec: ModelSpec, seed: int) -> ParameterMap:
    """Glorot-uniform weights, zero biases, zero adapter up-projections."""
    rng = np.random.default_rng(seed)
    entries = {}
    for t in layout(spec):
        if t.kind == "weight":
            bound = math.sqrt(6.0 / (t.fan_in + t.fan_out))
            entries[t.key] = rng.uniform(-bound, bound, size=t.size).astype(np.float32)
        else:
            entries[t.key] = np.zeros(t.size, dtype=np.float32)
    return ParameterMap(entries)


def _arrays(spec: ModelSpec, params: ParameterMap) -> dict[str, np.ndarray]:
    """Reshaped float64 views of everything except the embedding table.

    The embedding stays a float32 view; only the rows an input touches are
    ever gathered.
    """
    expected = layout_keys(spec)
    for key, t in expected.items():
        if key not in params:
            raise ShapeMismatch(key, t.size, None)
        if len(params[key]) != t.size:
            raise ShapeMismatch(key, t.size, len(params[key]))
    for key in params:
        if key not in expected:
            raise ShapeMismatch(key, None, len(params[key]))
    out = {}
    for key, t in expected.items():
        if key == f"{EMBED}.weight":
            out[key] = params[key].reshape(t.shape)
        else:
            out[key] = params[key].astype(np.float64).reshape(t.shape)
    return out


def _embed(table: np.ndarray, bias: np.ndarray, features: Sequence[SparseVector]) -> np.ndarray:
    h = np.empty((len(features), table.shape[1]))
    for row, x in enumerate(features):
        if x.dim != table.shape[0]:
            raise ShapeMismatch(f"{EMBED}.weight", table.shape[0], x.dim)
        h[row] = x.values @ table[x.indices].astype(np.float64)
    return h + bias


def _forward(spec: ModelSpec, P: dict[str, np.ndarray], features: Sequence[SparseVector]):
    h = _embed(P[f"{EMBED}.weight"], P[f"{EMBED}.bias"], features)
    cache = []
    for i in range(1, spec.block_count + 1):
        g = block_group(i)
        z = h @ P[f"{g}.weight"] + P[f"{g}.bias"]
        cache.append(("block", g, h, z, None))
        h = np.maximum(z, 0.0) + h
        if spec.has_adapters:
            a = adapter_group(i)
            z = h @ P[f"{a}.down"] + P[f"{a}.down_bias"]
            act = np.maximum(z, 0.0)
            cache.append(("adapter", a, h, z, act))
            h = h + act @ P[f"{a}.up"] + P[f"{a}.up_bias"]
    logits = h @ P[f"{HEAD}.weight"] + P[f"{HEAD}.bias"]
    return logits, h, cache


def _softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=1, keepdims=True)


def predict_proba(spec: ModelSpec, params: ParameterMap, features: Sequence[SparseVector]) -> np.ndarray:
    """Class probabilities, shape (n, 2)."""
    if not features:
        return np.zeros((0, spec.class_count))
    logits, _, _ = _forward(spec, _arrays(spec, params), features)
    return _softmax(logits)


def forward(spec: ModelSpec, params: ParameterMap, features: SparseVector) -> np.ndarray:
    return predict_proba(spec, params, [features])[0]


def predict(spec: ModelSpec, params: ParameterMap, features: Sequence[SparseVector]) -> list[int]:
    """Hard labels; an exact 0.5/0.5 tie goes to the non-hateful class (0)."""
    probs = predict_proba(spec, params, features)
    return [int(p[1] > p[0]) for p in probs]


def loss_and_grad(
    spec: ModelSpec,
    params: ParameterMap,
    batch: Sequence[tuple[SparseVector, int]],
) -> tuple[float, ParameterMap]:
    """Mean cross-entropy over ``batch`` and its gradient for every tensor."""
    if not batch:
        raise EmptyBatch()
    features = [x for x, _ in batch]
    labels = np.array([int(y) for _, y in batch])
    P = _arrays(spec, params)
    logits, h_top, cache = _forward(spec, P, features)

    n = len(batch)
    shifted = logits - logits.max(axis=1, keepdims=True)
    log_probs = shifted - np.log(np.exp(shifted).sum(axis=1, keepdims=True))
    loss = float(-log_probs[np.arange(n), labels].mean())

    grads: dict[str, np.ndarray] = {}
    d_logits = np.exp(log_probs)
    d_logits[np.arange(n), labels] -= 1.0
    d_logits /= n
    grads[f"{HEAD}.weight"] = h_top.T @ d_logits
    grads[f"{HEAD}.bias"] = d_logits.sum(axis=0)
    dh = d_logits @ P[f"{HEAD}.weight"].T

    for kind, g, h_in, z, act in reversed(cache):
        if kind == "adapter":
            grads[f"{g}.up"] = act.T @ dh
            grads[f"{g}.up_bias"] = dh.sum(axis=0)
            dz = (dh @ P[f"{g}.up"].T) * (z > 0)
            grads[f"{g}.down"] = h_in.T @ dz
            grads[f"{g}.down_bias"] = dz.sum(axis=0)
            dh = dh + dz @ P[f"{g}.down"].T
        else:
            dz = dh * (z > 0)
            grads[f"{g}.weight"] = h_in.T @ dz
            grads[f"{g}.bias"] = dz.sum(axis=0)
            dh = dh + dz @ P[f"{g}.weight"].T

    table = np.zeros((spec.hash_dim, spec.embed_dim))
    for row, x in enumerate(features):
        np.add.at(table, x.indices, np.outer(x.values, dh[row]))
    grads[f"{EMBED}.weight"] = table
    grads[f"{EMBED}.bias"] = dh.sum(axis=0)
    return loss, ParameterMap({k: v.reshape(-1) for k, v in grads.items()})


def mean_loss(spec: ModelSpec, params: ParameterMap, batch: Sequence[tuple[SparseVector, int]]) -> float:
    if not batch:
        raise EmptyBatch()
    probs = predict_proba(spec, params, [x for x, _ in batch])
    labels = np.array([int(y) for _, y in batch])
    return float(-np.log(probs[np.arange(len(batch)), labels]).mean())


# --- optimisation ---------------------------------------------------------------


def sgd_step(params: ParameterMap, grads: ParameterMap, mask: Iterable[str], lr: float) -> ParameterMap:
    """Plain SGD on keys under a trainable prefix; other keys are passed through untouched."""
    check_compatible(params, grads)
    mask = tuple(mask)
    out = {}
    for key, value in params.items():
        if matches_any(key, mask):
            stepped = (value.astype(np.float64) - lr * grads[key].astype(np.float64)).astype(np.float32)
            stepped.flags.writeable = False
            out[key] = stepped
        else:
            out[key] = value
    return ParameterMap._wrap(out)


def epoch_order(n: int, seed: int, epoch: int) -> np.ndarray:
    return np.random.default_rng(derive_seed(seed, "epoch", epoch)).permutation(n)


def train_local(
    spec: ModelSpec,
    params: ParameterMap,
    data: Sequence[tuple[SparseVector, int]],
    opt: OptimizerConfig,
    mask: Iterable[str],
    seed: int,
    *,
    epochs: int | None = None,
    epoch_offset: int = 0,
) -> tuple[ParameterMap, int]:
    """Run ``epochs`` (default ``opt.epochs_per_round``) shuffled passes of minibatch SGD.

    The shuffle of epoch ``e`` depends only on ``(seed, epoch_offset + e)``, so
    five one-epoch calls with offsets 0..4 replay one five-epoch call exactly.
    """
    if not data:
        return params, 0
    mask = tuple(mask)
    epochs = opt.epochs_per_round if epochs is None else epochs
    n = len(data)
    batch_size = opt.batch_size or n
    for e in range(epochs):
        order = epoch_order(n, seed, epoch_offset + e)
        for start in range(0, n, batch_size):
            batch = [data[i] for i in order[start:start + batch_size]]
            _, grads = loss_and_grad(spec, params, batch)
            params = sgd_step(params, grads, mask, opt.learning_rate)
    return params, n
