from __future__ import annotations

import hashlib
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from hatefl.errors import EmptyBatch, ShapeMismatch
from hatefl.layout import FeaturizerConfig, ModelSpec, adapter_groups, group_names, layout_keys
from hatefl.model import (
    OptimizerConfig,
    SparseVector,
    featurize,
    forward,
    init_params,
    loss_and_grad,
    mean_loss,
    predict,
    predict_proba,
    sgd_step,
    train_local,
)
from hatefl.params import ParameterMap, restrict

import oracles


def sparse(dense: np.ndarray) -> SparseVector:
    idx = np.flatnonzero(dense)
    return SparseVector(idx.astype(np.int64), dense[idx].astype(np.float64), len(dense))


def random_input(rng: np.random.Generator, dim: int, nnz: int = 4) -> SparseVector:
    dense = np.zeros(dim)
    dense[rng.choice(dim, size=min(nnz, dim), replace=False)] = rng.random(min(nnz, dim))
    dense /= np.linalg.norm(dense)
    return sparse(dense)


class TestFeaturize:
    def test_empty_text(self):
        assert featurize("").nnz == 0

    def test_single_unigram(self):
        x = featurize("aa", FeaturizerConfig(ngram_min=1, ngram_max=1))
        assert x.nnz == 1 and x.values[0] == 1.0

    def test_lowercase_and_norm(self):
        cfg = FeaturizerConfig(hash_dim=1024)
        a, b = featurize("Hello World", cfg), featurize("hello world", cfg)
        assert np.array_equal(a.indices, b.indices) and np.array_equal(a.values, b.values)
        assert math.isclose(float(np.dot(a.values, a.values)), 1.0, rel_tol=1e-12)

    def test_known_hash_is_stable(self):
        # pinned so any change to the hashing scheme is caught
        x = featurize("ab", FeaturizerConfig(ngram_min=2, ngram_max=2, hash_dim=1 << 15))
        expected = int.from_bytes(hashlib.blake2b(b"ab", digest_size=8).digest(), "little") % (1 << 15)
        assert list(x.indices) == [expected]

    def test_config_validation(self):
        with pytest.raises(ValueError):
            FeaturizerConfig(ngram_min=2, ngram_max=1)
        with pytest.raises(ValueError):
            FeaturizerConfig(ngram_max=6)
        with pytest.raises(ValueError):
            FeaturizerConfig(hash_dim=1000)


class TestInit:
    spec = ModelSpec(hash_dim=64, embed_dim=8, block_count=3, adapter_dim=4)

    def test_deterministic(self):
        assert init_params(self.spec, 5) == init_params(self.spec, 5)
        assert init_params(self.spec, 5) != init_params(self.spec, 6)

    def test_keys_match_layout(self):
        p = init_params(self.spec, 0)
        assert set(p) == set(layout_keys(self.spec))
        for key, t in layout_keys(self.spec).items():
            assert len(p[key]) == t.size

    def test_adapter_up_and_biases_zero(self):
        p = init_params(self.spec, 0)
        for key in p:
            if key.endswith(".up") or "bias" in key:
                assert not p[key].any(), key

    def test_glorot_bounds(self):
        p = init_params(self.spec, 0)
        bound = math.sqrt(6 / (8 + 8))
        assert np.abs(p["block1.weight"]).max() <= bound

    def test_group_order(self):
        assert group_names(ModelSpec(hash_dim=8, block_count=2, adapter_dim=1)) == [
            "featurizer_embed", "block1", "adapter1", "block2", "adapter2", "head"]


class TestForward:
    def test_hand_computed_tiny_model(self):
        spec = ModelSpec(hash_dim=2, embed_dim=2, block_count=1, adapter_dim=0)
        params = ParameterMap({
            "featurizer_embed.weight": [1.0, 0.0, 0.0, 1.0],
            "featurizer_embed.bias": [0.0, 0.0],
            "block1.weight": [1.0, -1.0, 0.5, 1.0],
            "block1.bias": [0.0, 0.0],
            "head.weight": [1.0, 0.0, 0.0, 1.0],
            "head.bias": [0.0, 0.5],
        })
        x = SparseVector(np.array([0, 1]), np.array([0.6, 0.8]), 2)
        # h0 = (0.6, 0.8); z = (0.6*1 + 0.8*0.5, 0.6*-1 + 0.8*1) = (1.0, 0.2)
        # h1 = (1.6, 1.0); logits = (1.6, 1.5)
        p1 = 1 / (1 + math.exp(0.1))
        np.testing.assert_allclose(forward(spec, params, x), [1 - p1, p1], atol=1e-6)

    @given(st.integers(0, 10_000), st.booleans())
    def test_probabilities_normalised_and_match_oracle(self, seed, adapters):
        rng = np.random.default_rng(seed)
        spec = ModelSpec(hash_dim=32, embed_dim=4, block_count=2, adapter_dim=3 if adapters else 0)
        params = ParameterMap({k: rng.normal(size=len(v)) for k, v in init_params(spec, seed).items()})
        x = random_input(rng, 32)
        probs = forward(spec, params, x)
        assert ((0 <= probs) & (probs <= 1)).all()
        assert abs(probs.sum() - 1) <= 1e-6
        ref = oracles.dense_forward(params, x.to_dense(), embed_dim=4, blocks=2, adapter_dim=spec.adapter_dim)
        np.testing.assert_allclose(probs, ref, atol=1e-9)

    def test_shape_mismatch(self):
        spec = ModelSpec(hash_dim=32, embed_dim=4, block_count=2, adapter_dim=0)
        params = init_params(spec, 0)
        with pytest.raises(ShapeMismatch):
            forward(ModelSpec(hash_dim=32, embed_dim=4, block_count=3, adapter_dim=0), params, featurize("x"))
        with pytest.raises(ShapeMismatch):
            forward(spec, params, featurize("x", FeaturizerConfig(hash_dim=64)))

    def test_tie_predicts_non_hateful(self):
        spec = ModelSpec(hash_dim=8, embed_dim=2, block_count=1, adapter_dim=0)
        params = init_params(spec, 0).updated({"head.weight": np.zeros(4), "head.bias": np.zeros(2)})
        assert predict(spec, params, [random_input(np.random.default_rng(0), 8)]) == [0]

    def test_empty_feature_list(self):
        spec = ModelSpec(hash_dim=8, embed_dim=2, block_count=1, adapter_dim=0)
        assert predict_proba(spec, init_params(spec, 0), []).shape == (0, 2)


class TestGradients:
    spec = ModelSpec(hash_dim=16, embed_dim=3, block_count=2, adapter_dim=2)

    def _setup(self, seed=0):
        rng = np.random.default_rng(seed)
        params = ParameterMap({k: rng.normal(scale=0.7, size=len(v)) for k, v in init_params(self.spec, seed).items()})
        batch = [(random_input(rng, 16), int(rng.integers(2))) for _ in range(3)]
        return params, batch

    def test_empty_batch(self):
        with pytest.raises(EmptyBatch):
            loss_and_grad(self.spec, init_params(self.spec, 0), [])

    def test_loss_matches_oracle(self):
        params, batch = self._setup()
        loss, grads = loss_and_grad(self.spec, params, batch)
        ref = oracles.dense_loss(params, [(x.to_dense(), y) for x, y in batch], embed_dim=3, blocks=2, adapter_dim=2)
        assert loss == pytest.approx(ref, abs=1e-9)
        assert loss == pytest.approx(mean_loss(self.spec, params, batch), abs=1e-12)
        assert grads.shape_compatible(params)

    def test_duplicated_batch_same_loss_and_grads(self):
        params, batch = self._setup(1)
        l1, g1 = loss_and_grad(self.spec, params, batch)
        l2, g2 = loss_and_grad(self.spec, params, batch + batch)
        assert l1 == pytest.approx(l2, abs=1e-6)
        for key in g1:
            np.testing.assert_allclose(g1[key], g2[key], atol=1e-6)

    def test_confident_correct_prediction(self):
        params, batch = self._setup(2)
        x, _ = batch[0]
        probs = forward(self.spec, params, x)
        label = int(probs.argmax())
        # push the head hard toward the already-preferred class
        head_b = np.zeros(2)
        head_b[label] = 50.0
        params = params.updated({"head.bias": head_b})
        loss, grads = loss_and_grad(self.spec, params, [(x, label)])
        assert loss < 1e-3
        assert np.linalg.norm(np.concatenate([grads["head.weight"], grads["head.bias"]])) < 1e-2


class TestSGD:
    spec = ModelSpec(hash_dim=16, embed_dim=3, block_count=2, adapter_dim=2)

    def test_empty_mask_is_noop(self):
        p = init_params(self.spec, 0)
        assert sgd_step(p, init_params(self.spec, 1), set(), 0.1) == p

    def test_full_mask_lr_one_with_grads_equal_params(self):
        p = init_params(self.spec, 0)
        out = sgd_step(p, p, group_names(self.spec), 1.0)
        assert all(not v.any() for v in out.values())

    def test_adapter_mask_freezes_rest(self):
        p = init_params(self.spec, 0)
        out = sgd_step(p, init_params(self.spec, 1), adapter_groups(self.spec), 0.5)
        frozen = [g for g in group_names(self.spec) if not g.startswith("adapter")]
        assert restrict(out, frozen) == restrict(p, frozen)
        assert restrict(out, adapter_groups(self.spec)) != restrict(p, adapter_groups(self.spec))

    def test_shape_mismatch(self):
        p = init_params(self.spec, 0)
        with pytest.raises(ShapeMismatch):
            sgd_step(p, ParameterMap({"head.bias": [0.0, 0.0]}), group_names(self.spec), 0.1)

    def test_optimizer_validation(self):
        with pytest.raises(ValueError):
            OptimizerConfig(learning_rate=0)
        with pytest.raises(ValueError):
            OptimizerConfig(batch_size=0)


class TestTrainLocal:
    spec = ModelSpec(hash_dim=64, embed_dim=8, block_count=2, adapter_dim=0)

    def _separable(self, n=50, seed=0):
        rng = np.random.default_rng(seed)
        data = []
        for i in range(n):
            label = i % 2
            dense = np.zeros(64)
            dense[rng.choice(range(label * 32, label * 32 + 32), size=3, replace=False)] = 1.0
            data.append((sparse(dense / np.linalg.norm(dense)), label))
        return data

    def test_empty_data(self):
        p = init_params(self.spec, 0)
        out, n = train_local(self.spec, p, [], OptimizerConfig(), group_names(self.spec), seed=1)
        assert out is p and n == 0

    def test_deterministic(self):
        p, data = init_params(self.spec, 0), self._separable()
        opt = OptimizerConfig(learning_rate=0.05, batch_size=5)
        a = train_local(self.spec, p, data, opt, group_names(self.spec), seed=3)
        b = train_local(self.spec, p, data, opt, group_names(self.spec), seed=3)
        assert a[0] == b[0] and a[1] == b[1] == 50

    def test_loss_decreases_over_epochs(self):
        params, data = init_params(self.spec, 0), self._separable()
        opt = OptimizerConfig(learning_rate=0.1, batch_size=10)
        losses = [mean_loss(self.spec, params, data)]
        for epoch in range(20):
            params, _ = train_local(self.spec, params, data, opt, group_names(self.spec), seed=7, epoch_offset=epoch)
            losses.append(mean_loss(self.spec, params, data))
        rises = sum(b > a + 1e-9 for a, b in zip(losses, losses[1:]))
        assert rises <= 2
        assert losses[-1] < losses[0]

    def test_offsets_replay_multi_epoch_call(self):
        params, data = init_params(self.spec, 0), self._separable(12)
        opt = OptimizerConfig(learning_rate=0.05, batch_size=4)
        mask = group_names(self.spec)
        stepwise = params
        for e in range(3):
            stepwise, _ = train_local(self.spec, stepwise, data, opt, mask, seed=9, epoch_offset=e)
        at_once, _ = train_local(self.spec, params, data, opt, mask, seed=9, epochs=3)
        assert stepwise == at_once

    def test_frozen_keys_untouched(self):
        spec = ModelSpec(hash_dim=64, embed_dim=8, block_count=2, adapter_dim=2)
        params = init_params(spec, 0)
        out, _ = train_local(spec, params, self._separable(), OptimizerConfig(), adapter_groups(spec), seed=0)
        frozen = [g for g in group_names(spec) if not g.startswith("adapter")]
        assert restrict(out, frozen) == restrict(params, frozen)
