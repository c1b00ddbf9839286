import numpy as np
import pytest

import oracles
from dualvd.semantic import ConfigurationError, global_local_fusion, semantic_attention
from dualvd.tensor import DimensionError, Tensor
from helpers import T, one, random_params


def test_identical_captions_give_uniform_attention():
    _, P = random_params(1)
    u = np.array([0.3, -0.2, 1.0, 0.5])
    k = 3
    delta, cq, zq = semantic_attention(one(np.ones(4)), one(u), one(np.tile(u, (k, 1))), T(P))
    np.testing.assert_allclose(delta.data[0], 1 / (k + 1), atol=1e-15)
    np.testing.assert_allclose(cq.data[0], u / (k + 1), atol=1e-15)
    np.testing.assert_allclose(zq.data[0], k / (k + 1) * u, atol=1e-15)


def test_zero_caption_scores_split_evenly():
    _, P = random_params(2)
    P["semantic_attention.W_caption"][:] = 0
    P["semantic_attention.b_caption"][:] = 0
    delta, _, _ = semantic_attention(one(np.ones(4)), one(np.ones(4)), one(np.full((1, 4), 3.0)), T(P))
    np.testing.assert_array_equal(delta.data[0], [0.5, 0.5])


def test_semantic_attention_matches_loop_oracle():
    _, P = random_params(3)
    rng = np.random.default_rng(3)
    q, C, Z = rng.standard_normal(4), rng.standard_normal(4), rng.standard_normal((3, 4))
    delta, cq, zq = semantic_attention(one(q), one(C), one(Z), T(P))
    dref, cref, zref = oracles.semantic_attention(q, C, Z, P)
    np.testing.assert_allclose(delta.data[0], dref, atol=1e-14)
    np.testing.assert_allclose(cq.data[0], cref, atol=1e-14)
    np.testing.assert_allclose(zq.data[0], zref, atol=1e-14)


def test_no_dense_captions_is_configuration_error():
    _, P = random_params(0)
    with pytest.raises(ConfigurationError):
        semantic_attention(one(np.ones(4)), one(np.ones(4)), Tensor(np.ones((1, 0, 4))), T(P))


def test_caption_gate_closed_weights_half_gate():
    _, P = random_params(4)
    P["caption_gate.W"][:] = 0
    P["caption_gate.b"][:] = 0
    c, z = np.arange(4.0), np.ones(4)
    out, gate = global_local_fusion(one(c), one(z), T(P))
    np.testing.assert_array_equal(gate.data, 0.5)
    np.testing.assert_allclose(out.data[0], P["caption_proj.W"] @ (0.5 * np.concatenate([c, z])) + P["caption_proj.b"], atol=1e-14)


def test_caption_gate_shut_returns_bias():
    _, P = random_params(5)
    P["caption_gate.W"][:] = 0
    P["caption_gate.b"][:] = -50
    out, _ = global_local_fusion(one(np.full(4, 2.0)), one(np.ones(4)), T(P))
    np.testing.assert_allclose(out.data[0], P["caption_proj.b"], atol=1e-20)


def test_global_local_fusion_matches_loop_oracle():
    _, P = random_params(6)
    rng = np.random.default_rng(6)
    c, z = rng.standard_normal(4), rng.standard_normal(4)
    out, gate = global_local_fusion(one(c), one(z), T(P))
    ref, gref = oracles.global_local(c, z, P)
    np.testing.assert_allclose(out.data[0], ref, atol=1e-14)
    np.testing.assert_allclose(gate.data[0], gref, atol=1e-15)


def test_caption_fusion_shape_mismatch():
    _, P = random_params(0)
    with pytest.raises(DimensionError):
        global_local_fusion(one(np.ones(4)), Tensor(np.ones((2, 4))), T(P))
