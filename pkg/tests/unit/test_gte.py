"""Unit tests for deformable/dense attention and the encoder."""
import numpy as np
import pytest

from app.nn.checks import TOLERANCE, check_case
from app.nn.gcd import layer_norm
from app.nn.gte import (
    DeformAttnParams,
    DenseAttnParams,
    EncoderBlockParams,
    GteParams,
    attention_weights,
    deformable_aggregate,
    deformable_attention,
    dense_attention,
    dense_attention_weights,
    encoder_block,
    gte_forward,
    predict_offsets,
    sample_keys,
)
from app.tensor import CHECK_DTYPE, DimensionError, Tensor


@pytest.fixture
def rng():
    return np.random.default_rng(3)


def identity_params(channels: int, num_keys: int = 4) -> DeformAttnParams:
    """Single head with identity key/value/output projections and zero offsets."""
    params = DeformAttnParams(channels, num_heads=1, num_keys=num_keys, dtype=CHECK_DTYPE)
    params.key_proj.data = np.eye(channels)
    params.value_proj[0].data = np.eye(channels)
    params.out_proj.data = np.eye(channels)
    return params


class TestParams:
    """Construction checks."""

    def test_heads_must_divide_channels(self):
        with pytest.raises(ValueError, match="heads"):
            DeformAttnParams(6, num_heads=4)

    def test_num_keys_positive(self):
        with pytest.raises(ValueError, match="num_keys"):
            DeformAttnParams(8, num_heads=2, num_keys=0)

    def test_offset_channels(self):
        assert DeformAttnParams(8, num_heads=1, num_keys=9).offset_proj.shape == (8, 18)

    def test_dense_temperature(self):
        assert DenseAttnParams(16, num_heads=4).rho == pytest.approx(2.0)

    def test_build_dense(self):
        gte = GteParams.build(8, num_blocks=2, attention="dense", num_heads=2, embed_dim=5)
        assert len(gte.blocks) == 2
        assert all(isinstance(b.attn, DenseAttnParams) for b in gte.blocks)
        assert gte.head_w.shape == (8, 5)

    def test_empty_encoder_rejected(self):
        with pytest.raises(ValueError):
            GteParams([])


class TestOffsetsAndSampling:
    """Offset prediction and key sampling."""

    def test_fresh_offsets_are_zero(self, rng):
        params = DeformAttnParams(8, num_heads=2, num_keys=3, rng=rng)
        offsets = predict_offsets(Tensor(rng.standard_normal((4, 5, 8))), params)
        assert offsets.shape == (4, 5, 2, 3, 2)
        assert not offsets.data.any()

    def test_offsets_depend_on_query(self, rng):
        params = DeformAttnParams(8, num_heads=1, num_keys=2, rng=rng, dtype=CHECK_DTYPE)
        params.offset_proj.data = rng.standard_normal(params.offset_proj.shape)
        offsets = predict_offsets(Tensor(rng.standard_normal((2, 2, 8))), params).data
        assert not np.allclose(offsets[0, 0], offsets[1, 1])

    def test_channel_mismatch(self, rng):
        with pytest.raises(DimensionError):
            predict_offsets(Tensor(np.zeros((2, 2, 4))), DeformAttnParams(8, num_heads=2))

    def test_sample_at_offset_location(self, rng):
        key_map = Tensor(rng.standard_normal((6, 6, 3)))
        out = sample_keys(key_map, (3.0, 4.0), np.array([1.0, -2.0]))
        np.testing.assert_array_equal(out.data, key_map.data[4, 2])

    def test_zero_offset_reads_query(self, rng):
        key_map = Tensor(rng.standard_normal((6, 6, 3)))
        out = sample_keys(key_map, (2.0, 5.0), np.zeros(2))
        np.testing.assert_array_equal(out.data, key_map.data[2, 5])

    def test_fractional_offset(self):
        key_map = Tensor(np.array([[[0.0], [2.0]]]))
        out = sample_keys(key_map, (0.0, 0.0), np.array([0.0, 0.5]))
        assert out.data[0] == pytest.approx(1.0)


class TestDeformableAttention:
    """Sparse sampled-key attention."""

    def test_weights_sum_to_one(self, rng):
        params = DeformAttnParams(8, num_heads=2, num_keys=4, rng=rng)
        weights = attention_weights(Tensor(rng.standard_normal((3, 3, 8))), params)
        assert weights.shape == (9, 2, 4)
        np.testing.assert_allclose(weights.data.sum(axis=-1), 1.0, atol=1e-6)

    def test_identity_configuration(self, rng):
        x = Tensor(rng.standard_normal((4, 5, 6)))
        out = deformable_attention(x, identity_params(6))
        np.testing.assert_allclose(out.data, x.data, atol=1e-12)

    def test_single_key_ignores_attention_logits(self, rng):
        params = DeformAttnParams(8, num_heads=2, num_keys=1, rng=rng, dtype=CHECK_DTYPE)
        params.offset_proj.data = 0.3 * rng.standard_normal(params.offset_proj.shape)
        x = Tensor(rng.standard_normal((3, 4, 8)))
        before = deformable_attention(x, params).data
        params.attn_proj.data = rng.standard_normal(params.attn_proj.shape)
        np.testing.assert_array_equal(deformable_attention(x, params).data, before)

    def test_shape_preserved(self, rng):
        params = DeformAttnParams(8, num_heads=4, num_keys=9, rng=rng)
        assert deformable_attention(Tensor(rng.standard_normal((5, 7, 8))), params).shape == (5, 7, 8)

    @pytest.mark.parametrize("seed", range(3))
    def test_gradients(self, seed):
        assert check_case("deformable_attention", seed) <= TOLERANCE

    @pytest.mark.parametrize("scale", [2.0, -0.5, 3.7])
    def test_aggregation_linear_in_keys(self, rng, scale):
        params = DeformAttnParams(8, num_heads=2, num_keys=3, rng=rng, dtype=CHECK_DTYPE)
        keys = rng.standard_normal((6, 5, 8))
        locations = Tensor(rng.uniform(-0.5, 5.5, (30, 2, 3, 2)))
        logits = rng.standard_normal((30, 2, 3))
        weights = Tensor(np.exp(logits) / np.exp(logits).sum(axis=-1, keepdims=True))
        base = deformable_aggregate(Tensor(keys), locations, weights, params).data
        scaled = deformable_aggregate(Tensor(scale * keys), locations, weights, params).data
        np.testing.assert_allclose(scaled, scale * base, rtol=1e-12, atol=1e-14)

    def test_zero_offsets_translation_equivariant(self, rng):
        params = DeformAttnParams(8, num_heads=2, num_keys=4, rng=rng, dtype=CHECK_DTYPE)
        x = rng.standard_normal((9, 10, 8))
        out = deformable_attention(Tensor(x), params).data
        shifted = deformable_attention(Tensor(np.roll(x, (2, 3), axis=(0, 1))), params).data
        np.testing.assert_allclose(shifted, np.roll(out, (2, 3), axis=(0, 1)), atol=1e-12)

    def test_predicted_offsets_translation_equivariant_inside(self, rng):
        params = DeformAttnParams(8, num_heads=2, num_keys=4, rng=rng, dtype=CHECK_DTYPE)
        params.offset_proj.data = rng.uniform(-0.1, 0.1, params.offset_proj.shape)
        x = rng.uniform(-1.0, 1.0, (12, 12, 8))
        sy, sx, margin = 2, 3, 2
        out = deformable_attention(Tensor(x), params).data
        shifted = deformable_attention(Tensor(np.roll(x, (sy, sx), axis=(0, 1))), params).data
        np.testing.assert_allclose(
            shifted[sy + margin:12 - margin, sx + margin:12 - margin],
            out[margin:12 - margin - sy, margin:12 - margin - sx],
            atol=1e-12,
        )


class TestDenseAttention:
    """Global dot-product attention."""

    def test_single_position(self, rng):
        params = DenseAttnParams(4, num_heads=1, rng=rng, dtype=CHECK_DTYPE)
        k = rng.standard_normal(4)
        out = dense_attention(Tensor(k.reshape(1, 1, 4)), params)
        expected = k @ params.W_value[0].data @ params.W_out[0].data
        np.testing.assert_allclose(out.data.reshape(4), expected, atol=1e-12)

    def test_uniform_input_gives_uniform_weights(self, rng):
        params = DenseAttnParams(8, num_heads=2, rng=rng)
        x = Tensor(np.broadcast_to(rng.standard_normal(8), (3, 4, 8)).copy())
        for weights in dense_attention_weights(x, params):
            np.testing.assert_allclose(weights.data, 1.0 / 12, atol=1e-6)

    def test_rows_are_stochastic(self, rng):
        params = DenseAttnParams(8, num_heads=2, rng=rng)
        for weights in dense_attention_weights(Tensor(rng.standard_normal((3, 3, 8))), params):
            assert weights.shape == (9, 9)
            np.testing.assert_allclose(weights.data.sum(axis=1), 1.0, atol=1e-6)


class TestEncoder:
    """Encoder blocks and the embedding head."""

    def zero_block(self, channels: int) -> EncoderBlockParams:
        block = EncoderBlockParams(DeformAttnParams(channels, num_heads=2, dtype=CHECK_DTYPE), dtype=CHECK_DTYPE)
        block.attn.out_proj.data = np.zeros_like(block.attn.out_proj.data)
        block.ffn_w1.data = np.zeros_like(block.ffn_w1.data)
        block.ffn_w2.data = np.zeros_like(block.ffn_w2.data)
        return block

    def test_zero_branches_give_double_norm(self, rng):
        x = Tensor(rng.standard_normal((3, 3, 8)))
        expected = layer_norm(layer_norm(x, axes=(-1,)), axes=(-1,))
        np.testing.assert_allclose(encoder_block(x, self.zero_block(8)).data, expected.data, atol=1e-10)

    def test_block_output_normalised_per_position(self, rng):
        block = EncoderBlockParams(DeformAttnParams(8, num_heads=2, rng=rng), rng=rng)
        out = encoder_block(Tensor(rng.standard_normal((4, 4, 8))), block).data
        np.testing.assert_allclose(out.mean(axis=-1), 0.0, atol=1e-5)

    def test_head_on_double_norm(self, rng):
        gte = GteParams([self.zero_block(8)], embed_dim=3, rng=rng, dtype=CHECK_DTYPE)
        x = rng.standard_normal((1, 2, 3, 8))
        normed = layer_norm(layer_norm(Tensor(x[0]), axes=(-1,)), axes=(-1,)).data
        expected = normed.reshape(6, 8) @ gte.head_w.data + gte.head_b.data
        out = gte_forward(Tensor(x), gte)
        assert out.shape == (1, 2, 3, 3)
        np.testing.assert_allclose(out.data.reshape(6, 3), expected, atol=1e-10)

    def test_deterministic(self, rng):
        gte = GteParams.build(8, num_heads=2, num_keys=3, embed_dim=4, rng=rng)
        x = Tensor(rng.standard_normal((2, 3, 3, 8)))
        np.testing.assert_array_equal(gte_forward(x, gte).data, gte_forward(x, gte).data)

    def test_rejects_unbatched_input(self, rng):
        with pytest.raises(DimensionError):
            gte_forward(Tensor(np.zeros((3, 3, 8))), GteParams.build(8, num_heads=2))

    @pytest.mark.parametrize("seed", range(2))
    def test_gradients(self, seed):
        assert check_case("encoder_block", seed) <= TOLERANCE
