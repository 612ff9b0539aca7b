"""Unit tests for global context disentangling."""
import numpy as np
import pytest

from app.nn.gcd import GcdParams, context_vector, context_weights, disentangle, layer_norm
from app.tensor import CHECK_DTYPE, DimensionError, Tensor, grad_check


@pytest.fixture
def rng():
    return np.random.default_rng(7)


def tensor64(values):
    return Tensor(np.asarray(values, dtype=np.float64))


class TestContextVector:
    """Softmax-pooled global context."""

    def test_single_position_returns_input(self, rng):
        x = tensor64(rng.standard_normal((1, 1, 1, 4)))
        W_k = tensor64(rng.standard_normal((4, 1)))
        np.testing.assert_allclose(context_vector(x, W_k).data, x.data.reshape(1, 4))

    def test_zero_scores_average(self):
        x = tensor64([[[[1.0, 0.0], [0.0, 1.0]]]])
        z = context_vector(x, tensor64(np.zeros((2, 1))))
        np.testing.assert_allclose(z.data, [[0.5, 0.5]])

    def test_peaked_scores(self):
        x = tensor64([[[[1.0, 0.0], [0.0, 1.0]]]])
        z = context_vector(x, tensor64([[10.0], [0.0]]))
        np.testing.assert_allclose(z.data, [[0.99995, 0.00005]], atol=1e-5)

    def test_weights_sum_to_one(self, rng):
        x = tensor64(rng.standard_normal((2, 5, 3, 8)))
        weights = context_weights(x, tensor64(rng.standard_normal((8, 1))))
        np.testing.assert_allclose(weights.data.sum(axis=1), 1.0, atol=1e-6)

    def test_permutation_invariant(self, rng):
        values = rng.standard_normal((1, 4, 5, 6))
        W_k = tensor64(rng.standard_normal((6, 1)))
        perm = rng.permutation(20)
        shuffled = values.reshape(1, 20, 6)[:, perm].reshape(1, 4, 5, 6)
        np.testing.assert_allclose(
            context_vector(tensor64(values), W_k).data,
            context_vector(tensor64(shuffled), W_k).data,
            atol=1e-10,
        )


class TestLayerNorm:
    """Normalisation over all non-batch axes by default."""

    def test_known_values(self):
        out = layer_norm(tensor64([1.0, 2.0, 3.0]), epsilon=1e-12)
        np.testing.assert_allclose(out.data, [-1.22474, 0.0, 1.22474], atol=1e-5)

    def test_constant_input_is_zero(self):
        out = layer_norm(tensor64(np.full((2, 3, 3, 4), 5.0)))
        assert not out.data.any()

    def test_statistics(self, rng):
        out = layer_norm(tensor64(rng.standard_normal((3, 4, 4, 8)) * 5 + 2)).data
        flat = out.reshape(3, -1)
        assert np.abs(flat.mean(axis=1)).max() <= 1e-6
        np.testing.assert_allclose(flat.var(axis=1), 1.0, atol=1e-4)

    def test_scalar_rejected(self):
        with pytest.raises(DimensionError):
            layer_norm(tensor64(1.0))


class TestDisentangle:
    """Detection and ReID maps from one context vector."""

    def test_fresh_block_is_identity(self, rng):
        params = GcdParams(8, rng=rng, dtype=CHECK_DTYPE)
        x = tensor64(rng.standard_normal((2, 3, 3, 8)))
        parts = disentangle(x, params)
        np.testing.assert_array_equal(parts.det.data, x.data)
        np.testing.assert_array_equal(parts.reid.data, x.data)

    def test_added_vector_is_spatially_constant(self, rng):
        params = GcdParams(8, rng=rng, dtype=CHECK_DTYPE)
        params.W_d2.data = rng.standard_normal(params.W_d2.shape)
        params.W_r2.data = rng.standard_normal(params.W_r2.shape)
        x = tensor64(rng.standard_normal((1, 4, 5, 8)))
        parts = disentangle(x, params)
        for delta in (parts.det.data - x.data, parts.reid.data - x.data):
            flat = delta.reshape(20, 8)
            np.testing.assert_allclose(flat, np.broadcast_to(flat[0], flat.shape), atol=1e-12)
        assert not np.allclose(parts.det.data, parts.reid.data)

    def test_shapes_preserved(self, rng):
        params = GcdParams(16, reduction=4, rng=rng)
        assert params.mid_channels == 4
        x = Tensor(rng.standard_normal((2, 3, 5, 16)))
        parts = disentangle(x, params)
        assert parts.det.shape == parts.reid.shape == x.shape

    def test_channel_mismatch(self, rng):
        with pytest.raises(DimensionError):
            disentangle(Tensor(np.zeros((1, 2, 2, 4))), GcdParams(8, rng=rng))

    def test_invalid_epsilon(self):
        with pytest.raises(ValueError, match="epsilon"):
            GcdParams(8, epsilon=0.0)

    @pytest.mark.parametrize("seed", range(3))
    def test_gradients(self, seed):
        rng = np.random.default_rng(seed)
        params = GcdParams(8, rng=rng, dtype=CHECK_DTYPE)
        for p in params.parameters():
            p.data = rng.standard_normal(p.shape) * 0.5
        x = tensor64(rng.standard_normal((1, 3, 3, 8)))
        err = grad_check(lambda: disentangle(x, params).det.sum(), params.parameters())
        assert err <= 1e-4
