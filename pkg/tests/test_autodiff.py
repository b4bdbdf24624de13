"""Tape gradients verified against central finite differences."""

import numpy as np
import pytest

from rgtn import autodiff as ad
from rgtn.tensor import ShapeError


def fd_gradients(build, arrays, h=1e-6):
    """Central-difference gradients of a scalar-valued builder."""
    grads = []
    for idx, arr in enumerate(arrays):
        fd = np.zeros_like(arr)
        it = np.nditer(arr, flags=["multi_index"])
        while not it.finished:
            mi = it.multi_index
            plus = [a.copy() for a in arrays]
            minus = [a.copy() for a in arrays]
            plus[idx][mi] += h
            minus[idx][mi] -= h
            lp = float(build(*[ad.constant(a) for a in plus]).array)
            lm = float(build(*[ad.constant(a) for a in minus]).array)
            fd[mi] = (lp - lm) / (2.0 * h)
            it.iternext()
        grads.append(fd)
    return grads


def check_gradients(build, arrays, rel_tol=1e-5, h=1e-6):
    nodes = [ad.constant(a) for a in arrays]
    loss = build(*nodes)
    ad.backward(loss)
    fd = fd_gradients(build, arrays, h=h)
    for node, expect in zip(nodes, fd):
        got = node.grad if node.grad is not None else np.zeros_like(expect)
        scale = max(np.abs(expect).max(), np.abs(got).max(), 1e-8)
        assert np.abs(got - expect).max() / scale <= rel_tol


class TestBackwardMechanics:
    def test_non_scalar_root_rejected(self):
        node = ad.constant(np.ones((2, 2)))
        with pytest.raises(ShapeError):
            ad.backward(node)

    def test_linear_map_gradient_pattern(self):
        rng = np.random.default_rng(0)
        w = ad.constant(rng.standard_normal((3, 4)))
        x = rng.standard_normal(4)
        loss = ad.sum_all(ad.tensordot(w, ad.constant(x), (1,), (0,)))
        ad.backward(loss)
        np.testing.assert_allclose(w.grad, np.tile(x, (3, 1)), atol=1e-12)

    def test_unreachable_leaf_gets_no_gradient(self):
        used = ad.constant(np.ones(3))
        unused = ad.constant(np.ones(3))
        loss = ad.sum_all(used)
        ad.backward(loss)
        assert used.grad is not None
        assert unused.grad is None

    def test_node_reused_twice(self):
        rng = np.random.default_rng(1)
        x = rng.standard_normal(4)
        node = ad.constant(x)
        loss = ad.sum_all(ad.multiply(node, node))
        ad.backward(loss)
        np.testing.assert_allclose(node.grad, 2.0 * x, atol=1e-12)

    def test_diamond_graph(self):
        x = ad.constant(np.array(2.0))
        a = ad.scale_by(x, 3.0)
        b = ad.square(x)
        loss = ad.sum_all(ad.add(a, b))
        ad.backward(loss)
        np.testing.assert_allclose(x.grad, 3.0 + 4.0, atol=1e-12)


class TestElementwiseOps:
    def test_add_subtract_multiply(self):
        rng = np.random.default_rng(2)
        a = rng.standard_normal((3, 2))
        b = rng.standard_normal((3, 2))
        check_gradients(lambda x, y: ad.sum_all(ad.multiply(ad.add(x, y), ad.subtract(x, y))), [a, b])

    def test_scale_and_square(self):
        rng = np.random.default_rng(3)
        a = rng.standard_normal((4,))
        check_gradients(lambda x: ad.mean_all(ad.square(ad.scale_by(x, -2.5))), [a])

    def test_tanh(self):
        rng = np.random.default_rng(4)
        check_gradients(lambda x: ad.sum_all(ad.tanh(x)), [rng.standard_normal((3, 3))])

    def test_sigmoid(self):
        rng = np.random.default_rng(5)
        check_gradients(lambda x: ad.sum_all(ad.sigmoid(x)), [rng.standard_normal((5,))])

    def test_relu_away_from_kink(self):
        rng = np.random.default_rng(6)
        a = rng.standard_normal((4, 4))
        a = np.where(np.abs(a) < 0.1, 0.5, a)
        check_gradients(lambda x: ad.sum_all(ad.relu(x)), [a])

    def test_absolute_away_from_kink(self):
        rng = np.random.default_rng(7)
        a = rng.standard_normal((6,))
        a = np.where(np.abs(a) < 0.1, -0.7, a)
        check_gradients(lambda x: ad.sum_all(ad.absolute(x)), [a])

    def test_shape_mismatch_rejected(self):
        with pytest.raises(ShapeError):
            ad.add(ad.constant(np.ones(2)), ad.constant(np.ones(3)))


class TestTensordot:
    def test_matmul_pattern(self):
        rng = np.random.default_rng(8)
        a = rng.standard_normal((3, 4))
        b = rng.standard_normal((4, 2))
        check_gradients(lambda x, y: ad.sum_all(ad.tensordot(x, y, (1,), (0,))), [a, b])

    def test_double_contraction(self):
        rng = np.random.default_rng(9)
        a = rng.standard_normal((3, 2, 3, 2))
        b = rng.standard_normal((3, 2))
        check_gradients(lambda x, y: ad.sum_all(ad.tensordot(x, y, (2, 3), (0, 1))), [a, b])

    def test_out_of_order_axes(self):
        rng = np.random.default_rng(10)
        a = rng.standard_normal((2, 3, 4))
        b = rng.standard_normal((4, 5, 3))
        check_gradients(
            lambda x, y: ad.sum_all(ad.tensordot(x, y, (2, 1), (0, 2))), [a, b]
        )

    def test_full_contraction_to_scalar(self):
        rng = np.random.default_rng(11)
        a = rng.standard_normal((3, 4))
        b = rng.standard_normal((3, 4))
        check_gradients(lambda x, y: ad.tensordot(x, y, (0, 1), (0, 1)), [a, b])

    def test_batched_feature_projection(self):
        rng = np.random.default_rng(12)
        x = rng.standard_normal((2, 3, 2, 3))
        w = rng.standard_normal((4, 3))
        check_gradients(
            lambda a, b: ad.sum_all(ad.square(ad.tensordot(a, b, (3,), (1,)))), [x, w]
        )

    def test_extent_mismatch(self):
        with pytest.raises(ShapeError):
            ad.tensordot(ad.constant(np.ones((2, 3))), ad.constant(np.ones((2, 4))), (1,), (1,))


class TestStructuralOps:
    def test_moveaxis(self):
        rng = np.random.default_rng(13)
        a = rng.standard_normal((2, 3, 4))
        check_gradients(
            lambda x: ad.sum_all(ad.square(ad.moveaxis(x, 0, 2))), [a]
        )

    def test_reshape(self):
        rng = np.random.default_rng(14)
        a = rng.standard_normal((2, 6))
        check_gradients(lambda x: ad.sum_all(ad.square(ad.reshape(x, (3, 4)))), [a])

    def test_stack_rows(self):
        rng = np.random.default_rng(15)
        a = rng.standard_normal((3,))
        b = rng.standard_normal((3,))
        check_gradients(
            lambda x, y: ad.sum_all(ad.square(ad.stack_rows([x, y], axis=0))), [a, b]
        )

    def test_add_bias(self):
        rng = np.random.default_rng(16)
        x = rng.standard_normal((4, 2, 3))
        b = rng.standard_normal((3,))
        check_gradients(lambda u, v: ad.sum_all(ad.square(ad.add_bias(u, v))), [x, b])

    def test_add_bias_full_shape(self):
        rng = np.random.default_rng(17)
        x = rng.standard_normal((2, 3))
        b = rng.standard_normal((2, 3))
        check_gradients(lambda u, v: ad.sum_all(ad.square(ad.add_bias(u, v))), [x, b])

    def test_add_bias_shape_error(self):
        with pytest.raises(ShapeError):
            ad.add_bias(ad.constant(np.ones((2, 3))), ad.constant(np.ones(2)))


class TestLosses:
    def test_mae_zero_for_equal(self):
        x = np.ones((3, 2))
        loss = ad.mae_loss(ad.constant(x), x)
        assert float(loss.array) == 0.0

    def test_mae_unit_offset(self):
        x = np.zeros((4, 3))
        loss = ad.mae_loss(ad.constant(x + 1.0), x)
        assert float(loss.array) == 1.0

    def test_mae_gradient(self):
        rng = np.random.default_rng(18)
        pred = rng.standard_normal((3, 4))
        target = pred + np.where(rng.standard_normal((3, 4)) > 0, 1.0, -1.0)
        check_gradients(lambda p: ad.mae_loss(p, target), [pred])

    def test_mse_gradient(self):
        rng = np.random.default_rng(19)
        pred = rng.standard_normal((3, 4))
        target = rng.standard_normal((3, 4))
        check_gradients(lambda p: ad.mse_loss(p, target), [pred])

    def test_cross_entropy_uniform_logits(self):
        logits = np.zeros((5, 4))
        labels = np.array([0, 1, 2, 3, 0])
        loss = ad.cross_entropy_loss(ad.constant(logits), labels)
        np.testing.assert_allclose(float(loss.array), np.log(4.0), atol=1e-12)

    def test_cross_entropy_gradient(self):
        rng = np.random.default_rng(20)
        logits = rng.standard_normal((6, 3))
        labels = rng.integers(0, 3, size=6)
        check_gradients(lambda z: ad.cross_entropy_loss(z, labels), [logits])

    def test_log_softmax_gradient(self):
        rng = np.random.default_rng(21)
        z = rng.standard_normal((4, 5))
        w = rng.standard_normal((4, 5))
        check_gradients(
            lambda x: ad.sum_all(ad.multiply(ad.log_softmax(x), ad.constant(w))), [z]
        )

    def test_empty_batch_rejected(self):
        with pytest.raises(ValueError):
            ad.mae_loss(ad.constant(np.zeros((0, 2))), np.zeros((0, 2)))
        with pytest.raises(ValueError):
            ad.cross_entropy_loss(ad.constant(np.zeros((0, 2))), np.zeros(0, dtype=int))

    def test_bad_labels_rejected(self):
        with pytest.raises(ValueError):
            ad.cross_entropy_loss(ad.constant(np.zeros((2, 2))), np.array([0, 2]))
