import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra import numpy as hnp

from commlab.autograd import (ContractError, DimensionError, DomainError, Tensor, backward,
                              default_dtype, get_default_dtype, no_grad, ops)
from commlab.autograd.tensor import Tape

from conftest import check_op_grad
from gradcases import OP_CASES


@pytest.mark.parametrize("name,build,arrays", OP_CASES, ids=[c[0] for c in OP_CASES])
def test_op_gradient_matches_finite_differences(backend, name, build, arrays):
    check_op_grad(build, arrays, tol=1e-4)


def test_default_dtype_is_float32_and_configurable():
    assert get_default_dtype() == np.float32
    assert Tensor([1.0]).data.dtype == np.float32
    with default_dtype(np.float64):
        assert Tensor([1.0]).data.dtype == np.float64
    assert Tensor([1.0]).data.dtype == np.float32


def test_shape_mismatch_raises():
    with pytest.raises(DimensionError):
        ops.add(Tensor(np.ones((2, 3))), Tensor(np.ones((3, 2))))
    with pytest.raises(DimensionError):
        ops.matmul(Tensor(np.ones((2, 3))), Tensor(np.ones((2, 3))))
    with pytest.raises(DimensionError):
        ops.mul(Tensor(np.ones((2, 3))), Tensor(np.ones((1, 3))))  # no implicit broadcast


def test_log_of_non_positive_raises():
    with pytest.raises(DomainError):
        ops.log(Tensor([1.0, 0.0]))
    with pytest.raises(DomainError):
        ops.log(Tensor([-1.0]))


def test_backward_contract():
    x = Tensor(np.ones(3), requires_grad=True)
    with pytest.raises(ContractError):
        backward(ops.mul(x, x))  # not a scalar
    with pytest.raises(ContractError):
        backward(ops.sum(Tensor(np.ones(3))))  # nothing requires grad


def test_no_grad_records_nothing():
    x = Tensor(np.ones(3), requires_grad=True)
    with no_grad():
        y = ops.sum(ops.tanh(x))
    assert not y.requires_grad and y._parents == ()


def test_gradients_accumulate_until_cleared(f64):
    x = Tensor(np.array([1.0, 2.0]), requires_grad=True)
    backward(ops.sum(ops.mul(x, x)))
    backward(ops.sum(ops.mul(x, x)))
    np.testing.assert_allclose(x.grad, 2 * 2 * x.data)
    x.zero_grad()
    np.testing.assert_array_equal(x.grad, 0.0)


def test_shared_subexpression_gets_both_paths(f64):
    x = Tensor(np.array([0.3, -0.4]), requires_grad=True)
    y = ops.tanh(x)
    backward(ops.sum(ops.add(ops.mul(y, y), y)))
    t = np.tanh(x.data)
    np.testing.assert_allclose(x.grad, (2 * t + 1) * (1 - t * t), rtol=1e-12)


def test_tape_is_reverse_topological(f64):
    a = Tensor(np.ones(2), requires_grad=True)
    b = ops.tanh(a)
    c = ops.mul(b, a)
    loss = ops.sum(c)
    tape = Tape.from_root(loss)
    order = [n._id for n in tape.nodes]
    assert order == sorted(order, reverse=True)
    assert len(tape) == 4


def test_softmax_mask_gives_exact_zeros_and_empty_rows_are_zero():
    x = Tensor(np.array([[1.0, 2.0, 3.0], [0.5, 0.1, 0.2]]))
    mask = np.array([[True, False, True], [False, False, False]])
    y = ops.softmax(x, 1.0, mask).data
    assert y[0, 1] == 0.0
    np.testing.assert_allclose(y[0].sum(), 1.0, rtol=1e-6)
    np.testing.assert_array_equal(y[1], 0.0)


@settings(max_examples=50, deadline=None)
@given(hnp.arrays(np.float64, hnp.array_shapes(min_dims=1, max_dims=3, min_side=1, max_side=6),
                  elements=st.floats(-30, 30)),
       st.floats(0.05, 4.0), st.floats(-50, 50))
def test_softmax_normalized_and_shift_invariant(x, scale, shift):
    with default_dtype(np.float64):
        y = ops.softmax(Tensor(x), scale).data
        y2 = ops.softmax(Tensor(x + shift), scale).data
    np.testing.assert_allclose(y.sum(axis=-1), 1.0, atol=1e-9)
    np.testing.assert_allclose(y, y2, atol=1e-9)


@settings(max_examples=50, deadline=None)
@given(hnp.arrays(np.float64, (3, 5), elements=st.floats(-20, 20)))
def test_log_softmax_agrees_with_log_of_softmax(x):
    with default_dtype(np.float64):
        a = ops.log_softmax(Tensor(x)).data
        b = np.log(ops.softmax(Tensor(x)).data)
    np.testing.assert_allclose(a, b, atol=1e-9)


def test_compiled_and_python_kernels_agree():
    from commlab.autograd import _pykernels

    ck = pytest.importorskip("commlab.autograd._ckernels")
    rng = np.random.default_rng(5)
    x = rng.normal(size=(6, 3))
    h = rng.normal(size=(6, 4))
    ws = [rng.normal(size=(7, 4)) for _ in range(3)]
    bs = [rng.normal(size=4) for _ in range(3)]
    o1, c1 = _pykernels.gru_forward(x, h, *ws, *bs)
    o2, c2 = ck.gru_forward(x, h, *ws, *bs)
    np.testing.assert_allclose(o1, o2, atol=1e-12)
    g = rng.normal(size=o1.shape)
    for a, b in zip(_pykernels.gru_backward(g, c1, *ws), ck.gru_backward(g, c2, *ws)):
        np.testing.assert_allclose(a, b, atol=1e-12)
    logits = rng.normal(size=(2, 3, 5)) * 10
    mask = rng.random((2, 3, 5)) > 0.4
    mask[0, 0] = False
    np.testing.assert_allclose(_pykernels.masked_softmax(logits, 0.7, mask),
                               ck.masked_softmax(logits, 0.7, mask), atol=1e-12)
    np.testing.assert_allclose(_pykernels.sigmoid(logits), ck.sigmoid(logits), atol=1e-12)
