"""Unit and property tests for the tensor engine."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hiconn import autodiff as ad
from hiconn.autodiff import Tape, Tensor, backward
from hiconn.errors import ContractError, DimensionError
from hiconn.gradcheck import central_difference, relative_error

RNG = np.random.default_rng(20240901)


def leaf(values):
    return Tensor(values, requires_grad=True)


def grad_of(build, *arrays):
    """Analytic gradients of a scalar-valued expression builder."""
    leaves = [leaf(a) for a in arrays]
    with Tape() as tape:
        loss = build(*leaves)
        backward(loss, tape)
    return [p.grad for p in leaves]


def fd_of(build, *arrays, h=1e-5):
    """Finite-difference oracle over the same builder (no tape involved)."""
    copies = [np.array(a, dtype=np.float64) for a in arrays]

    def f():
        return build(*[Tensor(c) for c in copies]).item()

    return central_difference(f, copies, h=h)


def assert_grads_close(build, *arrays, tol=1e-4):
    analytic = grad_of(build, *arrays)
    numeric = fd_of(build, *arrays)
    for a, n in zip(analytic, numeric):
        a = np.zeros_like(n) if a is None else a
        assert relative_error(a, n).max() < tol


# ---------------------------------------------------------------------------
# matmul

def test_matmul_identity():
    m = [[1.0, 2.0], [3.0, 4.0]]
    out = ad.matmul(np.eye(2), m)
    np.testing.assert_array_equal(out.values, m)


def test_matmul_zero():
    out = ad.matmul(np.eye(2), np.zeros((2, 2)))
    np.testing.assert_array_equal(out.values, np.zeros((2, 2)))


def test_matmul_gradient_example():
    # d sum(A B) / dA at A=[[1,2]], B=[[3],[4]] is [[3, 4]]
    a = leaf([[1.0, 2.0]])
    b = Tensor([[3.0], [4.0]])
    with Tape() as tape:
        loss = ad.sum_axis(ad.matmul(a, b))
        backward(loss, tape)
    np.testing.assert_allclose(a.grad, [[3.0, 4.0]], rtol=0, atol=0)
    numeric = fd_of(lambda x: ad.sum_axis(ad.matmul(x, b)), [[1.0, 2.0]])[0]
    assert relative_error(a.grad, numeric).max() < 1e-6


def test_matmul_shape_error_names_both_shapes():
    with pytest.raises(DimensionError, match=r"2, 3.*4, 5"):
        ad.matmul(np.zeros((2, 3)), np.zeros((4, 5)))


# ---------------------------------------------------------------------------
# softmax

def test_softmax_symmetry():
    np.testing.assert_allclose(ad.softmax_rows([[0.0, 0.0]]).values, [[0.5, 0.5]])


def test_softmax_overflow_guard():
    out = ad.softmax_rows([[1000.0, 1000.0, 1000.0]])
    assert np.all(np.isfinite(out.values))
    np.testing.assert_allclose(out.values, np.full((1, 3), 1.0 / 3.0))


def test_softmax_hand_value():
    out = ad.softmax_rows([[0.0, math.log(3.0)]])
    np.testing.assert_allclose(out.values, [[0.25, 0.75]], atol=1e-15)


def test_softmax_rows_sum_to_one_and_shift_invariant():
    x = RNG.normal(size=(7, 5)) * 10
    y = ad.softmax_rows(x).values
    np.testing.assert_allclose(y.sum(axis=1), np.ones(7), atol=1e-12)
    y_shift = ad.softmax_rows(x + 123.456).values
    np.testing.assert_allclose(y, y_shift, atol=1e-12)


# ---------------------------------------------------------------------------
# elementwise

def test_sigmoid_at_zero_exact():
    assert ad.sigmoid(np.zeros(1)).values[0] == 0.5


def test_sigmoid_extreme_inputs_finite():
    out = ad.sigmoid(np.array([-1e6, 1e6])).values
    assert np.all(np.isfinite(out))
    np.testing.assert_allclose(out, [0.0, 1.0], atol=1e-12)


def test_relu_example():
    np.testing.assert_array_equal(ad.relu(np.array([-1.0, 2.0])).values, [0.0, 2.0])


def test_abs_gradient_under_sum_loss():
    x = leaf([-2.0, 3.0])
    with Tape() as tape:
        backward(ad.sum_axis(ad.absval(x)), tape)
    np.testing.assert_array_equal(x.grad, [-1.0, 1.0])
    numeric = fd_of(lambda t: ad.sum_axis(ad.absval(t)), [-2.0, 3.0])[0]
    assert relative_error(x.grad, numeric).max() < 1e-6


def test_broadcast_contract_rejects_other_shapes():
    with pytest.raises(DimensionError):
        ad.add(np.zeros((2, 3)), np.zeros((3, 2)))
    with pytest.raises(DimensionError):
        ad.mul(np.zeros((2, 3)), np.zeros(3))  # row broadcasting unsupported


def test_scalar_broadcast_both_sides():
    x = np.array([[1.0, 2.0], [3.0, 4.0]])
    np.testing.assert_array_equal(ad.add(x, 1.0).values, x + 1)
    np.testing.assert_array_equal(ad.sub(10.0, Tensor(x)).values, 10 - x)
    np.testing.assert_array_equal(ad.mul(Tensor(x), Tensor(2.0)).values, 2 * x)
    np.testing.assert_array_equal(ad.div(Tensor(x), 2.0).values, x / 2)


# ---------------------------------------------------------------------------
# reductions

def test_mean_over_rows_example():
    out = ad.mean_axis(np.array([[1.0, 3.0], [5.0, 7.0]]), axis=0)
    np.testing.assert_array_equal(out.values, [3.0, 5.0])


def test_gap_single_row_identity():
    row = np.array([[2.0, -1.0, 0.5]])
    np.testing.assert_array_equal(ad.global_average_pool(row).values, row[0])


def test_reduce_invalid_axis():
    with pytest.raises(DimensionError):
        ad.sum_axis(np.zeros((2, 2)), axis=2)


# ---------------------------------------------------------------------------
# structural ops

def test_concat_rows_example():
    out = ad.concat_rows(Tensor([[1.0, 2.0]]), Tensor([[3.0, 4.0]]))
    np.testing.assert_array_equal(out.values, [[1.0, 2.0], [3.0, 4.0]])


def test_concat_with_empty_is_identity():
    x = RNG.normal(size=(3, 4))
    out = ad.concat_rows(Tensor(np.zeros((0, 4))), Tensor(x))
    np.testing.assert_array_equal(out.values, x)


def test_concat_column_mismatch():
    with pytest.raises(DimensionError):
        ad.concat_rows(Tensor(np.zeros((1, 2))), Tensor(np.zeros((1, 3))))


def test_scatter_rows_requires_unique_positions():
    with pytest.raises(ContractError):
        ad.scatter_rows(Tensor(np.zeros((2, 1))), [0, 0], 4)


# ---------------------------------------------------------------------------
# backward mechanics

def test_backward_on_leaf_loss():
    x = leaf(1.5)
    with Tape() as tape:
        backward(x, tape)
    np.testing.assert_array_equal(x.grad, np.ones(()))


def test_backward_fanout_accumulation():
    x = leaf(2.0)
    with Tape() as tape:
        backward(ad.add(x, x), tape)
    np.testing.assert_array_equal(x.grad, np.full((), 2.0))


def test_backward_rejects_non_scalar_loss():
    x = leaf(np.ones((2, 2)))
    with Tape() as tape:
        y = ad.scale(x, 2.0)
        with pytest.raises(ContractError):
            backward(y, tape)


def test_shared_subexpression_equals_expanded_tree():
    # gradients through a DAG match the sum over an explicitly copied tree
    for trial in range(20):
        rng = np.random.default_rng(trial)
        xv = rng.normal(size=(3, 3))
        yv = rng.normal(size=(3, 3))

        x = leaf(xv)
        y = Tensor(yv)
        with Tape() as tape:
            u = ad.matmul(x, y)
            loss = ad.sum_axis(ad.mul(ad.add(u, u), u))
            backward(loss, tape)
        shared = x.grad

        x1, x2, x3 = leaf(xv), leaf(xv), leaf(xv)
        with Tape() as tape:
            u1, u2, u3 = ad.matmul(x1, y), ad.matmul(x2, y), ad.matmul(x3, y)
            loss = ad.sum_axis(ad.mul(ad.add(u1, u2), u3))
            backward(loss, tape)
        expanded = x1.grad + x2.grad + x3.grad
        np.testing.assert_allclose(shared, expanded, atol=1e-12)


# ---------------------------------------------------------------------------
# gradient correctness across the op set

CASES = [
    ("matmul", lambda a, b: ad.sum_axis(ad.matmul(a, b)), [(4, 3), (3, 5)]),
    ("add", lambda a, b: ad.sum_axis(ad.mul(ad.add(a, b), ad.add(a, b))), [(4, 3), (4, 3)]),
    ("sub", lambda a, b: ad.sum_axis(ad.mul(ad.sub(a, b), a)), [(4, 3), (4, 3)]),
    ("mul", lambda a, b: ad.sum_axis(ad.mul(a, b)), [(4, 3), (4, 3)]),
    ("div", lambda a, b: ad.sum_axis(ad.div(a, b)), [(4, 3), (4, 3)]),
    ("scalar_mix", lambda a, s: ad.sum_axis(ad.mul(a, s)), [(4, 3), ()]),
    ("scale", lambda a: ad.sum_axis(ad.scale(a, -2.5)), [(4, 3)]),
    ("sigmoid", lambda a: ad.sum_axis(ad.mul(ad.sigmoid(a), a)), [(4, 3)]),
    ("softmax", lambda a: ad.sum_axis(ad.mul(ad.softmax_rows(a), a)), [(4, 3)]),
    ("sum_axis0", lambda a: ad.sum_axis(ad.mul(ad.sum_axis(a, 0), ad.sum_axis(a, 0))), [(4, 3)]),
    ("sum_axis1", lambda a: ad.sum_axis(ad.mul(ad.sum_axis(a, 1), ad.sum_axis(a, 1))), [(4, 3)]),
    ("mean_axis", lambda a: ad.sum_axis(ad.mul(ad.mean_axis(a, 0), ad.mean_axis(a, 0))), [(4, 3)]),
    ("gap", lambda a: ad.sum_axis(ad.mul(ad.global_average_pool(a), ad.global_average_pool(a))), [(4, 3)]),
    ("transpose", lambda a: ad.sum_axis(ad.mul(ad.transpose(a), ad.transpose(a))), [(4, 3)]),
    ("reshape", lambda a: ad.sum_axis(ad.mul(ad.reshape(a, (3, 4)), ad.reshape(a, (3, 4)))), [(4, 3)]),
    ("concat", lambda a, b: ad.sum_axis(ad.mul(ad.concat_rows(a, b), ad.concat_rows(a, b))), [(2, 3), (4, 3)]),
    ("gather_rows", lambda a: ad.sum_axis(ad.mul(ad.gather_rows(a, [0, 2, 2]), ad.gather_rows(a, [0, 2, 2]))), [(4, 3)]),
    ("scatter_rows", lambda a: ad.sum_axis(ad.mul(ad.scatter_rows(a, [3, 0], 5), ad.scatter_rows(a, [3, 0], 5))), [(2, 3)]),
    ("gather_cols", lambda a: ad.sum_axis(ad.mul(ad.gather_cols(a, [1, 0, 1]), ad.gather_cols(a, [1, 0, 1]))), [(4, 3)]),
]


@pytest.mark.parametrize("name,build,shapes", CASES, ids=[c[0] for c in CASES])
def test_gradients_match_finite_differences(name, build, shapes):
    rng = np.random.default_rng(abs(hash(name)) % 2**32)
    arrays = [rng.normal(size=s) + (2.5 if name == "div" else 0.0) for s in shapes]
    assert_grads_close(build, *arrays)


def test_soft_threshold_gradients_away_from_kink():
    rng = np.random.default_rng(5)
    z = rng.normal(size=(5, 4)) * 2
    tau = np.abs(rng.normal(size=4)) + 0.1
    # keep every entry at least 1e-3 away from the kink
    dist = np.abs(np.abs(z) - tau[None, :])
    z[dist < 1e-3] += 5e-3
    assert_grads_close(lambda a, t: ad.sum_axis(ad.mul(ad.soft_threshold(a, t),
                                                       ad.soft_threshold(a, t))), z, tau)


def test_cross_entropy_value_and_gradient():
    logits = leaf([[0.0, 0.0]])
    with Tape() as tape:
        loss = ad.cross_entropy_with_logits(logits, 1)
        backward(loss, tape)
    assert math.isclose(loss.item(), math.log(2.0), rel_tol=1e-12)
    np.testing.assert_allclose(logits.grad, [[0.5, -0.5]], atol=1e-12)

    arr = RNG.normal(size=(1, 4))
    assert_grads_close(lambda a: ad.cross_entropy_with_logits(a, 2), arr)


def test_cross_entropy_stable_for_large_logits():
    loss = ad.cross_entropy_with_logits(Tensor([[1e4, -1e4]]), 0)
    assert np.isfinite(loss.item())
    assert loss.item() >= 0.0


# ---------------------------------------------------------------------------
# soft threshold invariants (property-.based)

@settings(max_examples=300, deadline=None)
@given(
    z=st.floats(min_value=-100, max_value=100, allow_nan=False),
    tau=st.floats(min_value=0, max_value=100, allow_nan=False),
)
def test_soft_threshold_invariants(z, tau):
    out = ad.soft_threshold(Tensor([[z]]), Tensor([tau])).values[0, 0]
    assert abs(out) <= abs(z) + 1e-15            # non-expansive
    if abs(z) <= tau:
        assert out == 0.0                        # exact dead zone
    else:
        assert np.sign(out) == np.sign(z)        # sign preserved
        assert math.isclose(abs(out), abs(z) - tau, rel_tol=0, abs_tol=1e-12)


def test_forward_ops_finite_on_finite_inputs():
    rng = np.random.default_rng(11)
    x = Tensor(rng.normal(size=(6, 6)) * 1e3)
    outs = [
        ad.softmax_rows(x), ad.sigmoid(x), ad.relu(x), ad.absval(x),
        ad.matmul(x, x), ad.mean_axis(x, 1), ad.sum_axis(x),
        ad.soft_threshold(x, Tensor(np.abs(rng.normal(size=6)) * 1e3)),
    ]
    for out in outs:
        assert np.all(np.isfinite(out.values))
