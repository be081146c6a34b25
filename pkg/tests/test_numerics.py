import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from gradcheck import TOL, grad_error
from spos_gebd.numerics import (
    ContractError,
    DimensionError,
    DomainError,
    Parameter,
    concat,
    conv1d,
    conv2d,
    elementwise,
    exp,
    layer_norm,
    log,
    matmul,
    maximum,
    minimum,
    no_grad,
    permute,
    precision,
    reduce,
    relu,
    sigmoid,
    softmax,
    sqrt,
    stack,
    tanh,
    tensor,
    view,
    warning_counts,
)

TRIALS = 100


def _shape(rng, rank=None, lo=1):
    rank = rank or int(rng.integers(1, 4))
    return tuple(int(v) for v in rng.integers(lo, 6, size=rank))


def _away_from(x, point=0.0, gap=1e-2):
    """Push values out of the non-differentiable neighbourhood of ``point``."""
    near = np.abs(x - point) < gap
    return np.where(near, point + np.where(x >= point, gap, -gap) * 2, x)


# -- worked examples ----------------------------------------------------------
def test_matmul_examples():
    eye = tensor([[1.0, 0.0], [0.0, 1.0]])
    np.testing.assert_array_equal(matmul(eye, tensor([[3.0], [4.0]])).data, [[3], [4]])
    np.testing.assert_array_equal(matmul(tensor([[1.0, 2.0]]), tensor([[3.0], [4.0]])).data, [[11]])


def test_matmul_grad_example(f64):
    a = Parameter(np.array([[1.0, 2.0]]))
    b = tensor([[3.0], [4.0]])
    (a @ b).sum().backward()
    np.testing.assert_allclose(a.grad, [[3.0, 4.0]], atol=1e-12)


def test_matmul_inner_mismatch():
    with pytest.raises(DimensionError):
        matmul(tensor(np.ones((2, 3))), tensor(np.ones((2, 3))))


def test_unary_examples(f64):
    assert sigmoid(tensor(0.0)).item() == 0.5
    assert relu(tensor(-3.0)).item() == 0.0
    x = Parameter(np.array(0.0))
    sigmoid(x).backward()
    assert x.grad == pytest.approx(0.25)


def test_reduce_examples(f64):
    assert reduce("mean", tensor([1.0, 2.0, 3.0])).item() == 2.0
    np.testing.assert_array_equal(reduce("sum", tensor([[1.0, 2.0], [3.0, 4.0]]), axis=1).data, [3, 7])
    p = Parameter(np.array([1.0, 3.0, 3.0]))
    m = reduce("max", p)
    assert m.item() == 3.0
    m.backward()
    np.testing.assert_array_equal(p.grad, [0, 1, 0])


def test_reduce_empty_axis():
    with pytest.raises(DomainError):
        reduce("sum", tensor(np.zeros((2, 0))), axis=1)


def test_view_row_major():
    c = 3
    x = np.arange(6 * c, dtype=np.float32).reshape(6, c)
    v = view(tensor(x), (3, 2, c)).data
    for n in range(3):
        np.testing.assert_array_equal(v[n], x[2 * n : 2 * n + 2])
    np.testing.assert_array_equal(view(view(tensor(x), (3, 2, c)), (6, c)).data, x)


def test_view_count_mismatch():
    with pytest.raises(DimensionError):
        view(tensor(np.ones(6)), (4,))


def test_concat_examples():
    a, b = np.ones((2, 4)), np.full((1, 4), 2.0)
    out = concat([tensor(a), tensor(b)], axis=0).data
    assert out.shape == (3, 4)
    np.testing.assert_array_equal(out[2], b[0])
    np.testing.assert_array_equal(concat([tensor(a)], axis=0).data, a)
    with pytest.raises(DimensionError):
        concat([tensor(a), tensor(np.ones((1, 3)))], axis=0)


def test_concat_slice_round_trip():
    rng = np.random.default_rng(3)
    parts = [rng.standard_normal((k, 3)).astype(np.float32) for k in (1, 2, 4)]
    whole = concat([tensor(p) for p in parts], axis=0)
    start = 0
    for p in parts:
        assert np.array_equal(whole[start : start + len(p)].data, p)
        start += len(p)


def test_backward_examples(f64):
    p = Parameter(np.array([1.0, 2.0]))
    p.sum().backward()
    np.testing.assert_array_equal(p.grad, [1, 1])
    p.zero_grad()
    (p * p).sum().backward()
    np.testing.assert_array_equal(p.grad, [2, 4])


def test_backward_accumulates():
    p = Parameter(np.array([1.0, 2.0]))
    (p * p).sum().backward()
    (p * p).sum().backward()
    np.testing.assert_array_equal(p.grad, [4, 8])


def test_backward_needs_scalar():
    p = Parameter(np.ones(3))
    with pytest.raises(ContractError):
        (p * 2.0).backward()


def test_log_domain():
    with pytest.raises(DomainError):
        log(tensor([1.0, 0.0]))
    with pytest.raises(DomainError):
        sqrt(tensor([-1.0]))


def test_div_by_zero_counts_and_propagates_inf():
    before = warning_counts["div_by_zero"]
    out = tensor([1.0, 2.0]) / tensor([0.0, 1.0])
    assert np.isinf(out.data[0]) and out.data[1] == 2.0
    assert warning_counts["div_by_zero"] == before + 1


def test_broadcast_leading_only():
    a = tensor(np.ones((2, 3)))
    assert (a + tensor(np.ones((1, 3)))).shape == (2, 3)
    assert (a + tensor(np.ones(3))).shape == (2, 3)
    with pytest.raises(DimensionError):
        a + tensor(np.ones((2, 1)))


def test_precision_switch():
    assert tensor([1.0]).dtype == np.float32
    with precision(64):
        assert tensor([1.0]).dtype == np.float64
    assert tensor([1.0]).dtype == np.float32


def test_no_grad_skips_graph():
    p = Parameter(np.ones(3))
    with no_grad():
        out = (p * 2.0).sum()
    assert not out.requires_grad


def test_determinism_bitwise():
    rng = np.random.default_rng(0)
    x = rng.standard_normal((2, 5, 5, 3))
    w = rng.standard_normal((3, 3, 3, 4))

    def run():
        xp, wp = Parameter(x.copy()), Parameter(w.copy())
        out = relu(conv2d(xp, wp)).mean(axis=(1, 2))
        softmax(out).sum().backward()
        return out.data.tobytes(), xp.grad.tobytes(), wp.grad.tobytes()

    assert run() == run()


# -- forward values against plain numpy -----------------------------------------
def test_conv2d_matches_direct_loop(f64):
    rng = np.random.default_rng(1)
    x = rng.standard_normal((2, 4, 5, 3))
    w = rng.standard_normal((3, 3, 3, 2))
    b = rng.standard_normal(2)
    xp = np.pad(x, ((0, 0), (1, 1), (1, 1), (0, 0)))
    ref = np.zeros((2, 4, 5, 2))
    for n in range(2):
        for i in range(4):
            for j in range(5):
                ref[n, i, j] = np.einsum("abc,abcd->d", xp[n, i : i + 3, j : j + 3], w) + b
    np.testing.assert_allclose(conv2d(tensor(x), tensor(w), tensor(b)).data, ref, atol=1e-12)


def test_conv1d_matches_direct_loop(f64):
    rng = np.random.default_rng(2)
    x = rng.standard_normal((6, 3))
    w = rng.standard_normal((3, 3, 2))
    xp = np.pad(x, ((1, 1), (0, 0)))
    ref = np.stack([np.einsum("kc,kcd->d", xp[t : t + 3], w) for t in range(6)])
    np.testing.assert_allclose(conv1d(tensor(x), tensor(w)).data, ref, atol=1e-12)


def test_layer_norm_matches_numpy(f64):
    x = np.random.default_rng(4).standard_normal((3, 6))
    g, b = np.linspace(0.5, 1.5, 6), np.linspace(-1, 1, 6)
    ref = (x - x.mean(-1, keepdims=True)) / np.sqrt(x.var(-1, keepdims=True) + 1e-5) * g + b
    np.testing.assert_allclose(layer_norm(tensor(x), tensor(g), tensor(b)).data, ref, atol=1e-12)


# -- gradient checks, 100 random trials per op ------------------------------------
def _cases():
    def binary(kind):
        def make(rng):
            s = _shape(rng)
            lead = (1,) + s[1:] if len(s) > 1 and rng.random() < 0.5 else s
            a, b = rng.standard_normal(s), rng.standard_normal(lead)
            if kind == "div":
                b = np.sign(b) * (np.abs(b) + 0.5)
            return (a, b), lambda x, y: elementwise(kind, x, y)

        return make

    def unary(fn, shift=None, guard=None):
        def make(rng):
            x = rng.standard_normal(_shape(rng))
            if shift:
                x = np.abs(x) + shift
            if guard is not None:
                x = _away_from(x, guard)
            return (x,), fn

        return make

    def make_matmul(rng):
        m, k, n = (int(v) for v in rng.integers(1, 6, 3))
        batch = _shape(rng, int(rng.integers(1, 3))) if rng.random() < 0.5 else ()
        return (rng.standard_normal(batch + (m, k)), rng.standard_normal((k, n))), matmul

    def make_reduce(kind):
        def make(rng):
            s = _shape(rng)
            x = rng.permutation(np.arange(np.prod(s), dtype=np.float64)).reshape(s) * 0.1
            x += rng.standard_normal(s) * 0.01
            axis = int(rng.integers(0, len(s)))
            return (x,), lambda t: reduce(kind, t, axis)

        return make

    def make_view(rng):
        s = _shape(rng)
        return (rng.standard_normal(s),), lambda t: view(t, (-1,))

    def make_permute(rng):
        s = _shape(rng, 3)
        axes = tuple(int(v) for v in rng.permutation(3))
        return (rng.standard_normal(s),), lambda t: permute(t, axes)

    def make_concat(rng):
        s = _shape(rng, 2)
        t = (int(rng.integers(1, 6)), s[1])
        return (rng.standard_normal(s), rng.standard_normal(t)), lambda a, b: concat([a, b], axis=0)

    def make_stack(rng):
        s = _shape(rng, 2)
        return (rng.standard_normal(s), rng.standard_normal(s)), lambda a, b: stack([a, b], axis=1)

    def make_getitem(rng):
        s = _shape(rng, 2, lo=2)
        idx = rng.integers(0, s[0], size=3)
        if rng.random() < 0.5:
            return (rng.standard_normal(s),), lambda t: t[idx]
        return (rng.standard_normal(s),), lambda t: t[1:, :1]

    def make_softmax(rng):
        return (rng.standard_normal(_shape(rng)),), lambda t: softmax(t, axis=-1)

    def make_layer_norm(rng):
        s = _shape(rng, 2, lo=2)
        c = s[-1]
        return (
            rng.standard_normal(s),
            rng.standard_normal(c),
            rng.standard_normal(c),
        ), layer_norm

    def make_conv2d(rng):
        n, h, w, ci, co = (int(v) for v in rng.integers(1, 5, 5))
        k = int(rng.choice([1, 3]))
        return (
            rng.standard_normal((n, h, w, ci)),
            rng.standard_normal((k, k, ci, co)),
            rng.standard_normal(co),
        ), conv2d

    def make_conv1d(rng):
        t, ci, co = (int(v) for v in rng.integers(1, 6, 3))
        return (
            rng.standard_normal((t, ci)),
            rng.standard_normal((3, ci, co)),
            rng.standard_normal(co),
        ), conv1d

    return {
        "add": binary("add"),
        "sub": binary("sub"),
        "mul": binary("mul"),
        "div": binary("div"),
        "exp": unary(exp),
        "log": unary(log, shift=0.2),
        "sqrt": unary(sqrt, shift=0.2),
        "sigmoid": unary(sigmoid),
        "tanh": unary(tanh),
        "relu": unary(relu, guard=0.0),
        "max-with-scalar": unary(lambda t: maximum(t, 0.3), guard=0.3),
        "min-with-scalar": unary(lambda t: minimum(t, -0.2), guard=-0.2),
        "matmul": make_matmul,
        "sum": make_reduce("sum"),
        "mean": make_reduce("mean"),
        "max": make_reduce("max"),
        "view": make_view,
        "permute": make_permute,
        "concat": make_concat,
        "stack": make_stack,
        "getitem": make_getitem,
        "softmax": make_softmax,
        "layer_norm": make_layer_norm,
        "conv2d": make_conv2d,
        "conv1d": make_conv1d,
    }


GRAD_CASES = _cases()


@pytest.mark.parametrize("op", sorted(GRAD_CASES))
def test_gradient_matches_finite_differences(op):
    rng = np.random.default_rng(sum(map(ord, op)))
    worst = 0.0
    for trial in range(TRIALS):
        arrays, fn = GRAD_CASES[op](rng)
        worst = max(worst, grad_error(fn, arrays, seed=trial))
    assert worst <= TOL, f"{op}: worst relative error {worst:.2e}"


@given(st.lists(st.floats(-50, 50), min_size=1, max_size=8))
def test_sigmoid_range_and_symmetry(values):
    with precision(64):
        x = np.array(values)
        s = sigmoid(tensor(x)).data
        assert np.all((s >= 0) & (s <= 1))
        np.testing.assert_allclose(s + sigmoid(tensor(-x)).data, 1.0, atol=1e-12)


@given(st.integers(1, 5), st.integers(1, 5))
def test_softmax_rows_sum_to_one(rows, cols):
    x = np.random.default_rng(rows * 7 + cols).standard_normal((rows, cols)) * 10
    np.testing.assert_allclose(softmax(tensor(x)).data.sum(-1), 1.0, atol=1e-5)
