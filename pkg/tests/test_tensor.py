import itertools

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from ttdisc.tensor import (
    fold,
    left_unfold,
    linear_index,
    merge_leading,
    merge_product,
    multi_index,
    right_unfold,
    tensor_trace,
    unfold,
    unvec,
    vec,
)

small_shapes = st.lists(st.integers(1, 4), min_size=1, max_size=5).map(tuple)
floats = st.floats(-10, 10, allow_nan=False, allow_infinity=False)


def lin_formula(idx, shape):
    # 0-based: sum_n i_n * prod_{m<n} I_m
    out, stride = 0, 1
    for i, dim in zip(idx, shape):
        out += i * stride
        stride *= dim
    return out


def loop_merge(a, b, a_modes, b_modes):
    a_free = [m for m in range(a.ndim) if m not in a_modes]
    b_free = [m for m in range(b.ndim) if m not in b_modes]
    out_shape = [a.shape[m] for m in a_free] + [b.shape[m] for m in b_free]
    shared = [a.shape[m] for m in a_modes]
    out = np.zeros(out_shape)
    for oi in itertools.product(*[range(d) for d in out_shape]):
        ia_free, ib_free = oi[: len(a_free)], oi[len(a_free):]
        total = 0.0
        for si in itertools.product(*[range(d) for d in shared]):
            ia = [0] * a.ndim
            ib = [0] * b.ndim
            for m, v in zip(a_free, ia_free):
                ia[m] = v
            for m, v in zip(b_free, ib_free):
                ib[m] = v
            for ma, mb, v in zip(a_modes, b_modes, si):
                ia[ma] = v
                ib[mb] = v
            total += a[tuple(ia)] * b[tuple(ib)]
        out[oi] = total
    return out


def test_unfold_shape():
    t = np.arange(24.0).reshape(2, 3, 4)
    assert unfold(t, 2).shape == (6, 4)


def test_unfold_entry_mapping_exhaustive():
    shape = (2, 3, 4)
    t = np.random.default_rng(0).standard_normal(shape)
    m = unfold(t, 2)
    for i1, i2, i3 in itertools.product(range(2), range(3), range(4)):
        assert m[i1 + 2 * i2, i3] == t[i1, i2, i3]
        assert vec(t)[lin_formula((i1, i2, i3), shape)] == t[i1, i2, i3]


def test_linear_index_round_trip_exhaustive():
    shape = (3, 2, 4, 2)
    for idx in itertools.product(*[range(d) for d in shape]):
        lin = linear_index(idx, shape)
        assert lin == lin_formula(idx, shape)
        assert multi_index(lin, shape) == idx


@given(arrays(np.float64, small_shapes, elements=floats), st.data())
def test_unfold_round_trip(t, data):
    n = data.draw(st.integers(1, t.ndim))
    m = unfold(t, n)
    assert m.shape == (int(np.prod(t.shape[:n])), int(np.prod(t.shape[n:])))
    back = fold(m, t.shape)
    assert back.shape == t.shape
    assert np.array_equal(back, t)
    assert np.array_equal(unvec(vec(t), t.shape), t)


def test_unfold_errors():
    t = np.zeros((2, 3))
    with pytest.raises(ValueError):
        unfold(t, 0)
    with pytest.raises(ValueError):
        unfold(t, 3)
    with pytest.raises(ValueError):
        fold(np.zeros((2, 2)), (3, 2))


def test_left_right_unfold():
    t = np.random.default_rng(1).standard_normal((2, 3, 4))
    assert np.array_equal(left_unfold(t), unfold(t, 2))
    assert np.array_equal(right_unfold(t), unfold(t, 1))


def test_trace_slices():
    t = np.random.default_rng(2).standard_normal((2, 3, 2))
    d = tensor_trace(t, 0, 2)
    expect = np.array([t[0, j, 0] + t[1, j, 1] for j in range(3)])
    assert np.allclose(d, expect, atol=1e-12, rtol=0)


def test_trace_identity_slices():
    t = np.zeros((2, 5, 2))
    for j in range(5):
        t[:, j, :] = np.eye(2)
    assert np.all(tensor_trace(t, 0, 2) == 2.0)


def test_trace_matrix_is_scalar():
    m = np.random.default_rng(3).standard_normal((4, 4))
    out = tensor_trace(m, 0, 1)
    assert out.ndim == 0
    assert out == pytest.approx(np.trace(m), abs=1e-12)


def test_trace_errors():
    with pytest.raises(ValueError):
        tensor_trace(np.zeros((2, 3)), 0, 1)
    with pytest.raises(ValueError):
        tensor_trace(np.zeros((2, 2)), 0, 0)
    with pytest.raises(ValueError):
        tensor_trace(np.zeros((2, 2)), 0, 2)


@given(st.integers(0, 10_000), st.floats(-3, 3), st.floats(-3, 3))
def test_trace_linear(seed, alpha, beta):
    g = np.random.default_rng(seed)
    a = g.standard_normal((3, 2, 3))
    b = g.standard_normal((3, 2, 3))
    lhs = tensor_trace(alpha * a + beta * b, 0, 2)
    rhs = alpha * tensor_trace(a, 0, 2) + beta * tensor_trace(b, 0, 2)
    assert np.allclose(lhs, rhs, atol=1e-12)


def test_merge_is_matmul():
    g = np.random.default_rng(4)
    a, b = g.standard_normal((3, 4)), g.standard_normal((4, 5))
    assert np.allclose(merge_product(a, b, [1], [0]), a @ b, atol=1e-12)


def test_merge_three_by_four_mode_loop_oracle():
    g = np.random.default_rng(5)
    a = g.standard_normal((2, 3, 4))
    b = g.standard_normal((4, 2, 3, 2))
    got = merge_product(a, b, [0, 2], [1, 0])
    assert got.shape == (3, 3, 2)
    assert np.allclose(got, loop_merge(a, b, [0, 2], [1, 0]), atol=1e-12, rtol=0)


def test_merge_leading_as_unfolding_product():
    g = np.random.default_rng(6)
    a = g.standard_normal((2, 3, 4))
    b = g.standard_normal((2, 3, 2, 5))
    got = merge_leading(a, b)
    la = a.reshape(6, 4, order="F")
    tb = b.reshape(6, 10, order="F")
    assert got.shape == (4, 2, 5)
    assert np.allclose(got.reshape(4, 10, order="F"), la.T @ tb, atol=1e-12)
    assert np.allclose(got, merge_product(a, b, [0, 1], [0, 1]), atol=1e-12)


def test_merge_leading_orthogonal_gives_identity():
    g = np.random.default_rng(7)
    q, _ = np.linalg.qr(g.standard_normal((12, 4)))
    a = q.reshape(3, 4, 4, order="F")
    assert np.allclose(merge_leading(a, a), np.eye(4), atol=1e-12)


def test_merge_leading_one_mode_loop():
    g = np.random.default_rng(8)
    a = g.standard_normal(3)
    b = g.standard_normal((2, 4))
    got = merge_leading(a, b)
    expect = np.zeros((3, 2, 4))
    for i in range(3):
        for j in range(2):
            for k in range(4):
                expect[i, j, k] = a[i] * b[j, k]
    assert np.allclose(got, expect, atol=1e-12)


def test_merge_errors():
    a = np.zeros((2, 3))
    with pytest.raises(ValueError):
        merge_product(a, a, [0], [1])
    with pytest.raises(ValueError):
        merge_product(a, a, [0, 0], [0, 0])
    with pytest.raises(ValueError):
        merge_product(a, a, [2], [0])
    with pytest.raises(ValueError):
        merge_product(a, a, [0], [0, 1])
    with pytest.raises(ValueError):
        merge_leading(np.zeros((2, 3, 4)), np.zeros((3, 3, 4)))


@given(st.integers(0, 10_000), st.floats(-5, 5))
def test_merge_multilinear_and_pure(seed, alpha):
    g = np.random.default_rng(seed)
    a = g.standard_normal((2, 3, 2))
    b = g.standard_normal((3, 2, 4))
    a0, b0 = a.copy(), b.copy()
    base = merge_product(a, b, [1, 2], [0, 1])
    assert np.array_equal(a, a0) and np.array_equal(b, b0)
    assert np.allclose(merge_product(alpha * a, b, [1, 2], [0, 1]), alpha * base, atol=1e-10)


@given(st.integers(0, 10_000), st.integers(1, 3), st.integers(0, 2))
def test_merge_leading_matches_generic(seed, n_modes, extra):
    g = np.random.default_rng(seed)
    lead = tuple(g.integers(1, 4, size=n_modes - 1))
    a = g.standard_normal(lead + (int(g.integers(1, 4)),))
    b = g.standard_normal(lead + tuple(g.integers(1, 4, size=extra + 1)))
    k = list(range(n_modes - 1))
    if n_modes == 1:
        expect = np.multiply.outer(a, b)
    else:
        expect = merge_product(a, b, k, k)
    assert np.allclose(merge_leading(a, b), expect, atol=1e-12)
