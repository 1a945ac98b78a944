"""Dense tensor reshaping, unfolding, trace and merging products.

Tensors are plain :class:`numpy.ndarray` objects. Every reshape here uses
first-mode-fastest (Fortran) linear order, so that vectorization, the
``T_n`` matricizations and the left/right unfoldings are reinterpretations
of one and the same linear index::

    lin(i_1, ..., i_N) = i_1 + I_1 * (i_2 + I_2 * (i_3 + ...))      (0-based)

Mode arguments of :func:`tensor_trace` and :func:`merge_product` are
0-based axis indices, as in numpy.
"""
import numpy as np

__all__ = [
    "vec",
    "unvec",
    "unfold",
    "fold",
    "left_unfold",
    "right_unfold",
    "linear_index",
    "multi_index",
    "tensor_trace",
    "merge_product",
    "merge_leading",
]


def _prod(dims):
    return int(np.prod(dims, dtype=np.int64))


def vec(t):
    """Vectorize ``t`` in first-mode-fastest order."""
    return np.asarray(t, dtype=float).reshape(-1, order="F")


def unvec(v, shape):
    v = np.asarray(v, dtype=float)
    if v.size != _prod(shape):
        raise ValueError(f"cannot reshape {v.size} entries into shape {tuple(shape)}")
    return v.reshape(tuple(shape), order="F")


def unfold(t, n):
    """Matricize ``t`` with its first ``n`` modes as rows.

    Parameters
    ----------
    t : ndarray
        N-mode tensor.
    n : int
        Number of leading modes grouped into the row index, ``1 <= n <= N``.
        ``n = N`` returns the vectorization as a column.

    Returns
    -------
    ndarray of shape (I_1...I_n, I_{n+1}...I_N)
    """
    t = np.asarray(t, dtype=float)
    N = t.ndim
    if not 1 <= n <= max(N, 1):
        raise ValueError(f"unfolding index n={n} out of range for a {N}-mode tensor")
    rows = _prod(t.shape[:n])
    return t.reshape((rows, _prod(t.shape[n:])), order="F")


def fold(m, shape):
    """Inverse of :func:`unfold` (the row/column split is implied by ``shape``)."""
    m = np.asarray(m, dtype=float)
    if m.size != _prod(shape):
        raise ValueError(
            f"matrix with {m.size} entries does not match target shape {tuple(shape)}"
        )
    return m.reshape(tuple(shape), order="F")


def left_unfold(t):
    """All modes but the last as rows: ``T_{N-1}(t)``."""
    t = np.asarray(t, dtype=float)
    if t.ndim < 2:
        return t.reshape(1, -1)
    return unfold(t, t.ndim - 1)


def right_unfold(t):
    """First mode as rows: ``T_1(t)``."""
    return unfold(t, 1)


def linear_index(index, shape):
    """0-based linear position of a multi-index under first-mode-fastest order."""
    return int(np.ravel_multi_index(tuple(index), tuple(shape), order="F"))


def multi_index(lin, shape):
    return tuple(int(i) for i in np.unravel_index(lin, tuple(shape), order="F"))


def tensor_trace(t, k1, k2):
    """Sum the diagonal of every ``(k1, k2)`` matrix slice of ``t``.

    The surviving modes keep their relative order. A 2-mode input yields a
    0-mode (scalar) array.
    """
    t = np.asarray(t, dtype=float)
    N = t.ndim
    for k in (k1, k2):
        if not 0 <= k < N:
            raise ValueError(f"mode {k} out of range for a {N}-mode tensor")
    if k1 == k2:
        raise ValueError("trace modes must differ")
    if t.shape[k1] != t.shape[k2]:
        raise ValueError(
            f"trace modes have sizes {t.shape[k1]} and {t.shape[k2]}; they must match"
        )
    return np.trace(t, axis1=k1, axis2=k2)


def _check_modes(modes, ndim, name):
    modes = [int(m) for m in modes]
    if len(set(modes)) != len(modes):
        raise ValueError(f"duplicate modes in {name}: {modes}")
    for m in modes:
        if not 0 <= m < ndim:
            raise ValueError(f"mode {m} in {name} out of range for {ndim} modes")
    return modes


def merge_product(a, b, a_modes, b_modes):
    """Contract ``a`` and ``b`` over the paired modes ``a_modes[i] <-> b_modes[i]``.

    The result holds the surviving modes of ``a`` in order followed by the
    surviving modes of ``b`` in order. Any other layout is a
    :func:`numpy.transpose` away.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    a_modes = _check_modes(a_modes, a.ndim, "a_modes")
    b_modes = _check_modes(b_modes, b.ndim, "b_modes")
    if len(a_modes) != len(b_modes):
        raise ValueError("a_modes and b_modes must have the same length")
    for ma, mb in zip(a_modes, b_modes):
        if a.shape[ma] != b.shape[mb]:
            raise ValueError(
                f"size mismatch contracting mode {ma} ({a.shape[ma]}) "
                f"with mode {mb} ({b.shape[mb]})"
            )
    return np.tensordot(a, b, axes=(a_modes, b_modes))


def merge_leading(a, b):
    """Contract the first ``N-1`` modes of the N-mode ``a`` with those of ``b``.

    Evaluated as the single matrix product ``L(a)^T T_{N-1}(b)``; the result
    has shape ``(I_N, J_N, ..., J_M)``. For a 1-mode ``a`` nothing is
    contracted and the result is the outer product ``a (x) b``.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    N = a.ndim
    if N < 1:
        raise ValueError("a must have at least one mode")
    if b.ndim < N:
        raise ValueError(f"b needs at least {N} modes, got {b.ndim}")
    lead = a.shape[: N - 1]
    if tuple(b.shape[: N - 1]) != tuple(lead):
        raise ValueError(
            f"leading shapes differ: {tuple(lead)} vs {tuple(b.shape[: N - 1])}"
        )
    rows = _prod(lead)
    la = a.reshape((rows, a.shape[-1]), order="F")
    tb = b.reshape((rows, _prod(b.shape[N - 1 :])), order="F")
    out = la.T @ tb
    return out.reshape((a.shape[-1],) + tuple(b.shape[N - 1 :]), order="F")
