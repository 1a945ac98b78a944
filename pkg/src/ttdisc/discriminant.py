"""Scatter matrices, trace-difference LDA and the Tucker baselines CMDA/DGTDA.

Samples are stacked along the first axis: ``X`` has shape
``(n_samples, I_1, ..., I_N)``. Class means use the actual class sizes, and
the between-class scatter sums over samples, so each class term is weighted
by its size.
"""
from dataclasses import dataclass

import numpy as np
from scipy import linalg

from .tensor import unfold

__all__ = [
    "ScatterPair",
    "class_means",
    "scatter_matrices",
    "lda_solve",
    "trace_objective",
    "mda_mode_scatter",
    "tucker_project",
    "cmda",
    "dgtda",
    "subspace_change",
]


@dataclass(frozen=True)
class ScatterPair:
    s_w: np.ndarray
    s_b: np.ndarray
    lam: float

    @property
    def s(self):
        return self.s_w - self.lam * self.s_b


def _labels(y):
    classes, inv = np.unique(np.asarray(y), return_inverse=True)
    return classes, inv


def class_means(X, y):
    """Per-class means ``(C, ...)``, overall mean, and label indices."""
    X = np.asarray(X, dtype=float)
    classes, inv = _labels(y)
    if X.shape[0] != inv.size:
        raise ValueError(f"{X.shape[0]} samples but {inv.size} labels")
    if X.shape[0] == 0:
        raise ValueError("empty sample set")
    counts = np.bincount(inv, minlength=classes.size)
    sums = np.zeros((classes.size,) + X.shape[1:])
    np.add.at(sums, inv, X)
    means = sums / counts.reshape((-1,) + (1,) * (X.ndim - 1))
    return means, X.mean(axis=0), inv


def _scatter_from_blocks(Z, y, lam):
    """Scatters of samples ``Z`` of shape ``(n, D, m)``: sum of ``B B^T``."""
    means, total, inv = class_means(Z, y)
    within = Z - means[inv]
    between = means[inv] - total
    s_w = np.einsum("sdm,sem->de", within, within, optimize=True)
    s_b = np.einsum("sdm,sem->de", between, between, optimize=True)
    s_w = 0.5 * (s_w + s_w.T)
    s_b = 0.5 * (s_b + s_b.T)
    return ScatterPair(s_w, s_b, float(lam))


def scatter_matrices(X, y, lam=1.0, n_row_modes=None):
    """Within/between-class scatter of vectorized tensor samples.

    With ``n_row_modes = k < N`` each sample is matricized as ``T_k(Y)`` and
    the scatters sum ``B B^T`` over the columns; this is the form used when
    trailing modes hold projections onto other subspaces.
    """
    X = np.asarray(X, dtype=float)
    if X.ndim < 2:
        raise ValueError("X must have shape (n_samples, I_1, ..., I_N)")
    if lam < 0:
        raise ValueError("lambda must be nonnegative")
    n = X.shape[0]
    N = X.ndim - 1
    k = N if n_row_modes is None else int(n_row_modes)
    D = int(np.prod(X.shape[1 : 1 + k]))
    Z = X.reshape((n, D, -1), order="F")
    return _scatter_from_blocks(Z, y, lam)


def lda_solve(s, r):
    """Orthonormal ``U`` (D x r) minimizing ``tr(U^T S U)``, and its eigenvalues."""
    s = np.asarray(s, dtype=float)
    D = s.shape[0]
    if s.shape != (D, D):
        raise ValueError("S must be square")
    if not 1 <= r <= D:
        raise ValueError(f"target dimension {r} outside [1, {D}]")
    w, v = linalg.eigh(0.5 * (s + s.T), subset_by_index=[0, r - 1])
    return v, w


def trace_objective(U, s):
    U = np.asarray(U, dtype=float)
    return float(np.sum(U * (s @ U)))


def tucker_project(X, subspaces, skip=None):
    """Apply ``U_m^T`` along every sample mode ``m`` (0-based), except ``skip``.

    ``subspaces[m]`` may be ``None`` to leave mode ``m`` untouched.
    """
    out = np.asarray(X, dtype=float)
    for m, U in enumerate(subspaces):
        if m == skip or U is None:
            continue
        out = np.moveaxis(np.tensordot(out, U, axes=([m + 1], [0])), -1, m + 1)
    return out


def mda_mode_scatter(X, y, subspaces, n, lam=1.0):
    """Mode-``n`` scatters after projecting all other modes on their subspaces."""
    X = np.asarray(X, dtype=float)
    N = X.ndim - 1
    if not 0 <= n < N:
        raise ValueError(f"mode {n} out of range for {N}-mode samples")
    if len(subspaces) != N:
        raise ValueError(f"expected {N} subspaces (use None for mode {n})")
    for m, U in enumerate(subspaces):
        if m == n:
            continue
        if U is None:
            raise ValueError(f"missing subspace for mode {m}")
        if U.shape[0] != X.shape[m + 1]:
            raise ValueError(f"subspace {m} has {U.shape[0]} rows, mode size is {X.shape[m + 1]}")
    Z = tucker_project(X, subspaces, skip=n)
    Z = np.moveaxis(Z, n + 1, 1)
    Z = Z.reshape(Z.shape[:2] + (-1,), order="F")
    return _scatter_from_blocks(Z, y, lam)


def subspace_change(old, new):
    """Normalized Frobenius distance between the projectors of two bases."""
    r = old.shape[1]
    overlap = float(np.sum((old.T @ new) ** 2))
    return float(np.sqrt(max(2.0 * r - 2.0 * overlap, 0.0) / r))


def _check_ranks(ranks, shape):
    ranks = [int(r) for r in ranks]
    if len(ranks) != len(shape):
        raise ValueError(f"need one rank per mode: {len(shape)} modes, {len(ranks)} ranks")
    for r, i in zip(ranks, shape):
        if not 1 <= r <= i:
            raise ValueError(f"rank {r} outside [1, {i}]")
    return ranks


def hosvd_init(X, ranks):
    """Leading left singular vectors of each mode unfolding of the sample stack."""
    X = np.asarray(X, dtype=float)
    out = []
    for m, r in enumerate(ranks):
        mat = unfold(np.moveaxis(X, m + 1, 0), 1)
        u = linalg.svd(mat, full_matrices=False)[0]
        out.append(u[:, :r])
    return out


def cmda(X, y, ranks, lam=1.0, max_iter=20, tol=0.1, init=None):
    """Constrained MDA: alternate exact mode-wise eigen-solves.

    Stops once the mean normalized subspace change of a sweep drops below
    ``tol`` or after ``max_iter`` sweeps.

    Returns
    -------
    subspaces : list of ndarray
    objective : list of float
        Full Tucker trace-difference objective after every mode update.
    n_iter : int
    """
    X = np.asarray(X, dtype=float)
    shape = X.shape[1:]
    ranks = _check_ranks(ranks, shape)
    Us = [u.copy() for u in init] if init is not None else hosvd_init(X, ranks)
    objective = []
    it = 0
    for it in range(1, max_iter + 1):
        change = 0.0
        for n in range(len(shape)):
            sp = mda_mode_scatter(X, y, Us, n, lam)
            U, w = lda_solve(sp.s, ranks[n])
            change += subspace_change(Us[n], U)
            Us[n] = U
            objective.append(float(np.sum(w)))
        if change / len(shape) < tol:
            break
    return Us, objective, it


def dgtda(X, y, ranks):
    """Direct generalized tensor discriminant analysis (single pass per mode).

    Mode-``n`` scatters come from the raw unfoldings. With ``zeta`` the
    largest eigenvalue of ``pinv(S_W) S_B``, ``U_n`` holds the top-``r_n``
    eigenvectors of ``S_B - zeta S_W``.

    Returns
    -------
    subspaces : list of ndarray
    zetas : list of float
    """
    X = np.asarray(X, dtype=float)
    shape = X.shape[1:]
    ranks = _check_ranks(ranks, shape)
    Us, zetas = [], []
    eyes = [np.eye(i) for i in shape]
    for n in range(len(shape)):
        sp = mda_mode_scatter(X, y, eyes, n, 0.0)
        zeta = _pseudo_ratio(sp.s_w, sp.s_b)
        U, _ = lda_solve(zeta * sp.s_w - sp.s_b, ranks[n])
        Us.append(U)
        zetas.append(zeta)
    return Us, zetas


def _pseudo_ratio(s_w, s_b):
    vals = linalg.eigvals(linalg.pinv(s_w) @ s_b)
    return float(max(np.max(vals.real), 0.0))
