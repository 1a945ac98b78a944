"""Tensor-train discriminant analysis.

Learns a left-orthogonal chain ``U_1, ..., U_N`` whose subspace
``U = L(U_1 x ... x U_N)`` minimizes ``tr(U^T (S_W - lam S_B) U)``. Factors
``1..N-1`` are updated one at a time by minimizing a quadratic form over the
Stiefel manifold; the last factor is an exact trace minimization.
"""
import logging
from dataclasses import dataclass, field

import numpy as np

from .discriminant import lda_solve, scatter_matrices, subspace_change
from .stiefel import SolverConfig, minimize_on_stiefel
from .tensor import left_unfold
from .tt import TTChain, chain_contract, subspace_matrix, tt_svd

__all__ = ["assemble_an", "an_matrix", "ttda_sweeps", "ttda_fit", "TTDAResult", "init_chain"]

logger = logging.getLogger(__name__)

DEFAULT_MAX_DENSE_DIM = 4096


def _as_scatter(s, shape):
    D = int(np.prod(shape))
    s = np.asarray(s, dtype=float)
    if s.ndim == 2 * len(shape) and len(shape) > 1:
        s = s.reshape((D, D), order="F")
    if s.shape != (D, D):
        raise ValueError(f"scatter of shape {s.shape} does not match data dimension {D}")
    return s


def assemble_an(cores, s, n):
    """Quadratic-form tensor ``A_n`` of the factor ``n`` (0-based) update.

    Contracts the left part ``U_1 .. U_{n-1}`` and right part
    ``U_{n+1} .. U_N`` of the chain against both sides of ``S`` and traces out
    the pair of feature modes. ``s`` is the ``D x D`` scatter matrix or its
    ``2N``-mode reshaping.

    Returns
    -------
    ndarray
        Shape ``(R_{n-1}, I_n, R_n, R_{n-1}, I_n, R_n)`` for ``n < N-1`` and
        ``(R_{N-1}, I_N, R_{N-1}, I_N)`` for the last factor.
    """
    cores = cores.cores if isinstance(cores, TTChain) else list(cores)
    N = len(cores)
    if not 0 <= n < N:
        raise ValueError(f"factor index {n} out of range for {N} factors")
    for i in range(N - 1):
        if cores[i].shape[2] != cores[i + 1].shape[0]:
            raise ValueError(f"rank mismatch between factors {i} and {i + 1}")
    shape = tuple(c.shape[1] for c in cores)
    s = _as_scatter(s, shape)
    d_left = int(np.prod(shape[:n]))
    i_n = shape[n]
    if n == 0:
        left = np.ones((1, 1))
    else:
        left = left_unfold(chain_contract(cores, 0, n))

    if n == N - 1:
        s4 = s.reshape((d_left, i_n, d_left, i_n), order="F")
        t = np.tensordot(left, s4, axes=([0], [0]))  # (a, i, l', i')
        t = np.tensordot(t, left, axes=([2], [0]))  # (a, i, i', a')
        return t.transpose(0, 1, 3, 2)

    right = chain_contract(cores, n + 1)
    r_n, r_last = right.shape[0], right.shape[-1]
    right = right.reshape((r_n, -1, r_last), order="F")
    d_right = right.shape[1]
    s6 = s.reshape((d_left, i_n, d_right, d_left, i_n, d_right), order="F")
    t = np.tensordot(left, s6, axes=([0], [0]))  # (a, i, r, l', i', r')
    t = np.tensordot(t, left, axes=([3], [0]))  # (a, i, r, i', r', a')
    t = np.tensordot(t, right, axes=([2], [1]))  # (a, i, i', r', a', b, k)
    # contracting the feature index k of both right parts is the trace
    t = np.tensordot(t, right, axes=([3, 6], [1, 2]))  # (a, i, i', a', b, b')
    return t.transpose(0, 1, 4, 3, 2, 5)


def an_matrix(cores, s, n):
    """``T_3(A_n)`` (or ``T_2(A_N)``) as a square, symmetrized matrix."""
    a = assemble_an(cores, s, n)
    half = a.ndim // 2
    m = int(np.prod(a.shape[:half]))
    mat = a.reshape((m, m), order="F")
    return 0.5 * (mat + mat.T)


@dataclass
class TTDAResult:
    chain: TTChain
    objective: list = field(default_factory=list)
    n_iter: int = 0
    converged: bool = False

    @property
    def subspace(self):
        return subspace_matrix(self.chain)


def ttda_sweeps(s, chain, max_iter=200, tol=0.1, solver=None):
    """Alternating factor updates of a chain against a fixed scatter ``s``.

    ``objective[0]`` is ``tr(U^T S U)`` at the start and each further entry is
    the value after one factor update. Sweeps stop when the normalized change
    of the subspace projector falls below ``tol`` or after ``max_iter``.
    """
    solver = solver or SolverConfig()
    cores = [c.copy() for c in (chain.cores if isinstance(chain, TTChain) else chain)]
    N = len(cores)
    shape = tuple(c.shape[1] for c in cores)
    s = _as_scatter(s, shape)
    s = 0.5 * (s + s.T)
    U_old = subspace_matrix(cores)
    objective = [float(np.sum(U_old * (s @ U_old)))]
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        for n in range(N - 1):
            a = an_matrix(cores, s, n)
            res = minimize_on_stiefel(a, left_unfold(cores[n]), solver)
            if not res.converged:
                logger.debug("factor %d: %s", n, res.message)
            cores[n] = res.x.reshape(cores[n].shape, order="F")
            objective.append(res.fun)
        a = an_matrix(cores, s, N - 1)
        r_prev, i_last, r_last = cores[-1].shape
        V, w = lda_solve(a, r_last)
        # the exact minimizer never loses to the current factor, up to round-off
        current = left_unfold(cores[-1])
        if float(np.sum(w)) <= float(np.sum(current * (a @ current))):
            cores[-1] = V.reshape((r_prev, i_last, r_last), order="F")
            objective.append(float(np.sum(w)))
        else:
            objective.append(objective[-1])
        U = subspace_matrix(cores)
        change = subspace_change(U_old, U)
        U_old = U
        if change < tol:
            converged = True
            break
    return TTDAResult(TTChain(cores), objective, it, converged)


def init_chain(X, ranks=None, tau=None, n_modes=None):
    """TT-SVD initialization from the training stack.

    The first ``n_modes`` sample modes become the chain modes; all remaining
    modes and the sample index are lumped into one trailing mode whose core
    is discarded. The kept cores are left-orthogonal.
    """
    X = np.asarray(X, dtype=float)
    N = X.ndim - 1 if n_modes is None else n_modes
    shape = X.shape[1 : 1 + N]
    stack = np.moveaxis(X, 0, -1).reshape(shape + (-1,), order="F")
    if ranks is None and tau is None:
        raise ValueError("give ranks or tau")
    if ranks is not None:
        ranks = [int(r) for r in ranks]
        if len(ranks) != N:
            raise ValueError(f"need {N} ranks (R_1..R_N), got {len(ranks)}")
        chain = tt_svd(stack, ranks=ranks)
    else:
        chain = tt_svd(stack, tau=tau)
    return TTChain(chain.cores[:N])


def ttda_fit(X, y, ranks=None, tau=None, lam=1.0, max_iter=200, tol=0.1,
             solver=None, init=None, max_dense_dim=DEFAULT_MAX_DENSE_DIM):
    """Fit a TT discriminant subspace to samples ``X`` of shape ``(n, I_1..I_N)``.

    Parameters
    ----------
    ranks : sequence of int, optional
        ``(R_1, ..., R_N)``; ``R_N`` is the number of features.
    tau : float, optional
        TT-SVD truncation threshold used instead of explicit ranks.
    lam : float
        Weight of the between-class scatter.
    init : TTChain, optional
        Starting chain; defaults to the TT-SVD of the training stack.

    Returns
    -------
    TTDAResult
    """
    X = np.asarray(X, dtype=float)
    D = int(np.prod(X.shape[1:]))
    if D > max_dense_dim:
        raise ValueError(
            f"dense scatter of dimension {D} exceeds max_dense_dim={max_dense_dim}; "
            "use a multi-branch model or raise the ceiling"
        )
    chain = init if init is not None else init_chain(X, ranks=ranks, tau=tau)
    if chain.ranks[0] != 1:
        raise ValueError("the chain must start with rank 1")
    sp = scatter_matrices(X, y, lam)
    return ttda_sweeps(sp.s, chain, max_iter=max_iter, tol=tol, solver=solver)
