"""Tensor-train factors and chains.

A chain is an ordered list of 3-mode cores ``U_n`` of shape
``(R_{n-1}, I_n, R_n)``. Chains learned by the discriminant methods keep
``R_0 = 1`` and leave the trailing rank ``R_N`` open: it is the number of
features, and :func:`subspace_matrix` turns the chain into a
``prod(I_n) x R_N`` matrix with orthonormal columns.
"""
import warnings
from dataclasses import dataclass, field

import numpy as np

from .tensor import left_unfold, unfold, vec

__all__ = [
    "TTChain",
    "tt_svd",
    "chain_contract",
    "subspace_matrix",
    "project",
    "reconstruct",
    "orthogonality_error",
]


def orthogonality_error(core):
    """Max-abs deviation of ``L(core)^T L(core)`` from the identity."""
    m = left_unfold(core)
    return float(np.max(np.abs(m.T @ m - np.eye(m.shape[1])))) if m.size else 0.0


@dataclass
class TTChain:
    """Ordered tensor-train factors joined through adjacent ranks."""

    cores: list = field(default_factory=list)

    def __post_init__(self):
        cores = [np.asarray(c, dtype=float) for c in self.cores]
        for i, c in enumerate(cores):
            if c.ndim != 3:
                raise ValueError(f"core {i} must have 3 modes, got shape {c.shape}")
        for i in range(len(cores) - 1):
            if cores[i].shape[2] != cores[i + 1].shape[0]:
                raise ValueError(
                    f"rank mismatch between core {i} (trailing {cores[i].shape[2]}) "
                    f"and core {i + 1} (leading {cores[i + 1].shape[0]})"
                )
        self.cores = cores

    def __len__(self):
        return len(self.cores)

    def __getitem__(self, i):
        return self.cores[i]

    @property
    def shape(self):
        return tuple(c.shape[1] for c in self.cores)

    @property
    def ranks(self):
        """``(R_0, R_1, ..., R_N)``."""
        if not self.cores:
            return ()
        return (self.cores[0].shape[0],) + tuple(c.shape[2] for c in self.cores)

    @property
    def size(self):
        return int(sum(c.size for c in self.cores))

    def left_orthogonal(self, tol=1e-10):
        return [orthogonality_error(c) <= tol for c in self.cores]

    def copy(self):
        return TTChain([c.copy() for c in self.cores])


def _parse_ranks(ranks, N):
    ranks = [int(r) for r in ranks]
    if len(ranks) == N + 1:
        if ranks[0] != 1:
            raise ValueError(f"leading boundary rank must be 1, got {ranks[0]}")
        ranks = ranks[1:]
    elif len(ranks) == N - 1:
        ranks = ranks + [1]
    elif len(ranks) != N:
        raise ValueError(
            f"expected {N - 1}, {N} or {N + 1} ranks for a {N}-mode tensor, got {len(ranks)}"
        )
    if any(r < 1 for r in ranks):
        raise ValueError(f"ranks must be positive, got {ranks}")
    return ranks


def tt_svd(t, ranks=None, tau=None):
    """Left-to-right sequential SVD into a left-orthogonal tensor train.

    Exactly one of ``ranks`` and ``tau`` selects the truncation:

    * ``ranks`` -- ``(R_1, ..., R_{N-1})``, ``(R_1, ..., R_N)`` or the full
      ``(1, R_1, ..., R_N)``. Requests above what the data supports are
      reduced with a warning.
    * ``tau`` in ``(0, 1]`` -- at each step keep the singular values that are
      at least ``tau`` times the largest one.

    At least one singular vector is always kept, so an all-zero input gives
    rank-1 cores of zeros. The last core absorbs the remaining coefficients
    and is therefore not orthogonal; every other core is.
    """
    t = np.asarray(t, dtype=float)
    if t.ndim < 1:
        raise ValueError("tt_svd needs at least one mode")
    N = t.ndim
    if (ranks is None) == (tau is None):
        raise ValueError("give exactly one of ranks and tau")
    if tau is not None and not 0.0 < tau <= 1.0:
        raise ValueError(f"tau must lie in (0, 1], got {tau}")
    targets = _parse_ranks(ranks, N) if ranks is not None else None

    shape = t.shape
    cores = []
    r_prev = 1
    rest = t.reshape(-1, order="F")
    truncated = False
    for n in range(N - 1):
        mat = rest.reshape((r_prev * shape[n], -1), order="F")
        u, s, vt = np.linalg.svd(mat, full_matrices=False)
        if targets is not None:
            r = min(targets[n], s.size)
            truncated |= r < targets[n]
        else:
            r = int(np.count_nonzero(s >= tau * s[0])) if s[0] > 0 else 1
        r = max(r, 1)
        cores.append(u[:, :r].reshape((r_prev, shape[n], r), order="F"))
        rest = s[:r, None] * vt[:r]
        r_prev = r
    if targets is not None and targets[-1] != 1:
        truncated = True
    cores.append(rest.reshape((r_prev, shape[-1], 1), order="F"))
    if truncated:
        warnings.warn(
            f"requested ranks {targets} reduced to {[c.shape[2] for c in cores]}",
            stacklevel=2,
        )
    return TTChain(cores)


def chain_contract(chain, start=0, stop=None):
    """Merge cores ``start .. stop-1`` through their shared rank modes.

    Returns a tensor of shape ``(R_start, I_start, ..., I_{stop-1}, R_stop)``.
    """
    cores = chain.cores if isinstance(chain, TTChain) else list(chain)
    if stop is None:
        stop = len(cores)
    if not 0 <= start < stop <= len(cores):
        raise ValueError(f"invalid core range [{start}, {stop}) for {len(cores)} cores")
    out = np.asarray(cores[start], dtype=float)
    for c in cores[start + 1 : stop]:
        out = np.tensordot(out, c, axes=([out.ndim - 1], [0]))
    return out


def subspace_matrix(chain):
    """``L(U_1 x ... x U_N)`` as a ``prod(I_n) x R_N`` matrix.

    Rows follow the first-mode-fastest linear order of the data tensors, so
    ``subspace_matrix(chain).T @ vec(y)`` projects a sample.
    """
    cores = chain.cores if isinstance(chain, TTChain) else list(chain)
    if cores[0].shape[0] != 1:
        raise ValueError(f"chain must start with rank 1, got {cores[0].shape[0]}")
    full = chain_contract(cores)
    return unfold(full, full.ndim - 1)


def project(U, y):
    """Features ``U^T vec(y)`` for one sample, or a batch with samples first."""
    U = np.asarray(U, dtype=float)
    y = np.asarray(y, dtype=float)
    D = U.shape[0]
    if y.size == D:
        return U.T @ vec(y)
    if y.ndim >= 2 and y[0].size == D:
        return y.reshape((y.shape[0], D), order="F") @ U
    raise ValueError(f"sample of size {y[0].size if y.ndim else y.size} does not match {D} rows")


def reconstruct(U, x, shape):
    """Map features back to a tensor of the given shape, ``U x``."""
    U = np.asarray(U, dtype=float)
    return (U @ np.asarray(x, dtype=float)).reshape(tuple(shape), order="F")
