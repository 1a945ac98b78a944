"""Multi-branch tensor-train discriminant models.

The sample modes are split into ``f`` contiguous branches. Each branch owns
a TT chain whose subspace ``V_b`` spans the vectorized branch modes, and a
sample is summarized by the core ``Y x_1 V_1^T ... x_f V_f^T`` of shape
``(r_1, ..., r_f)``. With ``f = 1`` this is plain TTDA; with one mode per
branch it is a Tucker model.
"""
import itertools
import logging
import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .discriminant import scatter_matrices, subspace_change, tucker_project
from .ttda import DEFAULT_MAX_DENSE_DIM, init_chain, ttda_sweeps
from .tt import subspace_matrix

__all__ = [
    "BranchSpec",
    "BranchModel",
    "select_branch_points",
    "multibranch_fit",
    "branch_scatter",
]

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class BranchSpec:
    """Split of modes ``0..N-1`` at the given boundaries.

    A boundary ``d`` puts modes ``< d`` before it, so ``boundaries=(2,)`` on
    four modes gives branches ``(0, 1)`` and ``(2, 3)``.
    """

    shape: tuple
    boundaries: tuple = ()

    def __post_init__(self):
        shape = tuple(int(i) for i in self.shape)
        bounds = tuple(int(d) for d in self.boundaries)
        N = len(shape)
        if N < 1 or any(i < 1 for i in shape):
            raise ValueError(f"invalid shape {shape}")
        if any(not 1 <= d <= N - 1 for d in bounds):
            raise ValueError(f"boundaries {bounds} must lie in [1, {N - 1}]")
        if any(b <= a for a, b in zip(bounds, bounds[1:])):
            raise ValueError(f"boundaries {bounds} must be strictly increasing")
        object.__setattr__(self, "shape", shape)
        object.__setattr__(self, "boundaries", bounds)

    @property
    def n_branches(self):
        return len(self.boundaries) + 1

    @property
    def groups(self):
        edges = (0,) + self.boundaries + (len(self.shape),)
        return [tuple(range(a, b)) for a, b in zip(edges, edges[1:])]

    @property
    def branch_shapes(self):
        return [tuple(self.shape[m] for m in g) for g in self.groups]

    @property
    def branch_dims(self):
        return [math.prod(s) for s in self.branch_shapes]


def select_branch_points(shape, f):
    """Choose ``f - 1`` boundaries that balance the branch sizes.

    For two branches the boundary minimizes ``|prod(left) - prod(right)|``.
    For more, it minimizes the summed ``|log(branch size) - log(total)/f|``.
    Ties go to the lexicographically smallest boundaries.
    """
    shape = tuple(int(i) for i in shape)
    N = len(shape)
    if f < 1 or f > N:
        raise ValueError(f"cannot split {N} modes into {f} branches")
    if f == 1:
        return BranchSpec(shape, ())
    total = math.prod(shape)
    target = math.log(total) / f
    best, best_cost = None, math.inf
    for bounds in itertools.combinations(range(1, N), f - 1):
        edges = (0,) + bounds + (N,)
        sizes = [math.prod(shape[a:b]) for a, b in zip(edges, edges[1:])]
        if f == 2:
            cost = abs(sizes[0] - sizes[1])
        else:
            cost = sum(abs(math.log(s) - target) for s in sizes)
        if cost < best_cost - 1e-12:
            best, best_cost = bounds, cost
    return BranchSpec(shape, best)


@dataclass
class BranchModel:
    """Fitted multi-branch model; ``cores`` holds the training-sample cores."""

    spec: BranchSpec
    chains: list
    lam: float
    cores: np.ndarray = None
    objective: list = field(default_factory=list)
    n_loops: int = 0

    @property
    def subspaces(self):
        return [subspace_matrix(c) for c in self.chains]

    @property
    def core_shape(self):
        return tuple(c.ranks[-1] for c in self.chains)

    def transform(self, X):
        """Cores of new samples, shape ``(n, r_1, ..., r_f)``."""
        return _grouped_project(X, self.spec, self.subspaces)


def _grouped(X, spec):
    X = np.asarray(X, dtype=float)
    if tuple(X.shape[1:]) != spec.shape:
        raise ValueError(f"samples of shape {X.shape[1:]} do not match {spec.shape}")
    return X.reshape((X.shape[0],) + tuple(spec.branch_dims), order="F")


def _grouped_project(X, spec, subspaces, skip=None):
    return tucker_project(_grouped(X, spec), subspaces, skip=skip)


def branch_scatter(X, y, spec, subspaces, b, lam):
    """Scatter of branch ``b`` after projecting every other branch."""
    Z = _grouped_project(X, spec, subspaces, skip=b)
    Z = np.moveaxis(Z, b + 1, 1)
    return scatter_matrices(Z, y, lam, n_row_modes=1)


def _branch_init(X, spec, b, ranks, tau):
    X = np.asarray(X, dtype=float)
    g = spec.groups[b]
    # bring the branch modes to the front, everything else trails
    order = [0] + [m + 1 for m in g] + [m + 1 for m in range(len(spec.shape)) if m not in g]
    Xb = X.transpose(order)
    return init_chain(Xb, ranks=ranks, tau=tau, n_modes=len(g))


def multibranch_fit(X, y, spec, ranks=None, tau=None, lam=1.0, max_iter=200, tol=0.1,
                    loop_iter=3, solver=None, max_dense_dim=DEFAULT_MAX_DENSE_DIM):
    """Alternate TTDA over the branches of ``spec``.

    Each branch is updated by TTDA on the samples projected onto all other
    branches' current subspaces; the projected modes act as extra columns of
    the branch scatter. The outer loop runs ``loop_iter`` times or until no
    branch subspace moves by more than ``tol``. With a single branch there
    is nothing to alternate and one TTDA run is made.

    Parameters
    ----------
    spec : BranchSpec or sequence of int
        Branch split, or boundaries applied to the sample shape.
    ranks : list of sequences, optional
        Per-branch ranks ``(R_1, ..., R_k)``; the last is the branch's
        feature dimension.
    tau : float, optional
        TT-SVD threshold used for every branch instead of ``ranks``.

    Returns
    -------
    BranchModel
    """
    X = np.asarray(X, dtype=float)
    if not isinstance(spec, BranchSpec):
        spec = BranchSpec(X.shape[1:], tuple(spec))
    f = spec.n_branches
    if ranks is not None and len(ranks) != f:
        raise ValueError(f"need rank lists for {f} branches, got {len(ranks)}")
    for dim in spec.branch_dims:
        if dim > max_dense_dim:
            raise ValueError(f"branch dimension {dim} exceeds max_dense_dim={max_dense_dim}")

    chains = [
        _branch_init(X, spec, b, None if ranks is None else ranks[b], tau) for b in range(f)
    ]
    subspaces = [subspace_matrix(c) for c in chains]
    objective = []
    loops = 1 if f == 1 else loop_iter
    n_loops = 0
    for n_loops in range(1, loops + 1):
        moved = 0.0
        for b in range(f):
            sp = branch_scatter(X, y, spec, subspaces, b, lam)
            if not np.any(sp.s):
                warnings.warn(f"branch {b}: projected scatter is zero; keeping factors",
                              stacklevel=2)
                continue
            res = ttda_sweeps(sp.s, chains[b], max_iter=max_iter, tol=tol, solver=solver)
            chains[b] = res.chain
            new = subspace_matrix(res.chain)
            moved = max(moved, subspace_change(subspaces[b], new))
            subspaces[b] = new
            objective.append(res.objective)
        logger.debug("loop %d: largest branch change %.3g", n_loops, moved)
        if f > 1 and moved < tol:
            break

    model = BranchModel(spec, chains, float(lam), objective=objective, n_loops=n_loops)
    model.cores = model.transform(X)
    return model
