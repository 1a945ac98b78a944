"""scikit-learn compatible discriminant transformers.

All transformers take samples stacked along the first axis,
``X.shape == (n_samples, I_1, ..., I_N)``, and return 2-D feature arrays so
they drop into :class:`sklearn.pipeline.Pipeline` ahead of a classifier::

    from sklearn.pipeline import make_pipeline
    clf = make_pipeline(TwoWayTTDA(tau=0.7, lam=10.0), OneNearestNeighbor())
    clf.fit(X_train, y_train).score(X_test, y_test)
"""
import math

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from .discriminant import cmda, dgtda, hosvd_init, lda_solve, scatter_matrices, tucker_project
from .multibranch import BranchSpec, multibranch_fit, select_branch_points
from .storage import storage_count
from .ttda import DEFAULT_MAX_DENSE_DIM, ttda_fit
from .tt import subspace_matrix
from .validation import check_lambda, check_sample_shape, check_tensor_X, check_tensor_X_y

__all__ = [
    "LDA",
    "CMDA",
    "DGTDA",
    "TTDA",
    "MultiBranchTTDA",
    "TwoWayTTDA",
    "ThreeWayTTDA",
]

# normalized-change threshold and sweep cap for TT methods and for CMDA
TT_TOL = 0.1
TT_MAX_ITER = 200
CMDA_TOL = 0.1
CMDA_MAX_ITER = 20


class _StorageMixin:
    def storage_elements(self, n_samples):
        """Stored factor entries plus one feature core per sample."""
        check_is_fitted(self)
        return storage_count(self.factor_arrays(), n_samples, self.core_shape_)

    def normalized_storage(self, n_samples):
        check_is_fitted(self)
        return self.storage_elements(n_samples) / (n_samples * math.prod(self.sample_shape_))


class LDA(_StorageMixin, TransformerMixin, BaseEstimator):
    """Trace-difference LDA on vectorized samples."""

    def __init__(self, n_components=1, lam=1.0):
        self.n_components = n_components
        self.lam = lam

    def fit(self, X, y):
        X, y = check_tensor_X_y(X, y)
        lam = check_lambda(self.lam)
        self.sample_shape_ = X.shape[1:]
        self.classes_ = np.unique(y)
        sp = scatter_matrices(X, y, lam)
        self.components_, self.eigenvalues_ = lda_solve(sp.s, self.n_components)
        self.objective_ = float(np.sum(self.eigenvalues_))
        self.core_shape_ = (self.components_.shape[1],)
        return self

    def transform(self, X):
        check_is_fitted(self)
        X = check_sample_shape(check_tensor_X(X), self.sample_shape_)
        return X.reshape((X.shape[0], -1), order="F") @ self.components_

    def factor_arrays(self):
        return [self.components_]


class _TuckerTransformer(_StorageMixin, TransformerMixin, BaseEstimator):
    def transform(self, X):
        check_is_fitted(self)
        X = check_sample_shape(check_tensor_X(X), self.sample_shape_)
        return self.transform_cores(X).reshape((X.shape[0], -1), order="F")

    def transform_cores(self, X):
        check_is_fitted(self)
        X = check_sample_shape(check_tensor_X(X), self.sample_shape_)
        return tucker_project(X, self.subspaces_)

    def factor_arrays(self):
        return list(self.subspaces_)


class CMDA(_TuckerTransformer):
    """Constrained multilinear discriminant analysis (alternating mode updates)."""

    def __init__(self, ranks=None, lam=1.0, max_iter=CMDA_MAX_ITER, tol=CMDA_TOL):
        self.ranks = ranks
        self.lam = lam
        self.max_iter = max_iter
        self.tol = tol

    def fit(self, X, y):
        X, y = check_tensor_X_y(X, y)
        lam = check_lambda(self.lam)
        self.sample_shape_ = X.shape[1:]
        self.classes_ = np.unique(y)
        ranks = self.ranks if self.ranks is not None else self.sample_shape_
        self.subspaces_, self.objective_, self.n_iter_ = cmda(
            X, y, ranks, lam=lam, max_iter=self.max_iter, tol=self.tol,
            init=hosvd_init(X, ranks))
        self.core_shape_ = tuple(U.shape[1] for U in self.subspaces_)
        return self


class DGTDA(_TuckerTransformer):
    """Direct generalized tensor discriminant analysis; chooses its own weight per mode."""

    def __init__(self, ranks=None):
        self.ranks = ranks

    def fit(self, X, y):
        X, y = check_tensor_X_y(X, y)
        self.sample_shape_ = X.shape[1:]
        self.classes_ = np.unique(y)
        ranks = self.ranks if self.ranks is not None else self.sample_shape_
        self.subspaces_, self.zetas_ = dgtda(X, y, ranks)
        self.core_shape_ = tuple(U.shape[1] for U in self.subspaces_)
        return self


class TTDA(_StorageMixin, TransformerMixin, BaseEstimator):
    """Tensor-train discriminant analysis.

    Parameters
    ----------
    ranks : sequence of int, optional
        TT ranks ``(R_1, ..., R_N)``; ``R_N`` is the number of output features.
    tau : float, optional
        TT-SVD truncation threshold, used when ``ranks`` is None.
    lam : float, default=1.0
        Weight of the between-class scatter in ``S_W - lam * S_B``.
    max_iter, tol : int, float
        Sweep cap and normalized subspace-change threshold.
    solver : SolverConfig, optional
        Settings of the Stiefel-manifold factor solver.
    max_dense_dim : int
        Largest vectorized sample size for which the scatter is formed.

    Attributes
    ----------
    chain_ : TTChain
    subspace_ : ndarray of shape (prod(I_n), R_N)
    objective_ : list of float
        ``tr(U^T S U)`` at the start and after every factor update.
    """

    def __init__(self, ranks=None, tau=None, lam=1.0, max_iter=TT_MAX_ITER, tol=TT_TOL,
                 solver=None, max_dense_dim=DEFAULT_MAX_DENSE_DIM):
        self.ranks = ranks
        self.tau = tau
        self.lam = lam
        self.max_iter = max_iter
        self.tol = tol
        self.solver = solver
        self.max_dense_dim = max_dense_dim

    def fit(self, X, y):
        X, y = check_tensor_X_y(X, y)
        lam = check_lambda(self.lam)
        tau = self.tau if self.ranks is None else None
        if self.ranks is None and tau is None:
            raise ValueError("set ranks or tau")
        self.sample_shape_ = X.shape[1:]
        self.classes_ = np.unique(y)
        res = ttda_fit(X, y, ranks=self.ranks, tau=tau, lam=lam, max_iter=self.max_iter,
                       tol=self.tol, solver=self.solver, max_dense_dim=self.max_dense_dim)
        self.chain_ = res.chain
        self.subspace_ = subspace_matrix(res.chain)
        self.objective_ = res.objective
        self.n_iter_ = res.n_iter
        self.ranks_ = res.chain.ranks
        self.core_shape_ = (self.subspace_.shape[1],)
        return self

    def transform(self, X):
        check_is_fitted(self)
        X = check_sample_shape(check_tensor_X(X), self.sample_shape_)
        return X.reshape((X.shape[0], -1), order="F") @ self.subspace_

    def factor_arrays(self):
        return list(self.chain_.cores)


class MultiBranchTTDA(_StorageMixin, TransformerMixin, BaseEstimator):
    """Multi-branch TTDA: one TT chain per contiguous group of modes.

    ``boundaries`` fixes the split explicitly; otherwise it is chosen to
    balance the branch sizes for ``n_branches`` branches. ``ranks`` is a list
    with one rank sequence per branch. :meth:`transform` returns the cores
    flattened; :meth:`transform_cores` keeps their ``(r_1, ..., r_f)`` shape.
    """

    def __init__(self, n_branches=2, boundaries=None, ranks=None, tau=None, lam=1.0,
                 max_iter=TT_MAX_ITER, tol=TT_TOL, loop_iter=3, solver=None,
                 max_dense_dim=DEFAULT_MAX_DENSE_DIM):
        self.n_branches = n_branches
        self.boundaries = boundaries
        self.ranks = ranks
        self.tau = tau
        self.lam = lam
        self.max_iter = max_iter
        self.tol = tol
        self.loop_iter = loop_iter
        self.solver = solver
        self.max_dense_dim = max_dense_dim

    def _spec(self, shape):
        if self.boundaries is not None:
            return BranchSpec(shape, tuple(self.boundaries))
        return select_branch_points(shape, self.n_branches)

    def fit(self, X, y):
        X, y = check_tensor_X_y(X, y)
        lam = check_lambda(self.lam)
        tau = self.tau if self.ranks is None else None
        if self.ranks is None and tau is None:
            raise ValueError("set ranks or tau")
        self.sample_shape_ = X.shape[1:]
        self.classes_ = np.unique(y)
        self.spec_ = self._spec(self.sample_shape_)
        self.model_ = multibranch_fit(
            X, y, self.spec_, ranks=self.ranks, tau=tau, lam=lam, max_iter=self.max_iter,
            tol=self.tol, loop_iter=self.loop_iter, solver=self.solver,
            max_dense_dim=self.max_dense_dim)
        self.chains_ = self.model_.chains
        self.objective_ = self.model_.objective
        self.core_shape_ = self.model_.core_shape
        return self

    def transform_cores(self, X):
        check_is_fitted(self)
        X = check_sample_shape(check_tensor_X(X), self.sample_shape_)
        return self.model_.transform(X)

    def transform(self, X):
        cores = self.transform_cores(X)
        return cores.reshape((cores.shape[0], -1), order="F")

    def factor_arrays(self):
        return [c for chain in self.chains_ for c in chain.cores]


class TwoWayTTDA(MultiBranchTTDA):
    """Two-branch TTDA with the balanced split point."""

    def __init__(self, boundaries=None, ranks=None, tau=None, lam=1.0, max_iter=TT_MAX_ITER,
                 tol=TT_TOL, loop_iter=3, solver=None, max_dense_dim=DEFAULT_MAX_DENSE_DIM):
        super().__init__(n_branches=2, boundaries=boundaries, ranks=ranks, tau=tau, lam=lam,
                         max_iter=max_iter, tol=tol, loop_iter=loop_iter, solver=solver,
                         max_dense_dim=max_dense_dim)


class ThreeWayTTDA(MultiBranchTTDA):
    """Three-branch TTDA with log-balanced split points."""

    def __init__(self, boundaries=None, ranks=None, tau=None, lam=1.0, max_iter=TT_MAX_ITER,
                 tol=TT_TOL, loop_iter=3, solver=None, max_dense_dim=DEFAULT_MAX_DENSE_DIM):
        super().__init__(n_branches=3, boundaries=boundaries, ranks=ranks, tau=tau, lam=lam,
                         max_iter=max_iter, tol=tol, loop_iter=loop_iter, solver=solver,
                         max_dense_dim=max_dense_dim)
