"""1-NN classification, accuracy and the lambda selection protocol."""
import logging

import numpy as np
from scipy.spatial.distance import cdist
from sklearn.base import BaseEstimator, ClassifierMixin, clone
from sklearn.utils.validation import check_array, check_is_fitted, check_X_y

__all__ = [
    "DEFAULT_LAMBDA_GRID",
    "nn1_classify",
    "accuracy",
    "OneNearestNeighbor",
    "select_lambda",
]

log = logging.getLogger(__name__)

# 9 log-spaced points from 0.1 to 1000
DEFAULT_LAMBDA_GRID = tuple(float(v) for v in np.logspace(-1, 3, 9))


def _flat(F):
    F = np.asarray(F, dtype=float)
    return F.reshape((F.shape[0], -1), order="F")


def nn1_classify(train_features, train_labels, test_features):
    """Label of the Euclidean-nearest training feature; ties go to the lowest index."""
    train = _flat(train_features)
    labels = np.asarray(train_labels)
    if train.shape[0] == 0:
        raise ValueError("empty training set")
    if labels.shape != (train.shape[0],):
        raise ValueError("one label per training feature required")
    test = _flat(test_features)
    if test.shape[1] != train.shape[1]:
        raise ValueError(f"feature lengths differ: {test.shape[1]} vs {train.shape[1]}")
    if test.shape[0] == 0:
        return labels[:0]
    d = cdist(test, train, "sqeuclidean")
    # argmin returns the first minimum
    return labels[np.argmin(d, axis=1)]


def accuracy(predicted, truth):
    predicted = np.asarray(predicted)
    truth = np.asarray(truth)
    if predicted.shape != truth.shape:
        raise ValueError("predicted and true labels differ in length")
    if truth.size == 0:
        raise ValueError("empty test set")
    return float(np.mean(predicted == truth))


class OneNearestNeighbor(ClassifierMixin, BaseEstimator):
    """Euclidean 1-NN on flattened features."""

    def fit(self, X, y):
        X, y = check_X_y(_flat(X), y)
        self.train_features_ = X
        self.train_labels_ = y
        self.classes_ = np.unique(y)
        return self

    def predict(self, X):
        check_is_fitted(self)
        return nn1_classify(self.train_features_, self.train_labels_, check_array(_flat(X)))


def _draw_validation(y_pool, s, rng):
    idx = []
    for c in np.unique(y_pool):
        members = np.flatnonzero(y_pool == c)
        if members.size < s:
            raise ValueError(f"class {c!r} has {members.size} pool samples, need {s}")
        idx.append(rng.choice(members, size=s, replace=False))
    return np.sort(np.concatenate(idx))


def select_lambda(estimator, X, y, X_pool=None, y_pool=None, grid=DEFAULT_LAMBDA_GRID, s=1,
                  trials=5, random_state=None):
    """Pick the between-class weight with the best held-out 1-NN accuracy.

    For every candidate, a clone of ``estimator`` is trained on ``(X, y)``
    and scored on ``trials`` random validation draws of ``s`` samples per
    class from the pool. Training is deterministic, so each candidate is fit
    once and only the validation draw varies.

    Parameters
    ----------
    estimator : transformer with a ``lam`` parameter
    X, y : training samples and labels
    X_pool, y_pool : held-out samples to draw validation sets from.
        Defaults to the training set itself.
    grid : sequence of float
    s : int
        Validation samples per class in each trial.
    trials : int
    random_state : int or Generator

    Returns
    -------
    best : float
        Candidate with the highest mean accuracy; ties go to the smallest.
    scores : dict
        Mean validation accuracy per candidate.
    """
    if X_pool is None:
        X_pool, y_pool = X, y
    X = np.asarray(X, dtype=float)
    y = np.asarray(y)
    X_pool = np.asarray(X_pool, dtype=float)
    y_pool = np.asarray(y_pool)
    grid = [float(g) for g in grid]
    if not grid:
        raise ValueError("empty lambda grid")
    if s < 1 or trials < 1:
        raise ValueError("s and trials must be positive")
    rng = np.random.default_rng(random_state)
    draws = [_draw_validation(y_pool, s, rng) for _ in range(trials)]
    scores = {}
    for lam in grid:
        model = clone(estimator).set_params(lam=lam).fit(X, y)
        train_f = model.transform(X)
        pool_f = model.transform(X_pool)
        accs = [accuracy(nn1_classify(train_f, y, pool_f[d]), y_pool[d]) for d in draws]
        scores[lam] = float(np.mean(accs))
        log.debug("lambda %.4g: validation accuracy %.4f", lam, scores[lam])
    best = min(grid, key=lambda g: (-scores[g], g))
    return best, scores
