"""Labeled tensor collections, synthetic data and per-class splits."""
import math
from dataclasses import dataclass, field

import numpy as np

from .tt import TTChain, chain_contract

__all__ = [
    "LabeledTensorSet",
    "SyntheticSpec",
    "generate_synthetic",
    "class_mean_distances",
    "per_class_split",
]


@dataclass
class LabeledTensorSet:
    """Samples ``X`` of shape ``(n, I_1, ..., I_N)`` with one label each."""

    X: np.ndarray
    y: np.ndarray
    names: list = field(default=None)

    def __post_init__(self):
        self.X = np.asarray(self.X, dtype=float)
        self.y = np.asarray(self.y)
        if self.X.ndim < 2:
            raise ValueError("X must have shape (n_samples, I_1, ..., I_N)")
        if self.y.shape != (self.X.shape[0],):
            raise ValueError(f"{self.X.shape[0]} samples but labels of shape {self.y.shape}")

    @property
    def shape(self):
        return tuple(self.X.shape[1:])

    @property
    def classes(self):
        return np.unique(self.y)

    @property
    def class_sizes(self):
        _, counts = np.unique(self.y, return_counts=True)
        return counts

    def __len__(self):
        return self.X.shape[0]

    def samples(self, c):
        """Samples of class ``c`` in stored order."""
        return self.X[self.y == c]

    def subset(self, idx):
        names = None if self.names is None else [self.names[i] for i in idx]
        return LabeledTensorSet(self.X[idx], self.y[idx], names)

    def reshape(self, shape):
        """Reinterpret every sample with a new shape, keeping the linear order."""
        shape = tuple(int(i) for i in shape)
        if math.prod(shape) != math.prod(self.shape):
            raise ValueError(f"cannot reshape samples of shape {self.shape} to {shape}")
        n = len(self)
        flat = self.X.reshape((n, -1), order="F")
        return LabeledTensorSet(flat.reshape((n,) + shape, order="F"), self.y, self.names)


@dataclass(frozen=True)
class SyntheticSpec:
    shape: tuple = (4, 4, 4, 4)
    n_classes: int = 3
    n_per_class: int = 20
    ranks: tuple = (1, 2, 2, 2, 1)
    separation: float = 1.0
    sigma: float = 0.05
    seed: int = 7

    def __post_init__(self):
        if not self.sigma > 0:
            raise ValueError("sigma must be positive")
        if not self.separation > 0:
            raise ValueError("separation must be positive")
        if len(self.ranks) != len(self.shape) + 1 or self.ranks[0] != 1 or self.ranks[-1] != 1:
            raise ValueError(f"ranks must be (1, R_1, ..., R_{{N-1}}, 1), got {self.ranks}")
        if self.n_classes < 1 or self.n_per_class < 1:
            raise ValueError("need at least one class and one sample per class")


def generate_synthetic(spec):
    """Class means from random TT chains, plus i.i.d. Gaussian noise.

    Each class mean is ``separation`` times a unit-norm tensor of the given
    TT ranks; samples add ``sigma`` times standard normal noise. The result
    depends only on ``spec``.
    """
    rng = np.random.default_rng(spec.seed)
    shape = tuple(spec.shape)
    rk = tuple(spec.ranks)
    for n in range(len(shape)):
        left = math.prod(shape[: n + 1])
        right = math.prod(shape[n + 1 :])
        if rk[n + 1] > min(rk[n] * shape[n], left, right):
            raise ValueError(f"generator rank R_{n + 1}={rk[n + 1]} is not attainable")
    means = []
    for _ in range(spec.n_classes):
        cores = [rng.standard_normal((rk[n], shape[n], rk[n + 1])) for n in range(len(shape))]
        m = chain_contract(TTChain(cores)).reshape(shape)
        means.append(spec.separation * m / np.linalg.norm(m))
    X = np.empty((spec.n_classes * spec.n_per_class,) + shape)
    y = np.repeat(np.arange(spec.n_classes), spec.n_per_class)
    for i, c in enumerate(y):
        X[i] = means[c] + spec.sigma * rng.standard_normal(shape)
    return LabeledTensorSet(X, y)


def class_mean_distances(data):
    """Pairwise Euclidean distances between empirical class means."""
    means = np.stack([data.samples(c).mean(axis=0).ravel() for c in data.classes])
    diff = means[:, None, :] - means[None, :, :]
    return np.sqrt(np.sum(diff**2, axis=-1))


def per_class_split(y, n_train=None, fraction=None, rng=None):
    """Random per-class train/test index split.

    Either ``n_train`` samples or ``fraction`` of each class go to training
    (at least one sample stays in each part when the class allows it).
    """
    y = np.asarray(y)
    rng = np.random.default_rng(rng)
    if (n_train is None) == (fraction is None):
        raise ValueError("give exactly one of n_train and fraction")
    train, test = [], []
    for c in np.unique(y):
        idx = np.flatnonzero(y == c)
        perm = rng.permutation(idx)
        k = n_train if n_train is not None else int(round(fraction * idx.size))
        if idx.size > 1:
            k = min(max(k, 1), idx.size - 1)
        else:
            k = 1
        train.append(perm[:k])
        test.append(perm[k:])
    return np.sort(np.concatenate(train)), np.sort(np.concatenate(test))
