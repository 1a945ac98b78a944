"""Storage accounting and the storage-optimal branch count."""
import math

import numpy as np

__all__ = [
    "STRUCTURES",
    "storage_formula",
    "storage_count",
    "normalized_storage",
    "branch_storage",
    "optimal_branch_count",
]

STRUCTURES = ("tt", "2wtt", "3wtt", "td")


def _branches(structure, N):
    try:
        return {"tt": 1, "2wtt": 2, "3wtt": 3, "td": N}[structure]
    except KeyError:
        raise ValueError(f"unknown structure {structure!r}; choose from {STRUCTURES}") from None


def branch_storage(f, N, I, r, C, K):
    """Factor and core element counts for ``f`` branches: ``(N-f) r^2 I + f r I`` and ``r^f C K``."""
    return (N - f) * r * r * I + f * r * I, r**f * C * K


def storage_formula(structure, N, I, r, C, K):
    """Closed-form ``(factors, cores)`` element counts for equal mode sizes and ranks."""
    return branch_storage(_branches(structure, N), N, I, r, C, K)


def storage_count(factors, n_samples, core_shape):
    """Exact stored elements: every factor entry plus one core per sample."""
    n_factor = int(sum(np.asarray(f).size for f in factors))
    n_core = int(n_samples) * math.prod(core_shape)
    return n_factor + n_core


def normalized_storage(factors, n_samples, core_shape, sample_shape):
    """Stored elements relative to the raw training set size."""
    return storage_count(factors, n_samples, core_shape) / (n_samples * math.prod(sample_shape))


def optimal_branch_count(r, I, C, K, N=None):
    """Branch count minimizing ``(N-f) r^2 I + f r I + r^f C K``.

    Returns
    -------
    raw : float
        The stationary point ``log_r((r^2 I - r I) / (C K ln r))``.
    f_hat : int
        ``raw`` rounded, then clamped to ``[1, N]`` (``[1, inf)`` without ``N``).
    """
    if r < 2:
        raise ValueError("rank must be at least 2")
    if min(I, C, K) < 1:
        raise ValueError("I, C and K must be positive")
    arg = (r * r * I - r * I) / (C * K * math.log(r))
    raw = math.log(arg) / math.log(r)
    f_hat = max(1, int(math.floor(raw + 0.5)))
    if N is not None:
        f_hat = min(f_hat, int(N))
    return raw, f_hat
