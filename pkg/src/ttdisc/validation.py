"""Input checks shared by the estimators."""
import numpy as np
from sklearn.utils.validation import check_array, check_X_y

__all__ = ["check_tensor_X_y", "check_tensor_X", "check_sample_shape", "check_lambda"]


def check_tensor_X_y(X, y, min_modes=1):
    """Validate samples ``(n, I_1, ..., I_N)`` and labels; need two or more classes."""
    X, y = check_X_y(X, y, allow_nd=True, dtype=np.float64, ensure_min_samples=2,
                     y_numeric=False)
    if X.ndim - 1 < min_modes:
        raise ValueError(f"samples need at least {min_modes} modes, got shape {X.shape[1:]}")
    classes = np.unique(y)
    if classes.size < 2:
        raise ValueError("discriminant training needs at least two classes")
    return X, y


def check_tensor_X(X):
    return check_array(X, allow_nd=True, dtype=np.float64, ensure_2d=True)


def check_sample_shape(X, shape):
    if tuple(X.shape[1:]) != tuple(shape):
        raise ValueError(f"samples of shape {X.shape[1:]} do not match the fitted shape {tuple(shape)}")
    return X


def check_lambda(lam):
    lam = float(lam)
    if not lam >= 0:
        raise ValueError(f"lambda must be nonnegative, got {lam}")
    return lam
