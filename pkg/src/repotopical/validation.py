"""Input validation helpers used by the estimators and metric functions."""

import numpy as np

from .errors import ValidationError


def as_float_matrix(x, name="X"):
    """Coerce to a 2-D float64 array, rejecting anything non-finite."""
    arr = np.asarray(x, dtype=np.float64)
    if arr.ndim != 2:
        raise ValidationError(f"{name} must be 2-D, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValidationError(f"{name} contains non-finite values")
    return arr


def as_binary_matrix(y, name="y"):
    """Coerce to a 2-D {0,1} integer array."""
    arr = np.asarray(y)
    if arr.ndim != 2:
        raise ValidationError(f"{name} must be 2-D, got shape {arr.shape}")
    if not np.isin(arr, (0, 1)).all():
        raise ValidationError(f"{name} must contain only 0/1 entries")
    return arr.astype(np.int64)


def check_same_shape(a, b, names=("y", "scores")):
    if a.shape != b.shape:
        raise ValidationError(
            f"{names[0]} and {names[1]} shapes differ: {a.shape} vs {b.shape}"
        )


def check_fitted(estimator, attribute):
    """Raise unless ``estimator`` carries the given fitted attribute."""
    if getattr(estimator, attribute, None) is None:
        raise ValidationError(
            f"{type(estimator).__name__} is not fitted (missing {attribute})"
        )
