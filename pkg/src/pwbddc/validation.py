"""Input checks shared by the estimator front ends."""
from __future__ import annotations

import numbers

import numpy as np
from sklearn.utils import check_array


def check_positive_int(value, name: str) -> int:
    if isinstance(value, bool) or not isinstance(value, numbers.Integral) or value < 1:
        raise ValueError(f"{name} must be a positive integer, got {value!r}")
    return int(value)


def check_positive_float(value, name: str, allow_inf: bool = False) -> float:
    try:
        out = float(value)
    except (TypeError, ValueError):
        raise ValueError(f"{name} must be a positive number, got {value!r}") from None
    if not out > 0 or (np.isinf(out) and not allow_inf) or np.isnan(out):
        raise ValueError(f"{name} must be a positive number, got {value!r}")
    return out


def check_choice(value, name: str, choices) -> str:
    if value not in choices:
        raise ValueError(f"{name} must be one of {tuple(choices)}, got {value!r}")
    return value


def check_complex_array(X, name: str = "X", ndim: int = 2, n_features=None):
    """Finite complex array of the given rank, with an optional column count."""
    X = np.asarray(X)
    if X.dtype.kind not in "biufc":
        raise ValueError(f"{name} must be numeric, got dtype {X.dtype}")
    X = X.astype(complex)
    if X.ndim != ndim:
        raise ValueError(f"{name} must be {ndim}-dimensional, got shape {X.shape}")
    if not np.all(np.isfinite(X)):
        raise ValueError(f"{name} contains NaN or infinity")
    if n_features is not None and X.shape[-1] != n_features:
        raise ValueError(f"{name} has {X.shape[-1]} features, expected {n_features}")
    return X


def check_points(X):
    """Points in 3D as a float array of shape ``(n_samples, 3)``."""
    X = check_array(X, dtype=float, ensure_2d=True)
    if X.shape[1] != 3:
        raise ValueError(f"points must have 3 coordinates, got {X.shape[1]}")
    return X


def check_unit_vector(v, name: str = "v0"):
    v = np.asarray(v, dtype=float)
    if v.shape != (3,) or abs(np.linalg.norm(v) - 1) > 1e-12:
        raise ValueError(f"{name} must be a unit 3-vector, got {v!r}")
    return v
