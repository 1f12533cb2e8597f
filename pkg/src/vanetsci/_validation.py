"""Small input-checking helpers shared by the estimators and generators."""

from __future__ import annotations

import numbers

import numpy as np
from sklearn.utils.validation import check_array, check_consistent_length

from .exceptions import ConfigError, FitError


def check_positive(value, name, strict=True):
    if not isinstance(value, numbers.Real) or not np.isfinite(value):
        raise ConfigError(f"{name} must be a finite real number, got {value!r}")
    if strict and value <= 0:
        raise ConfigError(f"{name} must be > 0, got {value}")
    if not strict and value < 0:
        raise ConfigError(f"{name} must be >= 0, got {value}")
    return float(value)


def check_unit_interval(value, name, open_low=False):
    value = float(value)
    if not (0.0 < value <= 1.0 if open_low else 0.0 <= value <= 1.0):
        bounds = "(0, 1]" if open_low else "[0, 1]"
        raise ConfigError(f"{name} must lie in {bounds}, got {value}")
    return value


def check_random_state(seed):
    """Turn ``seed`` into a :class:`numpy.random.Generator`."""
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def check_xy(X, y, min_samples=3):
    """Validate a 1-D regression problem and return flat float arrays.

    ``X`` may be 1-D or a single-column 2-D array, as scikit-learn users
    tend to pass either.
    """
    X = np.asarray(X, dtype=float)
    if X.ndim == 2:
        if X.shape[1] != 1:
            raise FitError(f"expected a single feature column, got shape {X.shape}")
        X = X[:, 0]
    X = check_array(X.reshape(-1, 1), dtype=float, ensure_min_samples=1)[:, 0]
    y = check_array(np.asarray(y, dtype=float).reshape(-1, 1), dtype=float)[:, 0]
    check_consistent_length(X, y)
    if X.size < min_samples:
        raise FitError(f"need at least {min_samples} points, got {X.size}")
    return X, y


def check_x(X):
    X = np.asarray(X, dtype=float)
    if X.ndim == 2:
        if X.shape[1] != 1:
            raise FitError(f"expected a single feature column, got shape {X.shape}")
        X = X[:, 0]
    return check_array(X.reshape(-1, 1), dtype=float, ensure_min_samples=1)[:, 0]
