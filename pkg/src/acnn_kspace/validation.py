"""Input validation helpers shared by the estimators and the functional API."""

import numbers

import numpy as np


class ShapeError(ValueError):
    """Raised when array dimensions do not agree with what an operation needs."""


def check_finite(x, name="input"):
    x = np.asarray(x)
    if not np.all(np.isfinite(x)):
        n_bad = int(np.size(x) - np.count_nonzero(np.isfinite(x)))
        raise ValueError(f"{name} contains {n_bad} non-finite value(s) (NaN or Inf)")
    return x


def check_ndim(x, ndim, name="input"):
    x = np.asarray(x)
    if x.ndim != ndim:
        raise ShapeError(f"{name} must be {ndim}-dimensional, got shape {x.shape}")
    return x


def check_same_shape(a, b, names=("a", "b")):
    a, b = np.asarray(a), np.asarray(b)
    if a.shape != b.shape:
        raise ShapeError(f"shape mismatch: {names[0]} {a.shape} vs {names[1]} {b.shape}")
    return a, b


def check_positive_int(value, name, minimum=1):
    if not isinstance(value, numbers.Integral) or isinstance(value, bool) or value < minimum:
        raise ValueError(f"{name} must be an integer >= {minimum}, got {value!r}")
    return int(value)


def check_random_state(seed):
    """Return a ``numpy.random.Generator`` for ``seed`` (None, int or Generator)."""
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)
