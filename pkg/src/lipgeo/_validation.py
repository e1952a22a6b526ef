"""Input validation helpers shared by the estimators and the functional API."""
import os
from concurrent.futures import ThreadPoolExecutor

import numpy as np
from sklearn.utils import check_array


def check_points(X, dim=None, name="X", allow_empty=False):
    """Coerce ``X`` to a finite float64 array of shape (n_points, dim)."""
    X = np.asarray(X, dtype=np.float64)
    if X.ndim == 1:
        X = X.reshape(1, -1) if dim is None or X.shape[0] == dim else X.reshape(-1, 1)
    if allow_empty and X.size == 0:
        return X.reshape(0, dim or X.shape[-1])
    X = check_array(X, dtype=np.float64, ensure_2d=True, input_name=name)
    if dim is not None and X.shape[1] != dim:
        raise ValueError(f"{name} has {X.shape[1]} coordinates, expected {dim}")
    return X


def check_vector(x, name="x"):
    x = np.asarray(x, dtype=np.float64).ravel()
    if not np.all(np.isfinite(x)):
        raise ValueError(f"{name} must be finite")
    return x


def check_positive(value, name):
    value = float(value)
    if not np.isfinite(value) or value <= 0:
        raise ValueError(f"{name} must be a positive finite number, got {value!r}")
    return value


def check_t_grid(t_grid):
    t = np.asarray(t_grid, dtype=np.float64).ravel()
    if t.size == 0:
        raise ValueError("t_grid is empty")
    if np.any(t <= 0) or not np.all(np.isfinite(t)):
        raise ValueError("t_grid values must be positive and finite")
    if np.any(np.diff(t) <= 0):
        raise ValueError("t_grid must be strictly increasing")
    return t


def default_t_grid(t_min, decades=2.0, n=9):
    """Nine log-spaced values over two decades starting at ``t_min``."""
    return np.geomspace(t_min, t_min * 10.0**decades, n)


def thread_cap():
    """Worker count honoring the LIPGEO_THREADS environment variable (default 1)."""
    try:
        return max(1, int(os.environ.get("LIPGEO_THREADS", "1")))
    except ValueError:
        return 1


def ordered_map(fn, items):
    """Map ``fn`` over ``items`` with at most ``thread_cap()`` workers; output order matches input."""
    items = list(items)
    workers = min(thread_cap(), len(items))
    if workers <= 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))
