"""Finite-difference gradient oracle shared by the test modules.

The oracle only evaluates forward passes, so it stays independent of the
tape's backward implementation that it checks.
"""

import numpy as np

EPS = 1e-5


def central_diff(f, arrays, which, eps=EPS):
    """d f / d arrays[which] by central differences; f maps arrays -> scalar."""
    base = arrays[which]
    grad = np.zeros_like(base, dtype=np.float64)
    it = np.nditer(base, flags=["multi_index"])
    for _ in it:
        idx = it.multi_index
        plus = [a.copy() for a in arrays]
        minus = [a.copy() for a in arrays]
        plus[which][idx] += eps
        minus[which][idx] -= eps
        grad[idx] = (f(plus) - f(minus)) / (2.0 * eps)
    return grad


def rel_err(a, b, floor=1e-8):
    """Elementwise |a-b| / max(|a|, |b|, floor), reduced to the maximum."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    denom = np.maximum(np.maximum(np.abs(a), np.abs(b)), floor)
    return float(np.max(np.abs(a - b) / denom))
