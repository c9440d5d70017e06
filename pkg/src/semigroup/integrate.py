"""Quadrature of sampled decay curves."""

from typing import Tuple

import numpy as np

from utils.errors import ShapeError


def exp_trapezoid(t, values) -> Tuple[float, np.ndarray]:
    """
    Integrate a sampled curve over [t[0], t[-1]].

    Each segment with positive endpoints is integrated as the exponential
    through them, h (v1 - v0) / log(v1 / v0), which is exact for e^{-ct}
    curves; other segments fall back to the plain trapezoid.

    Returns:
        Tuple (integral, w) where w are the trapezoid weights, used to
        propagate per-point standard errors as sum w_k se_k
    """
    t = np.asarray(t, dtype=float)
    v = np.asarray(values, dtype=float)
    if t.shape != v.shape:
        raise ShapeError(f"{v.shape[0]} values for {t.shape[0]} grid points")
    weights = np.zeros_like(t)
    if t.size < 2:
        return 0.0, weights
    h = np.diff(t)
    v0, v1 = v[:-1], v[1:]
    seg = 0.5 * h * (v0 + v1)
    positive = (v0 > 0) & (v1 > 0) & (v0 != v1)
    if np.any(positive):
        ratio = np.log(v1[positive] / v0[positive])
        seg[positive] = h[positive] * (v1[positive] - v0[positive]) / ratio
    weights[:-1] += 0.5 * h
    weights[1:] += 0.5 * h
    return float(np.sum(seg)), weights
