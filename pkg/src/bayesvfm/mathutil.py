"""Small numerically-stable helpers used throughout the package."""

import numpy as np

LOG_2PI = float(np.log(2.0 * np.pi))


def softplus(x):
    """log(1 + exp(x)), stable for large |x|."""
    return np.logaddexp(0.0, x)


def softplus_inv(y):
    """Inverse of softplus: log(exp(y) - 1), valid for y > 0."""
    y = np.asarray(y, dtype=float)
    if np.any(y <= 0):
        raise ValueError("softplus_inv requires positive input")
    return y + np.log(-np.expm1(-y))


def sigmoid(x):
    """Logistic function, stable for large |x|. Derivative of softplus."""
    return np.exp(-np.logaddexp(0.0, -np.asarray(x, dtype=float)))


def gaussian_logpdf(x, mean, std):
    """Elementwise log N(x | mean, std^2)."""
    z = (x - mean) / std
    return -0.5 * LOG_2PI - np.log(std) - 0.5 * z * z
