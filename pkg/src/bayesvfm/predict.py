"""Point predictions and Monte-Carlo predictive posterior summaries.

The predictive distribution is approximated by sampling parameters from
the variational posterior: theta_s ~ q, z_s = f(x, phi_s),
s_s = g(z_s, psi_s), y_s ~ N(z_s, s_s^2). Summaries and intervals are
empirical statistics of these draws, de-standardized to physical units.
Centered intervals use empirical quantiles at (1 -/+ c)/2, matching how
calibration is scored downstream.
"""

import csv
from dataclasses import dataclass

import numpy as np

from .data import StandardizationStats, standardize, destandardize_y
from .inference import VariationalParams
from .model import (Architecture, FlowFeatures, NoiseSpec, FEATURE_NAMES,
                    forward, noise_std, split_theta)

DEFAULT_INTERVAL_LEVELS = (0.5, 0.9, 0.95)
CSV_QUANTILES = (5, 25, 50, 75, 95)


@dataclass(eq=False)
class PredictiveSummary:
    """Monte-Carlo summary of the predictive distribution at one input.

    Stds decompose the predictive spread: epistemic is the spread of the
    network mean over posterior draws, aleatoric the root-mean-square
    sampled noise level, and total the spread of simulated measurements
    (total^2 ~= epistemic^2 + aleatoric^2 up to Monte-Carlo error).
    All values are in physical units.
    """

    mean: float
    median: float
    std_epistemic: float
    std_aleatoric: float
    std_total: float
    interval_levels: tuple
    intervals: tuple  # ((lo, hi), ...) matching interval_levels
    n_samples: int


def _as_input_matrix(x, arch: Architecture) -> np.ndarray:
    if isinstance(x, FlowFeatures):
        x = x.to_array()
    x = np.asarray(x, dtype=float)
    if x.ndim == 1:
        x = x[None, :]
    if x.ndim != 2 or x.shape[1] != arch.n_inputs:
        raise ValueError(f"inputs have shape {x.shape}, expected (n, {arch.n_inputs})")
    return x


def _check_q(q: VariationalParams) -> None:
    if not np.all(np.isfinite(q.mu)) or np.any(np.isnan(q.rho)):
        raise ValueError("variational parameters are degenerate (non-finite)")


def predictive_samples(x, q: VariationalParams, spec: NoiseSpec,
                       arch: Architecture, stats: StandardizationStats,
                       n_samples: int = 1000, seed: int = 0):
    """Draw the predictive Monte-Carlo ensemble for a batch of inputs.

    Returns (z, s, y): arrays of shape (n_points, n_samples) holding the
    network means, noise stds, and simulated measurements, all in
    physical units. Inputs are given in physical units.
    """
    if n_samples < 2:
        raise ValueError(f"need at least 2 samples, got {n_samples}")
    _check_q(q)
    x = _as_input_matrix(x, arch)
    x_std = standardize(x, stats)
    rng = np.random.default_rng(seed)
    n = x.shape[0]
    z = np.empty((n, n_samples))
    s = np.empty((n, n_samples))
    sigma = q.sigma
    for j in range(n_samples):
        theta = q.mu + sigma * rng.normal(size=q.k)
        phi, psi = split_theta(theta, arch, spec)
        zj = forward(x_std, phi, arch)
        z[:, j] = zj
        s[:, j] = noise_std(zj, psi, spec)
    y = z + s * rng.normal(size=z.shape)
    return (destandardize_y(z, stats), s * stats.y_std, destandardize_y(y, stats))


def summarize_samples(z_row: np.ndarray, s_row: np.ndarray, y_row: np.ndarray,
                      interval_levels=DEFAULT_INTERVAL_LEVELS) -> PredictiveSummary:
    """Summary statistics for one input's predictive draws."""
    levels = tuple(float(c) for c in interval_levels)
    if any(not 0.0 <= c <= 1.0 for c in levels):
        raise ValueError(f"interval levels must lie in [0, 1], got {levels}")
    intervals = []
    for c in levels:
        lo, hi = np.percentile(y_row, [50.0 * (1.0 - c), 50.0 * (1.0 + c)])
        intervals.append((float(lo), float(hi)))
    return PredictiveSummary(
        mean=float(np.mean(z_row)),
        median=float(np.median(y_row)),
        std_epistemic=float(np.std(z_row, ddof=1)),
        std_aleatoric=float(np.sqrt(np.mean(s_row ** 2))),
        std_total=float(np.std(y_row, ddof=1)),
        interval_levels=levels,
        intervals=tuple(intervals),
        n_samples=len(y_row),
    )


def posterior_predictive(x, q: VariationalParams, spec: NoiseSpec,
                         arch: Architecture, stats: StandardizationStats,
                         n_samples: int = 1000, seed: int = 0,
                         interval_levels=DEFAULT_INTERVAL_LEVELS) -> PredictiveSummary:
    """Predictive summary for a single input (physical units)."""
    z, s, y = predictive_samples(x, q, spec, arch, stats, n_samples, seed)
    return summarize_samples(z[0], s[0], y[0], interval_levels)


def map_predict(x, theta: np.ndarray, spec: NoiseSpec, arch: Architecture,
                stats: StandardizationStats) -> float:
    """De-standardized point prediction f(x, phi_hat)."""
    x = _as_input_matrix(x, arch)
    if x.shape[0] != 1:
        raise ValueError("map_predict takes a single input; use map_predict_batch")
    return float(map_predict_batch(x, theta, spec, arch, stats)[0])


def map_predict_batch(x, theta: np.ndarray, spec: NoiseSpec, arch: Architecture,
                      stats: StandardizationStats) -> np.ndarray:
    x = _as_input_matrix(x, arch)
    phi, _ = split_theta(np.asarray(theta, dtype=float), arch, spec)
    z = forward(standardize(x, stats), phi, arch)
    return destandardize_y(z, stats)


def map_predictive_samples(x, theta: np.ndarray, spec: NoiseSpec,
                           arch: Architecture, stats: StandardizationStats,
                           n_samples: int = 1000, seed: int = 0):
    """Simulated measurements under a MAP point estimate.

    The point estimate carries no parameter uncertainty, so z is
    constant across draws and the spread is purely the noise model
    (for the fixed model, N(f, sigma_n^2)). Shapes match
    predictive_samples.
    """
    if n_samples < 2:
        raise ValueError(f"need at least 2 samples, got {n_samples}")
    x = _as_input_matrix(x, arch)
    phi, psi = split_theta(np.asarray(theta, dtype=float), arch, spec)
    z_std = forward(standardize(x, stats), phi, arch)
    s_std = noise_std(z_std, psi, spec)
    rng = np.random.default_rng(seed)
    z = np.repeat(z_std[:, None], n_samples, axis=1)
    s = np.repeat(s_std[:, None], n_samples, axis=1)
    y = z + s * rng.normal(size=z.shape)
    return (destandardize_y(z, stats), s * stats.y_std, destandardize_y(y, stats))


PREDICTION_CSV_HEADER = FEATURE_NAMES + (
    "mean", "std_epistemic", "std_aleatoric", "std_total",
) + tuple(f"q{q:02d}" for q in CSV_QUANTILES)


def write_predictions_csv(path, x: np.ndarray, z: np.ndarray, s: np.ndarray,
                          y: np.ndarray) -> None:
    """One row per input: features, summary stats, and the standard
    quantiles of the simulated measurements."""
    x = np.asarray(x, dtype=float)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(PREDICTION_CSV_HEADER)
        for i in range(x.shape[0]):
            qs = np.percentile(y[i], CSV_QUANTILES)
            row = [repr(float(v)) for v in x[i]]
            row += [repr(float(np.mean(z[i]))),
                    repr(float(np.std(z[i], ddof=1))),
                    repr(float(np.sqrt(np.mean(s[i] ** 2)))),
                    repr(float(np.std(y[i], ddof=1)))]
            row += [repr(float(v)) for v in qs]
            writer.writerow(row)
