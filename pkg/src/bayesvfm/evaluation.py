"""Evaluation metrics and curves: error percentiles, cumulative
performance, calibration, coverage, and relative errors for the
training-set-size study.

Percentiles use linear interpolation between closest ranks throughout,
so reported tables are reproducible. Predictive intervals are centered
empirical quantile intervals at (1 -/+ c)/2 of the per-point draws; at
level 1 the interval is the full support (-inf, inf) so the calibration
curve ends at exactly 1.
"""

from dataclasses import dataclass, field

import numpy as np

PERCENTILE_LEVELS = (10, 25, 50, 75, 90)
CALIBRATION_LEVELS = tuple(np.arange(5, 100, 5) / 100.0)
CUMULATIVE_THRESHOLDS = tuple(float(t) for t in range(0, 51))


def _paired(y_true, y_pred):
    y_true = np.asarray(y_true, dtype=float).ravel()
    y_pred = np.asarray(y_pred, dtype=float).ravel()
    if y_true.shape != y_pred.shape:
        raise ValueError(f"length mismatch: {y_true.shape} vs {y_pred.shape}")
    if y_true.size == 0:
        raise ValueError("empty input")
    return y_true, y_pred


def mape(y_true, y_pred) -> float:
    """Mean absolute percentage error, in percent."""
    y_true, y_pred = _paired(y_true, y_pred)
    zero = np.nonzero(y_true == 0)[0]
    if zero.size:
        raise ValueError(f"y_true has zero entries (first at index {zero[0]}); MAPE undefined")
    return float(100.0 * np.mean(np.abs(y_true - y_pred) / np.abs(y_true)))


def rmse(y_true, y_pred) -> float:
    """Root mean square error, in flow-rate units."""
    y_true, y_pred = _paired(y_true, y_pred)
    return float(np.sqrt(np.mean((y_true - y_pred) ** 2)))


def percentiles(values, levels=PERCENTILE_LEVELS) -> np.ndarray:
    """Linear-interpolation percentiles at the requested levels."""
    values = np.asarray(values, dtype=float).ravel()
    if values.size == 0:
        raise ValueError("empty input")
    return np.percentile(values, list(levels))


def cumulative_performance(y_true, y_pred, thresholds=CUMULATIVE_THRESHOLDS) -> np.ndarray:
    """Fraction of points within each percent-deviation threshold.

    thresholds must be sorted ascending; the result is nondecreasing in
    [0, 1].
    """
    thresholds = np.asarray(thresholds, dtype=float)
    if np.any(np.diff(thresholds) < 0):
        raise ValueError("thresholds must be sorted ascending")
    y_true, y_pred = _paired(y_true, y_pred)
    zero = np.nonzero(y_true == 0)[0]
    if zero.size:
        raise ValueError(f"y_true has zero entries (first at index {zero[0]})")
    dev = 100.0 * np.abs(y_true - y_pred) / np.abs(y_true)
    return np.array([np.mean(dev <= t) for t in thresholds])


def interval_bounds(y_samples: np.ndarray, level: float):
    """Centered predictive interval per point from empirical quantiles.

    y_samples has shape (n_points, n_draws). Level 1 (and 0 at a single
    median point) follow the underlying continuous distribution: the
    100% interval covers everything.
    """
    if not 0.0 <= level <= 1.0:
        raise ValueError(f"level must be in [0, 1], got {level}")
    if level == 1.0:
        n = y_samples.shape[0]
        return np.full(n, -np.inf), np.full(n, np.inf)
    lo = np.percentile(y_samples, 50.0 * (1.0 - level), axis=1)
    hi = np.percentile(y_samples, 50.0 * (1.0 + level), axis=1)
    return lo, hi


def calibration_curve(y_true, y_samples, levels=CALIBRATION_LEVELS) -> np.ndarray:
    """Observed frequency of measurements inside each nominal centered
    interval of the predictive distribution."""
    y_true = np.asarray(y_true, dtype=float).ravel()
    y_samples = np.asarray(y_samples, dtype=float)
    if y_samples.ndim != 2 or y_samples.shape[0] != y_true.shape[0]:
        raise ValueError(f"y_samples shape {y_samples.shape} does not match {y_true.shape[0]} points")
    if y_true.size == 0:
        raise ValueError("empty test set")
    freqs = []
    for level in levels:
        lo, hi = interval_bounds(y_samples, float(level))
        freqs.append(np.mean((y_true >= lo) & (y_true <= hi)))
    return np.array(freqs)


def coverage_probability(y_true, y_samples, level: float = 0.95) -> float:
    """Single point on the calibration curve."""
    return float(calibration_curve(y_true, y_samples, levels=(level,))[0])


def relative_mape_series(errors, baseline: int = 150) -> dict:
    """Relative errors R_k = E_k / E_baseline for a size study.

    ``errors`` maps training-set size k to its test MAPE E_k. The
    baseline size must be present with a positive error.
    """
    errors = {int(k): float(v) for k, v in dict(errors).items()}
    if baseline not in errors:
        raise ValueError(f"baseline size {baseline} missing from errors")
    e0 = errors[baseline]
    if e0 <= 0:
        raise ValueError(f"baseline error must be positive, got {e0}")
    return {k: errors[k] / e0 for k in sorted(errors)}


# ---------------------------------------------------------------------------
# Report assembly
# ---------------------------------------------------------------------------

@dataclass(eq=False)
class WellEvaluation:
    """Test-set metrics for one well."""

    well_id: str
    meter: str
    n_test: int
    mape: float
    rmse: float
    cumulative: np.ndarray          # over the report's thresholds
    calibration: np.ndarray | None  # over the report's levels; None for MAP
    coverage_95: float | None
    deviations: np.ndarray = field(repr=False, default=None)  # percent deviation per test point


@dataclass(eq=False)
class GroupSummary:
    """Cross-well aggregation for one meter group (or all wells)."""

    n_wells: int
    mape_percentiles: dict
    rmse_percentiles: dict
    cumulative: np.ndarray              # pooled over the group's test points
    calibration_median: np.ndarray | None
    calibration_p25: np.ndarray | None
    calibration_p75: np.ndarray | None
    coverage_95: float | None           # median across wells


@dataclass(eq=False)
class EvaluationReport:
    wells: list
    groups: dict
    thresholds: tuple = CUMULATIVE_THRESHOLDS
    calibration_levels: tuple = CALIBRATION_LEVELS

    def validate(self) -> None:
        """Assert the structural invariants of every table and curve."""
        for well in self.wells:
            _assert_monotone(well.cumulative, "cumulative curve", lo=0.0, hi=1.0)
            if well.calibration is not None:
                _assert_monotone(well.calibration, "calibration curve", lo=0.0, hi=1.0)
        for name, group in self.groups.items():
            for label, percs in (("MAPE", group.mape_percentiles),
                                 ("RMSE", group.rmse_percentiles)):
                values = [percs[f"p{lvl}"] for lvl in PERCENTILE_LEVELS]
                if np.any(np.diff(values) < 0):
                    raise AssertionError(f"group {name}: {label} percentiles not monotone")
            _assert_monotone(group.cumulative, f"group {name} cumulative", lo=0.0, hi=1.0)
            if group.calibration_median is not None:
                _assert_monotone(group.calibration_median, f"group {name} calibration",
                                 lo=0.0, hi=1.0)

    def to_dict(self) -> dict:
        return {
            "thresholds": list(self.thresholds),
            "calibration_levels": [float(c) for c in self.calibration_levels],
            "wells": [{
                "well": w.well_id,
                "meter": w.meter,
                "n_test": w.n_test,
                "mape": w.mape,
                "rmse": w.rmse,
                "coverage_95": w.coverage_95,
            } for w in self.wells],
            "groups": {name: {
                "n_wells": g.n_wells,
                "mape_percentiles": g.mape_percentiles,
                "rmse_percentiles": g.rmse_percentiles,
                "coverage_95": g.coverage_95,
            } for name, g in self.groups.items()},
        }


def _assert_monotone(curve, label, lo=None, hi=None):
    curve = np.asarray(curve, dtype=float)
    if np.any(np.diff(curve) < -1e-12):
        raise AssertionError(f"{label} is not nondecreasing")
    if lo is not None and np.any(curve < lo - 1e-12):
        raise AssertionError(f"{label} dips below {lo}")
    if hi is not None and np.any(curve > hi + 1e-12):
        raise AssertionError(f"{label} exceeds {hi}")


def _percentile_dict(values) -> dict:
    ps = percentiles(values, PERCENTILE_LEVELS)
    return {f"p{lvl}": float(v) for lvl, v in zip(PERCENTILE_LEVELS, ps)}


def _group_summary(wells) -> GroupSummary:
    pooled = np.concatenate([w.deviations for w in wells])
    cumulative = np.array([np.mean(pooled <= t) for t in CUMULATIVE_THRESHOLDS])
    calibrated = [w for w in wells if w.calibration is not None]
    cal_median = cal_p25 = cal_p75 = cov = None
    if calibrated:
        stack = np.vstack([w.calibration for w in calibrated])
        cal_p25, cal_median, cal_p75 = np.percentile(stack, [25, 50, 75], axis=0)
        cov = float(np.median([w.coverage_95 for w in calibrated]))
    return GroupSummary(
        n_wells=len(wells),
        mape_percentiles=_percentile_dict([w.mape for w in wells]),
        rmse_percentiles=_percentile_dict([w.rmse for w in wells]),
        cumulative=cumulative,
        calibration_median=cal_median,
        calibration_p25=cal_p25,
        calibration_p75=cal_p75,
        coverage_95=cov,
    )


GROUP_LABELS = {"MPFM": "mpfm", "TestSeparator": "test_separator"}


def build_report(wells) -> EvaluationReport:
    """Assemble per-well evaluations into the grouped report and check
    its invariants."""
    if not wells:
        raise ValueError("no wells to report on")
    wells = sorted(wells, key=lambda w: w.well_id)
    groups = {"all": _group_summary(wells)}
    for meter, label in GROUP_LABELS.items():
        members = [w for w in wells if w.meter == meter]
        if members:
            groups[label] = _group_summary(members)
    report = EvaluationReport(wells, groups)
    report.validate()
    return report
