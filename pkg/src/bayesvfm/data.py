"""Well datasets: representation, CSV I/O, standardization, chronological
splits, and a synthetic well generator.

The generator stands in for field data. Its ground truth is a simplified
choke equation,

    z = C * u^kappa * sqrt(p1 - p2) * h(eta),

with h(eta) = 1/sqrt(rho_mix) and rho_mix a relative mixture density
(oil 0.80, gas 0.15, water 1.00). Reservoir decline is modeled by a
linear drop in p1; the operator compensates by stepwise opening of the
choke, mirroring how wells are run through the decline phase.
Measurements are y = z + eps with eps ~ N(0, (sqrt(pi/2) * Er * z)^2),
so the expected relative error E|y - z|/z equals the instrument MAPE Er.
"""

import csv
import warnings
from dataclasses import dataclass, replace

import numpy as np

from .errors import ConfigurationError
from .model import FEATURE_NAMES, N_FEATURES

METER_TYPES = ("MPFM", "TestSeparator")
CSV_HEADER = ("timestamp",) + FEATURE_NAMES + ("y", "meter")

# Relative densities entering the mixture factor h(eta).
RHO_OIL, RHO_GAS, RHO_WATER = 0.80, 0.15, 1.00


@dataclass(eq=False)
class WellDataset:
    """Time-ordered flow records for one well.

    features columns follow FEATURE_NAMES; y is the measured total
    volumetric flow rate (Sm^3/h); meter is a per-record instrument tag
    (constant within a well in practice).
    """

    timestamps: np.ndarray  # datetime64[s], strictly increasing
    features: np.ndarray    # (n, 7)
    y: np.ndarray           # (n,)
    meter: np.ndarray       # (n,) of str

    def __post_init__(self):
        self.timestamps = np.asarray(self.timestamps, dtype="datetime64[s]")
        self.features = np.asarray(self.features, dtype=float)
        self.y = np.asarray(self.y, dtype=float).ravel()
        self.meter = np.asarray(self.meter, dtype=object)
        self.validate()

    def validate(self) -> None:
        n = len(self.y)
        if self.features.shape != (n, N_FEATURES):
            raise ValueError(f"features shape {self.features.shape} != ({n}, {N_FEATURES})")
        if self.timestamps.shape != (n,) or self.meter.shape != (n,):
            raise ValueError("timestamps/meter lengths do not match y")
        if n == 0:
            raise ValueError("dataset is empty")
        if np.any(np.diff(self.timestamps.astype("int64")) <= 0):
            raise ValueError("timestamps must be strictly increasing")
        if np.any(self.y <= 0):
            bad = int(np.argmax(self.y <= 0))
            raise ValueError(f"flow rate must be positive, record {bad} has y={self.y[bad]}")
        u, p1, p2 = self.features[:, 0], self.features[:, 1], self.features[:, 2]
        eta_oil, eta_gas = self.features[:, 5], self.features[:, 6]
        if np.any((u < 0) | (u > 1)):
            raise ValueError("choke opening outside [0, 1]")
        if np.any(p2 <= 0) or np.any(p1 < p2):
            raise ValueError("pressures must satisfy p1 >= p2 > 0")
        if np.any(eta_oil < 0) or np.any(eta_gas < 0) or np.any(eta_oil + eta_gas > 1 + 1e-12):
            raise ValueError("mass fractions must be nonnegative with eta_oil + eta_gas <= 1")
        unknown = set(self.meter.tolist()) - set(METER_TYPES)
        if unknown:
            raise ValueError(f"unknown meter type(s) {sorted(unknown)}")

    def __len__(self) -> int:
        return len(self.y)

    @property
    def meter_type(self) -> str:
        kinds = set(self.meter.tolist())
        if len(kinds) != 1:
            raise ValueError(f"dataset mixes meter types {sorted(kinds)}")
        return kinds.pop()

    def subset(self, index) -> "WellDataset":
        return WellDataset(self.timestamps[index], self.features[index],
                           self.y[index], self.meter[index])


# ---------------------------------------------------------------------------
# CSV I/O
# ---------------------------------------------------------------------------

def _format_timestamp(ts: np.datetime64) -> str:
    return np.datetime_as_string(ts, unit="s") + "Z"


def write_csv(dataset: WellDataset, path) -> None:
    """Write the canonical CSV layout (ISO-8601 UTC timestamps, full-
    precision decimals)."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(CSV_HEADER)
        for i in range(len(dataset)):
            row = [_format_timestamp(dataset.timestamps[i])]
            row += [repr(float(v)) for v in dataset.features[i]]
            row.append(repr(float(dataset.y[i])))
            row.append(str(dataset.meter[i]))
            writer.writerow(row)


def read_csv(path) -> WellDataset:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = tuple(next(reader, ()))
        if header != CSV_HEADER:
            raise ConfigurationError(f"{path}: unexpected header {header}")
        stamps, feats, ys, meters = [], [], [], []
        for row in reader:
            if len(row) != len(CSV_HEADER):
                raise ConfigurationError(f"{path}: row has {len(row)} fields")
            stamps.append(np.datetime64(row[0].rstrip("Z").replace("+00:00", ""), "s"))
            feats.append([float(v) for v in row[1:1 + N_FEATURES]])
            ys.append(float(row[1 + N_FEATURES]))
            meters.append(row[2 + N_FEATURES])
    if not ys:
        raise ConfigurationError(f"{path}: no records")
    return WellDataset(np.array(stamps), np.array(feats), np.array(ys),
                       np.array(meters, dtype=object))


# ---------------------------------------------------------------------------
# Standardization
# ---------------------------------------------------------------------------

@dataclass(eq=False)
class StandardizationStats:
    """Training-split means and stds for features and target."""

    feature_mean: np.ndarray
    feature_std: np.ndarray
    y_mean: float
    y_std: float

    @classmethod
    def from_dataset(cls, dataset: WellDataset) -> "StandardizationStats":
        return cls.from_arrays(dataset.features, dataset.y)

    @classmethod
    def from_arrays(cls, features: np.ndarray, y: np.ndarray) -> "StandardizationStats":
        features = np.asarray(features, dtype=float)
        y = np.asarray(y, dtype=float)
        f_std = features.std(axis=0)
        for j, s in enumerate(f_std):
            if s <= 0:
                raise ConfigurationError(
                    f"feature {FEATURE_NAMES[j]!r} has zero variance; cannot standardize")
        y_std = float(y.std())
        if y_std <= 0:
            raise ConfigurationError("target has zero variance; cannot standardize")
        return cls(features.mean(axis=0), f_std, float(y.mean()), y_std)

    @classmethod
    def identity(cls, n_features: int = N_FEATURES) -> "StandardizationStats":
        """No-op stats for models trained on already-scaled data."""
        return cls(np.zeros(n_features), np.ones(n_features), 0.0, 1.0)


def standardize(dataset_or_features, stats: StandardizationStats, y=None):
    """Affine transform to zero-mean/unit-variance model space.

    Accepts a WellDataset (returns (x_std, y_std)) or a feature array
    plus optional y.
    """
    if isinstance(dataset_or_features, WellDataset):
        ds = dataset_or_features
        return standardize(ds.features, stats, ds.y)
    x = (np.asarray(dataset_or_features, dtype=float) - stats.feature_mean) / stats.feature_std
    if y is None:
        return x
    return x, (np.asarray(y, dtype=float) - stats.y_mean) / stats.y_std


def destandardize_y(y_std, stats: StandardizationStats):
    """Inverse of the target transform (exact round-trip)."""
    return np.asarray(y_std, dtype=float) * stats.y_std + stats.y_mean


# ---------------------------------------------------------------------------
# Chronological splits
# ---------------------------------------------------------------------------

def _window_delta(window_days: float) -> np.timedelta64:
    return np.timedelta64(int(round(window_days * 86400)), "s")


def _check_span(dataset: WellDataset, window_days: float) -> None:
    span = dataset.timestamps[-1] - dataset.timestamps[0]
    if span <= 3 * _window_delta(window_days):
        raise ConfigurationError(
            f"dataset spans {span / np.timedelta64(1, 'D'):.1f} days; "
            f"need more than {3 * window_days:.0f} for a {window_days:.0f}-day test window")


def split_historical(dataset: WellDataset, window_days: float = 90.0):
    """Hold out a contiguous window in the middle of the series.

    Returns (train, test); train is the remainder with ordering preserved.
    """
    _check_span(dataset, window_days)
    t0, t1 = dataset.timestamps[0], dataset.timestamps[-1]
    mid = t0 + (t1 - t0) // 2
    half = _window_delta(window_days / 2.0)
    test_mask = (dataset.timestamps >= mid - half) & (dataset.timestamps < mid + half)
    if not test_mask.any() or test_mask.all():
        raise ConfigurationError("degenerate historical split")
    return dataset.subset(~test_mask), dataset.subset(test_mask)


def split_future(dataset: WellDataset, window_days: float = 90.0):
    """Hold out the final window of the series. Returns (train, test)."""
    _check_span(dataset, window_days)
    cutoff = dataset.timestamps[-1] - _window_delta(window_days)
    test_mask = dataset.timestamps > cutoff
    if not test_mask.any() or test_mask.all():
        raise ConfigurationError("degenerate future split")
    return dataset.subset(~test_mask), dataset.subset(test_mask)


def validation_split(dataset: WellDataset, fraction: float = 0.2, seed: int = 0):
    """Seeded uniform random split without replacement: (fit, validation)."""
    if not 0.0 < fraction < 1.0:
        raise ConfigurationError(f"fraction must be in (0, 1), got {fraction}")
    n = len(dataset)
    n_val = int(n * fraction)
    if not 1 <= n_val <= n - 1:
        raise ConfigurationError(f"fraction {fraction} of {n} records is degenerate")
    perm = np.random.default_rng(seed).permutation(n)
    val_idx = np.sort(perm[:n_val])
    fit_idx = np.sort(perm[n_val:])
    return dataset.subset(fit_idx), dataset.subset(val_idx)


# ---------------------------------------------------------------------------
# Synthetic wells
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SyntheticWellConfig:
    """Ground truth and sampling settings for one synthetic well.

    Pressure decline (p1_drift_per_day > 0) triggers the compensating
    choke policy: whenever the true rate falls below hold_fraction of
    its initial value the choke opens by u_step, up to u_max. With no
    decline the choke moves between seeded setpoints every
    u_setpoint_every records (0 holds it constant).

    feature_wiggle scales small deterministic oscillations applied to
    temperatures, downstream pressure, and mass fractions so that all
    features carry variance even in stationary configurations; set to 0
    for strictly constant conditions.
    """

    n_records: int = 2000
    cadence_hours: float = 6.0
    start: str = "2020-01-01T00:00:00"
    choke_coefficient: float = 5.0
    choke_exponent: float = 1.5
    u_initial: float = 0.35
    u_step: float = 0.05
    u_max: float = 0.95
    u_setpoint_every: int = 50
    u_setpoint_range: tuple = (0.25, 0.60)
    hold_fraction: float = 0.97
    p1_initial: float = 120.0
    p2_base: float = 30.0
    p1_drift_per_day: float = 0.0
    t1_base: float = 350.0
    t2_base: float = 345.0
    eta_oil_initial: float = 0.70
    eta_oil_drift: float = 0.0
    eta_gas_initial: float = 0.12
    eta_gas_drift: float = 0.0
    feature_wiggle: float = 1.0
    er: float = 0.10
    meter: str = "MPFM"

    def __post_init__(self):
        if self.n_records < 1:
            raise ConfigurationError("n_records must be >= 1")
        if self.choke_coefficient <= 0:
            raise ConfigurationError("choke_coefficient must be positive")
        if self.er < 0:
            raise ConfigurationError("er must be nonnegative")
        if not np.isfinite(self.p1_drift_per_day):
            raise ConfigurationError("p1_drift_per_day must be finite")
        if not 0.0 < self.u_initial <= self.u_max <= 1.0:
            raise ConfigurationError("need 0 < u_initial <= u_max <= 1")
        if self.meter not in METER_TYPES:
            raise ConfigurationError(f"meter must be one of {METER_TYPES}")


def mpfm_config(**overrides) -> SyntheticWellConfig:
    """Dense, noisier sampling typical of a multiphase flow meter."""
    base = dict(meter="MPFM", er=0.10, cadence_hours=6.0)
    base.update(overrides)
    return SyntheticWellConfig(**base)


def separator_config(**overrides) -> SyntheticWellConfig:
    """Sparse, accurate sampling typical of well tests."""
    base = dict(meter="TestSeparator", er=0.025, cadence_hours=48.0)
    base.update(overrides)
    return SyntheticWellConfig(**base)


def drifting_config(base: SyntheticWellConfig | None = None,
                    p1_drift_per_day: float = 0.05,
                    eta_shift: float = 0.12, **overrides) -> SyntheticWellConfig:
    """A declining-reservoir variant: p1 falls, water cut rises, and the
    operator steps the choke open to hold the rate."""
    cfg = base if base is not None else mpfm_config()
    return replace(cfg, p1_drift_per_day=p1_drift_per_day,
                   eta_oil_drift=-eta_shift, eta_gas_drift=eta_shift / 4.0,
                   u_setpoint_every=0, **overrides)


def true_flow_rate(u, p1, p2, eta_oil, eta_gas, config: SyntheticWellConfig):
    """Ground-truth choke equation (vectorized)."""
    eta_wat = 1.0 - eta_oil - eta_gas
    rho = RHO_OIL * eta_oil + RHO_GAS * eta_gas + RHO_WATER * eta_wat
    return (config.choke_coefficient * np.power(u, config.choke_exponent)
            * np.sqrt(p1 - p2) / np.sqrt(rho))


def generate_synthetic_well(config: SyntheticWellConfig, seed: int = 0) -> WellDataset:
    """Deterministic (config, seed) -> WellDataset."""
    rng = np.random.default_rng(seed)
    n = config.n_records
    idx = np.arange(n)
    frac = idx / max(n - 1, 1)
    days = idx * config.cadence_hours / 24.0
    wig = config.feature_wiggle

    p1 = config.p1_initial - config.p1_drift_per_day * days
    p2 = config.p2_base + wig * 0.5 * np.sin(2 * np.pi * idx / 53.0)
    t1 = config.t1_base + wig * 2.0 * np.sin(2 * np.pi * idx / 97.0)
    t2 = config.t2_base + wig * 2.0 * np.sin(2 * np.pi * idx / 97.0 + 0.7)
    eta_oil = (config.eta_oil_initial + config.eta_oil_drift * frac
               + wig * 0.010 * np.sin(2 * np.pi * idx / 71.0))
    eta_gas = (config.eta_gas_initial + config.eta_gas_drift * frac
               + wig * 0.008 * np.sin(2 * np.pi * idx / 61.0 + 1.3))

    valid = p1 > p2
    if not valid.all():
        n_keep = int(np.argmin(valid))
        warnings.warn(f"pressure drift closes p1 <= p2 at record {n_keep}; "
                      f"truncating series to {n_keep} records")
        if n_keep < 2:
            raise ConfigurationError("drift configuration leaves fewer than 2 records")
        n = n_keep
        idx, frac = idx[:n], frac[:n]
        p1, p2, t1, t2 = p1[:n], p2[:n], t1[:n], t2[:n]
        eta_oil, eta_gas = eta_oil[:n], eta_gas[:n]

    # Choke policy (sequential: the compensation rule looks at the rate).
    u = np.empty(n)
    current = config.u_initial
    z_ref = true_flow_rate(current, p1[0], p2[0], eta_oil[0], eta_gas[0], config)
    for i in range(n):
        if config.u_setpoint_every > 0 and i > 0 and i % config.u_setpoint_every == 0:
            current = rng.uniform(*config.u_setpoint_range)
        if config.p1_drift_per_day > 0:
            z_now = true_flow_rate(current, p1[i], p2[i], eta_oil[i], eta_gas[i], config)
            if z_now < config.hold_fraction * z_ref and current + config.u_step <= config.u_max:
                current += config.u_step
        u[i] = current

    z = true_flow_rate(u, p1, p2, eta_oil, eta_gas, config)
    if config.er > 0:
        noise = rng.normal(0.0, np.sqrt(np.pi / 2.0) * config.er * z)
    else:
        noise = np.zeros(n)
    y = z + noise

    start = np.datetime64(config.start, "s")
    step = np.timedelta64(int(round(config.cadence_hours * 3600)), "s")
    timestamps = start + idx * step
    features = np.column_stack([u, p1, p2, t1, t2, eta_oil, eta_gas])
    meter = np.array([config.meter] * n, dtype=object)
    return WellDataset(timestamps, features, y, meter)
