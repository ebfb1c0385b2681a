"""Command-line interface.

Subcommands: generate, train, predict, evaluate, size-study. Every
command resolves its settings from built-in defaults, then an optional
JSON config file (--config), then explicit flags, and writes a manifest
(resolved config, config hash, input/output file hashes) alongside its
outputs. Re-running a command from its manifest reproduces the outputs
byte for byte.

Exit codes: 0 success, 2 configuration error, 3 numerical failure.
Errors are emitted to stderr as single-line JSON.
"""

import argparse
import csv
import hashlib
import json
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import data as welldata
from . import evaluation, figures
from .checkpoint import Checkpoint, load_checkpoint, save_checkpoint
from .errors import ConfigurationError, NumericalError
from .inference import TrainConfig, map_fit, vi_fit
from .model import Architecture, NoiseSpec, default_prior
from .predict import (map_predict_batch, map_predictive_samples,
                      predictive_samples, write_predictions_csv)

EXIT_OK, EXIT_CONFIG, EXIT_NUMERICAL = 0, 2, 3

METER_CHOICES = {"mpfm": "MPFM", "separator": "TestSeparator"}
DEFAULT_ER = {"MPFM": 0.10, "TestSeparator": 0.025}
DEFAULT_SIZES = (150, 200) + tuple(range(300, 1101, 100))


class _Parser(argparse.ArgumentParser):
    """argparse that reports usage problems as configuration errors."""

    def error(self, message):
        raise ConfigurationError(message)


# ---------------------------------------------------------------------------
# Config resolution and manifests
# ---------------------------------------------------------------------------

def _load_config_file(path) -> dict:
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except (OSError, json.JSONDecodeError) as err:
        raise ConfigurationError(f"cannot read config {path}: {err}") from err
    if not isinstance(doc, dict):
        raise ConfigurationError(f"config {path} must hold a JSON object")
    if "config" in doc and "command" in doc:  # a manifest: re-run from it
        doc = doc["config"]
    return doc


def _resolve(defaults: dict, args: argparse.Namespace) -> dict:
    """defaults <- config file <- explicit flags."""
    resolved = dict(defaults)
    if getattr(args, "config", None):
        file_cfg = _load_config_file(args.config)
        unknown = set(file_cfg) - set(defaults)
        if unknown:
            raise ConfigurationError(f"unknown config keys {sorted(unknown)}")
        resolved.update(file_cfg)
    for key in defaults:
        value = getattr(args, key, None)
        if value is not None:
            resolved[key] = value
    return resolved


def _sha256(path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 16), b""):
            digest.update(block)
    return digest.hexdigest()


def _config_hash(config: dict) -> str:
    blob = json.dumps(config, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()


def _write_manifest(out_path: Path, command: str, config: dict,
                    inputs, outputs) -> Path:
    if out_path.is_dir():
        manifest_path = out_path / "manifest.json"
    else:
        manifest_path = out_path.with_name(out_path.name + ".manifest.json")
    doc = {
        "command": command,
        "config": config,
        "config_sha256": _config_hash(config),
        "inputs": {str(p): _sha256(p) for p in sorted(map(str, inputs))},
        "outputs": {str(p): _sha256(p) for p in sorted(map(str, outputs))},
    }
    with open(manifest_path, "w") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return manifest_path


def _parse_hidden(text) -> tuple:
    if isinstance(text, (list, tuple)):
        return tuple(int(v) for v in text)
    text = str(text).strip()
    if not text:
        return ()
    try:
        return tuple(int(tok) for tok in text.split(","))
    except ValueError as err:
        raise ConfigurationError(f"bad hidden widths {text!r}: {err}") from err


def _parse_sizes(text) -> tuple:
    if isinstance(text, (list, tuple)):
        return tuple(int(v) for v in text)
    try:
        return tuple(int(tok) for tok in str(text).split(","))
    except ValueError as err:
        raise ConfigurationError(f"bad sizes {text!r}: {err}") from err


def _collect_files(paths, suffix: str):
    """Expand directories to their sorted *.suffix members."""
    out = []
    for raw in paths:
        p = Path(raw)
        if p.is_dir():
            found = sorted(p.glob(f"*{suffix}"))
            if not found:
                raise ConfigurationError(f"no *{suffix} files in {p}")
            out.extend(found)
        elif p.exists():
            out.append(p)
        else:
            raise ConfigurationError(f"no such file: {p}")
    return out


def _write_curve_csv(path, header, columns) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in zip(*columns):
            writer.writerow([repr(float(v)) for v in row])


# ---------------------------------------------------------------------------
# generate
# ---------------------------------------------------------------------------

GENERATE_DEFAULTS = {
    "wells": 1,
    "meter": "mpfm",
    "records": 2000,
    "cadence_hours": None,   # meter preset unless set
    "er": None,              # meter preset unless set
    "drift_per_day": 0.0,
    "seed": 0,
}


def cmd_generate(args) -> int:
    cfg = _resolve(GENERATE_DEFAULTS, args)
    if cfg["meter"] not in METER_CHOICES:
        raise ConfigurationError(f"meter must be one of {sorted(METER_CHOICES)}")
    if cfg["wells"] < 1:
        raise ConfigurationError("wells must be >= 1")
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)

    preset = (welldata.mpfm_config if cfg["meter"] == "mpfm"
              else welldata.separator_config)
    base = preset(n_records=int(cfg["records"]))
    overrides = {}
    if cfg["er"] is not None:
        overrides["er"] = float(cfg["er"])
    if cfg["cadence_hours"] is not None:
        overrides["cadence_hours"] = float(cfg["cadence_hours"])
    if cfg["drift_per_day"] > 0:
        base = welldata.drifting_config(base, p1_drift_per_day=float(cfg["drift_per_day"]))
    if overrides:
        base = replace(base, **overrides)

    outputs = []
    for i in range(int(cfg["wells"])):
        dataset = welldata.generate_synthetic_well(base, seed=[int(cfg["seed"]), i])
        path = out_dir / f"well_{i:03d}.csv"
        welldata.write_csv(dataset, path)
        outputs.append(path)
    _write_manifest(out_dir, "generate", cfg, [], outputs)
    print(f"wrote {len(outputs)} well(s) to {out_dir}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# train
# ---------------------------------------------------------------------------

TRAIN_DEFAULTS = {
    "data": None,
    "split": "historical",
    "window_days": 90.0,
    "method": "vi",
    "noise": "hetero",
    "hidden": "50,50,50",
    "epochs": 1000,
    "batch_size": 64,
    "learning_rate": 1e-3,
    "patience": 50,
    "mc_samples": 1,
    "validation_fraction": 0.2,
    "er": None,              # instrument MAPE; defaults by meter type
    "sigma_n": None,         # physical units; defaults to sqrt(pi/2)*er*mean(y)
    "noise_prior_std": 0.5,
    "bias_prior_std": 0.1,
    "seed": 0,
}


def _prepare_training(cfg):
    """Shared by train and the size study: split, standardize, build
    spec/prior from one well file."""
    dataset = welldata.read_csv(cfg["data"])
    split = welldata.split_historical if cfg["split"] == "historical" else welldata.split_future
    train_ds, test_ds = split(dataset, window_days=float(cfg["window_days"]))
    return dataset, train_ds, test_ds


def _model_setup(train_features, train_y, meter_type, cfg):
    """Returns (arch, spec, prior, stats, er, sigma_n_physical)."""
    stats = welldata.StandardizationStats.from_arrays(train_features, train_y)
    er = cfg["er"]
    if er is None:
        er = DEFAULT_ER[meter_type]
    er = float(er)
    arch = Architecture(_parse_hidden(cfg["hidden"]))
    mean_flow_std_units = float(np.mean(train_y)) / stats.y_std
    sigma_n_phys = None
    if cfg["noise"] == "fixed":
        sigma_n_phys = cfg["sigma_n"]
        if sigma_n_phys is None:
            sigma_n_phys = float(np.sqrt(np.pi / 2.0) * er * np.mean(train_y))
        sigma_n_phys = float(sigma_n_phys)
        spec = NoiseSpec.fixed(sigma_n_phys / stats.y_std)
    elif cfg["noise"] == "homo":
        spec = NoiseSpec.homoscedastic()
    elif cfg["noise"] == "hetero":
        spec = NoiseSpec.heteroscedastic()
    else:
        raise ConfigurationError(f"unknown noise model {cfg['noise']!r}")
    prior = default_prior(arch, spec, er=er, mean_flow=mean_flow_std_units,
                          bias_std=float(cfg["bias_prior_std"]),
                          noise_d=float(cfg["noise_prior_std"]))
    return arch, spec, prior, stats, er, sigma_n_phys


def cmd_train(args) -> int:
    cfg = _resolve(TRAIN_DEFAULTS, args)
    if not cfg["data"]:
        raise ConfigurationError("train requires --data")
    if cfg["split"] not in ("historical", "future"):
        raise ConfigurationError("split must be 'historical' or 'future'")
    if cfg["method"] not in ("map", "vi"):
        raise ConfigurationError("method must be 'map' or 'vi'")
    if cfg["method"] == "map" and cfg["noise"] != "fixed":
        raise ConfigurationError("MAP estimation requires --noise fixed")

    _, train_ds, _ = _prepare_training(cfg)
    arch, spec, prior, stats, er, sigma_n_phys = _model_setup(
        train_ds.features, train_ds.y, train_ds.meter_type, cfg)
    x_std, y_std = welldata.standardize(train_ds, stats)

    train_config = TrainConfig(
        learning_rate=float(cfg["learning_rate"]),
        batch_size=int(cfg["batch_size"]),
        mc_samples=int(cfg["mc_samples"]),
        max_epochs=int(cfg["epochs"]),
        patience=int(cfg["patience"]),
        validation_fraction=float(cfg["validation_fraction"]),
        seed=int(cfg["seed"]),
    )
    fit = map_fit if cfg["method"] == "map" else vi_fit
    result = fit(x_std, y_std, prior, spec, arch, train_config)

    out_path = Path(args.out)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    info = {
        "split": cfg["split"],
        "window_days": float(cfg["window_days"]),
        "noise": cfg["noise"],
        "er": er,
        "sigma_n_physical": sigma_n_phys,
        "n_train": len(train_ds),
        "best_epoch": int(result.best_epoch),
        "n_epochs": int(result.n_epochs),
        "best_val_loss": float(result.val_history[result.best_epoch]),
        "meter": train_ds.meter_type,
    }
    save_checkpoint(out_path, Checkpoint(cfg["method"], arch, spec, prior,
                                         result.params, stats, int(cfg["seed"]), info))
    _write_manifest(out_path, "train", cfg, [cfg["data"]], [out_path])
    print(f"trained {cfg['method']} model: best epoch {result.best_epoch} "
          f"of {result.n_epochs}, val loss {info['best_val_loss']:.5f}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# predict
# ---------------------------------------------------------------------------

PREDICT_DEFAULTS = {
    "checkpoint": None,
    "data": None,
    "samples": 1000,
    "seed": 0,
}


def cmd_predict(args) -> int:
    cfg = _resolve(PREDICT_DEFAULTS, args)
    if not cfg["checkpoint"] or not cfg["data"]:
        raise ConfigurationError("predict requires --checkpoint and --data")
    ckpt = load_checkpoint(cfg["checkpoint"])
    dataset = welldata.read_csv(cfg["data"])
    if ckpt.is_variational:
        z, s, y = predictive_samples(dataset.features, ckpt.params, ckpt.spec,
                                     ckpt.arch, ckpt.stats,
                                     n_samples=int(cfg["samples"]), seed=int(cfg["seed"]))
    else:
        z, s, y = map_predictive_samples(dataset.features, ckpt.params, ckpt.spec,
                                         ckpt.arch, ckpt.stats,
                                         n_samples=int(cfg["samples"]), seed=int(cfg["seed"]))
    out_path = Path(args.out)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    write_predictions_csv(out_path, dataset.features, z, s, y)
    _write_manifest(out_path, "predict", cfg,
                    [cfg["checkpoint"], cfg["data"]], [out_path])
    print(f"wrote {len(dataset)} predictions to {out_path}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# evaluate
# ---------------------------------------------------------------------------

EVALUATE_DEFAULTS = {
    "data": None,
    "checkpoints": None,
    "split": None,          # default: each checkpoint's training split
    "window_days": None,
    "samples": 200,
    "seed": 0,
    "jobs": 1,
    "figures": True,
}


def _evaluate_one_well(task) -> dict:
    """Worker: evaluate one (dataset, checkpoint) pair on its test window."""
    data_path, ckpt_path, split, window_days, samples, seed = task
    ckpt = load_checkpoint(ckpt_path)
    dataset = welldata.read_csv(data_path)
    split = split or ckpt.train_info.get("split", "historical")
    window = window_days or ckpt.train_info.get("window_days", 90.0)
    splitter = welldata.split_historical if split == "historical" else welldata.split_future
    _, test_ds = splitter(dataset, window_days=float(window))

    if ckpt.is_variational:
        z, s, y = predictive_samples(test_ds.features, ckpt.params, ckpt.spec,
                                     ckpt.arch, ckpt.stats, n_samples=samples, seed=seed)
        point = z.mean(axis=1)
        calibration = evaluation.calibration_curve(test_ds.y, y)
        coverage = evaluation.coverage_probability(test_ds.y, y, 0.95)
    else:
        point = map_predict_batch(test_ds.features, ckpt.params, ckpt.spec,
                                  ckpt.arch, ckpt.stats)
        calibration, coverage = None, None

    deviations = 100.0 * np.abs(test_ds.y - point) / np.abs(test_ds.y)
    return {
        "well_id": Path(data_path).stem,
        "meter": test_ds.meter_type,
        "n_test": len(test_ds),
        "mape": evaluation.mape(test_ds.y, point),
        "rmse": evaluation.rmse(test_ds.y, point),
        "cumulative": evaluation.cumulative_performance(test_ds.y, point),
        "calibration": calibration,
        "coverage_95": coverage,
        "deviations": deviations,
        "split": split,
    }


def cmd_evaluate(args) -> int:
    cfg = _resolve(EVALUATE_DEFAULTS, args)
    if not cfg["data"] or not cfg["checkpoints"]:
        raise ConfigurationError("evaluate requires --data and --checkpoints")
    data_files = _collect_files([cfg["data"]], ".csv")
    ckpt_files = _collect_files([cfg["checkpoints"]], ".json")
    ckpt_files = [p for p in ckpt_files if not p.name.endswith("manifest.json")]
    by_stem = {p.stem: p for p in ckpt_files}
    pairs = []
    for data_path in data_files:
        ckpt = by_stem.get(data_path.stem)
        if ckpt is None:
            raise ConfigurationError(f"no checkpoint named {data_path.stem}.json "
                                     f"for dataset {data_path}")
        pairs.append((data_path, ckpt))

    tasks = [(str(d), str(c), cfg["split"], cfg["window_days"],
              int(cfg["samples"]), [int(cfg["seed"]), i])
             for i, (d, c) in enumerate(pairs)]
    if int(cfg["jobs"]) > 1:
        with ProcessPoolExecutor(max_workers=int(cfg["jobs"])) as pool:
            rows = list(pool.map(_evaluate_one_well, tasks))
    else:
        rows = [_evaluate_one_well(t) for t in tasks]

    wells = [evaluation.WellEvaluation(
        well_id=r["well_id"], meter=r["meter"], n_test=r["n_test"],
        mape=r["mape"], rmse=r["rmse"], cumulative=r["cumulative"],
        calibration=r["calibration"], coverage_95=r["coverage_95"],
        deviations=r["deviations"]) for r in rows]
    report = evaluation.build_report(wells)

    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    outputs = []

    report_doc = report.to_dict()
    report_doc["splits"] = sorted({r["split"] for r in rows})
    report_path = out_dir / "report.json"
    with open(report_path, "w") as fh:
        json.dump(report_doc, fh, indent=2, sort_keys=True)
        fh.write("\n")
    outputs.append(report_path)

    for name, group in report.groups.items():
        path = out_dir / f"cumulative_{name}.csv"
        _write_curve_csv(path, ("threshold_percent", "fraction"),
                         (report.thresholds, group.cumulative))
        outputs.append(path)
        if group.calibration_median is not None:
            path = out_dir / f"calibration_{name}.csv"
            _write_curve_csv(path, ("level", "p25", "median", "p75"),
                             (report.calibration_levels, group.calibration_p25,
                              group.calibration_median, group.calibration_p75))
            outputs.append(path)

    if cfg["figures"]:
        fig_path = out_dir / "cumulative.png"
        figures.save_cumulative_figure(
            fig_path, report.thresholds,
            {name: g.cumulative for name, g in report.groups.items()})
        outputs.append(fig_path)
        for name, group in report.groups.items():
            if group.calibration_median is not None:
                fig_path = out_dir / f"calibration_{name}.png"
                figures.save_calibration_figure(
                    fig_path, report.calibration_levels, group.calibration_median,
                    group.calibration_p25, group.calibration_p75, title=name)
                outputs.append(fig_path)

    inputs = [str(d) for d, _ in pairs] + [str(c) for _, c in pairs]
    _write_manifest(out_dir, "evaluate", cfg, inputs, outputs)
    med = report.groups["all"].mape_percentiles["p50"]
    print(f"evaluated {len(wells)} well(s): median MAPE {med:.2f}% -> {out_dir}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# size-study
# ---------------------------------------------------------------------------

SIZE_STUDY_DEFAULTS = {
    "data": None,
    "trials": 400,
    "sizes": ",".join(str(s) for s in DEFAULT_SIZES),
    "test_size": 100,
    "val_size": 100,
    "hidden": "50,50,50",
    "epochs": 300,
    "batch_size": 64,
    "learning_rate": 1e-3,
    "patience": 30,
    "er": None,
    "seed": 0,
    "jobs": 1,
    "figures": True,
}


def _size_study_trial(task) -> list:
    """Worker: one trial = one well, one split instant, all sizes."""
    (trial, well_path, sizes, test_size, val_size, hidden, epochs,
     batch_size, learning_rate, patience, er, seed) = task
    dataset = welldata.read_csv(well_path)
    n = len(dataset)
    k_max = max(sizes)
    rng = np.random.default_rng([seed, trial])
    split_idx = int(rng.integers(k_max, n - test_size + 1))
    test_ds = dataset.subset(np.arange(split_idx, split_idx + test_size))

    results = []
    for j, k in enumerate(sizes):
        train_ds = dataset.subset(np.arange(split_idx - k, split_idx))
        stats = welldata.StandardizationStats.from_dataset(train_ds)
        x_std, y_std = welldata.standardize(train_ds, stats)
        er_k = er if er is not None else DEFAULT_ER[train_ds.meter_type]
        sigma_n = float(np.sqrt(np.pi / 2.0) * er_k * np.mean(train_ds.y)) / stats.y_std
        arch = Architecture(hidden)
        spec = NoiseSpec.fixed(sigma_n)
        prior = default_prior(arch, spec)
        config = TrainConfig(learning_rate=learning_rate, batch_size=batch_size,
                             max_epochs=epochs, patience=patience,
                             seed=int(np.random.default_rng([seed, trial, j]).integers(2**31)))
        result = map_fit(x_std, y_std, prior, spec, arch, config,
                         validation=np.arange(k - val_size, k))
        pred = map_predict_batch(test_ds.features, result.params, spec, arch, stats)
        results.append({"trial": trial, "well": Path(well_path).stem,
                        "split_index": split_idx, "size": k,
                        "mape": evaluation.mape(test_ds.y, pred)})
    rel = evaluation.relative_mape_series(
        {r["size"]: r["mape"] for r in results}, baseline=min(sizes))
    for r in results:
        r["relative"] = rel[r["size"]]
    return results


def cmd_size_study(args) -> int:
    cfg = _resolve(SIZE_STUDY_DEFAULTS, args)
    if not cfg["data"]:
        raise ConfigurationError("size-study requires --data")
    sizes = _parse_sizes(cfg["sizes"])
    if len(sizes) < 2 or sorted(sizes) != list(sizes):
        raise ConfigurationError("sizes must be ascending with at least two entries")
    test_size, val_size = int(cfg["test_size"]), int(cfg["val_size"])
    if val_size >= min(sizes):
        raise ConfigurationError(f"val_size {val_size} must be smaller than the "
                                 f"smallest training size {min(sizes)}")
    wells = _collect_files([cfg["data"]], ".csv")
    needed = max(sizes) + test_size
    usable = [p for p in wells if _record_count(p) >= needed]
    if not usable:
        raise ConfigurationError(f"no well has the {needed} records required "
                                 f"(max size {max(sizes)} + test {test_size})")

    trials = int(cfg["trials"])
    seed = int(cfg["seed"])
    hidden = _parse_hidden(cfg["hidden"])
    rng = np.random.default_rng(seed)
    chosen = rng.integers(0, len(usable), size=trials)
    tasks = [(t, str(usable[chosen[t]]), sizes, test_size, val_size, hidden,
              int(cfg["epochs"]), int(cfg["batch_size"]), float(cfg["learning_rate"]),
              int(cfg["patience"]), cfg["er"], seed)
             for t in range(trials)]
    if int(cfg["jobs"]) > 1:
        with ProcessPoolExecutor(max_workers=int(cfg["jobs"])) as pool:
            all_rows = [row for rows in pool.map(_size_study_trial, tasks) for row in rows]
    else:
        all_rows = [row for task in tasks for row in _size_study_trial(task)]

    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    outputs = []

    table_path = out_dir / "size_study.csv"
    with open(table_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(("trial", "well", "split_index", "size", "mape_percent", "relative_error"))
        for r in all_rows:
            writer.writerow((r["trial"], r["well"], r["split_index"], r["size"],
                             repr(float(r["mape"])), repr(float(r["relative"]))))
    outputs.append(table_path)

    summary = []
    for k in sizes:
        rel = np.array([r["relative"] for r in all_rows if r["size"] == k])
        p25, median, p75 = np.percentile(rel, [25, 50, 75])
        summary.append({"size": k, "median": float(median), "p25": float(p25),
                        "p75": float(p75), "n_trials": int(rel.size)})
    summary_path = out_dir / "size_study_summary.csv"
    with open(summary_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(("size", "median", "p25", "p75", "n_trials"))
        for row in summary:
            writer.writerow((row["size"], repr(row["median"]), repr(row["p25"]),
                             repr(row["p75"]), row["n_trials"]))
    outputs.append(summary_path)

    json_path = out_dir / "size_study.json"
    with open(json_path, "w") as fh:
        json.dump({"sizes": list(sizes), "summary": summary}, fh, indent=2, sort_keys=True)
        fh.write("\n")
    outputs.append(json_path)

    if cfg["figures"]:
        fig_path = out_dir / "size_study.png"
        figures.save_size_study_figure(
            fig_path, sizes, [s["median"] for s in summary],
            [s["p25"] for s in summary], [s["p75"] for s in summary])
        outputs.append(fig_path)

    _write_manifest(out_dir, "size-study", cfg, [str(p) for p in usable], outputs)
    print(f"size study: {trials} trial(s) over {len(usable)} well(s) -> {out_dir}")
    return EXIT_OK


def _record_count(path) -> int:
    with open(path) as fh:
        return sum(1 for _ in fh) - 1


# ---------------------------------------------------------------------------
# Parser and entry point
# ---------------------------------------------------------------------------

def build_parser() -> _Parser:
    parser = _Parser(prog="bayesvfm",
                     description="Probabilistic virtual flow metering workbench")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, out_required=True):
        p.add_argument("--config", help="JSON config file (or a manifest to re-run)")
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--out", required=out_required, help="output file or directory")
        p.add_argument("--jobs", type=int, default=None, help="parallel workers across wells")

    p = sub.add_parser("generate", help="generate synthetic well data")
    common(p)
    p.add_argument("--wells", type=int, default=None)
    p.add_argument("--meter", choices=sorted(METER_CHOICES), default=None)
    p.add_argument("--records", type=int, default=None)
    p.add_argument("--cadence-hours", dest="cadence_hours", type=float, default=None)
    p.add_argument("--er", type=float, default=None, help="instrument MAPE as a fraction")
    p.add_argument("--drift-per-day", dest="drift_per_day", type=float, default=None,
                   help="upstream pressure decline in bar/day (0 = stationary)")
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("train", help="train a model on one well")
    common(p)
    p.add_argument("--data", help="well CSV file")
    p.add_argument("--split", choices=("historical", "future"), default=None)
    p.add_argument("--window-days", dest="window_days", type=float, default=None)
    p.add_argument("--method", choices=("map", "vi"), default=None)
    p.add_argument("--noise", choices=("fixed", "homo", "hetero"), default=None)
    p.add_argument("--hidden", default=None, help="comma-separated hidden widths")
    p.add_argument("--epochs", type=int, default=None)
    p.add_argument("--batch-size", dest="batch_size", type=int, default=None)
    p.add_argument("--lr", dest="learning_rate", type=float, default=None)
    p.add_argument("--patience", type=int, default=None)
    p.add_argument("--mc-samples", dest="mc_samples", type=int, default=None)
    p.add_argument("--val-fraction", dest="validation_fraction", type=float, default=None)
    p.add_argument("--er", type=float, default=None)
    p.add_argument("--sigma-n", dest="sigma_n", type=float, default=None,
                   help="fixed noise std in physical units")
    p.add_argument("--noise-prior-std", dest="noise_prior_std", type=float, default=None)
    p.add_argument("--bias-prior-std", dest="bias_prior_std", type=float, default=None)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("predict", help="predict rows of a well CSV")
    common(p)
    p.add_argument("--checkpoint")
    p.add_argument("--data")
    p.add_argument("--samples", type=int, default=None)
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("evaluate", help="test-window metrics for trained wells")
    common(p)
    p.add_argument("--data", help="well CSV file or directory")
    p.add_argument("--checkpoints", help="checkpoint file or directory")
    p.add_argument("--split", choices=("historical", "future"), default=None,
                   help="override the split stored in each checkpoint")
    p.add_argument("--window-days", dest="window_days", type=float, default=None)
    p.add_argument("--samples", type=int, default=None)
    p.add_argument("--figures", action=argparse.BooleanOptionalAction, default=None)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("size-study", help="relative error vs training-set size")
    common(p)
    p.add_argument("--data", help="well CSV file or directory")
    p.add_argument("--trials", type=int, default=None)
    p.add_argument("--sizes", default=None, help="comma-separated training sizes")
    p.add_argument("--test-size", dest="test_size", type=int, default=None)
    p.add_argument("--val-size", dest="val_size", type=int, default=None)
    p.add_argument("--hidden", default=None)
    p.add_argument("--epochs", type=int, default=None)
    p.add_argument("--batch-size", dest="batch_size", type=int, default=None)
    p.add_argument("--lr", dest="learning_rate", type=float, default=None)
    p.add_argument("--patience", type=int, default=None)
    p.add_argument("--er", type=float, default=None)
    p.add_argument("--figures", action=argparse.BooleanOptionalAction, default=None)
    p.set_defaults(func=cmd_size_study)

    return parser


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        return args.func(args)
    except (ConfigurationError, ValueError) as err:
        print(json.dumps({"error": "configuration", "message": str(err)}),
              file=sys.stderr)
        return EXIT_CONFIG
    except NumericalError as err:
        print(json.dumps({"error": "numerical", "message": str(err)}), file=sys.stderr)
        return EXIT_NUMERICAL


def entrypoint() -> None:
    sys.exit(main())
