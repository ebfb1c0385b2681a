"""JSON checkpoints for trained models.

A checkpoint bundles everything needed to predict: architecture, noise
model, prior, fitted parameters (theta for MAP, (mu, rho) for VI), the
standardization statistics, and the training seed. Floats are written
with Python's shortest round-trip decimal representation (at most 17
significant digits), so save -> load -> save is bit-exact.
"""

import json
from dataclasses import dataclass

import numpy as np

from .data import StandardizationStats
from .errors import ConfigurationError
from .inference import VariationalParams
from .model import Architecture, NoiseSpec, PriorSpec

FORMAT_NAME = "bayesvfm-checkpoint"
FORMAT_VERSION = 1


@dataclass(eq=False)
class Checkpoint:
    method: str  # "map" | "vi"
    arch: Architecture
    spec: NoiseSpec
    prior: PriorSpec
    params: object  # np.ndarray (map) or VariationalParams (vi)
    stats: StandardizationStats
    seed: int
    train_info: dict

    @property
    def is_variational(self) -> bool:
        return self.method == "vi"


def _floats(arr) -> list:
    return [float(v) for v in np.asarray(arr, dtype=float).ravel()]


def save_checkpoint(path, checkpoint: Checkpoint) -> None:
    if checkpoint.method == "vi":
        params = {"mu": _floats(checkpoint.params.mu),
                  "rho": _floats(checkpoint.params.rho)}
    elif checkpoint.method == "map":
        params = {"theta": _floats(checkpoint.params)}
    else:
        raise ConfigurationError(f"unknown method {checkpoint.method!r}")
    doc = {
        "format": FORMAT_NAME,
        "version": FORMAT_VERSION,
        "method": checkpoint.method,
        "architecture": {"hidden": list(checkpoint.arch.hidden),
                         "n_inputs": checkpoint.arch.n_inputs},
        "noise": {"kind": checkpoint.spec.kind, "sigma_n": checkpoint.spec.sigma_n},
        "prior": {"mean": _floats(checkpoint.prior.mean),
                  "std": _floats(checkpoint.prior.std)},
        "params": params,
        "standardization": {"feature_mean": _floats(checkpoint.stats.feature_mean),
                            "feature_std": _floats(checkpoint.stats.feature_std),
                            "y_mean": float(checkpoint.stats.y_mean),
                            "y_std": float(checkpoint.stats.y_std)},
        "seed": int(checkpoint.seed),
        "train_info": checkpoint.train_info,
    }
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_checkpoint(path) -> Checkpoint:
    with open(path) as fh:
        doc = json.load(fh)
    if doc.get("format") != FORMAT_NAME:
        raise ConfigurationError(f"{path}: not a {FORMAT_NAME} file")
    if doc.get("version") != FORMAT_VERSION:
        raise ConfigurationError(f"{path}: unsupported version {doc.get('version')}")
    arch = Architecture(tuple(doc["architecture"]["hidden"]),
                        int(doc["architecture"]["n_inputs"]))
    noise = doc["noise"]
    spec = NoiseSpec(noise["kind"], noise["sigma_n"])
    prior = PriorSpec(np.array(doc["prior"]["mean"]), np.array(doc["prior"]["std"]))
    method = doc["method"]
    if method == "vi":
        params = VariationalParams(np.array(doc["params"]["mu"]),
                                   np.array(doc["params"]["rho"]))
    elif method == "map":
        params = np.array(doc["params"]["theta"], dtype=float)
    else:
        raise ConfigurationError(f"{path}: unknown method {method!r}")
    std = doc["standardization"]
    stats = StandardizationStats(np.array(std["feature_mean"]),
                                 np.array(std["feature_std"]),
                                 float(std["y_mean"]), float(std["y_std"]))
    return Checkpoint(method, arch, spec, prior, params, stats,
                      int(doc["seed"]), doc.get("train_info", {}))
