"""Probabilistic virtual flow metering with Bayesian neural networks.

A virtual flow meter infers a well's total flow rate from ancillary
measurements (choke opening, pressures, temperatures, mass fractions).
This package models the rate with a small ReLU network under a
factorized Gaussian prior, trains it either by MAP estimation or by
stochastic gradient variational Bayes, and evaluates predictions and
their uncertainty on chronologically split well data.
"""

from .model import (Architecture, FlowFeatures, NoiseSpec, PriorSpec,
                    FEATURE_NAMES, forward_mean, noise_std, log_likelihood,
                    he_prior, noise_prior_from_mape, default_prior)
from .inference import (TrainConfig, TrainResult, VariationalParams,
                        kl_mean_field, reparameterize, elbo_estimate,
                        adam_update, map_fit, vi_fit)
from .predict import PredictiveSummary, posterior_predictive, map_predict
from .data import (WellDataset, StandardizationStats, SyntheticWellConfig,
                   generate_synthetic_well, split_historical, split_future,
                   validation_split, standardize, destandardize_y)
from .evaluation import (mape, rmse, percentiles, cumulative_performance,
                         calibration_curve, coverage_probability,
                         relative_mape_series)
from .checkpoint import Checkpoint, save_checkpoint, load_checkpoint
from .errors import ConfigurationError, NumericalError

__version__ = "0.1.0"
