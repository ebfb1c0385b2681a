"""Training: MAP estimation and stochastic gradient variational Bayes.

Both trainers share the same skeleton: seeded random validation split,
Adam on mini-batch gradients, early stopping on a validation loss, and
best-checkpoint restore. The variational posterior is a mean-field
Gaussian with sigma = softplus(rho); its gradient flows through the
reparameterization theta = mu + softplus(rho) * zeta and the analytic
KL term.
"""

import copy
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError, NumericalError
from .mathutil import softplus, softplus_inv, sigmoid, LOG_2PI
from .model import (Architecture, NoiseSpec, PriorSpec, n_params,
                    forward, he_prior, split_theta, log_likelihood,
                    log_likelihood_and_grad)


@dataclass(eq=False)
class VariationalParams:
    """Mean-field Gaussian posterior parameters lambda = (mu, rho)."""

    mu: np.ndarray
    rho: np.ndarray

    def __post_init__(self):
        self.mu = np.asarray(self.mu, dtype=float)
        self.rho = np.asarray(self.rho, dtype=float)
        if self.mu.ndim != 1 or self.mu.shape != self.rho.shape:
            raise ValueError(f"mu/rho must be 1-D and equal length, got {self.mu.shape}, {self.rho.shape}")

    @property
    def k(self) -> int:
        return self.mu.shape[0]

    @property
    def sigma(self) -> np.ndarray:
        """Posterior standard deviations, softplus(rho) > 0."""
        return softplus(self.rho)

    def copy(self) -> "VariationalParams":
        return VariationalParams(self.mu.copy(), self.rho.copy())


@dataclass
class TrainConfig:
    """Optimization settings shared by MAP and VI training."""

    learning_rate: float = 1e-3
    batch_size: int = 64
    mc_samples: int = 1
    max_epochs: int = 1000
    patience: int = 50
    validation_fraction: float = 0.2
    seed: int = 0

    def __post_init__(self):
        if self.learning_rate <= 0:
            raise ConfigurationError(f"learning_rate must be positive, got {self.learning_rate}")
        if self.batch_size < 1:
            raise ConfigurationError(f"batch_size must be >= 1, got {self.batch_size}")
        if self.mc_samples < 1:
            raise ConfigurationError(f"mc_samples must be >= 1, got {self.mc_samples}")
        if self.max_epochs < 1:
            raise ConfigurationError(f"max_epochs must be >= 1, got {self.max_epochs}")
        if self.patience < 1:
            raise ConfigurationError(f"patience must be >= 1, got {self.patience}")
        if not 0.0 < self.validation_fraction < 1.0:
            raise ConfigurationError(
                f"validation_fraction must be in (0, 1), got {self.validation_fraction}")


@dataclass(eq=False)
class TrainResult:
    """Best parameters plus per-epoch loss histories.

    ``params`` is a flat theta vector (MAP) or VariationalParams (VI).
    Histories are per-point losses; ``val_history[best_epoch]`` is the
    minimum recorded validation loss.
    """

    params: object
    train_history: np.ndarray
    val_history: np.ndarray
    best_epoch: int
    n_epochs: int
    extra: dict = field(default_factory=dict)


# ---------------------------------------------------------------------------
# Variational pieces
# ---------------------------------------------------------------------------

def kl_mean_field(q: VariationalParams, prior: PriorSpec) -> float:
    """Closed-form KL(q || prior) between factorized Gaussians.

    0.5 * sum_i [ -1 - 2 log(sigma_i/prior_std_i)
                  + ((mu_i - prior_mean_i)/prior_std_i)^2
                  + (sigma_i/prior_std_i)^2 ]
    """
    value, _, _ = kl_mean_field_and_grad(q, prior)
    return value


def kl_mean_field_and_grad(q: VariationalParams, prior: PriorSpec):
    """KL value and its gradient with respect to (mu, rho)."""
    if q.k != prior.k:
        raise ValueError(f"q has {q.k} parameters but prior has {prior.k}")
    if not (np.all(np.isfinite(q.mu)) and np.all(np.isfinite(q.rho))):
        raise ValueError("variational parameters contain non-finite values")
    sig = q.sigma
    ratio = sig / prior.std
    dm = (q.mu - prior.mean) / prior.std
    value = float(0.5 * np.sum(-1.0 - 2.0 * np.log(ratio) + dm * dm + ratio * ratio))
    dmu = dm / prior.std
    dsigma = -1.0 / sig + sig / prior.std ** 2
    drho = dsigma * sigmoid(q.rho)
    return value, dmu, drho


def reparameterize(q: VariationalParams, zeta: np.ndarray) -> np.ndarray:
    """theta = mu + softplus(rho) * zeta for standard-normal zeta."""
    zeta = np.asarray(zeta, dtype=float)
    if zeta.shape != q.mu.shape:
        raise ValueError(f"zeta has shape {zeta.shape}, expected {q.mu.shape}")
    return q.mu + q.sigma * zeta


def elbo_estimate(x: np.ndarray, y: np.ndarray, q: VariationalParams,
                  prior: PriorSpec, spec: NoiseSpec, arch: Architecture,
                  n_total: int, zetas: np.ndarray) -> float:
    """Monte-Carlo ELBO estimate on a mini-batch.

    (n_total / batch) * mean_m log p(batch | theta_m) - KL(q || prior),
    with theta_m reparameterized from the rows of ``zetas`` (m, K).
    """
    value, _, _ = elbo_and_grad(x, y, q, prior, spec, arch, n_total, zetas)
    return value


def elbo_and_grad(x: np.ndarray, y: np.ndarray, q: VariationalParams,
                  prior: PriorSpec, spec: NoiseSpec, arch: Architecture,
                  n_total: int, zetas: np.ndarray):
    """ELBO estimate and its gradient with respect to (mu, rho).

    The likelihood part of the gradient is the reparameterized estimator:
    each draw contributes dll/dtheta for mu and dll/dtheta * zeta *
    sigmoid(rho) for rho. The KL part is analytic.
    """
    zetas = np.asarray(zetas, dtype=float)
    if zetas.ndim == 1:
        zetas = zetas[None, :]
    if zetas.shape[1] != q.k:
        raise ValueError(f"zetas have {zetas.shape[1]} columns, expected {q.k}")
    batch = np.asarray(y).shape[0]
    if not 1 <= batch <= n_total:
        raise ValueError(f"batch size {batch} incompatible with n_total {n_total}")
    scale = n_total / batch
    m = zetas.shape[0]

    kl, kl_dmu, kl_drho = kl_mean_field_and_grad(q, prior)
    ll_sum = 0.0
    g_mu = np.zeros(q.k)
    g_rho = np.zeros(q.k)
    srho = sigmoid(q.rho)
    for zeta in zetas:
        theta = reparameterize(q, zeta)
        ll, g_theta = log_likelihood_and_grad(x, y, theta, spec, arch)
        ll_sum += ll
        g_mu += g_theta
        g_rho += g_theta * zeta * srho
    value = scale * ll_sum / m - kl
    if not np.isfinite(value):
        raise NumericalError("ELBO estimate is non-finite")
    dmu = scale * g_mu / m - kl_dmu
    drho = scale * g_rho / m - kl_drho
    return value, dmu, drho


# ---------------------------------------------------------------------------
# MAP objective
# ---------------------------------------------------------------------------

def map_objective(x: np.ndarray, y: np.ndarray, theta: np.ndarray,
                  prior: PriorSpec, spec: NoiseSpec, arch: Architecture) -> float:
    """Penalized least squares whose minimizer is the posterior mode:

    (1 / (2 sigma_n^2)) * sum_i (y_i - f(x_i))^2
        + sum_j (theta_j - prior_mean_j)^2 / (2 prior_std_j^2)

    With the zero-mean priors used here the penalty reduces to the plain
    L2 form. Requires the fixed-noise model.
    """
    if spec.kind != "fixed":
        raise ConfigurationError("MAP estimation requires the fixed noise model")
    theta = np.asarray(theta, dtype=float)
    if prior.k != theta.shape[0]:
        raise ValueError(f"prior has {prior.k} entries but theta has {theta.shape[0]}")
    ll = log_likelihood(x, y, theta, spec, arch)
    n = np.asarray(y).shape[0]
    sse_term = -ll - 0.5 * n * (LOG_2PI + 2.0 * np.log(spec.sigma_n))
    value = float(sse_term + 0.5 * np.sum((theta - prior.mean) ** 2 / prior.std ** 2))
    if not np.isfinite(value):
        raise NumericalError("MAP objective is non-finite")
    return value


def map_objective_and_grad(x: np.ndarray, y: np.ndarray, theta: np.ndarray,
                           prior: PriorSpec, spec: NoiseSpec, arch: Architecture):
    if spec.kind != "fixed":
        raise ConfigurationError("MAP estimation requires the fixed noise model")
    theta = np.asarray(theta, dtype=float)
    if prior.k != theta.shape[0]:
        raise ValueError(f"prior has {prior.k} entries but theta has {theta.shape[0]}")
    ll, g_ll = log_likelihood_and_grad(x, y, theta, spec, arch)
    n = np.asarray(y).shape[0]
    # Drop the theta-independent Gaussian normalization from the likelihood.
    sse_term = -ll - 0.5 * n * (LOG_2PI + 2.0 * np.log(spec.sigma_n))
    dtheta = (theta - prior.mean) / prior.std ** 2
    value = float(sse_term + 0.5 * np.sum((theta - prior.mean) ** 2 / prior.std ** 2))
    if not np.isfinite(value):
        raise NumericalError("MAP objective is non-finite")
    return value, -g_ll + dtheta


# ---------------------------------------------------------------------------
# Adam
# ---------------------------------------------------------------------------

@dataclass(eq=False)
class AdamState:
    """First/second moment accumulators and step counter."""

    m: np.ndarray
    v: np.ndarray
    t: int = 0

    @classmethod
    def zeros(cls, k: int) -> "AdamState":
        return cls(np.zeros(k), np.zeros(k))


def adam_update(params: np.ndarray, grads: np.ndarray, state: AdamState,
                learning_rate: float, beta1: float = 0.9, beta2: float = 0.999,
                eps: float = 1e-8):
    """One bias-corrected Adam descent step; returns (params, state).

    Pure function of its inputs: the incoming state is not mutated.
    """
    params = np.asarray(params, dtype=float)
    grads = np.asarray(grads, dtype=float)
    if params.shape != grads.shape or params.shape != state.m.shape:
        raise ValueError("params/grads/state shapes disagree")
    t = state.t + 1
    m = beta1 * state.m + (1.0 - beta1) * grads
    v = beta2 * state.v + (1.0 - beta2) * grads * grads
    m_hat = m / (1.0 - beta1 ** t)
    v_hat = v / (1.0 - beta2 ** t)
    new_params = params - learning_rate * m_hat / (np.sqrt(v_hat) + eps)
    return new_params, AdamState(m, v, t)


# ---------------------------------------------------------------------------
# Training loops
# ---------------------------------------------------------------------------

def _split_train_val(n: int, fraction: float, rng: np.random.Generator,
                     validation=None):
    """Fit/validation index split: seeded uniform sample without
    replacement, or explicit validation indices when provided."""
    if validation is not None:
        val_idx = np.asarray(validation, dtype=int)
        mask = np.ones(n, dtype=bool)
        mask[val_idx] = False
        fit_idx = np.nonzero(mask)[0]
    else:
        n_val = int(n * fraction)
        if not 1 <= n_val <= n - 1:
            raise ConfigurationError(
                f"validation fraction {fraction} gives a degenerate split of {n} points")
        perm = rng.permutation(n)
        val_idx = np.sort(perm[:n_val])
        fit_idx = np.sort(perm[n_val:])
    if len(fit_idx) == 0 or len(val_idx) == 0:
        raise ConfigurationError("train/validation split left an empty partition")
    return fit_idx, val_idx


def _batches(n: int, batch_size: int, rng: np.random.Generator):
    """Shuffled mini-batch index blocks; the last short batch is kept."""
    perm = rng.permutation(n)
    for start in range(0, n, batch_size):
        yield perm[start:start + batch_size]


def map_fit(x: np.ndarray, y: np.ndarray, prior: PriorSpec, spec: NoiseSpec,
            arch: Architecture, config: TrainConfig, validation=None) -> TrainResult:
    """Point estimate of theta by Adam on the penalized least-squares
    objective, with early stopping on validation negative log-likelihood.

    theta is initialized with the zero-mean variance-preserving scheme
    (sqrt(1/n) first layer, sqrt(2/n) after), independent of the prior:
    the prior may be arbitrarily wide without wrecking the starting
    point. ``validation`` optionally gives explicit validation indices
    (used by the training-set-size study, which validates on the most
    recent points); by default a seeded random fraction is held out.
    """
    if spec.kind != "fixed":
        raise ConfigurationError("map_fit supports only the fixed noise model")
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float).ravel()
    rng = np.random.default_rng(config.seed)
    fit_idx, val_idx = _split_train_val(len(y), config.validation_fraction, rng, validation)
    x_fit, y_fit = x[fit_idx], y[fit_idx]
    x_val, y_val = x[val_idx], y[val_idx]
    n_fit = len(y_fit)
    batch_size = min(config.batch_size, n_fit)

    k = n_params(arch, spec)
    if prior.k != k:
        raise ValueError(f"prior has {prior.k} entries, model needs {k}")
    theta = rng.normal(0.0, he_prior(arch).std)
    theta_init = theta.copy()
    state = AdamState.zeros(k)

    def val_loss(th):
        # Per-point NLL at fixed sigma_n (the early-stopping monitor).
        phi, _ = split_theta(th, arch, spec)
        r = y_val - forward(x_val, phi, arch)
        return float(0.5 * LOG_2PI + np.log(spec.sigma_n)
                     + np.mean(r * r) / (2.0 * spec.sigma_n ** 2))

    train_hist, val_hist = [], []
    best = (np.inf, -1, theta.copy())
    for epoch in range(config.max_epochs):
        for batch in _batches(n_fit, batch_size, rng):
            try:
                _, grad = map_objective_and_grad(x_fit[batch], y_fit[batch], theta,
                                                 prior, spec, arch)
            except NumericalError as err:
                err.diagnostics.update(epoch=epoch, val_history=val_hist)
                raise
            # Mini-batch gradient of the full objective: rescale the data
            # term, keep the prior term whole.
            g_prior = (theta - prior.mean) / prior.std ** 2
            grad = (grad - g_prior) * (n_fit / len(batch)) + g_prior
            theta, state = adam_update(theta, grad, state, config.learning_rate)
        train_hist.append(map_objective(x_fit, y_fit, theta, prior, spec, arch) / n_fit)
        vl = val_loss(theta)
        val_hist.append(vl)
        if not np.isfinite(vl):
            raise NumericalError("validation loss diverged",
                                 {"epoch": epoch, "val_history": val_hist})
        if vl < best[0]:
            best = (vl, epoch, theta.copy())
        elif epoch - best[1] >= config.patience:
            break
    return TrainResult(best[2], np.asarray(train_hist), np.asarray(val_hist),
                       best[1], len(val_hist),
                       extra={"fit_indices": fit_idx, "val_indices": val_idx,
                              "theta_init": theta_init, "theta_final": theta})


def vi_fit(x: np.ndarray, y: np.ndarray, prior: PriorSpec, spec: NoiseSpec,
           arch: Architecture, config: TrainConfig, validation=None) -> TrainResult:
    """Mean-field Gaussian posterior by SGVB.

    Per step: sample a mini-batch, sample zeta, reparameterize, take an
    Adam step on the negative ELBO estimate. Early stopping monitors a
    per-point validation ELBO computed with a fixed set of zeta draws
    (common random numbers across epochs), defined as
    mean log-likelihood(validation)/n_val - KL/n_fit. The training
    history records the per-point negative ELBO averaged over the
    epoch's mini-batch estimates.

    mu is initialized by a prior draw and rho so that sigma = 0.5 *
    prior std; this starts close to the prior without saturating the
    softplus.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float).ravel()
    rng = np.random.default_rng(config.seed)
    fit_idx, val_idx = _split_train_val(len(y), config.validation_fraction, rng, validation)
    x_fit, y_fit = x[fit_idx], y[fit_idx]
    x_val, y_val = x[val_idx], y[val_idx]
    n_fit = len(y_fit)
    batch_size = min(config.batch_size, n_fit)

    k = n_params(arch, spec)
    if prior.k != k:
        raise ValueError(f"prior has {prior.k} entries, model needs {k}")
    q = VariationalParams(rng.normal(prior.mean, prior.std),
                          softplus_inv(0.5 * prior.std))
    lam = np.concatenate([q.mu, q.rho])
    state = AdamState.zeros(2 * k)
    eval_zetas = rng.normal(size=(8, k))

    def unpack(vec):
        return VariationalParams(vec[:k], vec[k:])

    def val_loss(qq):
        kl, _, _ = kl_mean_field_and_grad(qq, prior)
        ll_val = sum(log_likelihood(x_val, y_val, reparameterize(qq, zeta), spec, arch)
                     for zeta in eval_zetas)
        return -(ll_val / len(eval_zetas) / len(y_val) - kl / n_fit)

    train_hist, val_hist = [], []
    best = (np.inf, -1, q.copy())
    for epoch in range(config.max_epochs):
        epoch_elbos = []
        for batch in _batches(n_fit, batch_size, rng):
            zetas = rng.normal(size=(config.mc_samples, k))
            try:
                elbo, dmu, drho = elbo_and_grad(x_fit[batch], y_fit[batch], unpack(lam),
                                                prior, spec, arch, n_fit, zetas)
            except NumericalError as err:
                err.diagnostics.update(epoch=epoch, val_history=val_hist)
                raise
            epoch_elbos.append(elbo)
            grad = -np.concatenate([dmu, drho])
            lam, state = adam_update(lam, grad, state, config.learning_rate)
        q = unpack(lam)
        train_hist.append(-float(np.mean(epoch_elbos)) / n_fit)
        vl = val_loss(q)
        val_hist.append(vl)
        if not np.isfinite(vl):
            raise NumericalError("validation ELBO diverged",
                                 {"epoch": epoch, "val_history": val_hist})
        if vl < best[0]:
            best = (vl, epoch, q.copy())
        elif epoch - best[1] >= config.patience:
            break
    return TrainResult(best[2], np.asarray(train_hist), np.asarray(val_hist),
                       best[1], len(val_hist),
                       extra={"fit_indices": fit_idx, "val_indices": val_idx})
