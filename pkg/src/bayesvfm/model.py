"""Flow model: network forward pass, noise models, likelihood, and priors.

The regression target is the (standardized) total flow rate z = f(x, phi),
where f is a ReLU network with an affine output layer. A measurement is
y = z + eps with eps ~ N(0, g(z, psi)^2); three noise models are supported
(fixed, learned homoscedastic, learned heteroscedastic).

Parameter layout
----------------
All latent variables live in one flat float64 vector ``theta`` of length
K = K_phi + K_psi. The weight slice ``phi = theta[:K_phi]`` stores, for
each layer l = 1..L in order: the weight matrix W_l of shape
(n_out, n_in) flattened in C (row-major) order, followed by the bias
vector b_l of length n_out. The noise slice ``psi = theta[K_phi:]`` holds
zero, one, or two entries depending on the noise model (see NoiseSpec).
"""

from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError, NumericalError
from .mathutil import LOG_2PI

FEATURE_NAMES = ("u", "p1", "p2", "T1", "T2", "eta_oil", "eta_gas")
N_FEATURES = len(FEATURE_NAMES)


@dataclass(frozen=True)
class FlowFeatures:
    """One explanatory vector: choke opening, pressures, temperatures,
    and oil/gas mass fractions.

    Units: u is a fraction in [0, 1]; pressures in bar with p1 >= p2 > 0;
    temperatures in K; mass fractions dimensionless with
    eta_oil + eta_gas <= 1 (the water fraction is the remainder and is
    not a model input).
    """

    u: float
    p1: float
    p2: float
    T1: float
    T2: float
    eta_oil: float
    eta_gas: float

    def validate(self) -> None:
        if not 0.0 <= self.u <= 1.0:
            raise ValueError(f"choke opening u={self.u} outside [0, 1]")
        if not self.p1 >= self.p2 > 0.0:
            raise ValueError(f"pressures must satisfy p1 >= p2 > 0, got ({self.p1}, {self.p2})")
        if self.eta_oil < 0.0 or self.eta_gas < 0.0:
            raise ValueError("mass fractions must be nonnegative")
        if self.eta_oil + self.eta_gas > 1.0 + 1e-12:
            raise ValueError("eta_oil + eta_gas exceeds 1")

    def to_array(self) -> np.ndarray:
        return np.array([self.u, self.p1, self.p2, self.T1, self.T2,
                         self.eta_oil, self.eta_gas], dtype=float)

    @classmethod
    def from_array(cls, values) -> "FlowFeatures":
        values = np.asarray(values, dtype=float)
        if values.shape != (N_FEATURES,):
            raise ValueError(f"expected {N_FEATURES} features, got shape {values.shape}")
        return cls(*values.tolist())


@dataclass(frozen=True)
class Architecture:
    """Feed-forward ReLU network shape: hidden widths plus input size.

    The output layer is always affine with a single unit. ``n_inputs``
    defaults to the 7 flow features; toy problems in tests may use fewer.
    An empty ``hidden`` tuple gives a purely affine model.
    """

    hidden: tuple = (50, 50, 50)
    n_inputs: int = N_FEATURES

    def __post_init__(self):
        object.__setattr__(self, "hidden", tuple(int(w) for w in self.hidden))
        if self.n_inputs < 1:
            raise ConfigurationError(f"n_inputs must be >= 1, got {self.n_inputs}")
        if any(w < 1 for w in self.hidden):
            raise ConfigurationError(f"all hidden widths must be >= 1, got {self.hidden}")

    @property
    def widths(self) -> tuple:
        """Layer widths [n_0, n_1, ..., n_L] with n_L = 1."""
        return (self.n_inputs, *self.hidden, 1)

    @property
    def layer_shapes(self) -> tuple:
        """(n_out, n_in) per affine layer, in forward order."""
        w = self.widths
        return tuple((w[i + 1], w[i]) for i in range(len(w) - 1))

    @property
    def n_weights(self) -> int:
        """K_phi: total number of weights and biases."""
        return sum(n_out * n_in + n_out for n_out, n_in in self.layer_shapes)


@dataclass(frozen=True)
class NoiseSpec:
    """Measurement-noise model selector.

    kind:
        "fixed"  - known constant standard deviation sigma_n (K_psi = 0)
        "homo"   - learned level exp(psi_1)                  (K_psi = 1)
        "hetero" - learned exp(psi_2)*|z| + exp(psi_1)       (K_psi = 2)
    """

    kind: str
    sigma_n: float | None = None

    _N_PARAMS = {"fixed": 0, "homo": 1, "hetero": 2}

    def __post_init__(self):
        if self.kind not in self._N_PARAMS:
            raise ConfigurationError(f"unknown noise kind {self.kind!r}")
        if self.kind == "fixed":
            if self.sigma_n is None or not np.isfinite(self.sigma_n) or self.sigma_n <= 0:
                raise ConfigurationError("fixed noise requires sigma_n > 0")
        elif self.sigma_n is not None:
            raise ConfigurationError(f"sigma_n only applies to kind='fixed', got kind={self.kind!r}")

    @classmethod
    def fixed(cls, sigma_n: float) -> "NoiseSpec":
        return cls("fixed", float(sigma_n))

    @classmethod
    def homoscedastic(cls) -> "NoiseSpec":
        return cls("homo")

    @classmethod
    def heteroscedastic(cls) -> "NoiseSpec":
        return cls("hetero")

    @property
    def n_params(self) -> int:
        """K_psi for this variant."""
        return self._N_PARAMS[self.kind]


@dataclass(frozen=True, eq=False)
class PriorSpec:
    """Factorized Gaussian prior: per-parameter means and standard deviations."""

    mean: np.ndarray
    std: np.ndarray

    def __post_init__(self):
        mean = np.asarray(self.mean, dtype=float)
        std = np.asarray(self.std, dtype=float)
        if mean.ndim != 1 or mean.shape != std.shape:
            raise ValueError(f"prior mean/std must be 1-D and equal length, got {mean.shape}, {std.shape}")
        if not (np.all(np.isfinite(mean)) and np.all(np.isfinite(std))):
            raise ValueError("prior mean/std must be finite")
        if np.any(std <= 0):
            raise ValueError("prior stds must be strictly positive")
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "std", std)

    @property
    def k(self) -> int:
        return self.mean.shape[0]

    def concat(self, other: "PriorSpec") -> "PriorSpec":
        return PriorSpec(np.concatenate([self.mean, other.mean]),
                         np.concatenate([self.std, other.std]))


# ---------------------------------------------------------------------------
# Parameter vector layout helpers
# ---------------------------------------------------------------------------

def n_params(arch: Architecture, spec: NoiseSpec) -> int:
    """Total K = K_phi + K_psi."""
    return arch.n_weights + spec.n_params


def split_theta(theta: np.ndarray, arch: Architecture, spec: NoiseSpec):
    """Split a flat parameter vector into (phi, psi) views."""
    theta = np.asarray(theta, dtype=float)
    k = n_params(arch, spec)
    if theta.shape != (k,):
        raise ValueError(f"theta has shape {theta.shape}, expected ({k},)")
    return theta[:arch.n_weights], theta[arch.n_weights:]


def unpack_weights(phi: np.ndarray, arch: Architecture):
    """Flat weight slice -> [(W_1, b_1), ..., (W_L, b_L)]."""
    phi = np.asarray(phi, dtype=float)
    if phi.shape != (arch.n_weights,):
        raise ValueError(f"phi has shape {phi.shape}, expected ({arch.n_weights},)")
    layers = []
    offset = 0
    for n_out, n_in in arch.layer_shapes:
        w = phi[offset:offset + n_out * n_in].reshape(n_out, n_in)
        offset += n_out * n_in
        b = phi[offset:offset + n_out]
        offset += n_out
        layers.append((w, b))
    return layers


def pack_weights(layers, arch: Architecture) -> np.ndarray:
    """Inverse of unpack_weights."""
    parts = []
    for (w, b), (n_out, n_in) in zip(layers, arch.layer_shapes, strict=True):
        w = np.asarray(w, dtype=float)
        b = np.asarray(b, dtype=float)
        if w.shape != (n_out, n_in) or b.shape != (n_out,):
            raise ValueError(f"layer shapes {w.shape}/{b.shape} do not match ({n_out}, {n_in})")
        parts.append(w.reshape(-1))
        parts.append(b)
    return np.concatenate(parts)


# ---------------------------------------------------------------------------
# Forward pass
# ---------------------------------------------------------------------------

def _check_inputs(x: np.ndarray, arch: Architecture) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.ndim == 1:
        x = x[None, :]
    if x.ndim != 2 or x.shape[1] != arch.n_inputs:
        raise ValueError(f"inputs have shape {x.shape}, expected (n, {arch.n_inputs})")
    return x


def forward(x: np.ndarray, phi: np.ndarray, arch: Architecture) -> np.ndarray:
    """Batched network output z = f(x, phi) for x of shape (n, n_inputs)."""
    z, _ = _forward_cached(_check_inputs(x, arch), phi, arch)
    return z


def forward_mean(x, phi: np.ndarray, arch: Architecture) -> float:
    """Network output for a single input vector (or FlowFeatures)."""
    if isinstance(x, FlowFeatures):
        x = x.to_array()
    x = np.asarray(x, dtype=float)
    if x.shape != (arch.n_inputs,):
        raise ValueError(f"x has shape {x.shape}, expected ({arch.n_inputs},)")
    return float(forward(x[None, :], phi, arch)[0])


def _forward_cached(x: np.ndarray, phi: np.ndarray, arch: Architecture):
    """Forward pass keeping the activations needed for backprop.

    Returns (z, cache) where cache = (layers, activations, preacts):
    activations[l] is the input to affine layer l+1 and preacts[l] the
    pre-ReLU values of hidden layer l+1.
    """
    layers = unpack_weights(phi, arch)
    a = x
    activations = [a]
    preacts = []
    for w, b in layers[:-1]:
        h = a @ w.T + b
        preacts.append(h)
        a = np.maximum(h, 0.0)
        activations.append(a)
    w_out, b_out = layers[-1]
    z = (a @ w_out.T + b_out).ravel()
    return z, (layers, activations, preacts)


def _backward_weights(dz: np.ndarray, cache, arch: Architecture) -> np.ndarray:
    """Reverse-mode accumulation of d(sum_i dz_i * z_i)/d(phi)."""
    layers, activations, preacts = cache
    grads = [None] * len(layers)
    w_out, _ = layers[-1]
    dw_out = dz[None, :] @ activations[-1]
    db_out = np.array([dz.sum()])
    grads[-1] = (dw_out, db_out)
    da = dz[:, None] * w_out
    for idx in range(len(layers) - 2, -1, -1):
        dh = da * (preacts[idx] > 0.0)
        dw = dh.T @ activations[idx]
        db = dh.sum(axis=0)
        grads[idx] = (dw, db)
        if idx > 0:
            da = dh @ layers[idx][0]
    return pack_weights(grads, arch)


# ---------------------------------------------------------------------------
# Noise model
# ---------------------------------------------------------------------------

def noise_std(z, psi: np.ndarray, spec: NoiseSpec):
    """Measurement-noise standard deviation g(z, psi), strictly positive.

    fixed:  sigma_n
    homo:   exp(psi_1)
    hetero: exp(psi_2) * |z| + exp(psi_1)
    """
    z = np.asarray(z, dtype=float)
    psi = np.asarray(psi, dtype=float)
    if psi.shape != (spec.n_params,):
        raise ValueError(f"psi has shape {psi.shape}, expected ({spec.n_params},)")
    if not np.all(np.isfinite(psi)):
        raise ValueError("psi contains non-finite values")
    if spec.kind == "fixed":
        return np.full_like(z, spec.sigma_n)
    if spec.kind == "homo":
        return np.full_like(z, np.exp(psi[0]))
    return np.exp(psi[1]) * np.abs(z) + np.exp(psi[0])


# ---------------------------------------------------------------------------
# Log-likelihood
# ---------------------------------------------------------------------------

def _check_targets(x: np.ndarray, y) -> np.ndarray:
    y = np.asarray(y, dtype=float).ravel()
    if y.shape[0] != x.shape[0]:
        raise ValueError(f"{x.shape[0]} inputs but {y.shape[0]} targets")
    if y.shape[0] == 0:
        raise ValueError("dataset is empty")
    return y


def _ll_value(y: np.ndarray, z: np.ndarray, s: np.ndarray) -> float:
    value = float(np.sum(-0.5 * LOG_2PI - np.log(s) - 0.5 * ((y - z) / s) ** 2))
    if not np.isfinite(value):
        raise NumericalError("log-likelihood is non-finite",
                             {"z_range": (float(np.min(z)), float(np.max(z)))})
    return value


def log_likelihood(x: np.ndarray, y: np.ndarray, theta: np.ndarray,
                   spec: NoiseSpec, arch: Architecture) -> float:
    """Sum_i log N(y_i | f(x_i, phi), g(f(x_i, phi), psi)^2)."""
    x = _check_inputs(x, arch)
    y = _check_targets(x, y)
    phi, psi = split_theta(theta, arch, spec)
    z = forward(x, phi, arch)
    return _ll_value(y, z, noise_std(z, psi, spec))


def log_likelihood_and_grad(x: np.ndarray, y: np.ndarray, theta: np.ndarray,
                            spec: NoiseSpec, arch: Architecture):
    """Log-likelihood and its gradient with respect to theta.

    The gradient is accumulated in reverse mode through the fixed graph
    (affine layers, ReLU, the noise map, and the Gaussian density). For
    the heteroscedastic model the path through s = g(z, psi) includes the
    dependence of s on z; d|z|/dz uses the subgradient 0 at z = 0.
    """
    x = _check_inputs(x, arch)
    y = _check_targets(x, y)
    phi, psi = split_theta(theta, arch, spec)

    z, cache = _forward_cached(x, phi, arch)
    s = noise_std(z, psi, spec)
    r = y - z
    value = _ll_value(y, z, s)

    # dL/ds per point, shared by the learned-noise variants
    if spec.kind == "fixed":
        dz = r / spec.sigma_n ** 2
        dpsi = np.zeros(0)
    elif spec.kind == "homo":
        dz = r / s ** 2
        dpsi = np.array([np.sum(-1.0 + (r / s) ** 2)])
    else:
        dl_ds = -1.0 / s + r ** 2 / s ** 3
        e1, e2 = np.exp(psi[0]), np.exp(psi[1])
        dz = r / s ** 2 + dl_ds * e2 * np.sign(z)
        dpsi = np.array([e1 * np.sum(dl_ds), e2 * np.sum(dl_ds * np.abs(z))])

    dphi = _backward_weights(dz, cache, arch)
    return value, np.concatenate([dphi, dpsi])


# ---------------------------------------------------------------------------
# Priors
# ---------------------------------------------------------------------------

def he_prior(arch: Architecture, bias_std: float = 0.1) -> PriorSpec:
    """Zero-mean Gaussian prior over the weight slice, variance-preserving
    for ReLU networks.

    Weight stds are sqrt(1/n_in) for the first affine layer (raw inputs,
    no preceding ReLU) and sqrt(2/n_in) for every later layer. Bias stds
    default to 0.1; the zero-bias scheme this mirrors says nothing about
    bias spread, so it is configurable.
    """
    if bias_std <= 0:
        raise ConfigurationError(f"bias_std must be positive, got {bias_std}")
    stds = []
    for idx, (n_out, n_in) in enumerate(arch.layer_shapes):
        scale = np.sqrt(1.0 / n_in) if idx == 0 else np.sqrt(2.0 / n_in)
        stds.append(np.full(n_out * n_in, scale))
        stds.append(np.full(n_out, bias_std))
    std = np.concatenate(stds)
    return PriorSpec(np.zeros_like(std), std)


def noise_prior_from_mape(er: float, d: float, spec: NoiseSpec,
                          mean_flow: float | None = None,
                          floor_error: float = 0.01) -> PriorSpec:
    """Prior over the noise slice derived from an instrument's stated MAPE.

    A relative error E_r with Gaussian additive noise corresponds to a
    noise std of sqrt(pi/2) * E_r * |z|. Matching the log-normal mean of
    exp(psi) to that factor gives:

        hetero: psi_2 ~ N(c_2, d^2), c_2 = log(sqrt(pi/2) * er) - d^2/2,
                plus an additive floor psi_1 priced at ``floor_error`` of
                ``mean_flow`` (mean_flow defaults to 1.0, i.e. one unit of
                the model's flow scale).
        homo:   psi_1 ~ N(c_1, d^2), c_1 = log(sqrt(pi/2) * er * mean_flow)
                - d^2/2, with ``mean_flow`` the well's mean production
                (required: a relative error only fixes an absolute level
                through a typical flow).

    ``mean_flow`` must be expressed in the same units as the model target
    (divide physical flow by the target's training std when the model is
    standardized). ``d`` expresses uncertainty about E_r; d = 0 is allowed
    in the location formula and stored as a near-point prior.
    """
    if er <= 0:
        raise ConfigurationError(f"er must be positive, got {er}")
    if d < 0:
        raise ConfigurationError(f"prior std d must be nonnegative, got {d}")
    if spec.n_params == 0:
        raise ConfigurationError("fixed noise has no psi parameters to set a prior on")
    d_stored = max(d, 1e-12)
    if spec.kind == "homo":
        if mean_flow is None or mean_flow <= 0:
            raise ConfigurationError("homoscedastic noise prior requires mean_flow > 0")
        c1 = np.log(np.sqrt(np.pi / 2.0) * er * mean_flow) - d ** 2 / 2.0
        return PriorSpec(np.array([c1]), np.array([d_stored]))
    zbar = 1.0 if mean_flow is None else float(mean_flow)
    if zbar <= 0:
        raise ConfigurationError(f"mean_flow must be positive, got {mean_flow}")
    c2 = np.log(np.sqrt(np.pi / 2.0) * er) - d ** 2 / 2.0
    c1 = np.log(np.sqrt(np.pi / 2.0) * floor_error * zbar) - d ** 2 / 2.0
    return PriorSpec(np.array([c1, c2]), np.array([d_stored, d_stored]))


def default_prior(arch: Architecture, spec: NoiseSpec, er: float = 0.1,
                  mean_flow: float | None = None, bias_std: float = 0.1,
                  noise_d: float = 0.5) -> PriorSpec:
    """Full-length prior: He-prior on weights plus the MAPE-derived noise
    prior (when the noise model is learned)."""
    prior = he_prior(arch, bias_std=bias_std)
    if spec.n_params > 0:
        prior = prior.concat(noise_prior_from_mape(er, noise_d, spec, mean_flow=mean_flow))
    return prior
