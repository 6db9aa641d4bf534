"""Signal priors, Bernoulli measurement matrices and output channels.

Every sampler takes a ``seed`` that may be an int, a sequence of ints, a
:class:`numpy.random.SeedSequence` or an existing :class:`numpy.random.Generator`.
Integer-like seeds are expanded through ``SeedSequence`` into a Philox
(counter-based) generator, so per-trial streams derived from
``(master_seed, trial, ...)`` are reproducible regardless of scheduling.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import DomainError, ParameterError

MIXTURE = "MixtureGaussian"
SPARSE_GAUSSIAN = "SparseGaussian"
SPARSE_WEIBULL = "SparseWeibull"
GAUSSIAN = "Gaussian"
POISSON = "Poisson"

# Tolerated floating-point noise below zero for Poisson rates.
POISSON_NEGATIVE_TOL = 1e-9


def make_rng(seed) -> np.random.Generator:
    """Return a Philox-backed generator for ``seed`` (passes Generators through)."""
    if isinstance(seed, np.random.Generator):
        return seed
    if isinstance(seed, np.random.SeedSequence):
        return np.random.Generator(np.random.Philox(seed))
    if seed is None:
        raise ParameterError("an explicit seed is required")
    if isinstance(seed, (int, np.integer)):
        entropy = int(seed)
    else:
        entropy = [int(s) for s in seed]
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(entropy)))


def child_seed(seed, index: int) -> np.random.SeedSequence:
    """Deterministic child stream ``index`` of ``seed`` (does not mutate ``seed``)."""
    if isinstance(seed, np.random.SeedSequence):
        root = seed
    elif isinstance(seed, (int, np.integer)):
        root = np.random.SeedSequence(int(seed))
    else:
        root = np.random.SeedSequence([int(s) for s in seed])
    return np.random.SeedSequence(root.entropy, spawn_key=tuple(root.spawn_key) + (int(index),))


def derive_seed(*keys: int) -> int:
    """Collapse integer keys into one reproducible 63-bit seed."""
    state = np.random.SeedSequence([int(k) for k in keys]).generate_state(2, np.uint32)
    return int((int(state[0]) << 31) ^ int(state[1]))


@dataclass(frozen=True)
class PriorSpec:
    """Law of one input entry.

    Build instances with :meth:`mixture`, :meth:`sparse_gaussian` or
    :meth:`sparse_weibull`; the raw constructor does not fill defaults.
    """

    variant: str
    weights: tuple = ()
    variances: tuple = ()
    sparsity: float = 1.0
    mu_x: float = 0.0
    scale: float = 1.0
    shape: float = 1.0

    def __post_init__(self):
        self.validate()

    @classmethod
    def mixture(cls, weights: Sequence[float], variances: Sequence[float]) -> "PriorSpec":
        return cls(MIXTURE, weights=tuple(float(w) for w in weights),
                   variances=tuple(float(v) for v in variances))

    @classmethod
    def sparse_gaussian(cls, s: float, mu_x: float) -> "PriorSpec":
        return cls(SPARSE_GAUSSIAN, sparsity=float(s), mu_x=float(mu_x))

    @classmethod
    def sparse_weibull(cls, s: float, scale: float, shape: float) -> "PriorSpec":
        return cls(SPARSE_WEIBULL, sparsity=float(s), scale=float(scale), shape=float(shape))

    def validate(self) -> None:
        if self.variant == MIXTURE:
            w = np.asarray(self.weights, dtype=float)
            v = np.asarray(self.variances, dtype=float)
            if w.size == 0:
                raise ParameterError("mixture prior needs at least one component")
            if w.shape != v.shape:
                raise ParameterError("mixture weights and variances differ in length")
            if not (np.all(np.isfinite(w)) and np.all(np.isfinite(v))):
                raise ParameterError("mixture parameters must be finite")
            if np.any(w < 0):
                raise ParameterError("mixture weights must be nonnegative")
            if np.any(v < 0):
                raise ParameterError("mixture variances must be nonnegative")
            if abs(w.sum() - 1.0) > 1e-12:
                raise ParameterError(f"mixture weights sum to {w.sum()!r}, not 1")
        elif self.variant == SPARSE_GAUSSIAN:
            if not 0.0 <= self.sparsity <= 1.0:
                raise ParameterError("sparsity must lie in [0, 1]")
            if not (self.mu_x >= 0 and math.isfinite(self.mu_x)):
                raise ParameterError("slab variance must be finite and nonnegative")
        elif self.variant == SPARSE_WEIBULL:
            if not 0.0 <= self.sparsity <= 1.0:
                raise ParameterError("sparsity must lie in [0, 1]")
            if not (self.scale > 0 and self.shape > 0):
                raise ParameterError("Weibull scale and shape must be positive")
            if not (math.isfinite(self.scale) and math.isfinite(self.shape)):
                raise ParameterError("Weibull parameters must be finite")
        else:
            raise ParameterError(f"unknown prior variant {self.variant!r}")

    @property
    def is_gaussian_family(self) -> bool:
        return self.variant in (MIXTURE, SPARSE_GAUSSIAN)

    def components(self) -> tuple[np.ndarray, np.ndarray]:
        """(weights, variances) of the Gaussian-family prior; a zero variance is a spike."""
        if self.variant == MIXTURE:
            return np.asarray(self.weights, float), np.asarray(self.variances, float)
        if self.variant == SPARSE_GAUSSIAN:
            s = self.sparsity
            return np.array([1.0 - s, s]), np.array([0.0, self.mu_x])
        raise ParameterError("Weibull prior has no Gaussian components")

    @property
    def max_variance(self) -> float:
        if self.variant == MIXTURE:
            return max(self.variances)
        if self.variant == SPARSE_GAUSSIAN:
            return self.mu_x
        raise ParameterError("Wiener gain is undefined for a Weibull prior")

    @property
    def spike_weight(self) -> float:
        """Probability of an exact zero."""
        if self.variant == MIXTURE:
            return float(sum(w for w, v in zip(self.weights, self.variances) if v == 0.0))
        return 1.0 - self.sparsity

    def mean(self) -> float:
        if self.variant == SPARSE_WEIBULL:
            return self.sparsity * self.scale * math.gamma(1.0 + 1.0 / self.shape)
        return 0.0

    def second_moment(self) -> float:
        if self.variant == MIXTURE:
            return float(np.dot(self.weights, self.variances))
        if self.variant == SPARSE_GAUSSIAN:
            return self.sparsity * self.mu_x
        return self.sparsity * self.scale ** 2 * math.gamma(1.0 + 2.0 / self.shape)

    def slab_second_moment(self) -> float:
        """Second moment of the non-spike part (used to size integration windows)."""
        if self.variant == MIXTURE:
            return max(self.variances)
        if self.variant == SPARSE_GAUSSIAN:
            return self.mu_x
        return self.scale ** 2 * math.gamma(1.0 + 2.0 / self.shape)

    def variance(self) -> float:
        return self.second_moment() - self.mean() ** 2

    def to_dict(self) -> dict:
        if self.variant == MIXTURE:
            return {"kind": "mixture", "weights": list(self.weights),
                    "variances": list(self.variances)}
        if self.variant == SPARSE_GAUSSIAN:
            return {"kind": "sparse_gaussian", "s": self.sparsity, "mu_x": self.mu_x}
        return {"kind": "sparse_weibull", "s": self.sparsity, "scale": self.scale,
                "shape": self.shape}

    @classmethod
    def from_dict(cls, d: dict) -> "PriorSpec":
        d = dict(d)
        kind = d.pop("kind", None)
        allowed = {"mixture": {"weights", "variances"},
                   "sparse_gaussian": {"s", "mu_x"},
                   "sparse_weibull": {"s", "scale", "shape"}}
        if kind not in allowed:
            raise ParameterError(f"unknown prior kind {kind!r}")
        if set(d) != allowed[kind]:
            raise ParameterError(f"prior {kind!r} expects keys {sorted(allowed[kind])}, got {sorted(d)}")
        if kind == "mixture":
            return cls.mixture(d["weights"], d["variances"])
        if kind == "sparse_gaussian":
            return cls.sparse_gaussian(d["s"], d["mu_x"])
        return cls.sparse_weibull(d["s"], d["scale"], d["shape"])


@dataclass(frozen=True)
class ChannelSpec:
    """Per-measurement likelihood: additive Gaussian noise or Poisson counts."""

    variant: str
    noise_var: float = 0.0
    alpha: float = 0.0

    def __post_init__(self):
        if self.variant == GAUSSIAN:
            if not self.noise_var > 0:
                raise ParameterError("Gaussian channel noise variance must be > 0")
        elif self.variant == POISSON:
            if not self.alpha > 0:
                raise ParameterError("Poisson scale must be > 0")
        else:
            raise ParameterError(f"unknown channel variant {self.variant!r}")

    @classmethod
    def gaussian(cls, noise_var: float) -> "ChannelSpec":
        return cls(GAUSSIAN, noise_var=float(noise_var))

    @classmethod
    def poisson(cls, alpha: float) -> "ChannelSpec":
        return cls(POISSON, alpha=float(alpha))


@dataclass
class LinearMixingInstance:
    matrix: np.ndarray
    x: np.ndarray
    w: np.ndarray
    y: np.ndarray
    labels: np.ndarray = field(default=None, repr=False)


def sample_signal_with_labels(prior: PriorSpec, n: int, seed) -> tuple[np.ndarray, np.ndarray]:
    """Sample ``n`` entries and the latent component index of each.

    Labels index :meth:`PriorSpec.components` for Gaussian-family priors;
    for the sparse Weibull prior 0 marks the spike and 1 the slab.
    """
    if n < 1:
        raise ParameterError("n must be >= 1")
    prior.validate()
    rng = make_rng(seed)
    if prior.variant == SPARSE_WEIBULL:
        u = rng.random(n)
        slab = u < prior.sparsity
        # inverse CDF; 1 - v lies in (0, 1] so the log is finite
        v = rng.random(n)
        x = np.where(slab, prior.scale * (-np.log1p(-v)) ** (1.0 / prior.shape), 0.0)
        return x, slab.astype(np.int64)
    weights, variances = prior.components()
    cdf = np.cumsum(weights)
    cdf[-1] = 1.0
    labels = np.searchsorted(cdf, rng.random(n), side="right")
    labels = np.minimum(labels, len(weights) - 1)
    g = rng.standard_normal(n)
    x = g * np.sqrt(variances[labels])
    return x, labels.astype(np.int64)


def sample_signal(prior: PriorSpec, n: int, seed) -> np.ndarray:
    """Draw ``n`` i.i.d. entries from ``prior``."""
    return sample_signal_with_labels(prior, n, seed)[0]


def sample_matrix(m: int, n: int, seed) -> np.ndarray:
    """Bernoulli(0.5) {0, 1} matrix with every row scaled to unit Euclidean norm.

    All-zero rows are redrawn from the same stream until they contain a one.
    """
    if m < 1 or n < 1:
        raise ParameterError("matrix dimensions must be >= 1")
    rng = make_rng(seed)
    a = (rng.random((m, n)) < 0.5).astype(float)
    counts = a.sum(axis=1)
    for i in np.flatnonzero(counts == 0):
        while counts[i] == 0:
            a[i] = (rng.random(n) < 0.5).astype(float)
            counts[i] = a[i].sum()
    return a / np.sqrt(counts)[:, None]


def apply_channel(channel: ChannelSpec, w, seed) -> np.ndarray:
    """Pass noiseless measurements ``w`` through ``channel``."""
    w = np.asarray(w, dtype=float)
    rng = make_rng(seed)
    if channel.variant == GAUSSIAN:
        return w + math.sqrt(channel.noise_var) * rng.standard_normal(w.shape)
    rate = channel.alpha * w
    if np.any(rate < -POISSON_NEGATIVE_TOL):
        raise DomainError(f"negative Poisson rate {rate.min()!r}")
    return rng.poisson(np.maximum(rate, 0.0)).astype(float)


def snr_to_noise_variance(prior: PriorSpec, snr_db: float) -> float:
    """Noise variance giving ``snr_db`` relative to the prior's second moment."""
    power = prior.second_moment()
    if not power > 0:
        raise DomainError("prior has zero power; SNR is undefined")
    return power / 10.0 ** (snr_db / 10.0)


def linear_mixing_instance(prior: PriorSpec, channel: ChannelSpec, m: int, n: int,
                           seed) -> LinearMixingInstance:
    """Sample signal, matrix and observations from independent child streams of ``seed``."""
    s_sig, s_mat, s_noise = (child_seed(seed, i) for i in range(3))
    x, labels = sample_signal_with_labels(prior, n, s_sig)
    phi = sample_matrix(m, n, s_mat)
    w = phi @ x
    y = apply_channel(channel, w, s_noise)
    return LinearMixingInstance(matrix=phi, x=x, w=w, y=y, labels=labels)
