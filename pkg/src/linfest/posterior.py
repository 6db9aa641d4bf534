"""Posterior of x given q = x + v, v ~ N(0, mu_v), for the supported priors.

Gaussian-family priors get the exact mixture posterior; any prior (the
sparse Weibull in particular) can be discretized on a grid. Both forms
carry an exact point mass at zero instead of a narrow Gaussian.

The ``*_arrays`` functions are the vectorized work-horses (one row per
observation); the scalar functions wrap them for a single observation.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.polynomial.hermite import hermgauss
from scipy.special import logsumexp

from .errors import DegeneratePosteriorError, DomainError, ParameterError
from .signal_model import SPARSE_WEIBULL, PriorSpec

LOG_2PI = float(np.log(2.0 * np.pi))
GH_NODES = 64
_GH_X, _GH_W = hermgauss(GH_NODES)
_GH_LOGW = np.log(_GH_W / np.sqrt(np.pi))


@dataclass(frozen=True)
class EffectiveChannel:
    """Pseudo-observations ``q`` of the scalar channel q = x + v with noise variance ``mu_v``."""

    q: np.ndarray
    mu_v: float

    def __post_init__(self):
        q = np.atleast_1d(np.asarray(self.q, dtype=float))
        object.__setattr__(self, "q", q)
        if q.size < 1:
            raise ParameterError("effective channel needs at least one observation")
        if not self.mu_v > 0:
            raise DomainError("effective noise variance must be > 0")


@dataclass(frozen=True)
class GridPolicy:
    """Integration grid for :func:`posterior_grid`.

    The window is the prior-sized interval around ``[min(0, q), max(0, q)]``
    clipped to ``q ± likelihood_halfwidth * sqrt(mu_v)``; outside it the
    likelihood is below exp(-halfwidth**2 / 2) of its peak.
    """

    points: int = 4096
    prior_halfwidth: float = 8.0
    likelihood_halfwidth: float = 12.0
    weibull_epsilon: float = 1e-12

    def __post_init__(self):
        if self.points < 64:
            raise ParameterError("grid resolution must be at least 64 points")


@dataclass(frozen=True)
class ScalarPosterior:
    """Posterior law of one entry.

    ``kind == "closed"``: spike ``pi0`` at zero plus Gaussians
    (``weights``, ``means``, ``variances``). ``kind == "grid"``: spike
    ``pi0`` plus point masses ``masses`` at increasing ``points``.
    """

    kind: str
    pi0: float
    weights: np.ndarray = None
    means: np.ndarray = None
    variances: np.ndarray = None
    points: np.ndarray = None
    masses: np.ndarray = None

    @classmethod
    def closed(cls, pi0, weights, means, variances) -> "ScalarPosterior":
        return cls("closed", float(pi0), weights=np.asarray(weights, float),
                   means=np.asarray(means, float), variances=np.asarray(variances, float))

    @classmethod
    def grid(cls, pi0, points, masses) -> "ScalarPosterior":
        return cls("grid", float(pi0), points=np.asarray(points, float),
                   masses=np.asarray(masses, float))

    def total_mass(self) -> float:
        if self.kind == "closed":
            return self.pi0 + float(np.sum(self.weights))
        return self.pi0 + float(np.sum(self.masses))

    def discrete_measure(self) -> tuple[np.ndarray, np.ndarray]:
        """Points and weights of the measure the ℓ_p objective integrates against.

        Gaussian components are expanded on 64-node Gauss-Hermite rules; the
        spike is the point 0.
        """
        if self.kind == "closed":
            pts, wts = gauss_hermite_measure(self.pi0, self.weights[None, :],
                                             self.means[None, :], self.variances[None, :])
            return pts[0], wts[0]
        return (np.concatenate(([0.0], self.points)),
                np.concatenate(([self.pi0], self.masses)))


def _log_normal_pdf(x, var):
    return -0.5 * (LOG_2PI + np.log(var) + x * x / var)


def _normalize_log(logw: np.ndarray) -> np.ndarray:
    """Row-normalize log weights (last axis) with max subtraction."""
    top = np.max(logw, axis=-1, keepdims=True)
    if np.any(~np.isfinite(top)):
        raise DegeneratePosteriorError("all posterior masses underflowed")
    w = np.exp(logw - top)
    return w / w.sum(axis=-1, keepdims=True)


def _broadcast_noise(q, mu_v):
    q = np.atleast_1d(np.asarray(q, dtype=float))
    mu_v = np.broadcast_to(np.asarray(mu_v, dtype=float), q.shape)
    if not np.all(mu_v > 0):
        raise DomainError("noise variance mu_v must be > 0")
    return q, mu_v


def mixture_posterior_arrays(prior: PriorSpec, q, mu_v: float):
    """Closed-form posterior for every entry of ``q``.

    Returns ``(pi0, w, m, v)``: spike weights of shape (N,) and slab
    weights/means/variances of shape (N, K) over the prior's
    positive-variance components.
    """
    if not prior.is_gaussian_family:
        raise ParameterError("closed-form posterior needs a Gaussian-family prior")
    q, mu_v = _broadcast_noise(q, mu_v)
    weights, variances = prior.components()
    spike = variances == 0.0
    slab_w, slab_v = weights[~spike], variances[~spike]
    spike_w = weights[spike].sum()

    with np.errstate(divide="ignore"):
        log_slab = np.log(slab_w)[None, :] + _log_normal_pdf(q[:, None], slab_v[None, :] + mu_v[:, None])
        log_spike = np.log(spike_w) + _log_normal_pdf(q, mu_v)
    logw = np.concatenate([log_spike[:, None], log_slab], axis=1)
    probs = _normalize_log(logw)
    sv, nv = slab_v[None, :], mu_v[:, None]
    m = q[:, None] * (sv / (sv + nv))
    v = np.broadcast_to(sv * nv / (sv + nv), m.shape).copy()
    return probs[:, 0], probs[:, 1:], m, v


def posterior_gaussian_mixture(prior: PriorSpec, q_i: float, mu_v: float) -> ScalarPosterior:
    pi0, w, m, v = mixture_posterior_arrays(prior, [q_i], mu_v)
    return ScalarPosterior.closed(pi0[0], w[0], m[0], v[0])


def _grid_window(prior: PriorSpec, q, mu_v, policy: GridPolicy):
    sd_v = np.sqrt(mu_v)
    reach = policy.prior_halfwidth * np.sqrt(mu_v + prior.slab_second_moment())
    lo = np.minimum(0.0, q) - reach
    hi = np.maximum(0.0, q) + reach
    if prior.variant == SPARSE_WEIBULL:
        lo = np.full_like(q, policy.weibull_epsilon)
    lo = np.maximum(lo, q - policy.likelihood_halfwidth * sd_v)
    hi = np.minimum(hi, q + policy.likelihood_halfwidth * sd_v)
    # q far below the support edge: the posterior hugs the edge with decay
    # length mu_v / (edge - q); cover 40 of those
    decay = mu_v / np.maximum(lo - q, sd_v)
    hi = np.where((lo > q) & (hi - lo < 40.0 * decay), lo + 40.0 * decay, hi)
    return lo, hi


def _weibull_log_cell_mass(edges, scale, shape):
    """log(F(e[j+1]) - F(e[j])) for the Weibull CDF F, stable in both tails."""
    z = (np.maximum(edges, 0.0) / scale) ** shape
    za = z[:, :-1]
    with np.errstate(divide="ignore"):
        return -za + np.log(-np.expm1(za - z[:, 1:]))


def grid_posterior_arrays(prior: PriorSpec, q, mu_v: float, policy: GridPolicy = GridPolicy()):
    """Discretized posterior for every entry of ``q``.

    Returns ``(pi0, x, rho)``: spike weights (N,), abscissae (N, G) and
    slab masses (N, G); ``pi0 + rho.sum(1) == 1``. Gaussian slabs use
    density times likelihood at uniform nodes; the Weibull slab uses exact
    CDF increments per cell with the likelihood taken at the cell midpoint.
    """
    q, mu_v = _broadcast_noise(q, mu_v)
    lo, hi = _grid_window(prior, q, mu_v, policy)
    G = policy.points
    if prior.variant == SPARSE_WEIBULL:
        frac = np.linspace(0.0, 1.0, G + 1)
        edges = lo[:, None] + (hi - lo)[:, None] * frac[None, :]
        # the first cell absorbs the prior mass in [0, epsilon]
        edges[:, 0] = np.where(lo <= policy.weibull_epsilon, 0.0, edges[:, 0])
        x = 0.5 * (edges[:, 1:] + edges[:, :-1])
        with np.errstate(divide="ignore"):
            log_slab = (np.log(prior.sparsity)
                        + _weibull_log_cell_mass(edges, prior.scale, prior.shape)
                        + _log_normal_pdf(q[:, None] - x, mu_v[:, None]))
            log_spike = np.log(1.0 - prior.sparsity) + _log_normal_pdf(q, mu_v)
    else:
        weights, variances = prior.components()
        spike = variances == 0.0
        frac = np.linspace(0.0, 1.0, G)
        x = lo[:, None] + (hi - lo)[:, None] * frac[None, :]
        h = (hi - lo) / (G - 1)
        with np.errstate(divide="ignore"):
            comp = [np.log(wk) + _log_normal_pdf(x, vk)
                    for wk, vk in zip(weights[~spike], variances[~spike])]
            log_density = logsumexp(np.stack(comp), axis=0) if comp else np.full_like(x, -np.inf)
            log_slab = log_density + np.log(h)[:, None] + _log_normal_pdf(q[:, None] - x, mu_v[:, None])
            log_spike = np.log(weights[spike].sum()) + _log_normal_pdf(q, mu_v)
    logw = np.concatenate([log_spike[:, None], log_slab], axis=1)
    probs = _normalize_log(logw)
    return probs[:, 0], x, probs[:, 1:]


def posterior_grid(prior: PriorSpec, q_i: float, mu_v: float,
                   grid: GridPolicy = GridPolicy()) -> ScalarPosterior:
    pi0, x, rho = grid_posterior_arrays(prior, [q_i], mu_v, grid)
    return ScalarPosterior.grid(pi0[0], x[0], rho[0])


def mixture_moments(w, m, v):
    """Mean and variance of spike-plus-Gaussians rows (spike at zero contributes nothing)."""
    mean = np.sum(w * m, axis=-1)
    second = np.sum(w * (v + m * m), axis=-1)
    return mean, np.maximum(second - mean * mean, 0.0)


def posterior_moments(post: ScalarPosterior) -> tuple[float, float]:
    if post.kind == "closed":
        mean, var = mixture_moments(post.weights, post.means, post.variances)
        return float(mean), float(var)
    mean = float(np.sum(post.masses * post.points))
    second = float(np.sum(post.masses * post.points ** 2))
    return mean, second - mean * mean


def posterior_mean_var(prior: PriorSpec, q, mu_v: float, policy: GridPolicy | None = None):
    """Vectorized posterior mean and variance, closed form where available."""
    if prior.is_gaussian_family and policy is None:
        _, w, m, v = mixture_posterior_arrays(prior, q, mu_v)
        return mixture_moments(w, m, v)
    _, x, rho = grid_posterior_arrays(prior, q, mu_v, policy or GridPolicy())
    mean = np.sum(rho * x, axis=-1)
    second = np.sum(rho * x * x, axis=-1)
    return mean, np.maximum(second - mean * mean, 0.0)


def gauss_hermite_measure(pi0, w, m, v):
    """Expand spike + Gaussian rows into weighted points for the ℓ_p kernel.

    Shapes: ``pi0`` (N,), ``w, m, v`` (N, K). Returns (N, 1 + 64 K) arrays.
    """
    pi0 = np.atleast_1d(np.asarray(pi0, float))
    n, k = w.shape
    nodes = m[:, :, None] + np.sqrt(2.0 * v)[:, :, None] * _GH_X[None, None, :]
    weights = w[:, :, None] * np.exp(_GH_LOGW)[None, None, :]
    pts = np.concatenate([np.zeros((n, 1)), nodes.reshape(n, k * GH_NODES)], axis=1)
    wts = np.concatenate([pi0[:, None], weights.reshape(n, k * GH_NODES)], axis=1)
    return pts, wts
