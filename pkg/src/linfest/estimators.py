"""Wiener filters, the component-wise ℓ_p minimizer and error metrics."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.special import ndtr

from . import kernels
from .errors import DomainError, NumericError, ParameterError
from .posterior import (
    EffectiveChannel,
    GridPolicy,
    ScalarPosterior,
    gauss_hermite_measure,
    grid_posterior_arrays,
    mixture_moments,
    mixture_posterior_arrays,
    posterior_moments,
)
from .signal_model import MIXTURE, PriorSpec

WIENER_SPARSE = "WienerSparse"
WIENER_MIXTURE = "WienerMixture"
POSTERIOR_MEAN = "PosteriorMean"
LP_OPTIMAL = "LpOptimal"

# Convergence target for the minimizer, in units of t.
LP_TOL = 1e-12


@dataclass(frozen=True)
class EstimatorSpec:
    variant: str
    p: float | None = None

    def __post_init__(self):
        if self.variant not in (WIENER_SPARSE, WIENER_MIXTURE, POSTERIOR_MEAN, LP_OPTIMAL):
            raise ParameterError(f"unknown estimator {self.variant!r}")
        if self.variant == LP_OPTIMAL and not (self.p is not None and self.p >= 1):
            raise ParameterError("LpOptimal needs p >= 1")

    @property
    def name(self) -> str:
        if self.variant == LP_OPTIMAL:
            return f"p={self.p:g}"
        return {WIENER_SPARSE: "Wiener", WIENER_MIXTURE: "Wiener",
                POSTERIOR_MEAN: "PosteriorMean"}[self.variant]


@dataclass
class ErrorReport:
    linf: float
    lp: dict = field(default_factory=dict)
    abs_errors: np.ndarray | None = None


def wiener_sparse(r, mu_x: float, mu_z: float) -> np.ndarray:
    """Linear estimate mu_x / (mu_x + mu_z) * r."""
    if not mu_z > 0:
        raise DomainError("noise variance must be > 0")
    if mu_x < 0:
        raise ParameterError("signal variance must be >= 0")
    return (mu_x / (mu_x + mu_z)) * np.asarray(r, dtype=float)


def wiener_mixture(r, prior: PriorSpec, mu_z: float) -> np.ndarray:
    """Wiener filter tuned to the largest component variance of a Gaussian mixture."""
    if prior.variant != MIXTURE:
        raise ParameterError("wiener_mixture needs a MixtureGaussian prior")
    if len(prior.variances) == 0:
        raise ParameterError("empty mixture")
    return wiener_sparse(r, max(prior.variances), mu_z)


def _check_p(p):
    if not p >= 1:
        raise ParameterError(f"p must be >= 1, got {p!r}")


def _closed_median(post: ScalarPosterior) -> float:
    w, m, sd = post.weights, post.means, np.sqrt(post.variances)
    if np.any(sd <= 0):
        raise ParameterError("closed-form posterior components need positive variance")

    def cdf(t):
        return post.pi0 * (t >= 0.0) + float(np.sum(w * ndtr((t - m) / sd)))

    below_zero = cdf(0.0) - post.pi0
    if post.pi0 > 0 and below_zero <= 0.5 <= below_zero + post.pi0:
        return 0.0
    lo = min(0.0, float(np.min(m - 40 * sd)))
    hi = max(0.0, float(np.max(m + 40 * sd)))
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if cdf(mid) < 0.5:
            lo = mid
        else:
            hi = mid
        if hi - lo <= 1e-14 * max(1.0, abs(mid)):
            break
    return 0.5 * (lo + hi)


def _discrete_median(pts, wts) -> float:
    """Weighted median; a flat stretch of the CDF at 1/2 returns its midpoint."""
    order = np.argsort(pts, kind="stable")
    x, w = pts[order], wts[order]
    keep = w > 0
    x, w = x[keep], w[keep]
    cum = np.cumsum(w) / w.sum()
    i = int(np.searchsorted(cum, 0.5 - 1e-15))
    if abs(cum[i] - 0.5) <= 1e-15 and i + 1 < x.size:
        return 0.5 * (x[i] + x[i + 1])
    return float(x[i])


def lp_scalar_estimate(post: ScalarPosterior, p: float) -> float:
    """Minimizer of E[|t - X|^p] under the posterior ``post``."""
    _check_p(p)
    if p == 1:
        if post.kind == "closed":
            return _closed_median(post)
        return _discrete_median(*post.discrete_measure())
    pts, wts = post.discrete_measure()
    t, bad = kernels.lp_minimize(pts[None, :], wts[None, :], float(p), LP_TOL)
    if bad >= 0:
        raise NumericError(f"non-finite l_p objective derivative at t={t[bad]!r}", t=float(t[bad]))
    return float(t[0])


def lp_objective(post: ScalarPosterior, t: float, p: float) -> float:
    """E[|t - X|^p] under ``post`` (Gauss-Hermite for Gaussian parts)."""
    pts, wts = post.discrete_measure()
    with np.errstate(over="raise"):
        try:
            val = float(np.sum(wts * np.abs(t - pts) ** p))
        except FloatingPointError:
            val = float("inf")
    if not np.isfinite(val):
        raise NumericError(f"non-finite l_p objective at t={t!r}", t=float(t))
    return val


def _minimize_rows(pts, wts, p):
    t, bad = kernels.lp_minimize(pts, wts, float(p), LP_TOL)
    if bad >= 0:
        raise NumericError(f"non-finite l_p objective derivative at t={t[bad]!r}", t=float(t[bad]))
    return t


def posterior_measure(ch: EffectiveChannel, prior: PriorSpec, grid: GridPolicy | None = None):
    """Discrete measure (points, weights) per entry: GH-expanded or gridded posterior."""
    if prior.is_gaussian_family and grid is None:
        pi0, w, m, v = mixture_posterior_arrays(prior, ch.q, ch.mu_v)
        return gauss_hermite_measure(pi0, w, m, v)
    pi0, x, rho = grid_posterior_arrays(prior, ch.q, ch.mu_v, grid or GridPolicy())
    n = x.shape[0]
    return (np.concatenate([np.zeros((n, 1)), x], axis=1),
            np.concatenate([pi0[:, None], rho], axis=1))


def lp_vector_estimate(ch: EffectiveChannel, prior: PriorSpec, p: float,
                       grid: GridPolicy | None = None, measure=None) -> np.ndarray:
    """Component-wise ℓ_p estimate of the whole vector.

    ``measure`` may carry a precomputed :func:`posterior_measure` so that
    several ``p`` share one posterior construction.
    """
    _check_p(p)
    if p == 1:
        out = np.empty(ch.q.size)
        for i, qi in enumerate(ch.q):
            post = _single_posterior(prior, qi, ch.mu_v, grid)
            out[i] = lp_scalar_estimate(post, 1)
        return out
    pts, wts = measure if measure is not None else posterior_measure(ch, prior, grid)
    return _minimize_rows(pts, wts, p)


def _single_posterior(prior, qi, mu_v, grid):
    from .posterior import posterior_gaussian_mixture, posterior_grid

    if prior.is_gaussian_family and grid is None:
        return posterior_gaussian_mixture(prior, qi, mu_v)
    return posterior_grid(prior, qi, mu_v, grid or GridPolicy())


def posterior_mean_estimate(ch: EffectiveChannel, prior: PriorSpec,
                            grid: GridPolicy | None = None) -> np.ndarray:
    if prior.is_gaussian_family and grid is None:
        _, w, m, v = mixture_posterior_arrays(prior, ch.q, ch.mu_v)
        return mixture_moments(w, m, v)[0]
    _, x, rho = grid_posterior_arrays(prior, ch.q, ch.mu_v, grid or GridPolicy())
    return np.sum(rho * x, axis=1)


def lp_norm(e, p: float) -> float:
    """(sum |e|^p)^(1/p), scaled by max|e| so large p neither overflows nor underflows."""
    a = np.abs(np.asarray(e, dtype=float))
    top = float(a.max()) if a.size else 0.0
    if top == 0.0:
        return 0.0
    return top * float(np.sum((a / top) ** p)) ** (1.0 / p)


def error_report(xhat, x, ps=(2,), keep_abs=False) -> ErrorReport:
    xhat = np.asarray(xhat, dtype=float)
    x = np.asarray(x, dtype=float)
    if xhat.shape != x.shape or xhat.ndim != 1 or xhat.size < 1:
        raise ParameterError("estimate and truth must be equal-length nonempty vectors")
    e = np.abs(xhat - x)
    return ErrorReport(linf=float(e.max()), lp={float(p): lp_norm(e, p) for p in ps},
                       abs_errors=e if keep_abs else None)


__all__ = [
    "EstimatorSpec", "ErrorReport", "wiener_sparse", "wiener_mixture", "lp_scalar_estimate",
    "lp_objective", "lp_vector_estimate", "posterior_measure", "posterior_mean_estimate",
    "lp_norm", "error_report", "posterior_moments",
]
