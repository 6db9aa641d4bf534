"""Sum-product generalized AMP with mean removal.

Turns y ~ p(y | Φx) into the decoupled scalar channel q = x + v,
v ~ N(0, mu_v), consumed by the estimators in :mod:`linfest.estimators`.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
from numpy.polynomial.legendre import leggauss

from .errors import DegeneratePosteriorError, DivergenceError, ParameterError
from .posterior import EffectiveChannel, GridPolicy, posterior_mean_var
from .signal_model import GAUSSIAN, POISSON, ChannelSpec, PriorSpec

logger = logging.getLogger(__name__)

POISSON_NODES = 257
_GL_X, _GL_W = leggauss(POISSON_NODES)


@dataclass(frozen=True)
class GampConfig:
    max_iterations: int = 200
    damping: float = 0.7
    tolerance: float = 1e-8
    variance_floor: float = 1e-12
    # grid resolution for priors without a closed-form posterior
    grid_points: int = 512
    mean_removal: bool = True

    def __post_init__(self):
        if self.max_iterations < 1:
            raise ParameterError("max_iterations must be >= 1")
        if not 0.0 < self.damping <= 1.0:
            raise ParameterError("damping must lie in (0, 1]")
        if not self.tolerance > 0:
            raise ParameterError("tolerance must be > 0")


@dataclass
class GampResult:
    channel: EffectiveChannel
    x_mean: np.ndarray
    x_var: np.ndarray
    converged: bool
    trace: list = field(default_factory=list)

    @property
    def q(self) -> np.ndarray:
        return self.channel.q

    @property
    def mu_v(self) -> float:
        return self.channel.mu_v

    def trace_rows(self):
        """(iteration, residual, mu_r) tuples for CSV export."""
        return [(t["iteration"], t["residual"], t["mu_r"]) for t in self.trace]


def output_denoiser_gaussian(p_hat, mu_p, y, mu_z):
    """Score ``(y - p) / (mu_p + mu_z)`` and its negative derivative."""
    p_hat = np.asarray(p_hat, dtype=float)
    denom = mu_p + mu_z
    return (np.asarray(y, dtype=float) - p_hat) / denom, np.broadcast_to(1.0 / denom, p_hat.shape).copy()


def _poisson_window(p_hat, mu_p, y, alpha):
    """Integration interval around the posterior mode of w >= 0."""
    b = p_hat - alpha * mu_p
    mode = 0.5 * (b + np.sqrt(b * b + 4.0 * y * mu_p))
    mode = np.where(y > 0, mode, np.maximum(b, 0.0))
    curvature = 1.0 / mu_p + np.where(mode > 0, y / np.maximum(mode * mode, 1e-300), 0.0)
    sd = 1.0 / np.sqrt(curvature)
    lo = np.maximum(0.0, mode - 12.0 * sd)
    hi = mode + 20.0 * sd
    # mode pinned at the boundary: exponential decay with rate |b| / mu_p
    at_edge = mode <= 0.0
    edge_scale = np.minimum(np.sqrt(mu_p), mu_p / np.maximum(np.abs(b), 1e-300))
    hi = np.where(at_edge, 40.0 * edge_scale, hi)
    return lo, hi


def poisson_posterior_moments(p_hat, mu_p, y, alpha):
    """Mean and variance of w ∝ N(w; p_hat, mu_p) Poisson(y; alpha w) on w >= 0."""
    p_hat = np.atleast_1d(np.asarray(p_hat, dtype=float))
    y = np.broadcast_to(np.asarray(y, dtype=float), p_hat.shape)
    mu_p = np.broadcast_to(np.asarray(mu_p, dtype=float), p_hat.shape)
    lo, hi = _poisson_window(p_hat, mu_p, y, alpha)
    half = 0.5 * (hi - lo)
    w = 0.5 * (hi + lo)[:, None] + half[:, None] * _GL_X[None, :]
    with np.errstate(divide="ignore", invalid="ignore"):
        logf = -0.5 * (w - p_hat[:, None]) ** 2 / mu_p[:, None] - alpha * w
        logf = logf + np.where(y[:, None] > 0, y[:, None] * np.log(w), 0.0)
        logf = logf + np.log(_GL_W)[None, :]
    top = logf.max(axis=1, keepdims=True)
    if np.any(~np.isfinite(top)):
        raise DegeneratePosteriorError("Poisson output posterior underflowed")
    f = np.exp(logf - top)
    f /= f.sum(axis=1, keepdims=True)
    mean = np.sum(f * w, axis=1)
    var = np.sum(f * (w - mean[:, None]) ** 2, axis=1)
    return mean, var


def output_denoiser_poisson(p_hat, mu_p, y, alpha, variance_floor=1e-12):
    """GAMP output step for y ~ Poisson(alpha w) with a N(p_hat, mu_p) pseudo-prior on w."""
    mean, var = poisson_posterior_moments(p_hat, mu_p, y, alpha)
    p_hat = np.atleast_1d(np.asarray(p_hat, dtype=float))
    mu_p = np.broadcast_to(np.asarray(mu_p, dtype=float), p_hat.shape)
    s_hat = (mean - p_hat) / mu_p
    mu_s = np.maximum((1.0 - var / mu_p) / mu_p, variance_floor)
    return s_hat, mu_s


def _output_step(channel: ChannelSpec, p_hat, mu_p, y, floor):
    if channel.variant == GAUSSIAN:
        return output_denoiser_gaussian(p_hat, mu_p, y, channel.noise_var)
    if channel.variant == POISSON:
        return output_denoiser_poisson(p_hat, mu_p, y, channel.alpha, floor)
    raise ParameterError(f"unsupported channel {channel.variant!r}")


def _mean_removed(phi):
    """Augment Φ so GAMP only sees its zero-mean part.

    With row means b_i, Φx = Φ̃x + sqrt(N) b (1ᵀx / sqrt(N)). The extra
    unknown u = 1ᵀx / sqrt(N) gets a flat prior and the extra row
    enforces 1ᵀx / sqrt(N) - u = 0 exactly.
    """
    m, n = phi.shape
    b = phi.mean(axis=1)
    top = np.hstack([phi - b[:, None], np.sqrt(n) * b[:, None]])
    bottom = np.hstack([np.full((1, n), 1.0 / np.sqrt(n)), [[-1.0]]])
    return np.vstack([top, bottom])


def gamp_run(phi, y, prior: PriorSpec, channel: ChannelSpec,
             cfg: GampConfig = GampConfig()) -> GampResult:
    """Run damped sum-product GAMP and return the effective scalar channel.

    ``q`` is the last pseudo-observation r̂ fed to the input denoiser and
    ``mu_v`` the mean of its variances μ_r over the signal entries.
    """
    phi = np.asarray(phi, dtype=float)
    y = np.asarray(y, dtype=float)
    if phi.ndim != 2 or y.shape != (phi.shape[0],):
        raise ParameterError(f"matrix {phi.shape} does not match observations {y.shape}")
    if channel.variant not in (GAUSSIAN, POISSON):
        raise ParameterError(f"unsupported channel {channel.variant!r}")
    if channel.variant == POISSON and np.any((y < 0) | (y != np.round(y))):
        raise ParameterError("Poisson observations must be nonnegative integers")
    m, n = phi.shape
    aug = cfg.mean_removal
    a = _mean_removed(phi) if aug else phi
    sq = a * a
    policy = None if prior.is_gaussian_family else GridPolicy(points=cfg.grid_points)
    floor = cfg.variance_floor
    damp = cfg.damping

    x_hat = np.full(a.shape[1], prior.mean())
    x_var = np.full(a.shape[1], max(prior.variance(), floor))
    if aug:
        x_hat[n] = np.sqrt(n) * prior.mean()
        x_var[n] = max(prior.variance(), floor)
    s_hat = np.zeros(a.shape[0])
    mu_s = None
    trace = []
    converged = False
    first_residual = None
    blowups = 0
    r_hat, mu_r = x_hat.copy(), np.full(a.shape[1], np.nan)

    for it in range(1, cfg.max_iterations + 1):
        mu_p = np.maximum(sq @ x_var, floor)
        p_hat = a @ x_hat - mu_p * s_hat
        s_new, mu_s_new = _output_step(channel, p_hat[:m], mu_p[:m], y, floor)
        if aug:
            # exact constraint row: zero-noise Gaussian output
            s_new = np.append(s_new, -p_hat[m] / mu_p[m])
            mu_s_new = np.append(mu_s_new, 1.0 / mu_p[m])
        mu_s_new = np.maximum(mu_s_new, floor)
        if mu_s is None:
            s_hat, mu_s = s_new, mu_s_new
        else:
            s_hat = damp * s_new + (1.0 - damp) * s_hat
            mu_s = damp * mu_s_new + (1.0 - damp) * mu_s
        mu_r = 1.0 / np.maximum(sq.T @ mu_s, floor)
        r_hat = x_hat + mu_r * (a.T @ s_hat)
        if not np.all(np.isfinite(r_hat)):
            raise DivergenceError(f"non-finite GAMP state at iteration {it}", trace)
        mean_new, var_new = _input_step(prior, r_hat[:n], mu_r[:n], policy)
        if aug:
            # flat prior on the mean coordinate
            mean_new = np.append(mean_new, r_hat[n])
            var_new = np.append(var_new, mu_r[n])
        x_old = x_hat
        x_hat = damp * mean_new + (1.0 - damp) * x_hat
        x_var = np.maximum(damp * var_new + (1.0 - damp) * x_var, floor)

        norm = max(float(np.linalg.norm(x_hat[:n])), 1e-300)
        residual = float(np.linalg.norm(x_hat[:n] - x_old[:n])) / norm
        trace.append({"iteration": it, "residual": residual,
                      "mu_p": float(np.mean(mu_p[:m])), "mu_r": float(np.mean(mu_r[:n])),
                      "mu_x": float(np.mean(x_var[:n])), "mu_s": float(np.mean(mu_s[:m]))})
        if not (np.isfinite(residual) and np.all(np.isfinite(x_hat))):
            raise DivergenceError(f"non-finite GAMP state at iteration {it}", trace)
        if first_residual is None:
            first_residual = residual
        blowups = blowups + 1 if residual > 10.0 * first_residual else 0
        if blowups >= 5:
            raise DivergenceError(f"GAMP residual diverged at iteration {it}", trace)
        if residual <= cfg.tolerance:
            converged = True
            break
    logger.debug("gamp stopped after %d iterations (converged=%s)", len(trace), converged)
    return GampResult(channel=EffectiveChannel(r_hat[:n], float(np.mean(mu_r[:n]))),
                      x_mean=x_hat[:n], x_var=x_var[:n], converged=converged, trace=trace)


def _input_step(prior, r_hat, mu_r, policy):
    """Posterior mean/variance per entry; μ_r may vary slightly across entries."""
    if np.ptp(mu_r) == 0.0:
        return posterior_mean_var(prior, r_hat, float(mu_r[0]), policy)
    return posterior_mean_var(prior, r_hat, mu_r, policy)
