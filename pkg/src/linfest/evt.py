"""Monte Carlo checks of Gaussian-maximum asymptotics behind the Wiener ℓ∞ results."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError, ParameterError
from .signal_model import MIXTURE, SPARSE_GAUSSIAN, PriorSpec, child_seed, make_rng, sample_signal_with_labels

# standard normals drawn per chunk when many small-n trials are batched
_CHUNK = 1 << 22


def sigma_pattern(mu_x: float, mu_z: float) -> tuple[float, float, float]:
    """Wiener gain and error standard deviations on the support and off it.

    Returns ``(c, sigma1, sigma2)`` with sigma1^2 = c^2 mu_z + (1-c)^2 mu_x
    and sigma2^2 = c^2 mu_z.
    """
    if not mu_z > 0:
        raise DomainError("noise variance must be > 0")
    if mu_x < 0:
        raise ParameterError("signal variance must be >= 0")
    c = mu_x / (mu_x + mu_z)
    s2 = math.sqrt(c * c * mu_z)
    s1 = math.sqrt(c * c * mu_z + (1.0 - c) ** 2 * mu_x)
    return c, s1, s2


def berman_statistic(values) -> float:
    """max(values) / sqrt(2 ln n); 0 for an all-zero sequence."""
    v = np.asarray(values, dtype=float)
    if v.size < 2:
        raise ParameterError("need at least two values")
    top = float(v.max())
    if top == 0.0 and not np.any(v):
        return 0.0
    return top / math.sqrt(2.0 * math.log(v.size))


def berman_ratio(n: int, trials: int, seed) -> tuple[float, float]:
    """Mean and standard deviation over trials of max of n standard normals / sqrt(2 ln n)."""
    if n < 2 or trials < 1:
        raise ParameterError("berman_ratio needs n >= 2 and trials >= 1")
    norm = math.sqrt(2.0 * math.log(n))
    ratios = np.empty(trials)
    per_chunk = max(1, _CHUNK // n)
    for start in range(0, trials, per_chunk):
        k = min(per_chunk, trials - start)
        rng = make_rng(child_seed(seed, start))
        ratios[start:start + k] = rng.standard_normal((k, n)).max(axis=1) / norm
    sd = float(ratios.std(ddof=1)) if trials > 1 else 0.0
    return float(ratios.mean()), sd


@dataclass
class ErrorPatternStats:
    gain: float
    sigma1: float
    sigma2: float
    support: np.ndarray
    off_support: np.ndarray
    max_support: float
    max_off_support: float

    @property
    def n_support(self) -> int:
        return int(self.support.size)

    @property
    def n_off_support(self) -> int:
        return int(self.off_support.size)


@dataclass
class DominanceResult:
    fraction: float
    trials: int
    skipped: int
    dominant: int
    normalized_support: float
    normalized_off_support: float
    support_sizes: list = field(default_factory=list)

    @property
    def standard_error(self) -> float:
        used = self.trials - self.skipped
        if used < 1:
            return 0.0
        f = self.fraction
        return math.sqrt(max(f * (1.0 - f), 0.0) / used)


def _pattern_params(prior: PriorSpec, mu_z: float):
    """Gain, dominant-component label set and the two error sigmas."""
    if prior.variant == SPARSE_GAUSSIAN:
        c, s1, s2 = sigma_pattern(prior.mu_x, mu_z)
        return c, {1}, s1, s2
    if prior.variant == MIXTURE:
        variances = np.asarray(prior.variances)
        top = float(variances.max())
        if np.sum(variances == top) > 1 and len(set(variances.tolist())) == 1:
            raise ParameterError("mixture dominance needs distinct component variances")
        c = top / (top + mu_z)
        labels = {int(k) for k in np.flatnonzero(variances == top)}
        others = variances[variances != top]
        s1 = math.sqrt(c * c * mu_z + (1 - c) ** 2 * top)
        s2 = math.sqrt(c * c * mu_z + (1 - c) ** 2 * float(others.max()))
        return c, labels, s1, s2
    raise ParameterError("support dominance needs a sparse or mixture Gaussian prior")


def error_patterns(prior: PriorSpec, mu_z: float, n: int, seed) -> ErrorPatternStats:
    """One trial: sample x, observe r = x + z, apply the Wiener filter, split errors by support."""
    c, labels, s1, s2 = _pattern_params(prior, mu_z)
    x, lab = sample_signal_with_labels(prior, n, child_seed(seed, 0))
    z = math.sqrt(mu_z) * make_rng(child_seed(seed, 1)).standard_normal(n)
    err = np.abs(c * (x + z) - x)
    on = np.isin(lab, list(labels))
    support, off = np.flatnonzero(on), np.flatnonzero(~on)
    return ErrorPatternStats(
        gain=c, sigma1=s1, sigma2=s2, support=support, off_support=off,
        max_support=float(err[support].max()) if support.size else float("nan"),
        max_off_support=float(err[off].max()) if off.size else float("nan"),
    )


def support_dominance(prior: PriorSpec, mu_z: float, n: int, trials: int, seed) -> DominanceResult:
    """Fraction of trials whose largest Wiener error falls on the dominant support.

    Trials where either index set is empty are skipped; ties count as
    non-dominant. Maxima are also normalized by sigma * sqrt(2 ln |set|).
    """
    if trials < 1 or n < 2:
        raise ParameterError("support_dominance needs n >= 2 and trials >= 1")
    dominant = skipped = 0
    norm_on, norm_off, sizes = [], [], []
    for t in range(trials):
        st = error_patterns(prior, mu_z, n, child_seed(seed, t))
        sizes.append(st.n_support)
        if st.n_support == 0 or st.n_off_support == 0:
            skipped += 1
            continue
        if st.max_support > st.max_off_support:
            dominant += 1
        if st.n_support >= 2:
            norm_on.append(st.max_support / (st.sigma1 * math.sqrt(2 * math.log(st.n_support))))
        if st.n_off_support >= 2 and st.sigma2 > 0:
            norm_off.append(st.max_off_support / (st.sigma2 * math.sqrt(2 * math.log(st.n_off_support))))
    used = trials - skipped
    # with every trial skipped the statement holds vacuously
    fraction = dominant / used if used else 1.0
    return DominanceResult(
        fraction=fraction, trials=trials, skipped=skipped, dominant=dominant,
        normalized_support=float(np.mean(norm_on)) if norm_on else float("nan"),
        normalized_off_support=float(np.mean(norm_off)) if norm_off else float("nan"),
        support_sizes=sizes,
    )
