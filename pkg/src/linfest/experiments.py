"""Seeded Monte Carlo experiments: configs, per-trial records, CSV output and sweeps."""

from __future__ import annotations

import csv
import io
import json
import math
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, fields
from pathlib import Path

import numpy as np

from .errors import ConfigError, LinfError
from .estimators import (
    error_report,
    lp_vector_estimate,
    posterior_mean_estimate,
    posterior_measure,
    wiener_sparse,
)
from .evt import berman_ratio, support_dominance
from .gamp import GampConfig, gamp_run
from .posterior import EffectiveChannel, GridPolicy
from .signal_model import (
    GAUSSIAN,
    MIXTURE,
    POISSON,
    SPARSE_GAUSSIAN,
    SPARSE_WEIBULL,
    ChannelSpec,
    PriorSpec,
    child_seed,
    derive_seed,
    linear_mixing_instance,
    make_rng,
    sample_signal,
    snr_to_noise_variance,
)

SCALAR_MIXTURE = "scalar-mixture"
SCALAR_SPARSE = "scalar-sparse"
LMS = "lms"
POPT_SWEEP = "popt-sweep"
EVT_CHECK = "evt-check"
KINDS = (SCALAR_MIXTURE, SCALAR_SPARSE, LMS, POPT_SWEEP, EVT_CHECK)

CSV_HEADER = "experiment,N,M,trial,seed,estimator,p,linf,l2,seconds"
EVT_HEADER = "experiment,check,n,trials,seed,value,sd"

DEFAULT_N = {SCALAR_MIXTURE: (100, 300, 1000, 3000, 10000),
             SCALAR_SPARSE: (100, 300, 1000, 3000, 10000),
             POPT_SWEEP: (100, 300, 1000, 3000, 10000),
             LMS: (500, 1000, 2000, 5000),
             EVT_CHECK: (100, 1000, 10000, 100000, 1000000)}

_CONFIG_KEYS = {"experiment", "id", "prior", "channel", "snr_db", "N", "m_ratio", "p",
                "estimators", "trials", "seed", "out", "timing", "grid_points", "gamp"}
_CHANNEL_KEYS = {"gaussian": {"kind", "noise_var"}, "poisson": {"kind", "alpha"}}


def _channel_from_dict(d) -> ChannelSpec:
    if not isinstance(d, dict):
        raise ConfigError("channel must be a JSON object")
    kind = d.get("kind")
    if kind not in _CHANNEL_KEYS:
        raise ConfigError(f"unknown channel kind {kind!r}")
    if set(d) - _CHANNEL_KEYS[kind]:
        raise ConfigError(f"unknown channel keys {sorted(set(d) - _CHANNEL_KEYS[kind])}")
    if kind == "poisson":
        return ChannelSpec.poisson(d["alpha"])
    return ChannelSpec.gaussian(d["noise_var"]) if "noise_var" in d else None


@dataclass(frozen=True)
class EstimatorChoice:
    """One column of an experiment: ``name`` as written to CSV plus how to compute it."""

    name: str
    kind: str
    p: float | None = None
    variance: float | None = None


@dataclass(frozen=True)
class ExperimentConfig:
    experiment: str
    prior: PriorSpec
    channel: ChannelSpec
    n_list: tuple
    estimators: tuple
    p_list: tuple = ()
    m_ratio: float = 0.3
    snr_db: float | None = None
    trials: int = 100
    seed: int = 0
    out_dir: str = "results"
    id: str = ""
    timing: bool = False
    grid_points: int = 512
    gamp: GampConfig = field(default_factory=GampConfig)

    @property
    def experiment_id(self) -> str:
        return self.id or self.experiment

    @property
    def is_scalar(self) -> bool:
        return self.experiment in (SCALAR_MIXTURE, SCALAR_SPARSE, POPT_SWEEP)

    def m_for(self, n: int) -> int:
        return max(1, int(round(self.m_ratio * n))) if self.experiment == LMS else n

    @property
    def noise_var(self) -> float:
        return self.channel.noise_var if self.channel.variant == GAUSSIAN else float("nan")

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        if not isinstance(d, dict):
            raise ConfigError("config must be a JSON object")
        unknown = set(d) - _CONFIG_KEYS
        if unknown:
            raise ConfigError(f"unknown config keys {sorted(unknown)}")
        kind = d.get("experiment")
        if kind not in KINDS:
            raise ConfigError(f"experiment must be one of {list(KINDS)}, got {kind!r}")
        if "prior" not in d:
            raise ConfigError("config needs a prior")
        try:
            prior = PriorSpec.from_dict(d["prior"])
            channel = _channel_from_dict(d.get("channel", {"kind": "gaussian"}))
            snr_db = d.get("snr_db")
            if channel is None:
                if snr_db is None:
                    raise ConfigError("Gaussian channel needs noise_var or snr_db")
                channel = ChannelSpec.gaussian(snr_to_noise_variance(prior, float(snr_db)))
            elif snr_db is not None and channel.variant == GAUSSIAN:
                raise ConfigError("give either snr_db or channel.noise_var, not both")
            gamp = GampConfig(**d.get("gamp", {}))
        except LinfError as exc:
            raise ConfigError(str(exc)) from exc
        except TypeError as exc:
            raise ConfigError(f"bad gamp settings: {exc}") from exc
        try:
            cfg = cls._build(d, kind, prior, channel, snr_db, gamp)
        except ConfigError:
            raise
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"bad config value: {exc}") from exc
        cfg.validate()
        return cfg

    @classmethod
    def _build(cls, d, kind, prior, channel, snr_db, gamp):
        p_list = tuple(float(p) for p in d.get("p", ()))
        return cls(
            experiment=kind, prior=prior, channel=channel,
            n_list=tuple(int(n) for n in d.get("N", DEFAULT_N[kind])),
            estimators=tuple(d.get("estimators", ())), p_list=p_list,
            m_ratio=float(d.get("m_ratio", 0.3)),
            snr_db=None if snr_db is None else float(snr_db),
            trials=int(d.get("trials", 100)), seed=int(d.get("seed", 0)),
            out_dir=str(d.get("out", "results")), id=str(d.get("id", "")),
            timing=bool(d.get("timing", False)), grid_points=int(d.get("grid_points", 512)),
            gamp=gamp,
        )

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        try:
            text = Path(path).read_text()
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"invalid JSON in {path}: {exc}") from exc
        return cls.from_dict(data)

    def replace(self, **changes) -> "ExperimentConfig":
        vals = {f.name: getattr(self, f.name) for f in fields(self)}
        vals.update(changes)
        cfg = type(self)(**vals)
        cfg.validate()
        return cfg

    def validate(self) -> None:
        if not self.n_list:
            raise ConfigError("N list must be nonempty")
        if any(n < 2 for n in self.n_list):
            raise ConfigError("every N must be >= 2")
        if any(b <= a for a, b in zip(self.n_list, self.n_list[1:])):
            raise ConfigError("N list must be strictly increasing")
        if self.trials < 1:
            raise ConfigError("trials must be >= 1")
        if self.seed < 0:
            raise ConfigError("seed must be nonnegative")
        if not 0.0 < self.m_ratio <= 1.0:
            raise ConfigError("m_ratio must lie in (0, 1]")
        if self.grid_points < 64:
            raise ConfigError("grid_points must be >= 64")
        if len(set(self.p_list)) != len(self.p_list):
            raise ConfigError(f"duplicate values in p list {list(self.p_list)}")
        if any(not p >= 1 for p in self.p_list):
            raise ConfigError("every p must be >= 1")
        if self.experiment == EVT_CHECK:
            if self.prior.variant not in (SPARSE_GAUSSIAN, MIXTURE):
                raise ConfigError("evt-check needs a sparse or mixture Gaussian prior")
            if self.channel.variant != GAUSSIAN:
                raise ConfigError("evt-check needs a Gaussian channel")
            return
        if self.is_scalar and self.channel.variant != GAUSSIAN:
            raise ConfigError("scalar experiments observe x through Gaussian noise only")
        if self.channel.variant == POISSON and self.prior.variant != SPARSE_WEIBULL:
            raise ConfigError("Poisson channel needs a nonnegative (sparse Weibull) prior")
        if not self.estimators:
            raise ConfigError("estimator list must be nonempty")
        choices = self.estimator_choices()
        if self.experiment == POPT_SWEEP:
            _check_sweepable(choices)

    def estimator_choices(self) -> list[EstimatorChoice]:
        """Expand the estimator list; raises ConfigError on unsupported combinations."""
        out = []
        for name in self.estimators:
            key = str(name)
            low = key.lower()
            if low == "wiener":
                if not self.prior.is_gaussian_family:
                    raise ConfigError("the Wiener filter does not apply to a sparse Weibull prior")
                out.append(EstimatorChoice("Wiener", "wiener", variance=self.prior.max_variance))
            elif len(key) > 1 and key[0] in "Ww" and key[1:].isdigit():
                if self.prior.variant != MIXTURE:
                    raise ConfigError(f"{key} needs a mixture Gaussian prior")
                k = int(key[1:])
                if not 1 <= k <= len(self.prior.variances):
                    raise ConfigError(f"{key}: prior has {len(self.prior.variances)} components")
                out.append(EstimatorChoice(f"W{k}", "wiener", variance=self.prior.variances[k - 1]))
            elif low in ("posteriormean", "posterior-mean", "mean"):
                out.append(EstimatorChoice("PosteriorMean", "mean"))
            elif low in ("lp", "lpoptimal"):
                if not self.p_list:
                    raise ConfigError("lp estimator needs a nonempty p list")
                out.extend(EstimatorChoice(f"p={p:g}", "lp", p=p) for p in self.p_list)
            else:
                raise ConfigError(f"unknown estimator {key!r}")
        names = [c.name for c in out]
        if len(set(names)) != len(names):
            raise ConfigError(f"estimator list repeats an entry: {names}")
        return out


def _check_sweepable(choices):
    n_p = sum(c.kind == "lp" for c in choices)
    if n_p < 1 or len(choices) < 2:
        raise ConfigError("a p_opt sweep needs at least one p and two estimators in total")


@dataclass(frozen=True)
class TrialRecord:
    experiment: str
    N: int
    M: int
    trial: int
    seed: int
    estimator: str
    p: float | None
    linf: float
    l2: float
    seconds: float = 0.0

    def csv_row(self) -> list[str]:
        return [self.experiment, str(self.N), str(self.M), str(self.trial), str(self.seed),
                self.estimator, "" if self.p is None else f"{self.p:g}",
                repr(self.linf), repr(self.l2), repr(self.seconds) if self.seconds else "0"]


def trial_seed(cfg: ExperimentConfig, n: int, trial: int) -> int:
    return derive_seed(cfg.seed, n, trial)


def _apply_estimators(cfg, choices, ch: EffectiveChannel, x, gamp_mean=None):
    """Estimates on the scalar channel ``ch``; yields (choice, xhat, seconds)."""
    grid = None if cfg.prior.is_gaussian_family else GridPolicy(points=cfg.grid_points)
    measure = None
    for c in choices:
        t0 = time.perf_counter()
        if c.kind == "wiener":
            xhat = wiener_sparse(ch.q, c.variance, ch.mu_v)
        elif c.kind == "mean":
            xhat = gamp_mean if gamp_mean is not None else posterior_mean_estimate(ch, cfg.prior, grid)
        else:
            if measure is None and c.p != 1:
                measure = posterior_measure(ch, cfg.prior, grid)
            xhat = lp_vector_estimate(ch, cfg.prior, c.p, grid=grid, measure=measure)
        yield c, xhat, time.perf_counter() - t0


def run_trial(cfg: ExperimentConfig, n: int, trial: int, choices=None) -> list[TrialRecord]:
    """All estimator records for one (N, trial); a pure function of the config."""
    choices = choices if choices is not None else cfg.estimator_choices()
    seed = trial_seed(cfg, n, trial)
    m = cfg.m_for(n)
    t_start = time.perf_counter()
    if cfg.experiment == LMS:
        inst = linear_mixing_instance(cfg.prior, cfg.channel, m, n, seed)
        res = gamp_run(inst.matrix, inst.y, cfg.prior, cfg.channel, cfg.gamp)
        x, ch, gamp_mean = inst.x, res.channel, res.x_mean
    else:
        x = sample_signal(cfg.prior, n, child_seed(seed, 0))
        z = math.sqrt(cfg.noise_var) * make_rng(child_seed(seed, 1)).standard_normal(n)
        x, ch, gamp_mean = x, EffectiveChannel(x + z, cfg.noise_var), None
    shared = time.perf_counter() - t_start
    out = []
    for c, xhat, secs in _apply_estimators(cfg, choices, ch, x, gamp_mean):
        rep = error_report(xhat, x, ps=(2,))
        out.append(TrialRecord(cfg.experiment_id, n, m, trial, seed, c.name, c.p,
                               rep.linf, rep.lp[2.0], (shared + secs) if cfg.timing else 0.0))
    return out


def resolve_threads(requested: int | None = None) -> int:
    env = os.environ.get("LINF_THREADS")
    if env:
        try:
            value = int(env)
        except ValueError as exc:
            raise ConfigError(f"LINF_THREADS must be an integer, got {env!r}") from exc
    else:
        value = 1 if requested is None else int(requested)
    if value < 1:
        raise ConfigError("thread count must be >= 1")
    return value


@dataclass
class SweepResult:
    """Per-N mean ℓ∞ error and standard error for each estimator."""

    n_list: tuple
    estimators: tuple
    means: dict
    ses: dict
    counts: dict
    p_by_name: dict
    p_opt: dict = field(default_factory=dict)
    unresolved: dict = field(default_factory=dict)
    _linf: dict = field(default_factory=dict, repr=False)

    @classmethod
    def from_records(cls, records) -> "SweepResult":
        linf, p_by_name, names, n_seen = {}, {}, [], []
        for r in records:
            linf.setdefault((r.N, r.estimator), {})[r.trial] = r.linf
            if r.estimator not in p_by_name:
                names.append(r.estimator)
                p_by_name[r.estimator] = r.p
            if r.N not in n_seen:
                n_seen.append(r.N)
        means, ses, counts = {}, {}, {}
        for key, by_trial in linf.items():
            v = np.array([by_trial[t] for t in sorted(by_trial)])
            means[key] = float(np.mean(v))
            ses[key] = float(np.std(v, ddof=1) / math.sqrt(v.size)) if v.size > 1 else 0.0
            counts[key] = int(v.size)
        res = cls(tuple(sorted(n_seen)), tuple(names), means, ses, counts, p_by_name, _linf=linf)
        res._compute_popt()
        return res

    def mean(self, n, name) -> float:
        return self.means[(n, name)]

    def se(self, n, name) -> float:
        return self.ses[(n, name)]

    def values(self, n, name) -> np.ndarray:
        by_trial = self._linf[(n, name)]
        return np.array([by_trial[t] for t in sorted(by_trial)])

    def paired_se(self, n, a, b) -> float:
        """Standard error of the mean per-trial difference between two estimators."""
        da, db = self._linf[(n, a)], self._linf[(n, b)]
        common = sorted(set(da) & set(db))
        d = np.array([da[t] - db[t] for t in common])
        return float(np.std(d, ddof=1) / math.sqrt(d.size)) if d.size > 1 else 0.0

    def gap_in_se(self, n, better, worse) -> float:
        """(mean(worse) - mean(better)) over the larger of the two standard errors."""
        gap = self.mean(n, worse) - self.mean(n, better)
        se = max(self.se(n, better), self.se(n, worse))
        return gap / se if se > 0 else (math.inf if gap > 0 else 0.0)

    def ranking(self, n) -> list[str]:
        return sorted((e for e in self.estimators if (n, e) in self.means),
                      key=lambda e: self.means[(n, e)])

    def _compute_popt(self):
        lp_names = [e for e in self.estimators if self.p_by_name.get(e) is not None]
        if not lp_names:
            return
        for n in self.n_list:
            cands = [e for e in lp_names if (n, e) in self.means]
            if not cands:
                continue
            best = min(cands, key=lambda e: self.means[(n, e)])
            self.p_opt[n] = self.p_by_name[best]
            others = [e for e in self.estimators if e != best and (n, e) in self.means]
            self.unresolved[n] = any(self.gap_in_se(n, best, e) < 1.0 for e in others)

    def table(self) -> str:
        buf = io.StringIO()
        buf.write("N," + ",".join(f"{e},{e}_se" for e in self.estimators) + ",p_opt,unresolved\n")
        for n in self.n_list:
            cells = []
            for e in self.estimators:
                cells += [f"{self.means.get((n, e), float('nan')):.6g}",
                          f"{self.ses.get((n, e), float('nan')):.3g}"]
            popt = self.p_opt.get(n)
            buf.write(f"{n}," + ",".join(cells)
                      + f",{'' if popt is None else format(popt, 'g')},{int(self.unresolved.get(n, False))}\n")
        return buf.getvalue()


def popt_trend_ok(sweep: SweepResult, p_list) -> bool:
    """p_opt(N) never decreases, except by one flagged step in the p list."""
    ps = sorted(p_list)
    ns = [n for n in sweep.n_list if n in sweep.p_opt]
    for a, b in zip(ns, ns[1:]):
        ia, ib = ps.index(sweep.p_opt[a]), ps.index(sweep.p_opt[b])
        if ib >= ia:
            continue
        if ia - ib > 1 or not (sweep.unresolved[a] or sweep.unresolved[b]):
            return False
    return True


def csv_path(cfg: ExperimentConfig) -> Path:
    return Path(cfg.out_dir) / f"{cfg.experiment_id}.csv"


def run_experiment(cfg: ExperimentConfig, threads: int | None = None,
                   out_path=None, write: bool = True, progress=None) -> tuple[list, SweepResult | None]:
    """Run every (N, trial) of ``cfg`` and append the records to CSV as they finish.

    Trials run on a thread pool but are written in (N, trial) order, so the
    file is identical for any thread count. ``evt-check`` configs write their
    own schema and return no SweepResult.
    """
    cfg.validate()
    if cfg.experiment == EVT_CHECK:
        return run_evt_check(cfg, out_path=out_path, write=write), None
    choices = cfg.estimator_choices()
    n_threads = resolve_threads(threads)
    path = Path(out_path) if out_path is not None else csv_path(cfg)
    jobs = [(n, t) for n in cfg.n_list for t in range(cfg.trials)]
    records = []
    fh = None
    if write:
        path.parent.mkdir(parents=True, exist_ok=True)
        fh = open(path, "w", newline="")
        fh.write(CSV_HEADER + "\n")
        fh.flush()
    try:
        writer = csv.writer(fh, lineterminator="\n") if fh else None
        with ThreadPoolExecutor(max_workers=n_threads) as pool:
            for batch in pool.map(lambda job: run_trial(cfg, job[0], job[1], choices), jobs):
                records.extend(batch)
                if writer:
                    writer.writerows(r.csv_row() for r in batch)
                    fh.flush()
                if progress:
                    progress(batch)
    finally:
        if fh:
            fh.close()
    return records, SweepResult.from_records(records)


def popt_sweep(cfg: ExperimentConfig, threads: int | None = None, **kw) -> SweepResult:
    """Run ``cfg`` and report p_opt(N); needs distinct p values and a second estimator."""
    if cfg.experiment == EVT_CHECK:
        raise ConfigError("p_opt sweeps need an estimator experiment")
    _check_sweepable(cfg.estimator_choices())
    return run_experiment(cfg, threads=threads, **kw)[1]


def run_evt_check(cfg: ExperimentConfig, out_path=None, write=True) -> list[tuple]:
    """Berman ratios and Wiener support dominance over the N list."""
    rows = []
    for n in cfg.n_list:
        seed = derive_seed(cfg.seed, n)
        mean, sd = berman_ratio(n, cfg.trials, child_seed(seed, 0))
        rows.append((cfg.experiment_id, "berman", n, cfg.trials, seed, mean, sd))
        dom = support_dominance(cfg.prior, cfg.channel.noise_var, n, cfg.trials, child_seed(seed, 1))
        rows.append((cfg.experiment_id, "dominance", n, cfg.trials, seed, dom.fraction, dom.standard_error))
        rows.append((cfg.experiment_id, "normalized_max_support", n, cfg.trials, seed,
                     dom.normalized_support, float("nan")))
        rows.append((cfg.experiment_id, "normalized_max_off_support", n, cfg.trials, seed,
                     dom.normalized_off_support, float("nan")))
    if write:
        path = Path(out_path) if out_path is not None else csv_path(cfg)
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", newline="") as fh:
            fh.write(EVT_HEADER + "\n")
            w = csv.writer(fh, lineterminator="\n")
            for r in rows:
                w.writerow([r[0], r[1], r[2], r[3], r[4], repr(r[5]), repr(r[6])])
    return rows
