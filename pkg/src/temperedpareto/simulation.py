"""Monte Carlo study harness: replicated fits, mean/RMSE curves and boxplot data."""

from __future__ import annotations

import csv
import io
import logging
import math
import time
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy import optimize

from .core import Burr, Frechet, LogNormal, Pareto, TemperedSampleSpec, sample_tempered
from .errors import DomainError, NumericError, TemperedParetoError
from .estimators import (
    default_tau_grid,
    fit_trace,
    quantile_from_params,
)

log = logging.getLogger(__name__)

__all__ = [
    "ESTIMATORS",
    "StudyConfig",
    "StudyResult",
    "true_quantile",
    "run_study",
    "paper_scenarios",
    "scenario",
    "boxplot_stats",
]

ESTIMATORS = ("WLS", "MLE", "Hill", "Weissman", "TruncatedPareto")


def true_quantile(spec: TemperedSampleSpec, p: float) -> float:
    """Exact ``z`` with ``P(min(Y, W) > z) = p``."""
    if not 0 < p < 1:
        raise DomainError("p must lie in (0, 1)")
    target = math.log(p)

    def f(lz):
        return spec.log_survival(math.exp(lz)) - target

    lo, hi = -1.0, 1.0
    for _ in range(200):
        if f(lo) > 0:
            break
        lo *= 2.0
    for _ in range(200):
        if f(hi) < 0:
            break
        hi *= 2.0
    if not (f(lo) > 0 > f(hi)):
        raise NumericError(f"could not bracket true quantile for p={p}: [{lo}, {hi}]")
    root = optimize.brentq(f, lo, hi, xtol=1e-14, rtol=1e-15, maxiter=500)
    return math.exp(root)


@dataclass(frozen=True)
class StudyConfig:
    spec: TemperedSampleSpec
    n_reps: int = 100
    k_grid: Optional[Tuple[int, ...]] = None
    k_min: int = 10
    tau_grid: Tuple[float, ...] = tuple(default_tau_grid())
    quantile_p_factors: Tuple[float, ...] = (1.0, 2.0)
    seed: int = 0
    estimators: Tuple[str, ...] = ESTIMATORS
    name: str = "custom"

    def __post_init__(self):
        if self.n_reps < 1:
            raise DomainError("n_reps must be >= 1")
        n = self.spec.n
        for c in self.quantile_p_factors:
            if not 1.0 / (c * n) < 1:
                raise DomainError(f"p = 1/(c n) must be < 1 for c={c}")
        if not 3 <= self.k_min <= n - 1:
            raise DomainError("k_min must lie in [3, n-1]")
        for k in self.grid:
            if not self.k_min <= k <= n - 1:
                raise DomainError(f"k={k} outside [{self.k_min}, {n - 1}]")
        bad = set(self.estimators) - set(ESTIMATORS)
        if bad:
            raise DomainError(f"unknown estimators {sorted(bad)}")

    @property
    def n(self) -> int:
        return self.spec.n

    @property
    def grid(self) -> np.ndarray:
        if self.k_grid is None:
            return np.arange(self.k_min, self.spec.n)
        return np.asarray(sorted(self.k_grid), dtype=int)

    @property
    def probabilities(self) -> Tuple[float, ...]:
        return tuple(1.0 / (c * self.spec.n) for c in self.quantile_p_factors)

    def to_dict(self) -> dict:
        base = self.spec.base
        return {
            "name": self.name,
            "family": base.name,
            "base": {k: v for k, v in vars(base).items() if k != "name"},
            "tau": self.spec.tau,
            "beta": self.spec.beta,
            "n": self.spec.n,
            "n_reps": self.n_reps,
            "k_min": self.k_min,
            "k_grid": None if self.k_grid is None else list(map(int, self.k_grid)),
            "tau_grid": list(self.tau_grid),
            "quantile_p_factors": list(self.quantile_p_factors),
            "seed": self.seed,
            "estimators": list(self.estimators),
        }


def _quantities(cfg: StudyConfig) -> List[Tuple[str, str]]:
    """``(quantity, estimator)`` pairs recorded by the study."""
    est = set(cfg.estimators)
    out = []
    for e in ("WLS", "MLE", "Hill", "TruncatedPareto"):
        if e in est:
            out.append(("alpha", e))
    for e in ("WLS", "MLE"):
        if e in est:
            out.append(("tau", e))
    for c in cfg.quantile_p_factors:
        for e in ("WLS", "MLE", "Weissman", "TruncatedPareto"):
            if e in est:
                out.append((f"Q[c={c:g}]", e))
    return out


def _one_replication(cfg: StudyConfig, rep: int):
    """Estimates on the k grid and at k_hat for one replication (pure)."""
    spec = replace(cfg.spec, seed=cfg.seed)
    s = sample_tempered(spec, rep)
    n = s.n
    if n < cfg.spec.n:
        raise NumericError(f"replication {rep}: {cfg.spec.n - n} non-positive draws")
    tr = fit_trace(s, k_min=cfg.k_min, k_max=n - 1, tau_grid=np.asarray(cfg.tau_grid))
    xd = s.descending()
    grid = cfg.grid
    k_hat = tr.k_hat
    ks = np.append(grid, k_hat)
    rows = ks - tr.k[0]
    t = xd[ks]
    hill_h = tr.hill[rows]
    values = {}
    for quantity, est in _quantities(cfg):
        if quantity == "alpha":
            v = {"WLS": tr.alpha_wls, "MLE": tr.alpha_mle, "Hill": 1.0 / tr.hill,
                 "TruncatedPareto": tr.alpha_T}[est][rows]
        elif quantity == "tau":
            v = {"WLS": tr.tau_wls, "MLE": tr.tau_mle}[est][rows]
        else:
            c = float(quantity[4:-1])
            p = 1.0 / (c * n)
            if est in ("WLS", "MLE"):
                a = getattr(tr, f"alpha_{est.lower()}")[rows]
                lam = getattr(tr, f"lam_{est.lower()}")[rows]
                tau = getattr(tr, f"tau_{est.lower()}")[rows]
                v = quantile_from_params(t, ks, n, p, a, lam, tau)
            elif est == "Weissman":
                with np.errstate(divide="ignore"):
                    v = np.where(hill_h > 0, t * (ks / (n * p)) ** hill_h, np.nan)
            else:
                aT = tr.alpha_T[rows]
                R_a = (t / xd[0]) ** aT
                v = t * (R_a + n * p / ks * (1.0 - R_a)) ** (-1.0 / aT)
        values[(quantity, est)] = np.asarray(v, dtype=float)
    return k_hat, values


def _run_chunk(args):
    cfg, reps = args
    out = []
    for r in reps:
        try:
            out.append((r, _one_replication(cfg, r), None))
        except (TemperedParetoError, ArithmeticError, ValueError, np.linalg.LinAlgError) as exc:
            out.append((r, None, f"{type(exc).__name__}: {exc}"))
    return out


def boxplot_stats(x: np.ndarray) -> dict:
    """Tukey boxplot summary (quartiles, 1.5 IQR whiskers, outliers)."""
    x = np.asarray(x, dtype=float)
    x = x[np.isfinite(x)]
    if x.size == 0:
        return {"n": 0}
    q1, med, q3 = np.percentile(x, [25, 50, 75])
    iqr = q3 - q1
    inside = x[(x >= q1 - 1.5 * iqr) & (x <= q3 + 1.5 * iqr)]
    return {
        "n": int(x.size),
        "q1": float(q1),
        "median": float(med),
        "q3": float(q3),
        "whisker_low": float(inside.min()),
        "whisker_high": float(inside.max()),
        "mean": float(x.mean()),
        "outliers": sorted(float(v) for v in x[(x < q1 - 1.5 * iqr) | (x > q3 + 1.5 * iqr)]),
    }


@dataclass
class StudyResult:
    config: StudyConfig
    k_grid: np.ndarray
    truth: Dict[str, float]
    # (quantity, estimator) -> (n_ok, len(k_grid)) raw estimates
    estimates: Dict[Tuple[str, str], np.ndarray]
    at_k_hat: Dict[Tuple[str, str], np.ndarray]
    k_hat: np.ndarray
    failures: List[Tuple[int, str]] = field(default_factory=list)
    runtime_s: float = 0.0

    @property
    def n_ok(self) -> int:
        return int(self.k_hat.size)

    def _stat(self, key, fn):
        truth = self.truth.get(key[0])
        x = self.estimates[key]
        return fn(x, truth)

    def mean(self, quantity: str, estimator: str) -> np.ndarray:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)  # all-NaN columns stay NaN
            return np.nanmean(self.estimates[(quantity, estimator)], axis=0)

    def bias(self, quantity: str, estimator: str) -> np.ndarray:
        return self.mean(quantity, estimator) - self._truth(quantity)

    def variance(self, quantity: str, estimator: str) -> np.ndarray:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)
            return np.nanvar(self.estimates[(quantity, estimator)], axis=0)

    def rmse(self, quantity: str, estimator: str) -> np.ndarray:
        x = self.estimates[(quantity, estimator)]
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)
            return np.sqrt(np.nanmean((x - self._truth(quantity)) ** 2, axis=0))

    def _truth(self, quantity: str) -> float:
        t = self.truth.get(quantity)
        return np.nan if t is None else t

    def boxplots(self) -> Dict[str, dict]:
        return {f"{q}/{e}": boxplot_stats(v) for (q, e), v in self.at_k_hat.items()}

    def to_dict(self) -> dict:
        curves = []
        for (q, e) in self.estimates:
            curves.append({
                "quantity": q,
                "estimator": e,
                "truth": self.truth.get(q),
                "mean": self.mean(q, e).tolist(),
                "bias": self.bias(q, e).tolist(),
                "variance": self.variance(q, e).tolist(),
                "rmse": self.rmse(q, e).tolist(),
            })
        return {
            "config": self.config.to_dict(),
            "n_ok": self.n_ok,
            "failures": [{"replication": r, "error": m} for r, m in self.failures],
            "truth": self.truth,
            "k_grid": self.k_grid.tolist(),
            "k_hat": self.k_hat.tolist(),
            "curves": curves,
            "boxplots_at_k_hat": self.boxplots(),
            "runtime_s": self.runtime_s,
        }

    def tidy_rows(self) -> List[dict]:
        """One row per estimator x quantity x k x statistic."""
        rows = []
        for (q, e) in self.estimates:
            stats = {"mean": self.mean(q, e), "bias": self.bias(q, e),
                     "variance": self.variance(q, e), "rmse": self.rmse(q, e)}
            for name, arr in stats.items():
                for k, v in zip(self.k_grid, arr):
                    rows.append({"estimator": e, "quantity": q, "k": int(k), "statistic": name,
                                 "value": float(v)})
        return rows

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.DictWriter(buf, fieldnames=["estimator", "quantity", "k", "statistic", "value"],
                           lineterminator="\n")
        w.writeheader()
        for row in self.tidy_rows():
            row = dict(row)
            row["value"] = repr(row["value"])
            w.writerow(row)
        return buf.getvalue()


def run_study(cfg: StudyConfig, jobs: int = 1) -> StudyResult:
    """Run ``cfg.n_reps`` replications; replication ``r`` uses stream ``(seed, r)``.

    Results do not depend on ``jobs``: each replication is a pure function of
    ``(cfg, r)`` and results are collected in replication order.
    """
    t0 = time.perf_counter()
    reps = list(range(cfg.n_reps))
    if jobs > 1:
        chunks = [reps[i::jobs] for i in range(jobs)]
        with ProcessPoolExecutor(max_workers=jobs) as ex:
            parts = list(ex.map(_run_chunk, [(cfg, c) for c in chunks]))
        results = sorted((item for part in parts for item in part), key=lambda it: it[0])
    else:
        results = _run_chunk((cfg, reps))

    grid = cfg.grid
    keys = _quantities(cfg)
    collected = {key: [] for key in keys}
    at_hat = {key: [] for key in keys}
    k_hats = []
    failures = []
    for r, res, err in results:
        if res is None:
            failures.append((r, err))
            log.warning("replication %d excluded: %s", r, err)
            continue
        k_hat, values = res
        k_hats.append(k_hat)
        for key in keys:
            collected[key].append(values[key][:-1])
            at_hat[key].append(values[key][-1])

    truth: Dict[str, float] = {"tau": cfg.spec.tau}
    alpha = getattr(cfg.spec.base, "alpha", None)
    if alpha is not None:
        truth["alpha"] = float(alpha)
    for c, p in zip(cfg.quantile_p_factors, cfg.probabilities):
        truth[f"Q[c={c:g}]"] = true_quantile(cfg.spec, p)

    width = grid.size
    return StudyResult(
        config=cfg,
        k_grid=grid,
        truth=truth,
        estimates={k: np.array(v).reshape(-1, width) for k, v in collected.items()},
        at_k_hat={k: np.array(v) for k, v in at_hat.items()},
        k_hat=np.array(k_hats, dtype=int),
        failures=failures,
        runtime_s=time.perf_counter() - t0,
    )


_PRESETS = {
    "burr-weibull": (Burr(2.0, -1.0), 1.5, 0.5, (1.0, 2.0)),
    "burr-weibull-light": (Burr(2.0, -1.0), 0.5, 0.2, (1.0, 2.0)),
    "frechet-weibull": (Frechet(2.0), 2.0, 0.5, (1.0, 2.0)),
    "frechet-weibull-light": (Frechet(2.0), 0.5, 0.2, (1.0, 2.0)),
    "pareto-weibull": (Pareto(1.0), 2.0, 0.2, (1.0, 2.0)),
    "lognormal-weibull": (LogNormal(0.0, 10.0), 1.5, 0.5, (0.2, 0.4)),
}


def scenario(name: str, n: int = 500, n_reps: int = 500, seed: int = 0, **kw) -> StudyConfig:
    """One named preset, e.g. ``"pareto-weibull"``."""
    try:
        base, tau, beta, factors = _PRESETS[name]
    except KeyError:
        raise DomainError(f"unknown preset {name!r}; choose from {sorted(_PRESETS)}") from None
    spec = TemperedSampleSpec(base=base, tau=tau, beta=beta, n=n, seed=seed)
    kw.setdefault("quantile_p_factors", factors)
    return StudyConfig(spec=spec, n_reps=n_reps, seed=seed, name=name, **kw)


def paper_scenarios(n_reps: int = 500, seed: int = 0) -> List[StudyConfig]:
    """The six tempered settings of the simulation study, each with n = 500."""
    return [scenario(name, n=500, n_reps=n_reps, seed=seed) for name in _PRESETS]


def preset_names() -> Sequence[str]:
    return tuple(_PRESETS)
