"""Plotting coordinates, CSV ingestion, report bundles and rolling-window VaR.

Nothing here renders plots; every function returns plain data that can be
serialised to JSON or CSV.
"""

from __future__ import annotations

import csv
import datetime as _dt
import hashlib
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from .core import Sample, h_tau
from .errors import DegenerateFitError, DomainError, InputError, NumericError, TemperedParetoError
from .estimators import (
    FitResult,
    FitTrace,
    POTView,
    default_tau_grid,
    extreme_quantile,
    fit_trace,
    pot_excesses,
    tail_prob,
    truncated_quantile,
    weissman_quantile,
)

__all__ = [
    "FORMAT_VERSION",
    "QQSeries",
    "LoadedData",
    "load_csv",
    "pareto_qq",
    "weibull_qq",
    "derivative_plot",
    "fitted_qq_line",
    "empirical_quantile",
    "build_report",
    "rolling_fit",
    "REPORT_SCHEMA",
]

FORMAT_VERSION = "1.0"

PARETO_QQ = "ParetoQQ"
WEIBULL_QQ = "WeibullQQ"
DERIVATIVE = "DerivativePlot"
FITTED_LINE = "FittedLine"


@dataclass(frozen=True, eq=False)
class QQSeries:
    kind: str
    x: np.ndarray
    y: np.ndarray
    meta: dict = field(default_factory=dict)

    @property
    def points(self) -> List[Tuple[float, float]]:
        return list(zip(self.x.tolist(), self.y.tolist()))

    def __len__(self) -> int:
        return int(self.x.size)

    def to_dict(self) -> dict:
        return {"kind": self.kind, "meta": dict(self.meta), "x": self.x.tolist(), "y": self.y.tolist()}


# ---------------------------------------------------------------------------
# CSV input
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class LoadedData:
    """Parsed column plus bookkeeping about rejected rows.

    ``values`` and ``times`` keep file order (needed for rolling windows);
    ``sample`` is the sorted view used for estimation.
    """

    sample: Sample
    values: np.ndarray
    times: Optional[np.ndarray]
    n_rows: int
    excluded_nonpositive: int
    excluded_invalid: int
    diagnostics: Tuple[str, ...] = ()

    @property
    def excluded(self) -> int:
        return self.excluded_nonpositive + self.excluded_invalid

    def digest(self) -> dict:
        v = self.sample.values
        return {
            "rows": self.n_rows,
            "n": self.sample.n,
            "min": float(v[0]),
            "max": float(v[-1]),
            "excluded_nonpositive": self.excluded_nonpositive,
            "excluded_invalid": self.excluded_invalid,
            "sha256": hashlib.sha256(np.ascontiguousarray(v).tobytes()).hexdigest(),
        }


def _decimal_year(text: str) -> float:
    """ISO date (``YYYY-MM-DD``, optional time) or a bare year as a fractional year."""
    text = text.strip()
    try:
        return float(int(text))
    except ValueError:
        pass
    d = _dt.datetime.fromisoformat(text)
    start = _dt.datetime(d.year, 1, 1, tzinfo=d.tzinfo)
    end = _dt.datetime(d.year + 1, 1, 1, tzinfo=d.tzinfo)
    return d.year + (d - start).total_seconds() / (end - start).total_seconds()


def _resolve_column(col: Union[int, str], header: Optional[List[str]], label: str) -> int:
    if isinstance(col, int):
        return col
    if col.lstrip("-").isdigit():
        return int(col)
    if header is None:
        raise InputError(f"{label} {col!r} given by name but the file has no header")
    names = [h.strip() for h in header]
    if col not in names:
        raise InputError(f"{label} {col!r} not in header {names}")
    return names.index(col)


def _looks_numeric(text: str) -> bool:
    try:
        float(text)
        return True
    except ValueError:
        return False


def load_csv(path: Union[str, Path], column: Union[int, str] = 0, delimiter: str = ",",
             has_header: Optional[bool] = None, date_column: Union[int, str, None] = None) -> LoadedData:
    """Read one numeric column; non-numeric and non-positive rows are dropped and counted.

    ``has_header=None`` treats the first row as a header when its value cell
    does not parse as a number.  Columns are 0-based indices or header names.
    """
    path = Path(path)
    try:
        with path.open(newline="") as fh:
            rows = list(csv.reader(fh, delimiter=delimiter))
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc}") from None
    rows = [r for r in rows if any(c.strip() for c in r)]
    if not rows:
        raise InputError(f"{path} is empty")

    header = None
    if has_header is None:
        probe = column if isinstance(column, int) or column.lstrip("-").isdigit() else None
        if probe is None:
            has_header = True
        else:
            idx = int(probe)
            has_header = not (len(rows[0]) > abs(idx) and _looks_numeric(rows[0][idx]))
    if has_header:
        header, rows = rows[0], rows[1:]
    ci = _resolve_column(column, header, "column")
    di = None if date_column is None else _resolve_column(date_column, header, "date column")

    values, times, notes = [], [], []
    bad = nonpos = 0
    first = 2 if has_header else 1
    for lineno, row in enumerate(rows, start=first):
        try:
            cell = row[ci]
        except IndexError:
            bad += 1
            notes.append(f"line {lineno}: missing column {ci}")
            continue
        try:
            x = float(cell)
        except ValueError:
            bad += 1
            notes.append(f"line {lineno}: not a number: {cell!r}")
            continue
        if not math.isfinite(x):
            bad += 1
            notes.append(f"line {lineno}: not finite: {cell!r}")
            continue
        if x <= 0:
            nonpos += 1
            notes.append(f"line {lineno}: non-positive value {x!r} excluded")
            continue
        if di is not None:
            try:
                times.append(_decimal_year(row[di]))
            except (IndexError, ValueError):
                bad += 1
                notes.append(f"line {lineno}: unparseable date")
                continue
        values.append(x)

    if not values:
        shown = "; ".join(notes[:5])
        raise InputError(f"no usable rows in {path} ({len(rows)} rows; {shown})")
    vals = np.asarray(values, dtype=float)
    return LoadedData(
        sample=Sample(vals),
        values=vals,
        times=None if di is None else np.asarray(times, dtype=float),
        n_rows=len(rows),
        excluded_nonpositive=nonpos,
        excluded_invalid=bad,
        diagnostics=tuple(notes),
    )


def write_csv(path: Union[str, Path], s: Sample, header: str = "value") -> None:
    """Write a sample as a one-column CSV with round-trip float formatting."""
    with Path(path).open("w", newline="") as fh:
        fh.write(header + "\n")
        for v in s.values:
            fh.write(repr(float(v)) + "\n")


# ---------------------------------------------------------------------------
# QQ coordinates
# ---------------------------------------------------------------------------


def _plotting_positions(n: int) -> np.ndarray:
    j = np.arange(1, n + 1)
    return -np.log1p(-j / (n + 1.0))  # -log(1 - j/(n+1))


def pareto_qq(s: Sample) -> QQSeries:
    """``(-log(1 - j/(n+1)), log X_{j,n})`` for ``j = 1..n``."""
    if s.n < 2:
        raise DomainError("pareto_qq needs n >= 2")
    return QQSeries(PARETO_QQ, _plotting_positions(s.n), np.log(s.values), {"n": s.n})


def weibull_qq(s: Sample) -> QQSeries:
    """``(log(-log(1 - j/(n+1))), log X_{j,n})`` for ``j = 1..n``."""
    if s.n < 2:
        raise DomainError("weibull_qq needs n >= 2")
    return QQSeries(WEIBULL_QQ, np.log(_plotting_positions(s.n)), np.log(s.values), {"n": s.n})


def derivative_plot(qq: QQSeries, k_range: Optional[Tuple[int, int]] = None) -> QQSeries:
    """Anchored slope of the top ``k`` points against the ``(k+1)``-th largest, per ``k``.

    slope_k = sum_j (y_{n-j+1} - y_{n-k}) / sum_j (x_{n-j+1} - x_{n-k}),  j = 1..k.
    On Pareto QQ coordinates the numerator is ``k H_{k,n}``.
    """
    if qq.kind not in (PARETO_QQ, WEIBULL_QQ):
        raise DomainError(f"derivative_plot needs a ParetoQQ or WeibullQQ series, got {qq.kind}")
    n = len(qq)
    lo, hi = (1, n - 1) if k_range is None else (int(k_range[0]), int(k_range[1]))
    if not 1 <= lo <= hi <= n - 1:
        raise DomainError(f"k range must lie in [1, {n - 1}]")
    xd = qq.x[::-1]
    yd = qq.y[::-1]
    ks = np.arange(lo, hi + 1)
    cx = np.cumsum(xd)[ks - 1]
    cy = np.cumsum(yd)[ks - 1]
    den = cx - ks * xd[ks]
    num = cy - ks * yd[ks]
    if np.any(den <= 0):
        bad = int(ks[np.argmax(den <= 0)])
        raise DegenerateFitError(f"zero x-spread at k={bad}")
    return QQSeries(DERIVATIVE, ks.astype(float), num / den, {"source": qq.kind, "k_range": [lo, hi]})


def fitted_qq_line(p: POTView, fit: FitResult) -> QQSeries:
    """Fitted exponential QQ points ``(-log(1 - j/(k+1)), alpha log V + lam tau h_tau(V))``.

    Excesses are taken in ascending order so that point ``j`` pairs the
    ``j``-th smallest excess with its plotting position; a good fit lies on
    the identity line.
    """
    if fit.k != p.k:
        raise DomainError(f"fit was computed at k={fit.k}, view has k={p.k}")
    k = p.k
    j = np.arange(1, k + 1)
    x = -np.log1p(-j / (k + 1.0))
    v = p.v[::-1]
    prm = fit.params
    y = prm.alpha * np.log(v)
    if prm.lam > 0:
        y = y + prm.lam * prm.tau * h_tau(v, prm.tau)
    return QQSeries(FITTED_LINE, x, y, {"k": k, "method": fit.method, "reference": "identity"})


def empirical_quantile(values: Union[Sample, np.ndarray], level: float) -> float:
    """Linear-interpolation sample quantile; an approximation to other interpolation rules."""
    v = values.values if isinstance(values, Sample) else np.asarray(values, dtype=float)
    if not 0 <= level <= 1:
        raise DomainError("level must lie in [0, 1]")
    return float(np.quantile(v, level, method="linear"))


# ---------------------------------------------------------------------------
# Report bundle
# ---------------------------------------------------------------------------


def _safe(fn, *args):
    """Call an estimator; return ``(value, None)`` or ``(None, reason)``."""
    try:
        v = fn(*args)
    except TemperedParetoError as exc:
        return None, f"{type(exc).__name__}: {exc}"
    return (float(v) if math.isfinite(v) else None), None


def _quantile_rows(s: Sample, k: int, wls: FitResult, mle: FitResult, alpha_T: Optional[float],
                   probs: Sequence[float]) -> List[dict]:
    rows = []
    for p in probs:
        row: Dict[str, object] = {"p": float(p)}
        for name, fit in (("MLE", mle), ("WLS", wls)):
            z, err = _safe(extreme_quantile, fit, s, k, p)
            row[name] = z
            if z is not None:
                row[f"{name}_tail_prob"] = tail_prob(fit, s, k, z)
            elif err:
                row[f"{name}_error"] = err
        row["Weissman"], err = _safe(weissman_quantile, s, k, p)
        if err:
            row["Weissman_error"] = err
        if alpha_T is None:
            row["TruncatedPareto"] = None
        else:
            row["TruncatedPareto"], err = _safe(truncated_quantile, s, k, p, alpha_T)
            if err:
                row["TruncatedPareto_error"] = err
        row["empirical"] = empirical_quantile(s, 1.0 - p)
        rows.append(row)
    return rows


def _prob_rows(s: Sample, k: int, wls: FitResult, mle: FitResult, zs: Sequence[float]) -> List[dict]:
    rows = []
    for z in zs:
        row: Dict[str, object] = {"z": float(z)}
        for name, fit in (("MLE", mle), ("WLS", wls)):
            row[name], err = _safe(tail_prob, fit, s, k, z)
            if err:
                row[f"{name}_error"] = err
        row["empirical"] = float(np.mean(s.values > z))
        rows.append(row)
    return rows


def _trace_summary(tr: FitTrace) -> dict:
    return {
        "k_min": int(tr.k[0]),
        "k_max": int(tr.k[-1]),
        "k_hat": tr.k_hat,
        "ss_min": float(tr.ss[tr.k_hat - tr.k[0]]),
        "mle_converged_fraction": float(np.mean(tr.mle_converged)),
    }


def build_report(s: Sample, *, k: Optional[int] = None, k_min: int = 10, k_max: Optional[int] = None,
                 tau_grid: Optional[Sequence[float]] = None, weights: str = "hill",
                 probs: Sequence[float] = (), zs: Sequence[float] = (), asymptotics: bool = False,
                 level: float = 0.95, include_qq: bool = False, include_trace: bool = False,
                 digest: Optional[dict] = None, trace: Optional[FitTrace] = None) -> dict:
    """Full estimation run for one sample as a JSON-ready dict.

    ``k=None`` selects ``k_hat``; quantile and probability tables are
    evaluated at the selected rank.  Provenance fields are sufficient to
    redo every number through the library functions.
    """
    taus = default_tau_grid() if tau_grid is None else np.asarray(tau_grid, dtype=float)
    tr = trace if trace is not None else fit_trace(s, k_min=k_min, k_max=k_max, tau_grid=taus,
                                                   weights=weights)
    k_sel = tr.k_hat if k is None else int(k)
    if not tr.k[0] <= k_sel <= tr.k[-1]:
        raise DomainError(f"k={k_sel} outside the fitted range [{tr.k[0]}, {tr.k[-1]}]")
    wls = tr.wls_fit(k_sel)
    mle = tr.mle_fit(k_sel)
    rec = tr.record(k_sel)
    out: dict = {
        "format_version": FORMAT_VERSION,
        "input": digest if digest is not None else {
            "n": s.n, "min": float(s.values[0]), "max": float(s.values[-1]),
        },
        "provenance": {
            "k_min": int(tr.k[0]),
            "k_max": int(tr.k[-1]),
            "tau_grid": [float(t) for t in tr.tau_grid],
            "weights": tr.weights,
            "k_requested": None if k is None else int(k),
        },
        "trace": _trace_summary(tr),
        "k": k_sel,
        "threshold": float(tr.threshold[k_sel - tr.k[0]]),
        "fits": {"WLS": wls.to_dict(), "MLE": mle.to_dict()},
        "hill": {"H": rec.hill, "alpha": (1.0 / rec.hill) if rec.hill > 0 else None},
        "truncated_alpha": rec.alpha_T,
        "quantiles": _quantile_rows(s, k_sel, wls, mle, rec.alpha_T, probs),
        "probabilities": _prob_rows(s, k_sel, wls, mle, zs),
    }
    if asymptotics:
        out["asymptotics"] = _asymptotic_block(mle, k_sel, level)
    if include_qq:
        pq = pareto_qq(s)
        out["qq"] = [
            pq.to_dict(),
            weibull_qq(s).to_dict(),
            derivative_plot(pq, (1, s.n - 1)).to_dict(),
            fitted_qq_line(pot_excesses(s, k_sel), mle).to_dict(),
        ]
    if include_trace:
        out["trace"]["columns"] = {name: col.tolist() for name, col in tr.columns().items()}
    return out


def _asymptotic_block(mle: FitResult, k: int, level: float) -> dict:
    from .asymptotics import asymptotic_cov, confidence_interval

    block: dict = {"level": level, "k_eff": k}
    if not mle.params.lam > 0:
        block["error"] = "MLE lies on the lambda = 0 boundary; information matrix undefined"
        return block
    try:
        info = asymptotic_cov(mle.params, k)
        ci = confidence_interval(mle, k, level, info)
    except NumericError as exc:
        block["error"] = f"{type(exc).__name__}: {exc}"
        return block
    block.update(info.to_dict())
    block["intervals"] = {name: list(iv) for name, iv in zip(("alpha", "lambda", "tau"), ci)}
    return block


# ---------------------------------------------------------------------------
# Rolling windows
# ---------------------------------------------------------------------------


def _window_bounds(times: np.ndarray, width: float, stride: float) -> List[Tuple[float, float]]:
    t0, t1 = float(times.min()), float(times.max())
    out = [(t0, t0 + width)]
    i = 1
    while t0 + i * stride + width <= t1 + 1e-9:
        s = t0 + i * stride
        out.append((s, s + width))
        i += 1
    return out


def rolling_fit(values: np.ndarray, times: Optional[np.ndarray] = None, *, window: float = 3.0,
                stride: float = 1.0, by: str = "time", levels: Sequence[float] = (0.99,),
                min_obs: int = 300, k_min: int = 10, tau_grid: Optional[Sequence[float]] = None,
                weights: str = "hill") -> Tuple[List[dict], List[str]]:
    """Fit each sliding window and report VaR at the given confidence levels.

    ``by="time"``: ``window`` and ``stride`` are in years of ``times`` (closed
    intervals starting at the first time stamp).  ``by="count"``: both are
    observation counts over the chronologically ordered data.  Windows with
    fewer than ``min_obs`` observations are skipped and noted.  Returns the
    per-window reports (chronological) and the notices.
    """
    values = np.asarray(values, dtype=float)
    if by not in ("time", "count"):
        raise DomainError("by must be 'time' or 'count'")
    if by == "time" and times is None:
        raise InputError("time-based windows need time stamps (date column)")
    if not (window > 0 and stride > 0):
        raise DomainError("window and stride must be positive")
    if any(not 0 < lv < 1 for lv in levels):
        raise DomainError("VaR levels must lie in (0, 1)")
    if by == "time":
        times = np.asarray(times, dtype=float)
        order = np.argsort(times, kind="stable")
        values, times = values[order], times[order]
        spans = [(a, b, (times >= a - 1e-12) & (times <= b + 1e-12))
                 for a, b in _window_bounds(times, window, stride)]
    else:
        width, step = int(window), int(stride)
        if times is not None:
            order = np.argsort(np.asarray(times, dtype=float), kind="stable")
            values = values[order]
        m = values.size
        starts = list(range(0, max(m - width, 0) + 1, step))
        spans = []
        for s0 in starts:
            mask = np.zeros(m, dtype=bool)
            mask[s0:s0 + width] = True
            spans.append((float(s0), float(min(s0 + width, m)), mask))

    probs = [1.0 - lv for lv in levels]
    reports, notes = [], []
    for start, end, mask in spans:
        n_w = int(mask.sum())
        if n_w < min_obs:
            notes.append(f"window [{start:g}, {end:g}] skipped: {n_w} < {min_obs} observations")
            continue
        s = Sample(values[mask])
        try:
            rep = build_report(s, k_min=k_min, tau_grid=tau_grid, weights=weights, probs=probs)
        except TemperedParetoError as exc:
            notes.append(f"window [{start:g}, {end:g}] failed: {exc}")
            continue
        rep["window"] = {"start": start, "end": end, "n": n_w, "unit": "years" if by == "time" else "index"}
        rep["var"] = [
            {"level": lv, **{key: row.get(key) for key in ("MLE", "WLS", "Weissman", "TruncatedPareto", "empirical")}}
            for lv, row in zip(levels, rep["quantiles"])
        ]
        reports.append(rep)
    if not reports:
        raise InputError("no window had enough observations; " + "; ".join(notes[:3]))
    return reports, notes


# ---------------------------------------------------------------------------
# JSON schema of the report bundle
# ---------------------------------------------------------------------------

_NUM = {"type": ["number", "null"]}
_FIT = {
    "type": "object",
    "required": ["method", "k", "alpha", "lambda", "tau", "beta_inf", "delta", "objective",
                 "tau_grid_index", "converged"],
    "properties": {
        "method": {"enum": ["WLS", "MLE"]},
        "k": {"type": "integer"},
        "alpha": {"type": "number", "exclusiveMinimum": 0},
        "lambda": {"type": "number", "minimum": 0},
        "tau": {"type": "number", "exclusiveMinimum": 0},
        "beta_inf": {"type": "number", "minimum": 0},
        "delta": {"type": "number", "minimum": 0},
        "objective": _NUM,
        "tau_grid_index": {"type": "integer", "minimum": 0},
        "converged": {"type": "boolean"},
    },
}
_SERIES = {
    "type": "object",
    "required": ["kind", "x", "y", "meta"],
    "properties": {
        "kind": {"enum": [PARETO_QQ, WEIBULL_QQ, DERIVATIVE, FITTED_LINE]},
        "x": {"type": "array", "items": {"type": "number"}},
        "y": {"type": "array", "items": {"type": "number"}},
        "meta": {"type": "object"},
    },
}

REPORT_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "title": "temperedpareto report bundle",
    "type": "object",
    "required": ["format_version", "input", "provenance", "trace", "k", "threshold", "fits",
                 "quantiles", "probabilities"],
    "properties": {
        "format_version": {"const": FORMAT_VERSION},
        "input": {
            "type": "object",
            "required": ["n", "min", "max"],
            "properties": {"n": {"type": "integer", "minimum": 1}, "min": {"type": "number"},
                           "max": {"type": "number"}},
        },
        "provenance": {
            "type": "object",
            "required": ["k_min", "k_max", "tau_grid", "weights"],
            "properties": {"tau_grid": {"type": "array", "items": {"type": "number"}, "minItems": 1},
                           "weights": {"enum": ["hill", "uniform"]}},
        },
        "trace": {"type": "object", "required": ["k_min", "k_max", "k_hat", "ss_min"]},
        "k": {"type": "integer", "minimum": 1},
        "threshold": {"type": "number", "exclusiveMinimum": 0},
        "fits": {"type": "object", "required": ["WLS", "MLE"],
                 "properties": {"WLS": _FIT, "MLE": _FIT}},
        "hill": {"type": "object"},
        "truncated_alpha": _NUM,
        "quantiles": {"type": "array", "items": {
            "type": "object", "required": ["p", "MLE", "WLS", "Weissman", "TruncatedPareto", "empirical"],
            "properties": {k: _NUM for k in ("p", "MLE", "WLS", "Weissman", "TruncatedPareto", "empirical")},
        }},
        "probabilities": {"type": "array", "items": {
            "type": "object", "required": ["z", "MLE", "WLS", "empirical"],
        }},
        "asymptotics": {"type": "object", "required": ["level", "k_eff"]},
        "qq": {"type": "array", "items": _SERIES},
        "window": {"type": "object"},
        "var": {"type": "array"},
    },
}
