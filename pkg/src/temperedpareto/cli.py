"""``temperedpareto`` command line: fit, diagnose, quantile, asymptotics, simulate, rolling.

Exit status: 0 success, 1 input or usage error, 2 numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import math
import sys
from typing import List, Optional, Sequence

import numpy as np

from .core import TemperedParams
from .diagnostics import (
    FORMAT_VERSION,
    build_report,
    derivative_plot,
    fitted_qq_line,
    load_csv,
    pareto_qq,
    rolling_fit,
    weibull_qq,
)
from .errors import DomainError, InputError, NumericError
from .estimators import default_tau_grid, fit_trace, pot_excesses
from .simulation import preset_names, run_study, scenario

log = logging.getLogger("temperedpareto")

EXIT_OK, EXIT_INPUT, EXIT_NUMERIC = 0, 1, 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # argparse would exit with status 2
        raise UsageError(f"{self.prog}: {message}")


def to_jsonable(obj):
    """Plain Python types; non-finite floats become ``None``."""
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return to_jsonable(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return x if math.isfinite(x) else None
    return obj


def dumps(obj) -> str:
    # float repr is the shortest string that round-trips exactly
    return json.dumps(to_jsonable(obj), indent=2, allow_nan=False) + "\n"


def _rows_to_csv(rows: List[dict]) -> str:
    buf = io.StringIO()
    fields: List[str] = []
    for r in rows:
        for key in r:
            if key not in fields:
                fields.append(key)
    w = csv.DictWriter(buf, fieldnames=fields, lineterminator="\n")
    w.writeheader()
    for r in rows:
        w.writerow({k: _cell(r.get(k)) for k in fields})
    return buf.getvalue()


def _cell(v):
    if v is None:
        return ""
    if isinstance(v, (float, np.floating)):
        v = float(v)
        return repr(v) if math.isfinite(v) else ""
    return v


# ---------------------------------------------------------------------------
# Argument parsing
# ---------------------------------------------------------------------------


def _common(sp: argparse.ArgumentParser, data: bool = True) -> None:
    sp.add_argument("--format", choices=("json", "csv"), default="json")
    sp.add_argument("--output", "-o", help="write to this file instead of stdout")
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--jobs", type=int, default=1, help="worker processes (results do not depend on it)")
    sp.add_argument("-v", "--verbose", action="store_true")
    if data:
        sp.add_argument("--input", "-i", required=True, help="CSV file")
        sp.add_argument("--column", default="0", help="value column: 0-based index or header name")
        sp.add_argument("--delimiter", default=",")
        hdr = sp.add_mutually_exclusive_group()
        hdr.add_argument("--header", dest="has_header", action="store_const", const=True, default=None)
        hdr.add_argument("--no-header", dest="has_header", action="store_const", const=False)


def _fit_opts(sp: argparse.ArgumentParser) -> None:
    sp.add_argument("--k", type=int, help="rank k (default: adaptive k_hat)")
    sp.add_argument("--k-min", type=int, default=10)
    sp.add_argument("--k-max", type=int)
    sp.add_argument("--tau-min", type=float, default=0.1)
    sp.add_argument("--tau-max", type=float, default=5.0)
    sp.add_argument("--tau-points", type=int, default=50)
    sp.add_argument("--weights", choices=("hill", "uniform"), default="hill")


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="temperedpareto", description="Tempered Pareto tail fitting and diagnostics.")
    sub = ap.add_subparsers(dest="command", required=True, parser_class=_Parser)

    sp = sub.add_parser("fit", help="full estimation run with adaptive threshold")
    _common(sp)
    _fit_opts(sp)
    sp.add_argument("--p", type=float, action="append", default=[], help="exceedance probability (repeatable)")
    sp.add_argument("--z", type=float, action="append", default=[], help="level for a tail probability (repeatable)")
    sp.add_argument("--level", type=float, default=0.95, help="confidence level of the asymptotic intervals")
    sp.add_argument("--asymptotics", action="store_true", help="add Fisher information and Wald intervals")
    sp.add_argument("--qq", action="store_true", help="add QQ and derivative plot series")
    sp.add_argument("--trace", action="store_true", help="add every per-k column")

    sp = sub.add_parser("diagnose", help="Pareto/Weibull QQ, derivative plot and fitted line data")
    _common(sp)
    _fit_opts(sp)

    sp = sub.add_parser("quantile", help="extreme quantiles and tail probabilities at one k")
    _common(sp)
    _fit_opts(sp)
    sp.add_argument("--p", type=float, action="append", default=[])
    sp.add_argument("--z", type=float, action="append", default=[])

    sp = sub.add_parser("asymptotics", help="Fisher information, bias and confidence intervals")
    _common(sp, data=False)
    _fit_opts(sp)
    sp.add_argument("--input", "-i", help="CSV file (fit the MLE first)")
    sp.add_argument("--column", default="0")
    sp.add_argument("--delimiter", default=",")
    sp.add_argument("--alpha", type=float)
    sp.add_argument("--lam", type=float)
    sp.add_argument("--param-tau", type=float, dest="param_tau")
    sp.add_argument("--k-eff", type=float, help="effective exceedance count (default: k)")
    sp.add_argument("--level", type=float, default=0.95)
    sp.add_argument("--D", type=float, default=0.0, help="second-order constant D")
    sp.add_argument("--rho", type=float, default=-1.0)
    sp.add_argument("--nu", type=float, default=1.0)

    sp = sub.add_parser("simulate", help="Monte Carlo study for a preset")
    _common(sp, data=False)
    sp.add_argument("--preset", choices=preset_names(), required=True)
    sp.add_argument("--reps", type=int, default=100)
    sp.add_argument("--n", type=int, default=500)
    sp.add_argument("--k-min", type=int, default=10)
    sp.add_argument("--k", type=int, action="append", default=[], help="restrict the reported k grid (repeatable)")
    sp.add_argument("--tau-min", type=float, default=0.1)
    sp.add_argument("--tau-max", type=float, default=5.0)
    sp.add_argument("--tau-points", type=int, default=50)
    sp.add_argument("--timing", action="store_true", help="include wall-clock runtime in the output")

    sp = sub.add_parser("rolling", help="sliding-window VaR")
    _common(sp)
    sp.add_argument("--date-column", help="column with ISO dates or years")
    sp.add_argument("--window", type=float, default=3.0, help="window width (years, or observations with --by count)")
    sp.add_argument("--stride", type=float, default=1.0)
    sp.add_argument("--by", choices=("time", "count"), default="time")
    sp.add_argument("--min-obs", type=int, default=300)
    sp.add_argument("--level", type=float, action="append", default=[], help="VaR level, e.g. 0.99 (repeatable)")
    sp.add_argument("--k-min", type=int, default=10)
    sp.add_argument("--tau-min", type=float, default=0.1)
    sp.add_argument("--tau-max", type=float, default=5.0)
    sp.add_argument("--tau-points", type=int, default=50)
    return ap


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------


def _taus(a) -> np.ndarray:
    return default_tau_grid(a.tau_min, a.tau_max, a.tau_points)


def _load(a, date_column=None):
    data = load_csv(a.input, column=a.column, delimiter=a.delimiter,
                    has_header=getattr(a, "has_header", None), date_column=date_column)
    if data.excluded:
        log.warning("%d rows excluded (%d non-positive, %d invalid)", data.excluded,
                    data.excluded_nonpositive, data.excluded_invalid)
    if data.sample.n < 5:
        raise InputError(f"need at least 5 positive observations, got {data.sample.n}")
    return data


def _report(a, probs, zs, **kw) -> dict:
    data = _load(a)
    return build_report(
        data.sample, k=a.k, k_min=a.k_min, k_max=a.k_max, tau_grid=_taus(a), weights=a.weights,
        probs=probs, zs=zs, digest=data.digest(), **kw,
    )


def cmd_fit(a):
    rep = _report(a, a.p, a.z, asymptotics=a.asymptotics, level=a.level, include_qq=a.qq,
                  include_trace=a.trace or a.format == "csv")
    if a.format == "csv":
        cols = rep["trace"]["columns"]
        names = list(cols)
        rows = [{c: cols[c][i] for c in names} for i in range(len(cols["k"]))]
        return _rows_to_csv(rows)
    return dumps(rep)


def cmd_quantile(a):
    if not a.p and not a.z:
        raise UsageError("quantile needs at least one --p or --z")
    rep = _report(a, a.p, a.z)
    if a.format == "csv":
        rows = [{"kind": "quantile", "k": rep["k"], **r} for r in rep["quantiles"]]
        rows += [{"kind": "probability", "k": rep["k"], **r} for r in rep["probabilities"]]
        return _rows_to_csv(rows)
    keep = ("format_version", "input", "provenance", "k", "threshold", "fits", "quantiles", "probabilities")
    return dumps({key: rep[key] for key in keep})


def cmd_diagnose(a):
    data = _load(a)
    s = data.sample
    pq = pareto_qq(s)
    series = [pq, weibull_qq(s), derivative_plot(pq), derivative_plot(weibull_qq(s))]
    tr = fit_trace(s, k_min=a.k_min, k_max=a.k_max, tau_grid=_taus(a), weights=a.weights)
    k = tr.k_hat if a.k is None else a.k
    view = pot_excesses(s, k)
    series += [fitted_qq_line(view, tr.mle_fit(k)), fitted_qq_line(view, tr.wls_fit(k))]
    if a.format == "csv":
        rows = []
        for q in series:
            tag = q.meta.get("source", q.meta.get("method", ""))
            rows += [{"kind": q.kind, "tag": tag, "x": x, "y": y} for x, y in q.points]
        return _rows_to_csv(rows)
    return dumps({"format_version": FORMAT_VERSION, "input": data.digest(), "k": k,
                  "k_hat": tr.k_hat, "series": [q.to_dict() for q in series]})


def cmd_asymptotics(a):
    from .asymptotics import SecondOrderSpec, asymptotic_cov, confidence_interval

    if a.input:
        rep = _report(a, (), ())
        f = rep["fits"]["MLE"]
        params = TemperedParams(f["alpha"], f["lambda"], f["tau"])
        k_eff = float(rep["k"]) if a.k_eff is None else a.k_eff
        source = {"input": rep["input"], "k": rep["k"], "provenance": rep["provenance"]}
    else:
        if None in (a.alpha, a.lam, a.param_tau) or a.k_eff is None:
            raise UsageError("give --input, or all of --alpha --lam --param-tau --k-eff")
        params = TemperedParams(a.alpha, a.lam, a.param_tau)
        k_eff = a.k_eff
        source = {}
    if not params.lam > 0:
        raise NumericError("lambda = 0: the information matrix is singular on this boundary")
    so = SecondOrderSpec(a.D, a.rho, a.nu) if a.D != 0 else None
    info = asymptotic_cov(params, k_eff, so)
    ci = confidence_interval(params, k_eff, a.level, info)
    if a.format == "csv":
        rows = [{"parameter": name, "estimate": est, "std_error": se, "lower": lo, "upper": hi,
                 "bias": b}
                for name, est, se, (lo, hi), b in zip(("alpha", "lambda", "tau"), params.as_array(),
                                                     info.std_errors, ci, info.bias)]
        return _rows_to_csv(rows)
    out = {"format_version": FORMAT_VERSION, **source, "level": a.level, **info.to_dict(),
           "intervals": {n: list(iv) for n, iv in zip(("alpha", "lambda", "tau"), ci)}}
    return dumps(out)


def cmd_simulate(a):
    kw = {}
    if a.k:
        kw["k_grid"] = tuple(sorted(set(a.k)))
    cfg = scenario(a.preset, n=a.n, n_reps=a.reps, seed=a.seed, k_min=a.k_min,
                   tau_grid=tuple(_taus(a)), **kw)
    res = run_study(cfg, jobs=a.jobs)
    log.info("study finished in %.1f s (%d failed replications)", res.runtime_s, len(res.failures))
    if a.format == "csv":
        return res.to_csv()
    d = res.to_dict()
    if not a.timing:
        d.pop("runtime_s")
    return dumps(d)


def cmd_rolling(a):
    data = _load(a, date_column=a.date_column)
    if a.by == "time" and data.times is None:
        raise UsageError("time windows need --date-column (or use --by count)")
    levels = a.level or [0.99]
    reports, notes = rolling_fit(data.values, data.times, window=a.window, stride=a.stride, by=a.by,
                                 levels=levels, min_obs=a.min_obs, k_min=a.k_min, tau_grid=_taus(a))
    for note in notes:
        log.warning(note)
    if a.format == "csv":
        rows = []
        for r in reports:
            w = r["window"]
            for v in r["var"]:
                rows.append({"start": w["start"], "end": w["end"], "n": w["n"], "k_hat": r["k"], **v,
                             "alpha_mle": r["fits"]["MLE"]["alpha"]})
        return _rows_to_csv(rows)
    return dumps({"format_version": FORMAT_VERSION, "input": data.digest(), "notices": notes,
                  "windows": reports})


COMMANDS = {
    "fit": cmd_fit,
    "diagnose": cmd_diagnose,
    "quantile": cmd_quantile,
    "asymptotics": cmd_asymptotics,
    "simulate": cmd_simulate,
    "rolling": cmd_rolling,
}


def main(argv: Optional[Sequence[str]] = None) -> int:
    try:
        a = build_parser().parse_args(argv)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_INPUT
    logging.basicConfig(level=logging.INFO if a.verbose else logging.WARNING,
                        format="%(levelname)s: %(message)s")
    try:
        text = COMMANDS[a.command](a)
    except (UsageError, InputError, DomainError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except NumericError as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    if a.output:
        with open(a.output, "w", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
