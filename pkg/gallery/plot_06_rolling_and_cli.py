"""
Rolling windows and the command line
====================================

Three-year windows over a dated claims file, then the same file through the
``temperedpareto`` command.
"""

import json
import subprocess
import sys
import tempfile
from pathlib import Path

import numpy as np

from temperedpareto import Pareto, TemperedSampleSpec, rolling_fit, sample_tempered
from temperedpareto.estimators import default_tau_grid

rng = np.random.default_rng(0)
s = sample_tempered(TemperedSampleSpec(Pareto(1.0), tau=2.0, beta=0.2, n=1500, seed=2))
values = rng.permutation(s.values)
years = np.sort(rng.uniform(2000.0, 2006.0, values.size))

reports, notes = rolling_fit(values, years, window=3.0, stride=1.0, levels=(0.99, 0.995),
                             tau_grid=default_tau_grid(points=20))
for r in reports:
    w = r["window"]
    print(f"[{w['start']:.0f}, {w['end']:.0f}] n={w['n']} k_hat={r['k']}",
          [round(v["MLE"], 2) for v in r["var"]])
print(notes)

# %%
# The CLI writes the same kind of report as JSON.
with tempfile.TemporaryDirectory() as tmp:
    path = Path(tmp) / "claims.csv"
    path.write_text("amount\n" + "\n".join(repr(float(v)) for v in values) + "\n")
    out = subprocess.run([sys.executable, "-m", "temperedpareto.cli", "quantile", "--input", str(path),
                          "--k", "300", "--p", "0.001", "--tau-points", "20"],
                         capture_output=True, text=True, check=True).stdout
rep = json.loads(out)
print(rep["k"], rep["quantiles"][0]["MLE"], rep["quantiles"][0]["Weissman"])
