"""
A small Monte Carlo study
=========================

Mean and RMSE curves over k for the tempered estimators and the classical
ones.  Replication ``r`` always draws from stream ``(seed, r)``, so results do
not depend on the number of worker processes.
"""

from temperedpareto import run_study, scenario
from temperedpareto.estimators import default_tau_grid

cfg = scenario("burr-weibull", n=300, n_reps=10, seed=1, k_grid=(50, 100, 200, 299),
               tau_grid=tuple(default_tau_grid(points=20)))
res = run_study(cfg)
print("truth:", res.truth)
print("k grid:", res.k_grid)
for est in ("MLE", "WLS", "Hill"):
    print(f"alpha {est:5s} mean", res.mean("alpha", est).round(2), "rmse", res.rmse("alpha", est).round(2))
for est in ("MLE", "Weissman"):
    print(f"Q {est:8s} rmse", res.rmse("Q[c=1]", est).round(2))

# %%
# Boxplot summaries at the adaptive threshold.
box = res.boxplots()["alpha/MLE"]
print({key: box[key] for key in ("q1", "median", "q3")})
