"""
Adaptive threshold and extreme quantiles
========================================

``fit_trace`` runs the weighted least squares and maximum likelihood fits for
every rank ``k`` and picks ``k_hat`` where the weighted QQ misfit is smallest.
Quantiles from the tempered fit are compared with the Weissman (Pareto) and
truncated-Pareto extrapolations.
"""

from temperedpareto import (
    Burr,
    TemperedSampleSpec,
    extreme_quantile,
    fit_trace,
    sample_tempered,
    true_quantile,
    truncated_quantile,
    weissman_quantile,
)
from temperedpareto.estimators import default_tau_grid

spec = TemperedSampleSpec(Burr(2.0, -1.0), tau=1.5, beta=0.5, n=500, seed=7)
s = sample_tempered(spec)
tr = fit_trace(s, tau_grid=default_tau_grid(points=25))
print("k_hat:", tr.k_hat)

# %%
# The trace is a table over k.
for k in (50, 100, 200, 400):
    i = k - tr.k[0]
    print(k, "alpha WLS %.2f  MLE %.2f  Hill %.2f  tau MLE %.2f"
          % (tr.alpha_wls[i], tr.alpha_mle[i], 1 / tr.hill[i], tr.tau_mle[i]))

# %%
# Quantile at p = 1/n from several estimators, at k = 200.
k, p = 200, 1 / s.n
print("true      ", true_quantile(spec, p))
print("tempered  ", extreme_quantile(tr.mle_fit(k), s, k, p))
print("Weissman  ", weissman_quantile(s, k, p))
print("truncated ", truncated_quantile(s, k, p))
print("max       ", s.values[-1])
