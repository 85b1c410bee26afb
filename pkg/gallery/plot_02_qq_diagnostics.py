"""
QQ and derivative plots
=======================

Pareto QQ points bend downwards under tempering; the derivative plot turns
that into a decreasing curve instead of a plateau.  The fitted QQ line of the
tempered model should sit on the identity.
"""

import numpy as np

from temperedpareto import Pareto, TemperedSampleSpec, sample_tempered
from temperedpareto.diagnostics import derivative_plot, fitted_qq_line, pareto_qq, weibull_qq
from temperedpareto.estimators import default_tau_grid, fit_k, pot_excesses

s = sample_tempered(TemperedSampleSpec(Pareto(1.0), tau=2.0, beta=0.2, n=2000, seed=3))

pq = pareto_qq(s)
wq = weibull_qq(s)
print("Pareto QQ, top 3 points:", pq.points[-3:])
print("Weibull QQ, top 3 points:", wq.points[-3:])

# %%
# Slope of the top-k points: well below 1/alpha = 1 where the tempering bites,
# rising towards it deeper into the sample.
d = derivative_plot(pq, (10, 1500))
for k in (10, 50, 200, 800, 1500):
    print(k, round(float(d.y[k - 10]), 3))

# %%
# Fitted line of the tempered MLE at k = 1000 against the identity.
p = pot_excesses(s, 1000)
_, mle = fit_k(p, default_tau_grid(points=25))
line = fitted_qq_line(p, mle)
print("alpha, lam, tau:", mle.alpha, mle.lam, mle.tau)
print("median |y - x|:", float(np.median(np.abs(line.y - line.x))))
