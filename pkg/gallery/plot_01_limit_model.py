"""
The tempered Pareto limit model
===============================

Excesses over a high threshold follow ``x**-alpha * exp(-lam (x**tau - 1))``.
With ``lam = 0`` this is the Pareto tail; a positive ``lam`` bends the tail
down at large ``x``.
"""

import numpy as np

from temperedpareto import (
    Burr,
    TemperedParams,
    TemperedSampleSpec,
    limit_density,
    limit_quantile,
    limit_survival,
    sample_tempered,
)

# %%
# Survival of the untempered and tempered models side by side.
x = np.array([1.0, 2.0, 5.0, 10.0, 20.0])
pareto = TemperedParams(2.0, 0.0, 1.5)
tempered = TemperedParams(2.0, 0.5, 1.5)
for xi, a, b in zip(x, limit_survival(x, pareto), limit_survival(x, tempered)):
    print(f"x={xi:5.1f}  pareto {a:.3e}  tempered {b:.3e}")

# %%
# The quantile function inverts the survival function.
q = np.array([0.1, 1e-2, 1e-4])
z = limit_quantile(q, tempered)
print(np.c_[q, z, limit_survival(z, tempered)])
print("density at 1:", limit_density(1.0, tempered))

# %%
# Data generation: ``X = min(Y, W)`` with ``Y`` Burr and ``W`` Weibull.
spec = TemperedSampleSpec(Burr(2.0, -1.0), tau=1.5, beta=0.5, n=500, seed=1)
s = sample_tempered(spec)
print(s.n, s.values[:3], s.values[-3:])
