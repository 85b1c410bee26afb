"""
Asymptotic covariance and confidence intervals
==============================================

The information matrix is computed by quadrature and checked against a Monte
Carlo average of outer products of the score.
"""

import numpy as np

from temperedpareto import TemperedParams, asymptotic_cov, confidence_interval
from temperedpareto.asymptotics import SecondOrderSpec, cross_check_fisher

p = TemperedParams(2.0, 0.5, 1.5)
quad, mc, rel = cross_check_fisher(p, n_draws=10**5, seed=1)
np.set_printoptions(precision=4, suppress=True)
print(quad)
print("largest relative gap:", rel.max())

# %%
# Standard errors shrink like 1/sqrt(k).
for k in (100, 400):
    print(k, asymptotic_cov(p, k).std_errors)
print(confidence_interval(p, 200, level=0.95))

# %%
# A second-order term shifts the centre of the limit distribution.
info = asymptotic_cov(p, 200, SecondOrderSpec(D=1.0, rho=-2.0))
print("bias of sqrt(k)(theta_hat - theta):", info.bias)
