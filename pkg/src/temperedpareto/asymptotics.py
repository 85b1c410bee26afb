"""Asymptotic normality of the tempered ML estimator.

``sqrt(k) (theta_hat - theta)`` with ``theta = (alpha, lam, tau)`` and
``k = n P(X > t)`` is asymptotically normal with covariance ``I^{-1}`` and
mean ``D nu I^{-1} b`` under second-order slow variation.  ``I`` and ``b`` are
integrals over ``[1, inf)`` evaluated by adaptive Gauss-Kronrod quadrature
after the substitution ``u = exp(y)``, which turns the polynomial tail into an
exponential one (``alpha < 1`` included).
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Callable, Optional, Tuple

import numpy as np
from scipy import integrate, linalg, stats

from .core import TemperedParams, limit_quantile, rng_stream
from .errors import DomainError, NumericError

__all__ = [
    "SecondOrderSpec",
    "AsymptoticInfo",
    "fisher_entry",
    "fisher_info",
    "bias_integrals",
    "bias_vector",
    "asymptotic_cov",
    "confidence_interval",
    "mc_scores",
    "mc_fisher_oracle",
    "cross_check_fisher",
]

ENTRIES = ("11", "22", "33", "12", "13", "23")
_LOG_CUTOFF = math.log(1e-14) - 30.0  # integrands below ~1e-27 contribute nothing


@dataclass(frozen=True)
class SecondOrderSpec:
    """Second-order constants: ``l(ty)/l(t) = 1 + D t**rho h_rho(y)`` and ``nu``."""

    D: float
    rho: float
    nu: float = 1.0

    def __post_init__(self):
        if not self.rho < 0:
            raise DomainError("rho must be < 0")
        if self.D != 0 and not self.nu > 0:
            raise DomainError("nu must be > 0 when a bias is requested")


def _pieces(u: float, p: TemperedParams):
    """``(log u, u**tau, log of u**(-alpha-1) exp(-lam (u**tau - 1)), alpha + lam tau u**tau)``."""
    lu = math.log(u)
    tl = p.tau * lu
    ut = math.exp(tl) if tl < 709.0 else math.inf
    if p.lam == 0:
        return lu, ut, -(p.alpha + 1.0) * lu, p.alpha
    log_base = -(p.alpha + 1.0) * lu - p.lam * math.expm1(tl) if tl < 709.0 else -math.inf
    return lu, ut, log_base, p.alpha + p.lam * p.tau * ut


def _integrand(name: str, p: TemperedParams) -> Callable[[float], float]:
    a, lam, tau = p.alpha, p.lam, p.tau

    def f(u):
        lu, ut, log_base, d = _pieces(u, p)
        if log_base + lu < _LOG_CUTOFF:  # measured in y = log u, Jacobian included
            return 0.0
        base = math.exp(log_base)
        if name == "11":
            return base / d
        if name == "22":
            return tau * tau * ut * ut * base / d
        if name == "12":
            return tau * ut * base / d
        if name == "13":
            return lam * (1.0 + tau * lu) * ut * base / d
        if name == "23":
            return (lu - a * (1.0 + tau * lu) / (d * d)) * ut * base * d
        if name == "33":
            brace = lu * lu - 2.0 * lu / d + (lam * ut * (1.0 + 2.0 * tau * lu) - a * tau * lu * lu) / (d * d)
            return lam * brace * ut * base * d
        raise KeyError(name)

    return f


def _bias_integrand(i: int, p: TemperedParams, rho: float) -> Callable[[float], float]:
    lam, tau = p.lam, p.tau

    def f(u):
        lu, ut, log_base, d = _pieces(u, p)
        if log_base + lu < _LOG_CUTOFF:  # measured in y = log u, Jacobian included
            return 0.0
        base = math.exp(log_base)
        u_rho = math.exp(rho * lu)
        second = (math.expm1(rho * lu) / rho) * d - u_rho
        if i == 0:
            head = 1.0 / d - lu
        elif i == 1:
            head = tau * ut / d - math.expm1(tau * lu)
        else:
            head = lam * ((1.0 + tau * lu) / d - lu) * ut
        return head * base * second

    return f


def _integrate_half_line(f: Callable[[float], float], label: str, epsabs: float = 1e-10,
                         epsrel: float = 1e-10) -> float:
    def g(y):
        try:
            u = math.exp(y)
            return f(u) * u
        except OverflowError:  # far beyond the cutoff, the integrand is 0 in double precision
            return 0.0

    with warnings.catch_warnings():
        warnings.simplefilter("error", integrate.IntegrationWarning)
        try:
            val, err = integrate.quad(g, 0.0, math.inf, epsabs=epsabs, epsrel=epsrel, limit=1000)
        except integrate.IntegrationWarning as exc:
            raise NumericError(f"quadrature for {label} did not converge: {exc}") from None
    if not math.isfinite(val) or err > max(1e-9, 1e-8 * abs(val)):
        raise NumericError(f"quadrature for {label} did not converge (value {val}, error {err})")
    return val


def fisher_entry(p: TemperedParams, name: str, epsabs: float = 1e-10) -> float:
    """One entry ``I_ij`` (``name`` in ``"11", "22", "33", "12", "13", "23"``).

    ``I_11`` is defined at ``lam = 0`` as well (then it equals ``1/alpha**2``).
    """
    if name not in ENTRIES:
        raise DomainError(f"unknown Fisher entry {name!r}")
    if p.lam == 0 and name != "11":
        raise DomainError("Fisher entries other than I_11 need lam > 0")
    return _integrate_half_line(_integrand(name, p), f"I_{name}", epsabs=epsabs)


def fisher_info(p: TemperedParams, epsabs: float = 1e-10) -> np.ndarray:
    """Symmetric 3x3 information matrix, ordered ``(alpha, lam, tau)``."""
    if not p.lam > 0:
        raise DomainError("fisher_info needs an interior point (lam > 0)")
    vals = {name: fisher_entry(p, name, epsabs) for name in ENTRIES}
    return np.array([
        [vals["11"], vals["12"], vals["13"]],
        [vals["12"], vals["22"], vals["23"]],
        [vals["13"], vals["23"], vals["33"]],
    ])


def bias_integrals(p: TemperedParams, rho: float) -> np.ndarray:
    """The raw vector ``b`` (before multiplication by ``D nu I^{-1}``)."""
    if not rho < 0:
        raise DomainError("rho must be < 0")
    return np.array([
        _integrate_half_line(_bias_integrand(i, p, rho), f"b_{i + 1}") for i in range(3)
    ])


def bias_vector(p: TemperedParams, so: SecondOrderSpec, info: Optional[np.ndarray] = None) -> np.ndarray:
    """Asymptotic mean ``D nu I^{-1} b`` of ``sqrt(k) (theta_hat - theta)``."""
    if so.D == 0:
        return np.zeros(3)
    info = fisher_info(p) if info is None else info
    b = bias_integrals(p, so.rho)
    return so.D * so.nu * _spd_solve(info, b)


def _spd_solve(info: np.ndarray, rhs: np.ndarray) -> np.ndarray:
    try:
        c = linalg.cho_factor(info)
    except linalg.LinAlgError:
        ev = np.linalg.eigvalsh(info)
        raise NumericError(f"information matrix is not positive definite; eigenvalues {ev}") from None
    return linalg.cho_solve(c, rhs)


@dataclass(frozen=True)
class AsymptoticInfo:
    info: np.ndarray
    bias: np.ndarray
    cov: np.ndarray
    k_eff: float
    params: TemperedParams

    @property
    def std_errors(self) -> np.ndarray:
        return np.sqrt(np.diag(self.cov))

    def to_dict(self) -> dict:
        return {
            "params": {"alpha": self.params.alpha, "lambda": self.params.lam, "tau": self.params.tau},
            "k_eff": self.k_eff,
            "info": self.info.tolist(),
            "bias": self.bias.tolist(),
            "cov": self.cov.tolist(),
            "std_errors": self.std_errors.tolist(),
        }


def asymptotic_cov(p: TemperedParams, k_eff: float, so: Optional[SecondOrderSpec] = None) -> AsymptoticInfo:
    """Covariance ``I^{-1} / k_eff``; ``k_eff`` stands in for ``n P(X > t)``."""
    if not k_eff >= 1:
        raise DomainError("k_eff must be >= 1")
    info = fisher_info(p)
    inv = _spd_solve(info, np.eye(3))
    inv = 0.5 * (inv + inv.T)
    bias = np.zeros(3) if so is None else bias_vector(p, so, info)
    return AsymptoticInfo(info=info, bias=bias, cov=inv / k_eff, k_eff=float(k_eff), params=p)


def confidence_interval(fit, k_eff: float, level: float = 0.95,
                        asym: Optional[AsymptoticInfo] = None) -> Tuple[Tuple[float, float], ...]:
    """Wald intervals for ``(alpha, lam, tau)``; alpha and tau are clipped at 0."""
    if not 0 <= level < 1:
        raise DomainError("level must lie in [0, 1)")
    p = fit.params if hasattr(fit, "params") else fit
    asym = asymptotic_cov(p, k_eff) if asym is None else asym
    z = stats.norm.ppf(0.5 + level / 2.0)
    se = asym.std_errors
    est = p.as_array()
    lo = est - z * se
    hi = est + z * se
    lo[0] = max(lo[0], 0.0)
    lo[2] = max(lo[2], 0.0)
    return tuple((float(a), float(b)) for a, b in zip(lo, hi))


def mc_scores(p: TemperedParams, n_draws: int, seed: int = 0) -> np.ndarray:
    """Per-observation scores ``(n_draws, 3)`` for draws from the limit model."""
    if n_draws < 1:
        raise DomainError("n_draws must be >= 1")
    rng = rng_stream(seed)
    u = 1.0 - rng.random(n_draws)  # (0, 1]
    x = np.asarray(limit_quantile(u, p))
    lx = np.log(x)
    xt = np.exp(p.tau * lx)
    d = p.alpha + p.lam * p.tau * xt
    s1 = 1.0 / d - lx
    s2 = p.tau * xt / d - xt + 1.0
    s3 = p.lam * (xt * (1.0 + p.tau * lx) / d - xt * lx)
    return np.column_stack([s1, s2, s3])


def mc_fisher_oracle(p: TemperedParams, n_draws: int = 10**6, seed: int = 0) -> np.ndarray:
    """Monte Carlo ``E[score score^T]`` under the limit model."""
    if n_draws < 10**4:
        raise DomainError("use at least 1e4 draws")
    if not p.lam > 0:
        raise DomainError("oracle needs lam > 0")
    s = mc_scores(p, n_draws, seed)
    return s.T @ s / n_draws


def cross_check_fisher(p: TemperedParams, n_draws: int = 10**6, seed: int = 0,
                       rtol: float = 0.05) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Quadrature vs Monte Carlo information; warns for every entry off by more than ``rtol``.

    Returns ``(quadrature, monte_carlo, relative_difference)``.
    """
    quad = fisher_info(p)
    mc = mc_fisher_oracle(p, n_draws, seed)
    rel = np.abs(quad - mc) / np.abs(mc)
    for i, j in zip(*np.triu_indices(3)):
        if rel[i, j] > rtol:
            warnings.warn(
                f"I_{i + 1}{j + 1}: quadrature {quad[i, j]:.6g} vs Monte Carlo {mc[i, j]:.6g} "
                f"({100 * rel[i, j]:.1f}% apart)", RuntimeWarning, stacklevel=2)
    return quad, mc, rel
