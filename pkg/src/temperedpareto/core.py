"""Weibull-tempered Pareto limit model, base families and exact samplers.

The limit model for relative excesses ``x = X / t`` over a high threshold is

    P(X/t > x | X > t) = x**(-alpha) * exp(-lam * (x**tau - 1)),   x >= 1,

and data are generated as ``X = min(Y, W)`` with ``Y`` from a heavy-tailed base
family and ``W`` Weibull with ``P(W > x) = exp(-(beta * x)**tau)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Union

import numpy as np
from scipy import special

from .errors import DomainError, NumericError

ArrayLike = Union[float, np.ndarray]

__all__ = [
    "TemperedParams",
    "Burr",
    "Frechet",
    "Pareto",
    "LogNormal",
    "BaseFamily",
    "Sample",
    "TemperedSampleSpec",
    "rng_stream",
    "h_tau",
    "limit_survival",
    "limit_density",
    "limit_quantile",
    "solve_log_excess",
    "sample_tempered",
]


@dataclass(frozen=True)
class TemperedParams:
    """Parameters ``(alpha, lam, tau)`` of the tempered limit model.

    ``lam`` is ``beta_inf**tau``; the field is not called ``lambda`` because
    that is a Python keyword.
    """

    alpha: float
    lam: float
    tau: float

    def __post_init__(self):
        for name in ("alpha", "lam", "tau"):
            v = getattr(self, name)
            if not math.isfinite(v):
                raise DomainError(f"{name} must be finite, got {v!r}")
            object.__setattr__(self, name, float(v))
        if self.alpha <= 0:
            raise DomainError(f"alpha must be > 0, got {self.alpha}")
        if self.tau <= 0:
            raise DomainError(f"tau must be > 0, got {self.tau}")
        if self.lam < 0:
            raise DomainError(f"lam must be >= 0, got {self.lam}")

    @classmethod
    def from_beta(cls, alpha: float, beta_inf: float, tau: float) -> "TemperedParams":
        return cls(alpha, beta_inf**tau, tau)

    @property
    def beta_inf(self) -> float:
        return self.lam ** (1.0 / self.tau) if self.lam > 0 else 0.0

    @property
    def delta(self) -> float:
        return self.tau * self.lam

    @property
    def gamma(self) -> float:
        return 1.0 / self.alpha

    def as_array(self) -> np.ndarray:
        return np.array([self.alpha, self.lam, self.tau])


# ---------------------------------------------------------------------------
# Base families.  Each exposes the survival function of Y, its inverse and the
# second-order constants (D, rho) of  l(ty)/l(t) = 1 + D t^rho h_rho(y).
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Burr:
    """Burr survival ``(1 + y**(-xi*alpha))**(1/xi)`` on ``y > 0``."""

    alpha: float
    xi: float
    name: str = field(default="burr", init=False)

    def __post_init__(self):
        if not self.alpha > 0:
            raise DomainError("Burr alpha must be > 0")
        if not self.xi < 0:
            raise DomainError("Burr xi must be < 0")

    @property
    def rho(self) -> float:
        return self.xi * self.alpha

    @property
    def D(self) -> float:
        # l(y) = (1 + y**rho)**(1/xi) = 1 + y**rho / xi + ...
        return self.alpha

    def survival(self, y: ArrayLike) -> ArrayLike:
        y = np.asarray(y, dtype=float)
        with np.errstate(divide="ignore", over="ignore"):
            out = np.power(1.0 + np.power(y, -self.xi * self.alpha), 1.0 / self.xi)
        return np.where(y > 0, out, 1.0)

    def isf(self, u: ArrayLike) -> ArrayLike:
        u = np.asarray(u, dtype=float)
        with np.errstate(divide="ignore"):
            return np.power(np.power(u, self.xi) - 1.0, -1.0 / (self.xi * self.alpha))


@dataclass(frozen=True)
class Frechet:
    """Frechet distribution function ``exp(-y**(-alpha))``."""

    alpha: float
    name: str = field(default="frechet", init=False)

    def __post_init__(self):
        if not self.alpha > 0:
            raise DomainError("Frechet alpha must be > 0")

    @property
    def rho(self) -> float:
        return -self.alpha

    @property
    def D(self) -> float:
        return self.alpha / 2.0

    def survival(self, y: ArrayLike) -> ArrayLike:
        y = np.asarray(y, dtype=float)
        with np.errstate(divide="ignore", over="ignore"):
            out = -np.expm1(-np.power(y, -self.alpha))
        return np.where(y > 0, out, 1.0)

    def isf(self, u: ArrayLike) -> ArrayLike:
        u = np.asarray(u, dtype=float)
        with np.errstate(divide="ignore"):
            return np.power(-np.log1p(-u), -1.0 / self.alpha)


@dataclass(frozen=True)
class Pareto:
    """Strict Pareto survival ``y**(-alpha)`` on ``y > 1``."""

    alpha: float
    name: str = field(default="pareto", init=False)

    def __post_init__(self):
        if not self.alpha > 0:
            raise DomainError("Pareto alpha must be > 0")

    # l == 1, so D = 0 and rho never enters a bias term.
    rho = -1.0
    D = 0.0

    def survival(self, y: ArrayLike) -> ArrayLike:
        y = np.asarray(y, dtype=float)
        with np.errstate(divide="ignore"):
            return np.where(y > 1, np.power(y, -self.alpha), 1.0)

    def isf(self, u: ArrayLike) -> ArrayLike:
        return np.power(np.asarray(u, dtype=float), -1.0 / self.alpha)


@dataclass(frozen=True)
class LogNormal:
    """Log-normal base with log-scale mean ``mu`` and standard deviation ``sigma``.

    Not of Pareto type, so ``alpha``, ``rho`` and ``D`` are undefined (``None``).
    """

    mu: float = 0.0
    sigma: float = 10.0
    name: str = field(default="lognormal", init=False)

    alpha = None
    rho = None
    D = None

    def __post_init__(self):
        if not self.sigma > 0:
            raise DomainError("LogNormal sigma must be > 0")

    def survival(self, y: ArrayLike) -> ArrayLike:
        y = np.asarray(y, dtype=float)
        with np.errstate(divide="ignore"):
            z = (np.log(y) - self.mu) / self.sigma
        return np.where(y > 0, special.ndtr(-z), 1.0)

    def isf(self, u: ArrayLike) -> ArrayLike:
        u = np.asarray(u, dtype=float)
        return np.exp(self.mu - self.sigma * special.ndtri(u))


BaseFamily = Union[Burr, Frechet, Pareto, LogNormal]


# ---------------------------------------------------------------------------
# Samples
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class Sample:
    """Ascending-sorted, strictly positive, read-only observations."""

    values: np.ndarray

    def __post_init__(self):
        v = np.sort(np.asarray(self.values, dtype=float).ravel())
        if v.size == 0:
            raise DomainError("sample is empty")
        if not np.all(np.isfinite(v)):
            raise DomainError("sample contains non-finite values")
        if v[0] <= 0:
            raise DomainError("sample values must be strictly positive")
        v.flags.writeable = False
        object.__setattr__(self, "values", v)

    @property
    def n(self) -> int:
        return int(self.values.size)

    def __len__(self) -> int:
        return self.n

    def __eq__(self, other) -> bool:
        return isinstance(other, Sample) and np.array_equal(self.values, other.values)

    def scaled(self, c: float) -> "Sample":
        return Sample(self.values * c)

    def descending(self) -> np.ndarray:
        """``X_{n,n} >= X_{n-1,n} >= ...`` as a view."""
        return self.values[::-1]


@dataclass(frozen=True)
class TemperedSampleSpec:
    """Recipe for ``X = min(Y, W)`` draws; ``beta`` is the Weibull rate of ``W``."""

    base: BaseFamily
    tau: float
    beta: float
    n: int
    seed: int = 0

    def __post_init__(self):
        if self.n < 1:
            raise DomainError("n must be >= 1")
        if not (self.beta > 0 and math.isfinite(self.beta)):
            raise DomainError("beta must be > 0")
        if not (self.tau > 0 and math.isfinite(self.tau)):
            raise DomainError("tau must be > 0")

    def weibull_survival(self, z: ArrayLike) -> ArrayLike:
        z = np.asarray(z, dtype=float)
        return np.exp(-np.power(self.beta * np.maximum(z, 0.0), self.tau))

    def survival(self, z: ArrayLike) -> ArrayLike:
        """Exact ``P(min(Y, W) > z)``."""
        return self.base.survival(z) * self.weibull_survival(z)

    def cdf(self, z: ArrayLike) -> ArrayLike:
        return 1.0 - self.survival(z)

    def log_survival(self, z: float) -> float:
        sy = float(self.base.survival(z))
        if sy <= 0:
            return -math.inf
        return math.log(sy) - (self.beta * z) ** self.tau


def rng_stream(seed: int, index: Optional[int] = None) -> np.random.Generator:
    """Independent generator for ``(seed, index)``; ``index`` selects a replication stream."""
    key = () if index is None else (int(index),)
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(int(seed), spawn_key=key)))


def sample_tempered(spec: TemperedSampleSpec, index: Optional[int] = None) -> Sample:
    """Draw ``spec.n`` i.i.d. copies of ``min(Y, W)`` by inverse transform.

    The stream is fully determined by ``(spec.seed, index)``.
    """
    rng = rng_stream(spec.seed, index)
    u_y = rng.random(spec.n)
    u_w = rng.random(spec.n)
    # random() is on [0, 1); flip to (0, 1] so both inverse maps stay finite
    y = spec.base.isf(1.0 - u_y)
    w = np.power(-np.log1p(-u_w), 1.0 / spec.tau) / spec.beta
    x = np.minimum(y, w)
    x = x[x > 0]
    return Sample(x)


# ---------------------------------------------------------------------------
# Limit model
# ---------------------------------------------------------------------------


def _check_finite(**kw):
    for name, v in kw.items():
        if not np.all(np.isfinite(v)):
            raise DomainError(f"{name} must be finite")


def h_tau(x: ArrayLike, tau: float) -> ArrayLike:
    """``(x**tau - 1) / tau``."""
    _check_finite(x=x, tau=tau)
    if tau <= 0:
        raise DomainError("tau must be > 0")
    x = np.asarray(x, dtype=float)
    out = np.expm1(tau * np.log(x)) / tau
    return float(out) if out.ndim == 0 else out


def _log_x(x: ArrayLike) -> np.ndarray:
    _check_finite(x=x)
    x = np.asarray(x, dtype=float)
    if np.any(x < 1):
        raise DomainError("x must be >= 1")
    return np.log(x)


def _tempering(lx: np.ndarray, p: TemperedParams) -> np.ndarray:
    """``lam (x**tau - 1)``; exactly 0 when ``lam = 0`` even if ``x**tau`` overflows."""
    if p.lam == 0:
        return np.zeros_like(lx)
    with np.errstate(over="ignore"):
        return p.lam * np.expm1(p.tau * lx)


def limit_survival(x: ArrayLike, p: TemperedParams) -> ArrayLike:
    """``x**-alpha * exp(-lam * (x**tau - 1))`` for ``x >= 1``."""
    lx = _log_x(x)
    out = np.exp(-p.alpha * lx - _tempering(lx, p))
    return float(out) if out.ndim == 0 else out


def limit_density(x: ArrayLike, p: TemperedParams) -> ArrayLike:
    lx = _log_x(x)
    t = _tempering(lx, p)
    with np.errstate(over="ignore", invalid="ignore"):
        out = np.exp(-(p.alpha + 1.0) * lx - t) * (p.alpha + p.tau * (t + p.lam))
    out = np.where(np.isinf(t), 0.0, out)  # exp(-inf) * inf
    return float(out) if out.ndim == 0 else out


def solve_log_excess(level, alpha, lam, tau, max_iter: int = 200) -> np.ndarray:
    """Solve ``alpha*u + lam*(exp(tau*u) - 1) = level`` for ``u >= 0``.

    The left side is increasing and convex in ``u``, so Newton's method
    started from an upper bound decreases monotonically onto the root and
    never leaves the bracket ``[0, u_hi]``.  All arguments broadcast.
    """
    level, alpha, lam, tau = np.broadcast_arrays(
        *(np.asarray(a, dtype=float) for a in (level, alpha, lam, tau))
    )
    shape = level.shape
    level, alpha, lam, tau = (np.ravel(a) for a in (level, alpha, lam, tau))
    if np.any(level < 0):
        raise DomainError("level must be >= 0")
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        hi_a = np.where(alpha > 0, level / alpha, np.inf)
        hi_l = np.where(lam > 0, np.log1p(level / lam) / tau, np.inf)
    hi = np.minimum(hi_a, hi_l)
    if not np.all(np.isfinite(hi)):
        raise DomainError("alpha and lam cannot both vanish")
    u = hi.copy()
    active = level > 0
    for _ in range(max_iter):
        if not active.any():
            break
        ua = u[active]
        la = lam[active]
        # lam > 0 keeps tau*u <= log1p(level/lam); lam = 0 may overflow harmlessly
        with np.errstate(over="ignore"):
            e = np.where(la > 0, np.exp(tau[active] * ua), 1.0)
        f = alpha[active] * ua + la * (e - 1.0) - level[active]
        fp = alpha[active] + la * tau[active] * e
        step = f / fp
        new = np.clip(ua - step, 0.0, None)
        done = (step <= 4 * np.finfo(float).eps * np.maximum(ua, 1e-300)) | (new >= ua)
        new = np.where(new >= ua, ua, new)
        u[active] = new
        idx = np.flatnonzero(active)
        active[idx[done]] = False
    else:
        bad = np.flatnonzero(active)
        raise NumericError(
            f"log-excess root did not converge for {bad.size} entries; "
            f"bracket [0, {hi.ravel()[bad[0]]!r}]"
        )
    u[level == 0] = 0.0
    return u.reshape(shape)


def limit_quantile(q: ArrayLike, p: TemperedParams) -> ArrayLike:
    """Inverse of :func:`limit_survival`: the ``x >= 1`` with survival ``q``."""
    _check_finite(q=q)
    q = np.asarray(q, dtype=float)
    if np.any(q <= 0) or np.any(q > 1):
        raise DomainError("q must lie in (0, 1]")
    u = solve_log_excess(-np.log(q), p.alpha, p.lam, p.tau)
    out = np.exp(u)
    return float(out) if out.ndim == 0 else out
