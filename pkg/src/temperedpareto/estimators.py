"""Hill, weighted least-squares and pseudo-ML estimation of tempered POT tails.

For a rank ``k`` the threshold is ``t = X_{n-k,n}`` and the relative excesses
are ``V_j = X_{n-j+1,n} / t``, ``j = 1..k``.  For every trial ``tau`` of a grid
the estimators fit ``(alpha, delta = tau*lam)`` by WLS on the QQ coordinates
and ``(alpha, lam)`` by maximising the tempered log-likelihood; the grid point
with the smallest WLS value (resp. largest likelihood) wins.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterator, Optional, Sequence

import numpy as np
from scipy import optimize

from .core import Sample, TemperedParams, h_tau, solve_log_excess
from .errors import DegenerateFitError, DomainError, NumericError

__all__ = [
    "POTView",
    "FitResult",
    "TraceRecord",
    "FitTrace",
    "default_tau_grid",
    "pot_excesses",
    "hill",
    "qq_scores",
    "wls_weights",
    "wls_objective",
    "wls_lambda",
    "qq_delta",
    "fit_wls_fixed_tau",
    "fit_wls_pareto",
    "kkt_residual",
    "log_likelihood",
    "score",
    "fit_mle_fixed_tau",
    "fit_k",
    "ss_k",
    "fit_trace",
    "tail_prob",
    "extreme_quantile",
    "weissman_quantile",
    "truncated_alpha",
    "solve_truncated_alpha",
    "truncated_quantile",
]

# floor on 1/alpha for WLS and on alpha for ML, keeps both strictly positive
INV_ALPHA_FLOOR = 1e-8
ALPHA_FLOOR = 1e-8

WLS = "WLS"
MLE = "MLE"


def default_tau_grid(tau_min: float = 0.1, tau_max: float = 5.0, points: int = 50) -> np.ndarray:
    """Geometric grid of trial Weibull shapes."""
    if not (0 < tau_min <= tau_max) or points < 1:
        raise DomainError("need 0 < tau_min <= tau_max and points >= 1")
    if points == 1:
        return np.array([float(tau_min)])
    return np.geomspace(tau_min, tau_max, points)


# ---------------------------------------------------------------------------
# Data views
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class POTView:
    """Relative excesses over the ``(k+1)``-th largest observation."""

    k: int
    threshold: float
    v: np.ndarray
    n: int

    @property
    def log_v(self) -> np.ndarray:
        return np.log(self.v)


def _check_rank(s: Sample, k: int) -> None:
    if not isinstance(k, (int, np.integer)) or not 1 <= k <= s.n - 1:
        raise DomainError(f"k must be an integer in [1, {s.n - 1}], got {k!r}")


def pot_excesses(s: Sample, k: int) -> POTView:
    _check_rank(s, k)
    xd = s.descending()
    t = float(xd[k])
    v = xd[:k] / t
    v.flags.writeable = False
    return POTView(k=int(k), threshold=t, v=v, n=s.n)


def hill(s: Sample, k: int) -> float:
    """Hill statistic ``H_{k,n}``; ``1/H`` is the Pareto pseudo-MLE of alpha.

    Returns 0.0 when the top ``k+1`` values coincide; callers that need
    ``1/H`` must treat that as degenerate.
    """
    _check_rank(s, k)
    ld = np.log(s.descending()[: k + 1])
    return float(np.mean(ld[:k] - ld[k]))


def _hill_curve(log_desc: np.ndarray, ks: np.ndarray) -> np.ndarray:
    csum = np.cumsum(log_desc)
    return csum[ks - 1] / ks - log_desc[ks]


def qq_scores(k: int) -> np.ndarray:
    """Exponential QQ abscissae ``log((k+1)/(k-j+1))`` for ``j = 1..k``.

    Entry ``j`` belongs to the ``j``-th *smallest* excess, i.e. to
    ``V_{k-j+1,k}``; pair it with ``view.v[::-1]``.
    """
    j = np.arange(1, k + 1)
    return np.log(k + 1.0) - np.log(k - j + 1.0)


def wls_weights(k: int, weights: str = "hill") -> np.ndarray:
    """``"hill"``: ``1/log((k+1)/(k-j+1))``; ``"uniform"``: all ones."""
    if weights == "hill":
        return 1.0 / qq_scores(k)
    if weights == "uniform":
        return np.ones(k)
    raise DomainError(f"unknown weights {weights!r}")


# ---------------------------------------------------------------------------
# Weighted least squares
# ---------------------------------------------------------------------------


def wls_lambda(alpha, delta, tau):
    """Tempering rate ``lam`` implied by a WLS fit.

    The WLS residual divides the QQ relation ``q = alpha log V + tau lam h_tau(V)``
    by ``alpha``, so its coefficient ``delta`` equals ``tau lam / alpha``.
    """
    return alpha * delta / tau


def qq_delta(params: TemperedParams) -> float:
    """Inverse of :func:`wls_lambda`: the WLS coefficient ``tau lam / alpha``."""
    return params.tau * params.lam / params.alpha


def wls_objective(p: POTView, alpha: float, delta: float, tau: float, weights: str = "hill") -> float:
    if not (alpha > 0 and delta >= 0 and tau > 0):
        raise DomainError("need alpha > 0, delta >= 0, tau > 0")
    q = qq_scores(p.k)
    w = wls_weights(p.k, weights)
    v = p.v[::-1]
    r = q / alpha - np.log(v) - delta * h_tau(v, tau)
    return float(np.sum(w * r * r))


def _wls_grid(lv: np.ndarray, taus: np.ndarray, w: np.ndarray, q: np.ndarray):
    """Constrained WLS of ``(1/alpha, delta)`` for every tau in the grid.

    At fixed tau the objective is a convex quadratic in ``(a, delta)`` with
    ``a = 1/alpha``.  The box minimiser is the best feasible point among the
    interior stationary point and the minimisers on the two faces
    ``delta = 0`` and ``a = INV_ALPHA_FLOOR``.

    Returns ``(a, delta, objective, ok)`` arrays of shape ``(m,)``.
    """
    g = np.expm1(np.outer(taus, lv)) / taus[:, None]  # (m, k)
    wq = w * q
    Sqq = wq @ q
    Sqy = wq @ lv
    wg = g * w
    Sqg = wg @ q
    Sgg = np.einsum("ij,ij->i", wg, g)
    Sgy = wg @ lv

    det = Sqq * Sgg - Sqg * Sqg
    ok = (Sgg > 0) & (det > 1e-13 * Sqq * Sgg)
    with np.errstate(divide="ignore", invalid="ignore"):
        a_int = (Sqy * Sgg - Sqg * Sgy) / det
        d_int = (Sqg * Sqy - Sqq * Sgy) / det
        a_face = np.full_like(taus, max(INV_ALPHA_FLOOR, Sqy / Sqq))
        d_face = np.maximum(0.0, (INV_ALPHA_FLOOR * Sqg - Sgy) / Sgg)

    cand_a = np.stack([a_int, a_face, np.full_like(taus, INV_ALPHA_FLOOR)])
    cand_d = np.stack([d_int, np.zeros_like(taus), d_face])
    feasible = (cand_a >= INV_ALPHA_FLOOR) & (cand_d >= 0) & np.isfinite(cand_a) & np.isfinite(cand_d)
    obj = np.full(cand_a.shape, np.inf)
    for c in range(3):
        f = feasible[c]
        if f.any():
            r = cand_a[c, f, None] * q - lv - cand_d[c, f, None] * g[f]
            obj[c, f] = np.einsum("ij,ij->i", w * r, r)
    best = np.argmin(obj, axis=0)
    idx = np.arange(taus.size)
    return cand_a[best, idx], cand_d[best, idx], obj[best, idx], ok


def fit_wls_fixed_tau(p: POTView, tau: float, weights: str = "hill"):
    """Minimise the WLS objective over ``alpha > 0, delta >= 0`` at fixed tau.

    Returns ``(alpha, delta, objective)``.
    """
    if p.k < 3:
        raise DomainError("WLS fit needs k >= 3")
    if not tau > 0:
        raise DomainError("tau must be > 0")
    a, d, obj, ok = _wls_grid(p.log_v[::-1], np.array([float(tau)]), wls_weights(p.k, weights), qq_scores(p.k))
    if not ok[0]:
        raise DegenerateFitError(f"singular WLS normal equations at k={p.k}, tau={tau}")
    return 1.0 / float(a[0]), float(d[0]), float(obj[0])


def fit_wls_pareto(p: POTView, weights: str = "hill") -> float:
    """Minimiser over alpha of the WLS objective with ``delta = 0`` (closed form).

    With Hill weights this is ``sum(q_j) / sum(log V_j)``, which differs from
    ``1/H_{k,n} = k / sum(log V_j)`` by the factor ``sum(q_j) / k``.
    """
    q = qq_scores(p.k)
    w = wls_weights(p.k, weights)
    lv = p.log_v[::-1]
    num = float(np.sum(w * q * lv))
    if not num > 0:
        raise DegenerateFitError("all excesses equal one")
    return float(np.sum(w * q * q)) / num


# ---------------------------------------------------------------------------
# Likelihood
# ---------------------------------------------------------------------------


def log_likelihood(p: POTView, alpha: float, lam: float, tau: float) -> float:
    for name, v in (("alpha", alpha), ("lam", lam), ("tau", tau)):
        if not math.isfinite(v):
            raise DomainError(f"{name} must be finite")
    if not (alpha > 0 and lam >= 0 and tau > 0):
        raise DomainError("need alpha > 0, lam >= 0, tau > 0")
    lv = p.log_v
    vt = np.exp(tau * lv)
    return float(
        -(1.0 + alpha) * lv.sum() - lam * np.expm1(tau * lv).sum() + np.log(alpha + lam * tau * vt).sum()
    )


def score(p: POTView, alpha: float, lam: float, tau: float) -> np.ndarray:
    """Per-observation-averaged likelihood equations in ``(alpha, lam, tau)``.

    Entries are the derivatives of the log-likelihood in ``alpha``,
    ``lam`` (divided by ``tau``) and ``tau`` (divided by ``lam``), each over
    ``k``; all three vanish at an interior maximiser.
    """
    lv = p.log_v
    vt = np.exp(tau * lv)
    d = alpha + lam * tau * vt
    r1 = np.sum(1.0 / d) - lv.sum()
    r2 = np.sum(vt / d) - np.sum(np.expm1(tau * lv)) / tau
    r3 = np.sum(vt * (1.0 + tau * lv) / d) - np.sum(vt * lv)
    return np.array([r1, r2, r3]) / p.k


def kkt_residual(p: POTView, alpha: float, lam: float, tau: float) -> np.ndarray:
    """Normalised ``(alpha, lam)`` likelihood-equation residuals, projected on the box.

    A free coordinate contributes ``|r|``; a coordinate held at its lower
    bound (``lam = 0`` or ``alpha`` at the floor) contributes ``max(r, 0)``,
    since there the gradient only has to point out of the feasible set.
    """
    r = score(p, alpha, lam, tau)[:2]
    at_bound = np.array([alpha <= ALPHA_FLOOR * (1 + 1e-12), lam == 0.0])
    return np.where(at_bound, np.maximum(r, 0.0), np.abs(r))


def _ll_grid(lv, taus, E1, alpha, lam):
    d = alpha[:, None] + (lam * taus)[:, None] * (E1 + 1.0)
    with np.errstate(divide="ignore", invalid="ignore"):
        return -(1.0 + alpha) * lv.sum() - lam * E1.sum(axis=1) + np.log(d).sum(axis=1)


def _mle_grid(lv: np.ndarray, taus: np.ndarray, a0: np.ndarray, l0: np.ndarray, max_iter: int = 100):
    """Maximise the log-likelihood over ``(alpha, lam)`` for every tau.

    The objective is concave in ``(alpha, lam)`` (linear terms plus the log of
    an affine function), so the KKT conditions identify the maximiser:
    first the faces ``lam = 0`` and ``alpha = 0`` are tested in closed form,
    the remaining problems are solved by damped Newton steps that stay in the
    open quadrant.

    Returns ``(alpha, lam, loglik, converged)``.
    """
    k = lv.size
    m = taus.size
    S1 = lv.sum()
    if S1 <= 0:
        raise DegenerateFitError("all excesses equal one; likelihood is unbounded in alpha")
    E1 = np.expm1(np.outer(taus, lv))  # V^tau - 1
    C = taus[:, None] * (E1 + 1.0)  # tau V^tau
    S2 = E1.sum(axis=1)
    Csum = C.sum(axis=1)

    alpha = np.empty(m)
    lam = np.empty(m)
    conv = np.zeros(m, dtype=bool)

    # face lam = 0: alpha = k / S1 (the Hill estimate)
    a_b = k / S1
    on_lam_face = Csum / a_b - S2 <= 0
    alpha[on_lam_face] = a_b
    lam[on_lam_face] = 0.0
    conv[on_lam_face] = True

    # face alpha = 0: lam = k / S2
    with np.errstate(divide="ignore"):
        l_b = k / S2
        g_alpha = np.sum(1.0 / C, axis=1) / l_b - S1
    on_alpha_face = ~on_lam_face & (g_alpha <= 0)
    alpha[on_alpha_face] = ALPHA_FLOOR
    lam[on_alpha_face] = l_b[on_alpha_face]
    conv[on_alpha_face] = True

    todo = np.flatnonzero(~conv)
    if todo.size:
        a = np.asarray(a0, dtype=float)[todo].copy()
        lm = np.asarray(l0, dtype=float)[todo].copy()
        bad = ~(np.isfinite(a) & (a > 0) & np.isfinite(lm) & (lm > 0))
        a[bad] = 0.5 * a_b
        lm[bad] = 0.5 * l_b[todo][bad]
        lvr = lv
        Ct = C[todo]
        E1t = E1[todo]
        S2t = S2[todo]
        tt = taus[todo]
        ll = _ll_grid(lvr, tt, E1t, a, lm)
        active = np.ones(todo.size, dtype=bool)
        for _ in range(max_iter):
            if not active.any():
                break
            ia = np.flatnonzero(active)
            Ca = Ct[ia]
            D = a[ia, None] + lm[ia, None] * Ca
            inv = 1.0 / D
            inv2 = inv * inv
            ga = inv.sum(axis=1) - S1
            gl = (Ca * inv).sum(axis=1) - S2t[ia]
            haa = inv2.sum(axis=1)
            hal = (Ca * inv2).sum(axis=1)
            hll = (Ca * Ca * inv2).sum(axis=1)
            det = haa * hll - hal * hal
            # ascent direction  -H^{-1} g  with  H = -[[haa, hal], [hal, hll]]
            da = (hll * ga - hal * gl) / det
            dl = (haa * gl - hal * ga) / det
            dec = ga * da + gl * dl  # Newton decrement squared
            # fraction-to-boundary keeps iterates strictly inside the quadrant
            step = np.ones(ia.size)
            with np.errstate(divide="ignore", invalid="ignore"):
                sa = np.where(da < 0, -0.9 * a[ia] / da, np.inf)
                sl = np.where(dl < 0, -0.9 * lm[ia] / dl, np.inf)
            step = np.minimum(step, np.minimum(sa, sl))
            cur = ll[ia]
            # stop once the likelihood equations hold to near machine precision
            small = np.maximum(np.abs(ga), np.abs(gl)) <= 1e-11 * k
            full = small | (dec <= 1e-15 * (1.0 + np.abs(cur)))
            new_a = a[ia] + step * da
            new_l = lm[ia] + step * dl
            new_ll = _ll_grid(lvr, tt[ia], E1t[ia], new_a, new_l)
            for _bt in range(40):
                worse = ~full & ~(new_ll >= cur + 1e-4 * step * dec)
                if not worse.any():
                    break
                step[worse] *= 0.5
                new_a[worse] = a[ia][worse] + step[worse] * da[worse]
                new_l[worse] = lm[ia][worse] + step[worse] * dl[worse]
                new_ll[worse] = _ll_grid(lvr, tt[ia][worse], E1t[ia][worse], new_a[worse], new_l[worse])
            keep = full | (new_ll >= cur)
            keep &= (new_a > 0) & (new_l > 0)
            a[ia] = np.where(keep, new_a, a[ia])
            lm[ia] = np.where(keep, new_l, lm[ia])
            ll[ia] = np.where(keep, new_ll, cur)
            done = small | ~keep
            active[ia[done]] = False
        alpha[todo] = a
        lam[todo] = lm
        conv[todo] = ~active
        # a converged interior point must also satisfy the likelihood equations
        D = a[:, None] + lm[:, None] * Ct
        res = np.maximum(
            np.abs((1.0 / D).sum(axis=1) - S1), np.abs((Ct / D).sum(axis=1) - S2t)
        ) / k
        conv[todo] &= res < 1e-8

    ll_all = _ll_grid(lv, taus, E1, alpha, lam)
    return alpha, lam, ll_all, conv


def _mle_simplex(lv: np.ndarray, tau: float, a0: float, l0: float, eps: float = 1e-10):
    """Nelder-Mead on ``(log alpha, log(lam + eps))``; slower alternative optimiser."""
    E1 = np.expm1(tau * lv)
    C = tau * (E1 + 1.0)
    S1 = lv.sum()
    S2 = E1.sum()

    def negll(z):
        a = math.exp(z[0])
        lm = max(math.exp(z[1]) - eps, 0.0)
        return (1.0 + a) * S1 + lm * S2 - np.log(a + lm * C).sum()

    z0 = [math.log(a0), math.log(max(l0, 0.0) + eps)]
    res = optimize.minimize(
        negll, z0, method="Nelder-Mead",
        options={"xatol": 1e-9, "fatol": 1e-12, "maxiter": 500, "adaptive": False},
    )
    a = math.exp(res.x[0])
    lm = max(math.exp(res.x[1]) - eps, 0.0)
    return a, lm, -float(res.fun), bool(res.success)


def fit_mle_fixed_tau(p: POTView, tau: float, init, optimizer: str = "newton"):
    """Maximise the log-likelihood over ``(alpha, lam)`` at fixed ``tau``.

    ``init`` is ``(alpha, lam)``, normally the WLS fit converted by ``wls_lambda``.
    Returns ``(alpha, lam, loglik, converged)``.
    """
    a0, l0 = init
    if optimizer == "simplex":
        return _mle_simplex(p.log_v, float(tau), float(a0), float(l0))
    if optimizer != "newton":
        raise DomainError(f"unknown optimizer {optimizer!r}")
    a, lm, ll, conv = _mle_grid(p.log_v, np.array([float(tau)]), np.array([a0]), np.array([l0]))
    return float(a[0]), float(lm[0]), float(ll[0]), bool(conv[0])


# ---------------------------------------------------------------------------
# Per-k fit over the tau grid
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class FitResult:
    params: TemperedParams
    method: str
    k: int
    objective: float
    tau_grid_index: int
    converged: bool = True

    @property
    def alpha(self) -> float:
        return self.params.alpha

    @property
    def tau(self) -> float:
        return self.params.tau

    @property
    def lam(self) -> float:
        return self.params.lam

    @property
    def beta_inf(self) -> float:
        return self.params.beta_inf

    def to_dict(self) -> dict:
        return {
            "method": self.method,
            "k": self.k,
            "alpha": self.alpha,
            "lambda": self.lam,
            "tau": self.tau,
            "beta_inf": self.beta_inf,
            "delta": self.params.delta,
            "objective": self.objective,
            "tau_grid_index": self.tau_grid_index,
            "converged": self.converged,
        }


@dataclass
class _KFit:
    """Everything computed for one rank; internal carrier for fit_k/fit_trace."""

    wls_a: np.ndarray
    wls_d: np.ndarray
    wls_obj: np.ndarray
    wls_ok: np.ndarray
    ml_a: np.ndarray
    ml_l: np.ndarray
    ml_ll: np.ndarray
    ml_conv: np.ndarray
    iw: int
    im: int


def _fit_k_arrays(lv: np.ndarray, taus: np.ndarray, weights: str, optimizer: str) -> _KFit:
    k = lv.size
    q = qq_scores(k)
    w = wls_weights(k, weights)
    a, d, obj, ok = _wls_grid(lv[::-1], taus, w, q)
    if not ok.any():
        raise DegenerateFitError(f"every tau grid point is degenerate at k={k}")
    obj = np.where(ok, obj, np.inf)
    alpha_w = 1.0 / a
    lam_w = wls_lambda(alpha_w, d, taus)
    if optimizer == "newton":
        ml_a, ml_l, ml_ll, ml_conv = _mle_grid(lv, taus, alpha_w, lam_w)
    else:
        out = [_mle_simplex(lv, t, a0, l0) for t, a0, l0 in zip(taus, alpha_w, lam_w)]
        ml_a, ml_l, ml_ll, ml_conv = (np.array(c) for c in zip(*out))
    ml_ll = np.where(ok & np.isfinite(ml_ll), ml_ll, -np.inf)
    iw = int(np.argmin(obj))
    im = int(np.argmax(ml_ll))
    return _KFit(a, d, obj, ok, ml_a, ml_l, ml_ll, ml_conv, iw, im)


def _results_from(kf: _KFit, taus: np.ndarray, k: int):
    iw, im = kf.iw, kf.im
    wls = FitResult(
        TemperedParams(1.0 / kf.wls_a[iw], wls_lambda(1.0 / kf.wls_a[iw], kf.wls_d[iw], taus[iw]), taus[iw]),
        WLS, k, float(kf.wls_obj[iw]), iw, True,
    )
    mle = FitResult(
        TemperedParams(kf.ml_a[im], kf.ml_l[im], taus[im]),
        MLE, k, float(kf.ml_ll[im]), im, bool(kf.ml_conv[im]),
    )
    return wls, mle


def fit_k(p: POTView, tau_grid: Optional[Sequence[float]] = None, weights: str = "hill",
          optimizer: str = "newton"):
    """Run the WLS and ML fits for every trial tau and return the two winners."""
    taus = default_tau_grid() if tau_grid is None else np.asarray(tau_grid, dtype=float)
    if taus.size == 0 or np.any(taus <= 0):
        raise DomainError("tau grid must be non-empty and positive")
    if p.k < 3:
        raise DomainError("fit_k needs k >= 3")
    kf = _fit_k_arrays(p.log_v, taus, weights, optimizer)
    return _results_from(kf, taus, p.k)


def ss_k(p: POTView, wls_fit: FitResult) -> float:
    """Hill-weighted WLS goodness of fit at the WLS estimates."""
    if wls_fit.k != p.k:
        raise DomainError(f"fit was computed at k={wls_fit.k}, view has k={p.k}")
    return wls_objective(p, wls_fit.alpha, qq_delta(wls_fit.params), wls_fit.tau, weights="hill")


# ---------------------------------------------------------------------------
# Trace over k
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class TraceRecord:
    k: int
    wls: FitResult
    mle: FitResult
    ss_k: float
    hill: float
    alpha_T: Optional[float]


@dataclass(eq=False)
class FitTrace:
    """Column-oriented fit results for every rank in ``k_range``."""

    k: np.ndarray
    threshold: np.ndarray
    alpha_wls: np.ndarray
    lam_wls: np.ndarray
    tau_wls: np.ndarray
    wls_value: np.ndarray
    alpha_mle: np.ndarray
    lam_mle: np.ndarray
    tau_mle: np.ndarray
    loglik: np.ndarray
    mle_converged: np.ndarray
    tau_index_wls: np.ndarray
    tau_index_mle: np.ndarray
    ss: np.ndarray
    hill: np.ndarray
    alpha_T: np.ndarray
    n: int
    tau_grid: np.ndarray
    weights: str = "hill"
    k_hat: int = field(init=False)

    def __post_init__(self):
        self.k_hat = int(self.k[int(np.argmin(self.ss))])

    PARAM_COLUMNS = (
        "alpha_wls", "lam_wls", "tau_wls", "wls_value", "alpha_mle", "lam_mle", "tau_mle",
        "loglik", "ss", "hill", "alpha_T",
    )

    @property
    def k_range(self):
        return int(self.k[0]), int(self.k[-1])

    @property
    def beta_wls(self) -> np.ndarray:
        return np.where(self.lam_wls > 0, self.lam_wls ** (1.0 / self.tau_wls), 0.0)

    @property
    def beta_mle(self) -> np.ndarray:
        return np.where(self.lam_mle > 0, self.lam_mle ** (1.0 / self.tau_mle), 0.0)

    def _row(self, k: int) -> int:
        i = int(k) - int(self.k[0])
        if not 0 <= i < self.k.size:
            raise DomainError(f"k={k} outside trace range {self.k_range}")
        return i

    def wls_fit(self, k: int) -> FitResult:
        i = self._row(k)
        return FitResult(
            TemperedParams(self.alpha_wls[i], self.lam_wls[i], self.tau_wls[i]),
            WLS, int(k), float(self.wls_value[i]), int(self.tau_index_wls[i]), True,
        )

    def mle_fit(self, k: int) -> FitResult:
        i = self._row(k)
        return FitResult(
            TemperedParams(self.alpha_mle[i], self.lam_mle[i], self.tau_mle[i]),
            MLE, int(k), float(self.loglik[i]), int(self.tau_index_mle[i]), bool(self.mle_converged[i]),
        )

    def record(self, k: int) -> TraceRecord:
        i = self._row(k)
        aT = self.alpha_T[i]
        return TraceRecord(int(k), self.wls_fit(k), self.mle_fit(k), float(self.ss[i]),
                           float(self.hill[i]), None if np.isnan(aT) else float(aT))

    def __iter__(self) -> Iterator[TraceRecord]:
        for k in self.k:
            yield self.record(int(k))

    def __len__(self) -> int:
        return int(self.k.size)

    def columns(self) -> dict:
        out = {"k": self.k, "threshold": self.threshold}
        for c in self.PARAM_COLUMNS:
            out[c] = getattr(self, c)
        out["beta_wls"] = self.beta_wls
        out["beta_mle"] = self.beta_mle
        return out


def fit_trace(s: Sample, k_min: int = 10, k_max: Optional[int] = None,
              tau_grid: Optional[Sequence[float]] = None, weights: str = "hill",
              optimizer: str = "newton") -> FitTrace:
    """Fit every rank in ``[k_min, k_max]`` and select ``k_hat = argmin SS_k``.

    Ties in ``SS_k`` resolve to the smallest ``k``.
    """
    n = s.n
    k_max = n - 1 if k_max is None else int(k_max)
    k_min = int(k_min)
    if k_min < 3:
        raise DomainError("k_min must be >= 3")
    if k_max > n - 1:
        raise DomainError(f"k_max must be <= n-1 = {n - 1}")
    if k_min > k_max:
        raise DomainError(f"empty k range [{k_min}, {k_max}]")
    taus = default_tau_grid() if tau_grid is None else np.asarray(tau_grid, dtype=float)
    if taus.size == 0 or np.any(taus <= 0):
        raise DomainError("tau grid must be non-empty and positive")

    ld = np.log(s.descending())
    ks = np.arange(k_min, k_max + 1)
    K = ks.size
    cols = {name: np.empty(K) for name in (
        "alpha_wls", "lam_wls", "tau_wls", "wls_value", "alpha_mle", "lam_mle", "tau_mle",
        "loglik", "ss")}
    conv = np.empty(K, dtype=bool)
    iw_all = np.empty(K, dtype=int)
    im_all = np.empty(K, dtype=int)
    hill_h = _hill_curve(ld, ks)
    for i, k in enumerate(ks):
        lv = ld[:k] - ld[k]
        kf = _fit_k_arrays(lv, taus, weights, optimizer)
        iw, im = kf.iw, kf.im
        cols["alpha_wls"][i] = 1.0 / kf.wls_a[iw]
        cols["lam_wls"][i] = wls_lambda(cols["alpha_wls"][i], kf.wls_d[iw], taus[iw])
        cols["tau_wls"][i] = taus[iw]
        cols["wls_value"][i] = kf.wls_obj[iw]
        cols["alpha_mle"][i] = kf.ml_a[im]
        cols["lam_mle"][i] = kf.ml_l[im]
        cols["tau_mle"][i] = taus[im]
        cols["loglik"][i] = kf.ml_ll[im]
        conv[i] = kf.ml_conv[im]
        iw_all[i] = iw
        im_all[i] = im
        if weights == "hill":
            cols["ss"][i] = kf.wls_obj[iw]
        else:
            q = qq_scores(int(k))
            la = lv[::-1]
            r = kf.wls_a[iw] * q - la - kf.wls_d[iw] * np.expm1(taus[iw] * la) / taus[iw]
            cols["ss"][i] = np.sum(r * r / q)

    alpha_T = np.full(K, np.nan)
    log_r = ld[ks] - ld[0]
    for i in range(K):
        if ks[i] >= 2:
            try:
                alpha_T[i] = solve_truncated_alpha(hill_h[i], math.exp(log_r[i]))
            except (DegenerateFitError, NumericError):
                pass
    return FitTrace(
        k=ks, threshold=np.exp(ld[ks]), **cols, mle_converged=conv, tau_index_wls=iw_all,
        tau_index_mle=im_all, hill=hill_h, alpha_T=alpha_T, n=n, tau_grid=taus, weights=weights,
    )


# ---------------------------------------------------------------------------
# Tail probabilities and quantiles
# ---------------------------------------------------------------------------


def _threshold(s: Sample, k: int) -> float:
    _check_rank(s, k)
    return float(s.descending()[k])


def tail_prob(fit: FitResult, s: Sample, k: int, z: float) -> float:
    """Estimated ``P(X > z)`` for ``z`` above the threshold ``X_{n-k,n}``."""
    t = _threshold(s, k)
    if not z >= t:
        raise DomainError(f"z={z} is below the threshold {t}")
    p = fit.params
    lx = math.log(z / t)
    temper = p.lam * math.expm1(p.tau * lx) if p.lam > 0 else 0.0
    return (k + 1.0) / (s.n + 1.0) * math.exp(-p.alpha * lx - temper)


def quantile_from_params(t, k, n, prob, alpha, lam, tau):
    """Vectorised solution ``z`` of the tail-probability equation."""
    prob = np.asarray(prob, dtype=float)
    level = np.log((np.asarray(k, dtype=float) + 1.0) / ((n + 1.0) * prob))
    if np.any(level < -1e-12):
        raise DomainError("prob must not exceed (k+1)/(n+1)")
    u = solve_log_excess(np.maximum(level, 0.0), alpha, lam, tau)
    return np.asarray(t) * np.exp(u)


def extreme_quantile(fit: FitResult, s: Sample, k: int, prob: float) -> float:
    """Return level ``z`` with estimated exceedance probability ``prob``."""
    t = _threshold(s, k)
    if not 0 < prob <= (k + 1.0) / (s.n + 1.0):
        raise DomainError(f"prob must lie in (0, (k+1)/(n+1)], got {prob}")
    p = fit.params
    return float(quantile_from_params(t, k, s.n, prob, p.alpha, p.lam, p.tau))


def weissman_quantile(s: Sample, k: int, prob: float) -> float:
    """Pareto extrapolation ``X_{n-k,n} (k/(n p))**H_{k,n}``."""
    t = _threshold(s, k)
    if not 0 < prob <= k / s.n:
        raise DomainError(f"prob must lie in (0, k/n], got {prob}")
    h = hill(s, k)
    if h <= 0:
        raise DegenerateFitError("Hill statistic is zero; Weissman estimator undefined")
    return t * (k / (s.n * prob)) ** h


def _truncated_rhs(alpha: float, log_r: float) -> float:
    # 1/a + R^a log R / (1 - R^a) = (1/a) (1 - s / expm1(s)),  s = -a log R
    x = -alpha * log_r
    if x > 1.0:
        e = math.exp(-x)
        return (1.0 - x * e / -math.expm1(-x)) / alpha
    return (1.0 - x / math.expm1(x)) / alpha


def solve_truncated_alpha(H: float, R: float) -> float:
    """Root in ``alpha`` of ``H = 1/alpha + R**alpha log R / (1 - R**alpha)``.

    The right side decreases from ``-log(R)/2`` (alpha -> 0) to 0, so a root
    exists iff ``0 < H < -log(R)/2``.
    """
    if not 0 < R < 1:
        raise DegenerateFitError(f"R must lie in (0, 1), got {R}")
    if not H > 0:
        raise DegenerateFitError("Hill statistic must be positive")
    log_r = math.log(R)
    if H >= -log_r / 2:
        raise NumericError(f"no root: H={H} >= -log(R)/2={-log_r / 2}")
    hi = 2.0 / H  # rhs(a) < 1/a, so rhs(hi) < H/2
    lo = hi
    for _ in range(2000):
        lo *= 0.5
        if _truncated_rhs(lo, log_r) > H:
            break
    else:
        raise NumericError(f"could not bracket truncated-Pareto root for H={H}, R={R}")
    return optimize.brentq(lambda a: _truncated_rhs(a, log_r) - H, lo, hi, xtol=1e-300, rtol=4 * np.finfo(float).eps,
                           maxiter=500)


def truncated_alpha(s: Sample, k: int) -> float:
    """Truncated-Pareto tail index with ``R = X_{n-k,n} / X_{n,n}``."""
    _check_rank(s, k)
    if k < 2:
        raise DomainError("truncated_alpha needs k >= 2")
    xd = s.descending()
    R = float(xd[k] / xd[0])
    if R >= 1:
        raise DegenerateFitError("tied maximum: X_{n-k,n} == X_{n,n}")
    return solve_truncated_alpha(hill(s, k), R)


def truncated_quantile(s: Sample, k: int, prob: float, alpha: Optional[float] = None) -> float:
    """Quantile of the truncated Pareto tail with endpoint ``T = X_{n,n}``.

    Solves ``(k/n) ((z/t)**-alpha - R**alpha) / (1 - R**alpha) = prob``; the
    estimate never exceeds the sample maximum.
    """
    t = _threshold(s, k)
    if not 0 < prob <= k / s.n:
        raise DomainError(f"prob must lie in (0, k/n], got {prob}")
    a = truncated_alpha(s, k) if alpha is None else alpha
    R_a = (t / s.descending()[0]) ** a
    return t * (R_a + s.n * prob / k * (1.0 - R_a)) ** (-1.0 / a)
