"""Bernstein-function toolkit: derivatives, H, inverse, scaling, tails."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DiagnosticError, DomainError
from .exponents import LaplaceExponentSpec

__all__ = [
    "BernsteinEval",
    "ScalingReport",
    "RatioStats",
    "ComparabilityReport",
    "LevyTailBounds",
    "evaluate",
    "H",
    "phi_inverse",
    "scaling_indices",
    "comparability",
    "levy_tail",
    "fit_M",
]


@dataclass(frozen=True)
class BernsteinEval:
    """phi and its derivatives at ``lam`` (scalars or arrays of one shape)."""

    lam: np.ndarray
    phi: np.ndarray
    phi_prime: np.ndarray
    phi_second: np.ndarray
    H: np.ndarray


def _richardson(f, lam):
    """First and second central differences with one Richardson step."""
    h = lam * 1e-4

    def d1(h):
        return (f(lam + h) - f(lam - h)) / (2 * h)

    def d2(h):
        return (f(lam + h) - 2 * f(lam) + f(lam - h)) / h**2

    return (4 * d1(h / 2) - d1(h)) / 3, (4 * d2(h / 2) - d2(h)) / 3


def evaluate(spec: LaplaceExponentSpec, lam) -> BernsteinEval:
    """Evaluate phi, phi', phi'' and H = phi - lam*phi' at ``lam``.

    Catalog families use closed forms.  User tables use Richardson-extrapolated
    central differences with step ``lam * 1e-4``; the stencil is pulled inside
    the table near its end points.
    """
    lam_arr = np.asarray(lam, dtype=float)
    closed = spec.derivatives(lam_arr)
    if closed is not None:
        p, d1, d2, h = closed
    else:
        lam_arr = spec._check(lam_arr)
        lo, hi = spec.span
        # shift the stencil centre only for the difference quotients
        p = spec.phi(lam_arr)
        centre = np.clip(lam_arr, lo * (1 + 2.1e-4), hi * (1 - 2.1e-4))
        d1, d2 = _richardson(spec.phi, centre)
        d2 = np.minimum(d2, 0.0)
        h = np.maximum(p - lam_arr * d1, 0.0)
    return BernsteinEval(lam_arr, p, d1, d2, h)


def H(spec, lam):
    return evaluate(spec, lam).H


def phi_inverse(spec: LaplaceExponentSpec, y):
    """Solve phi(lam) = y by bracketing from lam=1 and bisection.

    Vectorized over ``y``.  Relative accuracy in phi is about 1e-14.
    """
    y_arr = np.atleast_1d(np.asarray(y, dtype=float))
    if np.any(~(y_arr > 0)) or np.any(~np.isfinite(y_arr)):
        raise DomainError("phi_inverse needs finite y > 0")
    lo_span, hi_span = spec.span
    lo = np.ones_like(y_arr) if lo_span == 0 else np.full_like(y_arr, math.sqrt(lo_span * hi_span))
    hi = lo.copy()
    if spec.family == "user_table":
        p_lo, p_hi = spec.phi(lo_span), spec.phi(hi_span)
        if np.any(y_arr < p_lo) or np.any(y_arr > p_hi):
            raise DomainError(f"y outside the range [{p_lo:g}, {p_hi:g}] of the table")
        lo = np.full_like(y_arr, lo_span)
        hi = np.full_like(y_arr, hi_span)
    else:
        for _ in range(2100):
            up = spec.phi(hi) < y_arr
            if not up.any():
                break
            hi = np.where(up, hi * 2.0, hi)
            if np.any(hi > 1e300):
                raise DomainError("y beyond the range of phi representable in double precision")
        lo = hi.copy()
        for _ in range(2100):
            down = spec.phi(lo) > y_arr
            if not down.any():
                break
            lo = np.where(down, lo / 2.0, lo)
            if np.any(lo < 1e-300):
                raise DomainError("y below the range of phi representable in double precision")
    for _ in range(200):
        mid = np.sqrt(lo) * np.sqrt(hi) if lo_span == 0 else 0.5 * (lo + hi)
        below = spec.phi(mid) < y_arr
        lo = np.where(below, mid, lo)
        hi = np.where(below, hi, mid)
        if np.all(hi - lo <= 4e-16 * hi):
            break
    pl, ph = spec.phi(lo), spec.phi(hi)
    span = ph - pl
    frac = np.where(span > 0, (y_arr - pl) / np.where(span > 0, span, 1.0), 0.0)
    out = lo + frac * (hi - lo)
    return out if np.ndim(y) else float(out[0])


# -- scaling ---------------------------------------------------------------------


@dataclass(frozen=True)
class ScalingReport:
    """Fitted lower and upper scaling of phi or H on a window.

    ``gamma`` and ``delta`` are the pooled least-squares exponent of
    log(f(lam x)/f(lam)) against log x; ``C_L``/``C_U`` are the extremal
    prefactors that make the inequalities hold on every grid pair.  The local
    extremes of the exponent are kept for diagnostics.
    """

    target: str
    gamma: float
    C_L: float
    lambda_L: float
    delta: float
    C_U: float
    lambda_U: float
    window: tuple
    residual: float
    local_min: float
    local_max: float

    def to_dict(self):
        return {
            "target": self.target,
            "gamma": self.gamma,
            "C_L": self.C_L,
            "lambda_L": self.lambda_L,
            "delta": self.delta,
            "C_U": self.C_U,
            "lambda_U": self.lambda_U,
            "window": list(self.window),
            "residual": self.residual,
            "local_min": self.local_min,
            "local_max": self.local_max,
        }


def scaling_indices(spec, target="phi", window=(1.0, 1e6), n_lambda=80, max_power=10) -> ScalingReport:
    """Fit the scaling conditions (L) and (U) for ``target`` in {phi, H}."""
    if target not in ("phi", "H"):
        raise DomainError("target must be 'phi' or 'H'")
    lo, hi = map(float, window)
    if not (0 < lo < hi) or hi / lo < 1e3:
        raise DomainError("window must be positive with lam_max/lam_min >= 1e3")

    def f(x):
        ev = evaluate(spec, x)
        return ev.phi if target == "phi" else ev.H

    grid = np.geomspace(lo, hi, 4 * n_lambda)
    vals = f(grid)
    if np.any(~(vals > 0)) or np.any(np.diff(vals) <= 0):
        raise DiagnosticError(f"{target} is not positive and strictly increasing on the window")
    log_x, log_r = [], []
    for j in range(1, max_power + 1):
        x = 2.0**j
        if lo * x > hi:
            break
        lam = np.geomspace(lo, hi / x, n_lambda)
        r = f(lam * x) / f(lam)
        log_x.append(np.full(lam.shape, math.log(x)))
        log_r.append(np.log(r))
    lx = np.concatenate(log_x)
    lr = np.concatenate(log_r)
    slope = float(lx @ lr / (lx @ lx))
    resid = float(np.max(np.abs(lr - slope * lx)))
    local = lr / lx
    c_l = float(np.exp(np.min(lr - slope * lx)))
    c_u = float(np.exp(np.max(lr - slope * lx)))
    lam_l, lam_u = spec.lambda_thresholds
    if spec.family == "user_table":
        lam_l = lam_u = lo
    return ScalingReport(
        target, slope, c_l, lam_l, slope, c_u, lam_u, (lo, hi), resid, float(local.min()), float(local.max())
    )


# -- comparability ------------------------------------------------------------------


@dataclass(frozen=True)
class RatioStats:
    inf: float
    sup: float
    spread: float
    comparable: bool
    trend: float

    def to_dict(self):
        return {
            "inf": self.inf,
            "sup": self.sup,
            "spread": self.spread,
            "comparable": self.comparable,
            "trend": self.trend,
        }


@dataclass(frozen=True)
class ComparabilityReport:
    window: tuple
    lam: np.ndarray = field(repr=False)
    ratios: dict = field(repr=False)
    stats: dict

    def to_dict(self):
        return {"window": list(self.window), **{k: v.to_dict() for k, v in self.stats.items()}}


# reporting cutoffs: a ratio is "comparable" when its spread is at most 50 and
# its log-log drift is at most 0.05 per e-fold of lam (both arbitrary)
COMPARABLE_SPREAD = 50.0
COMPARABLE_TREND = 0.05


def comparability(spec, window, n=240) -> ComparabilityReport:
    """Ratios H/phi, lam phi'/phi and H/(lam^2 (-phi'')) on a geometric grid.

    ``trend`` is the least-squares slope of log(ratio) against log(lam); a
    ratio that tends to 0 or infinity shows up as a clear nonzero trend, so
    the flag needs both a small spread and a small trend.
    """
    lo, hi = map(float, window)
    if not 0 < lo < hi:
        raise DomainError("window must be positive")
    lam = np.geomspace(lo, hi, max(int(n), 200))
    ev = evaluate(spec, lam)
    with np.errstate(divide="ignore", invalid="ignore"):
        ratios = {
            "H/phi": ev.H / ev.phi,
            "lam*phi'/phi": lam * ev.phi_prime / ev.phi,
            "H/(lam^2*(-phi''))": ev.H / (lam**2 * -ev.phi_second),
        }
    stats = {}
    ll = np.log(lam)
    for name, r in ratios.items():
        ok = np.isfinite(r) & (r > 0)
        if not ok.all():
            stats[name] = RatioStats(math.nan, math.nan, math.nan, False, math.nan)
            continue
        inf, sup = float(r.min()), float(r.max())
        trend = float(np.polyfit(ll, np.log(r), 1)[0])
        flag = sup / inf <= COMPARABLE_SPREAD and abs(trend) <= COMPARABLE_TREND
        stats[name] = RatioStats(inf, sup, sup / inf, flag, trend)
    return ComparabilityReport((lo, hi), lam, ratios, stats)


# -- Levy tail -----------------------------------------------------------------------


@dataclass(frozen=True)
class LevyTailBounds:
    r: float
    mu_tail: float | None
    upper_bound: float
    lower_bound: float | None
    M: float | None


def default_H_window(spec):
    lam_u = spec.lambda_thresholds[1]
    base = max(lam_u, 1e-4)
    if spec.family == "user_table":
        return spec.span
    return base, base * 1e8


def fit_M(spec, window=None):
    """M in (0,1) with 2e C_U (2-delta)^-1 M^(2-delta) = 1/2 from the H scaling fit.

    Returns None when H does not satisfy an upper scaling with delta < 2.
    """
    if spec.family == "pure_drift":
        return None
    rep = scaling_indices(spec, "H", window or default_H_window(spec))
    d = rep.delta
    if not d < 2.0 - 1e-6:
        return None
    m = ((2.0 - d) / (4.0 * math.e * rep.C_U)) ** (1.0 / (2.0 - d))
    return min(m, 0.999)


def levy_tail(spec, r, M=None) -> LevyTailBounds:
    """Closed-form mu(r, inf) (stable only) and the H-based sandwich.

    The upper bound 2e H(1/r) always holds.  The lower bound (M^2/2) H(1/r)
    needs an upper scaling of H with delta < 2 and r < M/lambda_U.
    """
    r = float(r)
    if not r > 0:
        raise DomainError("r must be > 0")
    h = float(evaluate(spec, 1.0 / r).H)
    tail = spec.known_levy_tail
    mu = float(tail(r)) if tail is not None else None
    if M is None:
        M = fit_M(spec)
    lower = None
    if M is not None:
        lam_u = spec.lambda_thresholds[1]
        if lam_u == 0 or r < M / lam_u:
            lower = 0.5 * M * M * h
    return LevyTailBounds(r, mu, 2.0 * math.e * h, lower, M)
