"""Calibration of the envelope constants (C, a_L, a_U) on a kernel grid."""

from __future__ import annotations

import math

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_array, check_is_fitted, check_X_y

from .bernstein import evaluate, phi_inverse
from .errors import DomainError

RATE_MIN, RATE_MAX = 1e-3, 1e3
FORMS = ("main", "classical", "example_small", "example_large")
# regime tie-break width on t*phi(r^-2) - 1
TIE = 1e-9


def envelope_terms(spec, t, r, d, form="main"):
    """Building blocks of an envelope at the points (t, r).

    Returns a dict of arrays: ``A`` (jump term, NaN at r=0), ``B`` (on-diagonal
    height), ``q`` (exponent scale), ``near`` and ``off`` masks (points on the
    regime boundary are in both).
    """
    t = np.asarray(t, dtype=float)
    r = np.asarray(r, dtype=float)
    if np.any(t <= 0) or np.any(r < 0):
        raise DomainError("need t > 0 and r >= 0")
    pos = r > 0
    rs = np.where(pos, r, 1.0)
    lam_t = phi_inverse(spec, 1.0 / t)
    q = r**2 * lam_t
    level = np.where(pos, t * spec.phi(rs**-2.0), np.inf)
    near = level >= 1.0 - TIE
    off = pos & (level <= 1.0 + TIE)
    if form in ("main", "classical"):
        B = lam_t ** (d / 2.0)
        ev = evaluate(spec, rs**-2.0)
        jump = ev.H if form == "main" else ev.phi
        A = np.where(pos, t * rs ** (-d) * jump, np.nan)
    elif form == "example_small":
        # explicit small-scale shape for phi(lam) = lam/log(1+lam^(beta/2))
        lt = np.log(1.0 / t)
        lr = np.log(1.0 / rs)
        B = t ** (-d / 2.0) * lt ** (-d / 2.0)
        A = np.where(pos, t / (rs ** (d + 2) * lr**2), np.nan)
        q = np.where(pos, r**2 / t * lt, 0.0)
    elif form == "example_large":
        beta = spec.beta
        B = t ** (-d / (2.0 - beta))
        A = np.where(pos, t * rs ** (-(d + 2.0 - beta)), np.nan)
    else:
        raise DomainError(f"unknown envelope form {form!r}")
    return {"A": A, "B": B, "q": q, "near": near, "off": off}


def bounds_from_terms(terms, C, a_L, a_U, form="main"):
    """(lower, upper) envelopes; boundary points take the looser of both branches."""
    A, B, q = terms["A"], terms["B"], terms["q"]
    near, off = terms["near"], terms["off"]
    lower = np.full(B.shape, np.inf)
    upper = np.full(B.shape, -np.inf)
    if form in ("classical", "example_large"):
        m = np.where(np.isnan(A), B, np.minimum(B, np.where(np.isnan(A), np.inf, A)))
        return m / C, m * C
    lower = np.where(near, B / C, lower)
    upper = np.where(near, B * C, upper)
    with np.errstate(invalid="ignore", over="ignore"):
        up_off = C * np.fmax(A, B * np.exp(-a_U * q))
        lo_off = np.fmax(A, B * np.exp(-a_L * q)) / C
    # on a tie the point must satisfy both branches: take the tighter pair
    lower = np.where(off, np.where(near, np.maximum(lower, lo_off), lo_off), lower)
    upper = np.where(off, np.where(near, np.minimum(upper, up_off), up_off), upper)
    return lower, upper


class EnvelopeCalibrator(BaseEstimator):
    """Fit the tightest envelope constants to kernel values on a grid.

    ``fit(X, p)`` takes ``X`` with columns (t, r) and kernel values ``p``.
    The rate ``a_U`` comes first, from deep off-diagonal points
    (r^2 phi^-1(1/t) >= ``deep``) where the jump term alone cannot explain p:
    it is the largest rate keeping B e^{-a_U q} >= p there.  ``C`` is then the
    smallest prefactor making lower <= p <= upper at every point (with a_L at
    its ceiling), and ``a_L`` the smallest rate that keeps the lower bound
    with that C.  Rates are clipped to [1e-3, 1e3].

    Attributes
    ----------
    C_, a_L_, a_U_ : float
    slopes_ : dict
        Least-squares slopes in log t and log r of log(p / dominant term),
        with one intercept per dominant envelope term (``branch_``), so a
        constant offset between branches does not read as a trend.  Points
        where the exponential term dominates are left out: there the ratio
        moves with the gap between a_U and a_L.
    worst_index_ : int
        Point whose bound is tightest.
    """

    def __init__(self, spec=None, d=1, form="main", deep=10.0, default_rate=1.0):
        self.spec = spec
        self.d = d
        self.form = form
        self.deep = deep
        self.default_rate = default_rate

    def _terms(self, X):
        return envelope_terms(self.spec, X[:, 0], X[:, 1], self.d, self.form)

    def fit(self, X, y):
        X, y = check_X_y(X, y, dtype=float)
        if X.shape[1] != 2:
            raise ValueError("X must have two columns (t, r)")
        if np.any(y <= 0):
            raise ValueError("kernel values must be positive")
        if self.form not in FORMS:
            raise ValueError(f"form must be one of {FORMS}")
        p = y
        terms = self._terms(X)
        A, B, q, near, off = terms["A"], terms["B"], terms["q"], terms["near"], terms["off"]
        if self.form in ("classical", "example_large"):
            m = np.where(np.isnan(A), B, np.minimum(B, np.where(np.isnan(A), np.inf, A)))
            C = float(max(1.0, np.max(p / m), np.max(m / p)))
            a_L = a_U = math.nan
        else:
            deep = off & (q >= self.deep) & (p > np.nan_to_num(A, nan=0.0))
            if deep.any():
                a_U = float(np.min(np.log(B[deep] / p[deep]) / q[deep]))
            else:
                a_U = self.default_rate
            a_U = float(np.clip(a_U, RATE_MIN, RATE_MAX))
            cands = [1.0]
            if near.any():
                cands += [np.max(p[near] / B[near]), np.max(B[near] / p[near])]
            if off.any():
                with np.errstate(over="ignore"):
                    up = np.fmax(A[off], B[off] * np.exp(-a_U * q[off]))
                    lo = np.fmax(A[off], B[off] * np.exp(-RATE_MAX * q[off]))
                cands += [np.max(p[off] / up), np.max(lo / p[off])]
            C = float(max(cands))
            if off.any():
                need = np.log(B[off] / (C * p[off])) / q[off]
                a_L = float(np.clip(np.max(need), RATE_MIN, RATE_MAX))
            else:
                a_L = self.default_rate
        self.C_, self.a_L_, self.a_U_ = C, a_L, a_U
        lower, upper = bounds_from_terms(terms, C, a_L, a_U, self.form)
        # tiny slack for the exact-equality points produced by the fit
        self.lower_, self.upper_ = lower * (1 - 1e-12), upper * (1 + 1e-12)
        self.holds_ = bool(np.all(self.lower_ <= p) and np.all(p <= self.upper_))
        t, r = X[:, 0], X[:, 1]
        keep = r > 0
        self.branch_ = br = _branches(terms, a_U, self.form)
        head = np.where(br == 1, np.nan_to_num(A, nan=1.0), B)
        res = np.log(p / head)
        # the exponential branch is governed by the rates, gated separately
        keep &= br != 2
        self.slopes_ = _slopes(t[keep], r[keep], res[keep], br[keep])
        tight = np.maximum(p / upper, lower / p)
        self.worst_index_ = int(np.argmax(tight))
        self.n_features_in_ = 2
        return self

    def predict(self, X):
        """Envelope (lower, upper) at new points, shape (n, 2)."""
        check_is_fitted(self, "C_")
        X = check_array(X, dtype=float)
        lower, upper = bounds_from_terms(self._terms(X), self.C_, self.a_L_, self.a_U_, self.form)
        return np.column_stack([lower, upper])

    def score(self, X, y):
        """Fraction of points inside the fitted envelope."""
        env = self.predict(X)
        y = np.asarray(y, dtype=float)
        return float(np.mean((env[:, 0] * (1 - 1e-12) <= y) & (y <= env[:, 1] * (1 + 1e-12))))


def _branches(terms, a_U, form):
    """Dominant envelope term per point: 0 head, 1 jump, 2 exponential."""
    A = np.nan_to_num(terms["A"], nan=-np.inf)
    B = terms["B"]
    if form in ("classical", "example_large"):
        return np.where(A < B, 1, 0)
    with np.errstate(over="ignore"):
        tail = B * np.exp(-a_U * terms["q"])
    off = np.where(A >= tail, 1, 2)
    return np.where(terms["off"] & ~terms["near"], off, 0)


def _slopes(t, r, y, branch=None):
    if branch is None:
        branch = np.zeros(t.shape, dtype=int)
    cols = [(branch == b).astype(float) for b in np.unique(branch)]
    names = []
    for name, v in (("slope_t", np.log(t)), ("slope_r", np.log(r))):
        if v.size and np.ptp(v) > 0:
            cols.append(v)
            names.append(name)
    out = {"slope_t": 0.0, "slope_r": 0.0}
    if y.size <= len(cols):
        return out
    coef, *_ = np.linalg.lstsq(np.column_stack(cols), y, rcond=None)
    for name, c in zip(names, coef[len(cols) - len(names):]):
        out[name] = float(c)
    return out
