"""Laplace exponents of subordinators: the catalog and user tables.

Every family is evaluated in double precision (value, first and second
derivative, and the function H = phi - lambda*phi').  Catalog families also
carry an arbitrary-precision version of phi, which the Laplace inversion in
:mod:`sbmlab.subordinator` needs.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from fractions import Fraction

import gmpy2
import numpy as np
from scipy.interpolate import CubicSpline

from .errors import ConfigError, DomainError

FAMILIES = (
    "stable",
    "geometric_stable",
    "conjugate_geometric",
    "conjugate_gamma",
    "pure_drift",
    "user_table",
)

# below this argument the small-x series are used (cancellation in closed forms)
_SERIES_CUTOFF = 0.05


def _gregory(n):
    # coefficients of x/log(1+x) = sum G_k x^k
    g = [Fraction(1)]
    for k in range(1, n + 1):
        g.append(-sum(Fraction((-1) ** j, j + 1) * g[k - j] for j in range(1, k + 1)))
    return [float(c) for c in g]


_G = np.array(_gregory(16))


def _log1p_minus(y):
    """log1p(y) - y, accurate for small y."""
    y = np.asarray(y, dtype=float)
    out = np.empty_like(y)
    small = y < _SERIES_CUTOFF
    ys = y[small]
    if ys.size:
        out[small] = np.sum([(-1) ** (n + 1) * ys**n / n for n in range(2, 22)], axis=0)
    big = ~small
    out[big] = np.log1p(y[big]) - y[big]
    return out


def _log1p_minus_frac(y):
    """log1p(y) - y/(1+y) = sum_{n>=2} (-1)^n (n-1)/n y^n, accurate for small y."""
    y = np.asarray(y, dtype=float)
    out = np.empty_like(y)
    small = y < _SERIES_CUTOFF
    ys = y[small]
    if ys.size:
        out[small] = np.sum([(-1) ** n * (n - 1) / n * ys**n for n in range(2, 22)], axis=0)
    big = ~small
    out[big] = np.log1p(y[big]) - y[big] / (1.0 + y[big])
    return out


@dataclass(frozen=True)
class LaplaceExponentSpec:
    """One subordinator, identified by its Laplace exponent.

    Parameters
    ----------
    family : str
        One of ``FAMILIES``.
    alpha : float, optional
        Stable index in (0, 2); phi = lambda**(alpha/2).
    beta : float, optional
        Geometric-stable index in (0, 2] or conjugate-geometric index in (0, 2).
    drift_b : float
        Drift coefficient.  For ``pure_drift`` this is the only parameter.
    points : tuple of (lambda, phi) pairs, optional
        Table for ``user_table``.
    """

    family: str
    alpha: float | None = None
    beta: float | None = None
    drift_b: float = 0.0
    points: tuple | None = None
    _spline: object = field(default=None, init=False, repr=False, compare=False, hash=False)

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ConfigError(f"unknown family {self.family!r}; expected one of {FAMILIES}")
        fam = self.family
        if fam == "stable":
            if self.alpha is None or not 0.0 < self.alpha < 2.0:
                raise ConfigError("alpha out of (0,2)")
        elif self.alpha is not None:
            raise ConfigError(f"alpha is not a parameter of {fam}")
        if fam == "geometric_stable":
            if self.beta is None or not 0.0 < self.beta <= 2.0:
                raise ConfigError("beta out of (0,2]")
        elif fam == "conjugate_geometric":
            if self.beta is None or not 0.0 < self.beta < 2.0:
                raise ConfigError("beta out of (0,2)")
        elif self.beta is not None:
            raise ConfigError(f"beta is not a parameter of {fam}")
        if not (math.isfinite(self.drift_b) and self.drift_b >= 0.0):
            raise ConfigError("drift_b must be a finite number >= 0")
        if fam == "pure_drift" and self.drift_b <= 0.0:
            raise ConfigError("pure_drift needs drift_b > 0")
        if fam == "user_table":
            if self.points is None:
                raise ConfigError("user_table needs points")
            object.__setattr__(self, "points", tuple((float(a), float(b)) for a, b in self.points))
            object.__setattr__(self, "_spline", _build_table(self.points))
        elif self.points is not None:
            raise ConfigError(f"points given for family {fam}")

    # -- descriptive properties -------------------------------------------------
    @property
    def b(self):
        return self.beta / 2.0

    @property
    def a(self):
        return self.alpha / 2.0

    @property
    def known_levy_tail(self):
        """Closed-form r -> mu(r, inf) when available (stable family only)."""
        if self.family != "stable":
            return None
        c = 1.0 / math.gamma(1.0 - self.a)
        a = self.a
        return lambda r: c * np.asarray(r, dtype=float) ** (-a)

    @property
    def span(self):
        """Interval of lambda on which phi can be evaluated."""
        if self.family == "user_table":
            return self.points[0][0], self.points[-1][0]
        return 0.0, math.inf

    @property
    def lambda_thresholds(self):
        """(lambda_L, lambda_U) used for the scaling conditions."""
        if self.family == "conjugate_gamma":
            return 0.0, 2.0
        if self.family == "user_table":
            return self.points[0][0], self.points[0][0]
        return 0.0, 0.0

    @property
    def hypotheses(self):
        """Which scaling conditions hold, by family (analytic facts)."""
        fam = self.family
        h = {"phi_L": True, "phi_U_lt1": False, "H_L": True, "H_U_lt2": True, "classical": False}
        if fam == "stable":
            h["phi_U_lt1"] = True
            h["classical"] = True
        elif fam == "geometric_stable":
            h["phi_L"] = False
            h["H_L"] = False
        elif fam == "pure_drift":
            h["H_L"] = False
            h["H_U_lt2"] = False
        elif fam == "user_table":
            h = {k: None for k in h}
        return h

    def to_dict(self):
        out = {"family": self.family}
        if self.alpha is not None:
            out["alpha"] = self.alpha
        if self.beta is not None:
            out["beta"] = self.beta
        if self.drift_b or self.family == "pure_drift":
            out["drift_b"] = self.drift_b
        if self.points is not None:
            out["points"] = [list(p) for p in self.points]
        return out

    def label(self):
        fam = self.family
        if fam == "stable":
            return f"stable(alpha={self.alpha:g})"
        if fam in ("geometric_stable", "conjugate_geometric"):
            return f"{fam}(beta={self.beta:g})"
        if fam == "pure_drift":
            return f"pure_drift(b={self.drift_b:g})"
        return fam

    # -- evaluation ---------------------------------------------------------------
    def _check(self, lam):
        lam = np.asarray(lam, dtype=float)
        if np.any(~(lam > 0)):
            raise DomainError("lambda must be > 0")
        if self.family == "user_table":
            lo, hi = self.span
            if np.any(lam < lo * (1 - 1e-12)) or np.any(lam > hi * (1 + 1e-12)):
                raise DomainError(f"lambda outside the table span [{lo:g}, {hi:g}]")
        return lam

    def phi(self, lam):
        """phi(lambda), vectorized."""
        lam = self._check(lam)
        return self._phi(lam) + self.drift_b * lam

    def _phi(self, lam):
        fam = self.family
        if fam == "stable":
            return lam**self.a
        if fam == "geometric_stable":
            return np.log1p(lam**self.b)
        if fam == "conjugate_geometric":
            return lam / np.log1p(lam**self.b)
        if fam == "conjugate_gamma":
            out = np.empty_like(lam)
            s = lam < _SERIES_CUTOFF
            out[s] = np.polyval(_G[:0:-1], lam[s]) * lam[s]
            x = lam[~s]
            out[~s] = x / np.log1p(x) - 1.0
            return out
        if fam == "pure_drift":
            return np.zeros_like(lam)
        return _table_phi(self._spline, lam)

    def derivatives(self, lam):
        """Return (phi, phi', phi'', H) in closed form; None for user tables."""
        lam = self._check(lam)
        fam = self.family
        if fam == "user_table":
            return None
        if fam == "stable":
            a = self.a
            p = lam**a
            d1 = a * lam ** (a - 1.0)
            d2 = a * (a - 1.0) * lam ** (a - 2.0)
            h = (1.0 - a) * p
        elif fam == "geometric_stable":
            b = self.b
            y = lam**b
            p = np.log1p(y)
            d1 = b * y / (lam * (1.0 + y))
            d2 = b * y * ((b - 1.0) - y) / (lam**2 * (1.0 + y) ** 2)
            h = (1.0 - b) * y / (1.0 + y) + _log1p_minus_frac(y)
        elif fam == "conjugate_geometric":
            b = self.b
            y = lam**b
            L = np.log1p(y)
            u = b * y / ((1.0 + y) * L)
            p = lam / L
            d1 = (1.0 - u) / L
            d2 = -(b**2) * y * _log1p_minus(y) / (lam * (1.0 + y) ** 2 * L**3) - (1.0 - u) * b * y / (
                lam * (1.0 + y) * L**2
            )
            h = p * u
        elif fam == "conjugate_gamma":
            p = np.empty_like(lam)
            d1 = np.empty_like(lam)
            d2 = np.empty_like(lam)
            h = np.empty_like(lam)
            s = lam < _SERIES_CUTOFF
            x = lam[s]
            n = np.arange(1, len(_G))
            pw = x[:, None] ** n[None, :]
            p[s] = pw @ _G[1:]
            d1[s] = (pw / x[:, None]) @ (n * _G[1:])
            d2[s] = (pw / x[:, None] ** 2) @ (n * (n - 1) * _G[1:])
            h[s] = pw @ ((1 - n) * _G[1:])
            x = lam[~s]
            L = np.log1p(x)
            p[~s] = x / L - 1.0
            d1[~s] = 1.0 / L - x / ((1.0 + x) * L**2)
            d2[~s] = -1.0 / ((1.0 + x) * L**2) - (L - 2.0 * x) / ((1.0 + x) ** 2 * L**3)
            h[~s] = x**2 / ((1.0 + x) * L**2) - 1.0
        else:  # pure drift
            p = np.zeros_like(lam)
            d1 = np.zeros_like(lam)
            d2 = np.zeros_like(lam)
            h = np.zeros_like(lam)
        b0 = self.drift_b
        return p + b0 * lam, d1 + b0, d2, h

    def phi_mp_factory(self):
        """Return a fast mpfr -> mpfr function computing phi.

        Constants are converted once; the caller sets the gmpy2 context.
        """
        fam = self.family
        drift = gmpy2.mpfr(self.drift_b) if self.drift_b else None
        if fam == "stable":
            if self.alpha == 1.0:
                base = gmpy2.sqrt
            else:
                a = gmpy2.mpfr(self.alpha) / 2

                def base(lam):
                    return lam**a

        elif fam == "geometric_stable":
            b = gmpy2.mpfr(self.beta) / 2
            if self.beta == 2.0:
                base = gmpy2.log1p
            elif self.beta == 1.0:

                def base(lam):
                    return gmpy2.log1p(gmpy2.sqrt(lam))

            else:

                def base(lam):
                    return gmpy2.log1p(lam**b)

        elif fam == "conjugate_geometric":
            b = gmpy2.mpfr(self.beta) / 2
            if self.beta == 1.0:

                def base(lam):
                    return lam / gmpy2.log1p(gmpy2.sqrt(lam))

            else:

                def base(lam):
                    return lam / gmpy2.log1p(lam**b)

        elif fam == "conjugate_gamma":

            def base(lam):
                return lam / gmpy2.log1p(lam) - 1

        elif fam == "pure_drift":
            zero = gmpy2.mpfr(0)

            def base(lam):
                return zero

        else:
            raise DomainError("user tables have no multiprecision phi")
        if drift is None:
            return base
        return lambda lam: base(lam) + drift * lam

    def phi_mp(self, lam):
        """phi at an mpfr argument, in the current gmpy2 context."""
        return self.phi_mp_factory()(lam)


# -- user tables -----------------------------------------------------------------


def _build_table(points):
    pts = np.asarray(points, dtype=float)
    if pts.ndim != 2 or pts.shape[1] != 2 or len(pts) < 4:
        raise ConfigError("user_table needs at least 4 [lambda, phi] pairs")
    lam, ph = pts[:, 0], pts[:, 1]
    if np.any(lam <= 0) or np.any(ph <= 0):
        raise ConfigError("user_table entries must be positive")
    if np.any(np.diff(lam) <= 0):
        raise ConfigError("user_table lambda values must be strictly increasing")
    if np.any(np.diff(ph) <= 0):
        raise ConfigError("user_table phi values must be strictly increasing")
    spl = CubicSpline(np.log(lam), np.log(ph), bc_type="natural")
    # concavity check of the interpolant: phi'' = phi/lam^2 (y'' + y'^2 - y')
    u = np.linspace(np.log(lam[0]), np.log(lam[-1]), 40 * len(lam))
    y1 = spl(u, 1)
    y2 = spl(u, 2)
    if np.any(y1 <= 0):
        raise ConfigError("user_table interpolant is not increasing")
    if np.any(y2 + y1**2 - y1 > 1e-9):
        raise ConfigError("user_table interpolant is not concave")
    return spl


def _table_phi(spl, lam):
    return np.exp(spl(np.log(lam)))


# -- loading -------------------------------------------------------------------------

_SPEC_KEYS = {"family", "alpha", "beta", "drift_b", "points"}


def spec_from_dict(data):
    """Build a spec from a JSON-like mapping, rejecting unknown keys."""
    if not isinstance(data, dict):
        raise ConfigError("spec must be a JSON object")
    unknown = set(data) - _SPEC_KEYS
    if unknown:
        raise ConfigError(f"unknown spec keys: {sorted(unknown)}")
    if "family" not in data:
        raise ConfigError("spec needs a 'family'")
    kw = {}
    for key in ("alpha", "beta", "drift_b"):
        if key in data:
            val = data[key]
            if isinstance(val, bool) or not isinstance(val, (int, float)):
                raise ConfigError(f"{key} must be a number")
            kw[key] = float(val)
    if "points" in data:
        pts = data["points"]
        if not isinstance(pts, list) or not all(isinstance(p, list) and len(p) == 2 for p in pts):
            raise ConfigError("points must be a list of [lambda, phi] pairs")
        kw["points"] = tuple(tuple(p) for p in pts)
    return LaplaceExponentSpec(family=data["family"], **kw)


def load_spec(path):
    with open(path, encoding="utf-8") as fh:
        try:
            data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}:{exc.lineno}: {exc.msg}") from exc
    return spec_from_dict(data)
