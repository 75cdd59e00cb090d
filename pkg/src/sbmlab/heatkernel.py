"""Heat kernel p(t, x) of subordinate Brownian motion, envelopes and checks.

Two independent estimators: radial Fourier inversion of exp(-t phi(|xi|^2))
(d in {1, 2, 3}) and subordination of the Gaussian kernel against the law of
S_t (any d).  Envelopes are calibrated on grids by
:class:`sbmlab.calibration.EnvelopeCalibrator`.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np
from scipy import integrate, special, stats

from . import oscillatory
from .bernstein import evaluate, phi_inverse
from .calibration import RATE_MAX, RATE_MIN, TIE, EnvelopeCalibrator
from .errors import DomainError, NumericError, PreconditionError
from .reports import BoundCheckReport
from .subordinator import law, sample

KERNEL_COLUMNS = (
    "t", "r", "d", "regime", "p_fourier", "p_subord", "p_stderr",
    "env_lower", "env_upper", "ratio_lo", "ratio_hi",
)
# t phi(Xi^2) at the truncation point of the Fourier integral
CUTOFF = 46.0
MC_SAMPLES = 200_000
VARIANCE_GATE = 0.05


class VarianceWarning(UserWarning):
    """Monte Carlo standard error above 5% of the estimate."""


class KernelEstimate(NamedTuple):
    value: float
    stderr: float


# -- Fourier ------------------------------------------------------------------------

_KIND = {1: "cos", 2: "j0", 3: "sin"}


def _amplitude(spec, t):
    def amp(xi):
        lam = np.asarray(xi, dtype=float) ** 2
        out = np.ones_like(lam)
        pos = lam > 0
        if np.any(pos):
            out[pos] = np.exp(-t * spec.phi(lam[pos]))
        return out

    return amp


def p_fourier(spec, t, r, d, return_error=False):
    """p(t, r) by radial Fourier inversion, d in {1, 2, 3}.

    The integral is truncated at Xi with t phi(Xi^2) = 46.  With
    ``return_error`` the absolute error estimate is returned as well.
    """
    t, r = float(t), float(r)
    if d not in _KIND:
        raise DomainError("Fourier path only for d in {1, 2, 3}")
    if not t > 0 or r < 0:
        raise DomainError("need t > 0 and r >= 0")
    if spec.drift_b and spec.family != "pure_drift":
        raise PreconditionError("Fourier path needs zero drift or the pure_drift family")
    xi_max = math.sqrt(phi_inverse(spec, CUTOFF / t))
    xi_scale = math.sqrt(phi_inverse(spec, 1.0 / t))
    # decay of the amplitude at the cutoff: the neglected tail is only small
    # when exp(-t phi(xi^2)) falls faster than xi^-(d+1) there
    ev = evaluate(spec, xi_max**2)
    decay = 2.0 * t * xi_max**2 * float(ev.phi_prime)
    if decay <= d + 1:
        raise DomainError(
            f"exp(-t phi(xi^2)) decays like xi^-{decay:.3g} at the cutoff; Fourier integral not usable"
        )
    amp = _amplitude(spec, t)
    if r == 0:
        # xi^(d-1) weight at the origin; "cos" has weight 1 and "j0" weight xi
        if d == 3:
            val, err = integrate.quad(lambda x: x * x * amp(x), 0, xi_max, epsabs=0, epsrel=1e-12,
                                      limit=400, points=list(xi_scale * np.geomspace(1e-3, 1.0, 4)))
        else:
            val, err = oscillatory.radial_integral(amp, _KIND[d], 0.0, xi_max, xi_scale)
    else:
        val, err = oscillatory.radial_integral(amp, _KIND[d], r, xi_max, xi_scale)
    if d == 1:
        pre = 1.0 / math.pi
    elif d == 2:
        pre = 1.0 / (2.0 * math.pi)
    else:
        pre = 1.0 / (2.0 * math.pi**2 * (r if r > 0 else 1.0))
    val, err = pre * val, pre * err
    return (val, err) if return_error else val


# -- subordination -----------------------------------------------------------------


def gaussian_kernel(s, r, d):
    """(4 pi s)^(-d/2) exp(-r^2 / (4 s)), computed in logs."""
    s = np.asarray(s, dtype=float)
    return np.exp(-0.5 * d * np.log(4.0 * math.pi * s) - np.asarray(r, dtype=float) ** 2 / (4.0 * s))


def p_subordinate(spec, t, r, d, mode="quadrature", n=MC_SAMPLES, seed=0, stream=0):
    """p(t, r) = E[(4 pi S_t)^(-d/2) exp(-r^2/(4 S_t))].

    ``mode="quadrature"`` integrates against the tabulated density of S_t
    (``r`` may be an array); ``mode="monte_carlo"`` averages over ``n``
    inverse-transform samples and reports the standard error.
    """
    if d < 1 or int(d) != d:
        raise DomainError("d must be a positive integer")
    r_arr = np.atleast_1d(np.asarray(r, dtype=float))
    if np.any(r_arr < 0):
        raise DomainError("r must be >= 0")
    lw = law(spec, t)
    if lw.atom is not None:
        val = gaussian_kernel(lw.atom, r_arr, d)
        err = np.zeros_like(val)
    elif mode == "quadrature":
        s, f = lw.extended_density()
        ls = np.log(s)
        # combine in logs: (4 pi s)^(-d/2) overflows where f underflows
        with np.errstate(divide="ignore"):
            lw_s = np.log(f) + ls - 0.5 * d * np.log(4.0 * math.pi * s)
        expo = lw_s[None, :] - r_arr[:, None] ** 2 / (4.0 * s[None, :])
        val = integrate.trapezoid(np.exp(expo), ls, axis=1)
        err = np.zeros_like(val)
    elif mode == "monte_carlo":
        xs = sample(lw, n, seed, stream)
        g = gaussian_kernel(xs[None, :], r_arr[:, None], d)
        val = g.mean(axis=1)
        err = g.std(axis=1, ddof=1) / math.sqrt(n)
        if np.any(err > VARIANCE_GATE * val):
            warnings.warn(
                f"Monte Carlo stderr above {VARIANCE_GATE:.0%} of the estimate (t={t:g}, d={d})",
                VarianceWarning,
                stacklevel=2,
            )
    else:
        raise DomainError(f"unknown mode {mode!r}")
    if np.ndim(r):
        return KernelEstimate(val, err)
    return KernelEstimate(float(val[0]), float(err[0]))


def kernel_value(spec, t, r, d, estimator="auto"):
    """(p, p_fourier, p_subord) with the Fourier value preferred when usable."""
    pf = ps = None
    if estimator in ("auto", "fourier") and d in _KIND:
        try:
            val, err = p_fourier(spec, t, r, d, return_error=True)
            if val > 0 and err <= 1e-3 * val:
                pf = val
        except (DomainError, NumericError):
            if estimator == "fourier":
                raise
    if pf is None or estimator == "both":
        ps = p_subordinate(spec, t, r, d).value
    p = pf if pf is not None else ps
    return p, pf, ps


# -- radial tail -------------------------------------------------------------------


def chi_square_tail(d, t):
    """P(Y >= t) for Y chi-square with d degrees of freedom."""
    if np.any(np.asarray(t) < 0):
        raise DomainError("t must be >= 0")
    return special.gammaincc(0.5 * d, 0.5 * np.asarray(t, dtype=float))


def sbm_tail(spec, t, r, d, path="auto", n=4000):
    """P(|X_t| >= r) = int P(S_t >= r^2/(2y)) dF_Y(y), Y ~ chi-square(d).

    ``path="generic"`` uses a trapezoid rule in log y on the tabulated tail;
    ``path="exp"`` (d=2 only) uses adaptive quadrature against the
    exponential density with the tail inverted pointwise.
    """
    t, r = float(t), float(r)
    if not (t > 0 and r > 0):
        raise DomainError("need t > 0 and r > 0")
    lw = law(spec, t)
    if lw.atom is not None:
        return float(stats.chi2.sf(r * r / (2.0 * lw.atom), d))
    if path == "auto":
        path = "generic"
    if path == "exp":
        if d != 2:
            raise DomainError("the exponential path needs d = 2")

        # in u = log y, against the inverted tail (smooth, unlike the table)
        def f(u):
            y = math.exp(u)
            return 0.5 * math.exp(u - 0.5 * y) * lw.tail(r * r / (2.0 * y))

        val, _ = integrate.quad(f, math.log(1e-30), math.log(200.0), limit=200, epsabs=1e-13, epsrel=1e-9)
        return float(val)
    y_hi = float(stats.chi2.isf(1e-17, d))
    ly = np.linspace(math.log(1e-30), math.log(y_hi), n)
    y = np.exp(ly)
    w = stats.chi2.pdf(y, d) * y * lw.tail_interp(r * r / (2.0 * y))
    return float(integrate.trapezoid(w, ly))


# -- envelopes -------------------------------------------------------------------------


@dataclass(frozen=True)
class EnvelopeConfig:
    a_L: float = 1.0
    a_U: float = 1.0
    C: float = 1.0
    kappa: float = 0.5
    eta: float = 0.5
    theta: float = 0.5

    def __post_init__(self):
        if not (self.a_L > 0 and self.a_U > 0):
            raise DomainError("rates a_L, a_U must be > 0")
        if not self.C >= 1:
            raise DomainError("C must be >= 1")
        for name in ("kappa", "eta", "theta"):
            if not 0 < getattr(self, name) < 1:
                raise DomainError(f"{name} must lie in (0, 1)")


@dataclass(frozen=True)
class Envelope:
    lower: float
    upper: float
    regime: str
    # |x|^-d prefactor variant with rate a_U/2 on the upper side
    lower_alt: float
    upper_alt: float
    branches: dict = field(default_factory=dict)


def regime_of(spec, t, r):
    if r == 0:
        return "near_diagonal"
    return "near_diagonal" if t * float(spec.phi(r**-2.0)) >= 1.0 else "off_diagonal"


def off_diagonal_bounds(spec, t, r, d, cfg):
    """(lower, upper) from the off-diagonal formulas; undefined at r = 0."""
    if r <= 0:
        raise DomainError("off-diagonal envelope needs r > 0")
    lam_t = phi_inverse(spec, 1.0 / t)
    jump = t * r ** (-d) * float(evaluate(spec, r**-2.0).H)
    head = lam_t ** (d / 2.0)
    q = r * r * lam_t
    up = cfg.C * max(jump, head * math.exp(-cfg.a_U * q))
    lo = max(jump, head * math.exp(-cfg.a_L * q)) / cfg.C
    return lo, up


def near_diagonal_bounds(spec, t, d, cfg):
    head = phi_inverse(spec, 1.0 / t) ** (d / 2.0)
    return head / cfg.C, head * cfg.C


def envelope(spec, t, r, d, cfg=None, form="main"):
    """Envelope at one point.

    ``form="main"`` uses H and the exponential term; ``form="classical"``
    uses phi^-1(1/t)^(d/2) min t r^-d phi(r^-2) (stable family only).
    On the regime boundary (|t phi(r^-2) - 1| <= 1e-9) both branches are
    evaluated and stored in ``branches``; the returned pair is the tighter one.
    """
    cfg = cfg or EnvelopeConfig()
    t, r = float(t), float(r)
    if not t > 0 or r < 0:
        raise DomainError("need t > 0 and r >= 0")
    if form == "classical":
        if not spec.hypotheses["classical"]:
            raise PreconditionError("classical form needs phi with upper scaling delta < 1 comparable to H")
        head = phi_inverse(spec, 1.0 / t) ** (d / 2.0)
        m = head if r == 0 else min(head, t * r ** (-d) * float(spec.phi(r**-2.0)))
        return Envelope(m / cfg.C, m * cfg.C, regime_of(spec, t, r), m / cfg.C, m * cfg.C)
    if form != "main":
        raise DomainError(f"unknown form {form!r}")
    level = math.inf if r == 0 else t * float(spec.phi(r**-2.0))
    branches = {}
    if level >= 1.0 - TIE:
        branches["near_diagonal"] = near_diagonal_bounds(spec, t, d, cfg)
    if level <= 1.0 + TIE:
        branches["off_diagonal"] = off_diagonal_bounds(spec, t, r, d, cfg)
    lo = max(b[0] for b in branches.values())
    up = min(b[1] for b in branches.values())
    regime = "near_diagonal" if level >= 1.0 else "off_diagonal"
    if regime == "off_diagonal" or len(branches) == 2:
        lam_t = phi_inverse(spec, 1.0 / t)
        q = r * r * lam_t
        jump = t * r ** (-d) * float(evaluate(spec, r**-2.0).H)
        # q^(d/2) e^{-a q} <= (d/(a e))^(d/2) e^{-a q/2}, and >= e^{-a q} for q >= 1
        up_alt = cfg.C * max(jump, (d / (cfg.a_U * math.e)) ** (d / 2.0) * r ** (-d) * math.exp(-0.5 * cfg.a_U * q))
        lo_alt = max(jump, r ** (-d) * math.exp(-cfg.a_L * q)) / cfg.C if q >= 1 else lo
        up_alt = max(up_alt, up)
        lo_alt = min(lo_alt, lo)
    else:
        lo_alt, up_alt = lo, up
    return Envelope(lo, up, regime, lo_alt, up_alt, branches if len(branches) == 2 else {})


# -- grids and verification -------------------------------------------------------------


@dataclass(frozen=True)
class KernelGrid:
    """Product grid of times and radii."""

    t_values: tuple
    r_values: tuple

    def __post_init__(self):
        if len(self.t_values) < 1 or len(self.r_values) < 1:
            raise DomainError("empty grid")
        if any(not t > 0 for t in self.t_values) or any(r < 0 for r in self.r_values):
            raise DomainError("need t > 0 and r >= 0 on the grid")

    @classmethod
    def log(cls, t_range, r_range, n_t=12, n_r=12, with_zero=False):
        t = tuple(float(x) for x in np.geomspace(*t_range, n_t))
        if with_zero:
            r = (0.0,) + tuple(float(x) for x in np.geomspace(*r_range, n_r - 1))
        else:
            r = tuple(float(x) for x in np.geomspace(*r_range, n_r))
        return cls(t, r)

    def points(self):
        return [(t, r) for t in self.t_values for r in self.r_values]

    def to_dict(self):
        return {"t": list(self.t_values), "r": list(self.r_values)}


@dataclass(frozen=True)
class PointGrid:
    """Explicit list of (t, r) points."""

    pairs: tuple

    def __post_init__(self):
        if not self.pairs:
            raise DomainError("empty grid")
        if any(not t > 0 or r < 0 for t, r in self.pairs):
            raise DomainError("need t > 0 and r >= 0 on the grid")

    def points(self):
        return [(float(t), float(r)) for t, r in self.pairs]

    def to_dict(self):
        return {"points": [list(p) for p in self.pairs]}


def check_gates(spec, grid, cfg):
    """Hypotheses of the main estimates and the admissible (t, r) region."""
    hyp = spec.hypotheses
    if not (hyp["H_L"] and hyp["H_U_lt2"]):
        raise PreconditionError("H must satisfy (L) and (U) with delta < 2", [spec.label()])
    lam_l, lam_u = spec.lambda_thresholds
    t_max = math.inf if lam_l == 0 else cfg.kappa / float(spec.phi(lam_l))
    r_max = min(math.inf if lam_l == 0 else cfg.theta / math.sqrt(lam_l),
                math.inf if lam_u == 0 else cfg.eta / math.sqrt(lam_u))
    bad = [(t, r) for t, r in grid.points() if not (t < t_max and r < r_max)]
    if bad:
        raise PreconditionError(f"grid points outside t < {t_max:g}, r < {r_max:g}", bad)
    return t_max, r_max


def kernel_rows(spec, grid, d, estimator="auto"):
    rows = []
    for t, r in grid.points():
        p, pf, ps = kernel_value(spec, t, r, d, estimator)
        rows.append({"t": t, "r": r, "d": d, "regime": regime_of(spec, t, r), "p": p,
                     "p_fourier": pf, "p_subord": ps, "p_stderr": None if ps is None else 0.0})
    return rows


def _calibrated_report(name, spec, rows, d, form, extra=None, notes=None, gate_trend=True):
    X = np.array([[row["t"], row["r"]] for row in rows])
    p = np.array([row["p"] for row in rows])
    cal = EnvelopeCalibrator(spec=spec, d=d, form=form).fit(X, p)
    lower, upper = cal.lower_, cal.upper_
    out_rows = []
    for row, lo, up in zip(rows, lower, upper):
        row = {k: v for k, v in row.items() if k != "p"} | {"p": row["p"]}
        row.update(env_lower=float(lo), env_upper=float(up),
                   ratio_lo=row["p"] / float(lo), ratio_hi=row["p"] / float(up))
        out_rows.append(row)
    slopes = cal.slopes_
    consts = {"C": cal.C_, "a_L": cal.a_L_, "a_U": cal.a_U_, **slopes}
    rates_ok = form in ("classical", "example_large") or (
        RATE_MIN <= cal.a_L_ <= RATE_MAX and RATE_MIN <= cal.a_U_ <= RATE_MAX
    )
    flat = abs(slopes["slope_t"]) <= 0.3 and abs(slopes["slope_r"]) <= 0.3
    passed = bool(cal.holds_ and cal.C_ <= 1e3 and rates_ok and (flat or not gate_trend))
    if extra:
        consts.update(extra)
    rep = BoundCheckReport(name, consts, out_rows, passed, out_rows[cal.worst_index_], list(notes or []))
    rep.calibrator = cal
    return rep


def verify_main_theorem(spec, grid, d, cfg=None, estimator="auto", rows=None):
    """Calibrate (C, a_L, a_U) so the main envelope sandwiches p on the grid.

    PASS iff C <= 1e3, both rates in [1e-3, 1e3] and log(p / envelope
    midpoint) has no trend (|slope| <= 0.3 in log t and log r).
    """
    cfg = cfg or EnvelopeConfig()
    check_gates(spec, grid, cfg)
    rows = rows if rows is not None else kernel_rows(spec, grid, d, estimator)
    extra = {"kappa": cfg.kappa, "eta": cfg.eta, "theta": cfg.theta}
    return _calibrated_report("main_theorem", spec, rows, d, "main", extra)


def verify_classical(spec, grid, d, estimator="auto", rows=None):
    if not spec.hypotheses["classical"]:
        raise PreconditionError("classical form needs the stable family", [spec.label()])
    rows = rows if rows is not None else kernel_rows(spec, grid, d, estimator)
    return _calibrated_report("classical", spec, rows, d, "classical")


def verify_example_form(spec, grid, d, scale="small", estimator="auto", rows=None, C_ref=None):
    """Explicit shapes for phi(lam) = lam / log(1 + lam^(beta/2)).

    ``scale="small"`` (t, r < 1; off-diagonal points only):
    t/(r^(d+2) log(1/r)^2) max t^(-d/2) log(1/t)^(-d/2) e^{-a (r^2/t) log(1/t)}.
    ``scale="large"``: t^(-d/(2-beta)) min t r^-(d+2-beta).

    PASS iff the calibrated sandwich holds with C <= 1e3 (and C <= ``C_ref``,
    typically the main-theorem constant, when given) and rates in range.
    The trend slopes are reported but not gated.
    """
    if spec.family != "conjugate_geometric":
        raise PreconditionError("explicit form is for the conjugate_geometric family", [spec.label()])
    pts = grid.points()
    if scale == "small":
        bad = [(t, r) for t, r in pts if not (0 < r < 1 and t < 1)]
        form = "example_small"
    elif scale == "large":
        bad = [(t, r) for t, r in pts if not (t > 0.5 and r > 0.5)]
        form = "example_large"
    else:
        raise DomainError("scale must be 'small' or 'large'")
    if bad:
        raise PreconditionError("grid points outside the explicit-form region", bad)
    rows = rows if rows is not None else kernel_rows(spec, grid, d, estimator)
    notes = []
    if scale == "small":
        kept = [row for row in rows if row["regime"] == "off_diagonal"]
        if len(kept) < len(rows):
            notes.append(f"{len(rows) - len(kept)} near-diagonal points dropped")
        rows = kept
        if not rows:
            raise PreconditionError("no off-diagonal points on the grid")
    rep = _calibrated_report(f"example_{scale}", spec, rows, d, form, notes=notes, gate_trend=False)
    if C_ref is not None:
        rep.constants["C_ref"] = float(C_ref)
        rep.passed = bool(rep.passed and rep.constants["C"] <= C_ref)
    return rep


def verify_near_diagonal(spec, grid, d, estimator="auto"):
    """p / phi^-1(1/t)^(d/2) within [1/c, c]; PASS iff c <= 100."""
    bad = [(t, r) for t, r in grid.points() if regime_of(spec, t, r) != "near_diagonal"]
    if bad:
        raise PreconditionError("grid points with t phi(r^-2) < 1", bad)
    rows = kernel_rows(spec, grid, d, estimator)
    ratio = []
    for row in rows:
        head = phi_inverse(spec, 1.0 / row["t"]) ** (d / 2.0)
        row["head"] = head
        row["ratio"] = row.pop("p") / head
        ratio.append(row["ratio"])
    ratio = np.array(ratio)
    mid = math.sqrt(ratio.min() * ratio.max())
    c = float(max(ratio.max() / mid, mid / ratio.min()))
    worst = rows[int(np.argmax(np.abs(np.log(ratio / mid))))]
    consts = {"c": c, "ratio_min": float(ratio.min()), "ratio_max": float(ratio.max()), "centre": mid}
    return BoundCheckReport("near_diagonal", consts, rows, bool(c <= 1e2), worst)


def blowup_probe(spec, d=3, t=1.0, r_sequence=(0.2, 0.1, 0.05, 0.025)):
    """p(t, r) r^(d - beta) along r -> 0 for the geometric-stable family.

    PASS iff the normalized values stay above a positive constant and fail
    to be nondecreasing (as r decreases) at no more than one point.  For
    other families the probe reports p(t, r) against p(t, 0) instead and
    passes iff p stays bounded by it.
    """
    r_seq = [float(r) for r in r_sequence]
    if sorted(r_seq, reverse=True) != r_seq or any(r <= 0 for r in r_seq):
        raise DomainError("r_sequence must be positive and decreasing")
    p = p_subordinate(spec, t, np.array(r_seq), d).value
    rows = []
    if spec.family == "geometric_stable":
        beta = spec.beta
        if not d > beta:
            raise PreconditionError("blow-up needs d > beta")
        scaled = p * np.array(r_seq) ** (d - beta)
        drops = int(np.sum(np.diff(scaled) < 0))
        for r, pv, sv in zip(r_seq, p, scaled):
            rows.append({"r": r, "p": float(pv), "scaled": float(sv)})
        consts = {"exponent": d - beta, "min_scaled": float(scaled.min()), "drops": drops}
        ok = bool(scaled.min() > 0 and drops <= 1)
        return BoundCheckReport("blowup", consts, rows, ok, rows[int(np.argmin(scaled))])
    p0 = float(p_subordinate(spec, t, 0.0, d).value)
    for r, pv in zip(r_seq, p):
        rows.append({"r": r, "p": float(pv), "scaled": float(pv) / p0})
    consts = {"p0": p0, "max_ratio": float(np.max(p) / p0)}
    return BoundCheckReport("bounded", consts, rows, bool(np.max(p) <= p0 * (1 + 1e-6)), rows[-1])

