"""Law of S_t by Laplace inversion, sampling, and the subordinator tail checks."""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property, lru_cache

import gmpy2
import numpy as np
from scipy.interpolate import PchipInterpolator

from . import laplace
from .bernstein import evaluate, levy_tail, phi_inverse, fit_M
from .errors import DomainError, NumericError, PreconditionError
from .exponents import LaplaceExponentSpec
from .reports import BoundCheckReport

GRID_POINTS = 2048
MASS_EPS = 1e-6
TAIL_COLUMNS = ("t", "r", "regime_lhs", "tail_prob", "tH", "ratio", "stderr")


def rng(seed, stream=0):
    """Counter-based generator for the stream ``(seed, stream)``."""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([int(seed), int(stream)])))


def _mp_kernel(spec, t):
    tt = gmpy2.mpfr(t)
    phi = spec.phi_mp_factory()
    exp, expm1 = gmpy2.exp, gmpy2.expm1

    def kernel(lam):
        x = tt * phi(lam)
        e = exp(-x)
        # 1 - e loses digits only for small x
        q = -expm1(-x) if x < 0.5 else 1 - e
        return e, e / lam, q / lam

    return kernel


def _float_kernel(spec, t):
    def kernel(lam):
        x = t * spec.phi(lam)
        e = np.exp(-x)
        return e, e / lam, -np.expm1(-x) / lam

    return kernel


def _invert(spec, t, s, m=None):
    """(density, cdf, tail) at s from the three transforms of e^{-t phi}."""
    if spec.family == "user_table":
        return laplace.invert_float(_float_kernel(spec, t), s)
    return laplace.invert_mp(_mp_kernel(spec, t), s, m=m or laplace.MP_ORDER)


# Gaver-Stehfest orders tried in turn; laws with sharp edges need the high ones
ORDER_LADDER = (20, 30, 45, 60, 90)
ORDER_TOL = 1e-8


def choose_order(spec, t):
    """Smallest order on the ladder whose cdf agrees with the next one.

    The probe runs on 41 points spanning four decades around the typical
    scale 1/phi^-1(1/t).  Returns ``(order, estimated_cdf_error)``.
    """
    if spec.family == "user_table":
        return laplace.FLOAT_ORDER, math.nan
    s0 = 1.0 / phi_inverse(spec, 1.0 / t)
    s = s0 * np.geomspace(1e-2, 1e2, 41)
    prev = _invert(spec, t, s, ORDER_LADDER[0])[1]
    err = math.inf
    for lo, hi in zip(ORDER_LADDER, ORDER_LADDER[1:]):
        cur = _invert(spec, t, s, hi)[1]
        err = float(np.max(np.abs(cur - prev)))
        if err <= ORDER_TOL:
            return lo, err
        prev = cur
    return ORDER_LADDER[-1], err


@dataclass(frozen=True)
class LawTable:
    s: np.ndarray
    density: np.ndarray
    cdf: np.ndarray
    tail: np.ndarray
    mass_drift: float


@dataclass(frozen=True, eq=False)
class SubordinatorLaw:
    """Distribution of S_t for one spec and one time.

    The evaluator methods (``cdf``, ``tail``, ``density``) invert the
    transform at the requested points.  The tabulation on 2048 log-spaced
    points between the 1e-6 and 1-1e-6 quantiles (``support_hint``) is built
    on first use and backs sampling and quadrature.
    """

    spec: LaplaceExponentSpec
    t: float
    inversion_order: int
    order_error: float = 0.0
    atom: float | None = None

    # -- evaluators -------------------------------------------------------------
    def _gs(self, s):
        s = np.atleast_1d(np.asarray(s, dtype=float))
        out = np.zeros((3, s.size))
        pos = s > 0
        if pos.any():
            out[:, pos] = _invert(self.spec, self.t, s[pos], self.inversion_order // 2)
        return out

    def cdf(self, s):
        s_arr = np.atleast_1d(np.asarray(s, dtype=float))
        if self.atom is not None:
            out = (s_arr >= self.atom).astype(float)
        else:
            _, left, tail = self._gs(s_arr)
            out = np.where(left <= 0.5, left, 1.0 - tail)
            out = np.clip(out, 0.0, 1.0)
        return out if np.ndim(s) else float(out[0])

    def tail(self, s):
        """P(S_t >= s), accurate in relative terms for small tails."""
        s_arr = np.atleast_1d(np.asarray(s, dtype=float))
        if self.atom is not None:
            out = (s_arr <= self.atom).astype(float)
        else:
            _, left, tail = self._gs(s_arr)
            out = np.where(left <= 0.5, 1.0 - left, tail)
            out = np.where(s_arr <= 0, 1.0, np.clip(out, 0.0, 1.0))
        return out if np.ndim(s) else float(out[0])

    def density(self, s):
        if self.atom is not None:
            raise DomainError("a point mass has no density")
        s_arr = np.atleast_1d(np.asarray(s, dtype=float))
        dens = np.clip(self._gs(s_arr)[0], 0.0, None)
        return dens if np.ndim(s) else float(dens[0])

    # -- tabulation ---------------------------------------------------------------
    @cached_property
    def table(self) -> LawTable:
        if self.atom is not None:
            raise DomainError("a point mass has no table")
        return _tabulate(self)

    @property
    def support_hint(self):
        if self.atom is not None:
            return (self.atom, self.atom)
        return (float(self.table.s[0]), float(self.table.s[-1]))

    @property
    def s_grid(self):
        return self.table.s

    @property
    def density_grid(self):
        return self.table.density

    @property
    def cdf_grid(self):
        return self.table.cdf

    @property
    def tail_grid(self):
        return self.table.tail

    @property
    def mass_drift(self):
        return 0.0 if self.atom is not None else self.table.mass_drift

    @cached_property
    def _left_interp(self):
        c = self.cdf_grid
        keep = (c > 0) & (c <= 0.6)
        keep &= np.concatenate([[True], np.diff(c) > 0])
        return PchipInterpolator(np.log(c[keep]), np.log(self.s_grid[keep]))

    @cached_property
    def _right_interp(self):
        q = self.tail_grid
        keep = (q > 0) & (q <= 0.6)
        keep &= np.concatenate([np.diff(q) < 0, [True]])
        return PchipInterpolator(-np.log(q[keep]), np.log(self.s_grid[keep]))

    def quantile(self, u):
        """Inverse cdf by monotone interpolation, power-law beyond the grid."""
        u_arr = np.atleast_1d(np.asarray(u, dtype=float))
        if self.atom is not None:
            out = np.full(u_arr.shape, self.atom)
            return out if np.ndim(u) else float(out[0])
        out = np.empty_like(u_arr)
        left = u_arr <= 0.5
        li, ri = self._left_interp, self._right_interp
        with np.errstate(divide="ignore"):
            x = np.log(u_arr[left])
            y = -np.log1p(-u_arr[~left])
        out[left] = li(np.maximum(x, li.x[0])) + li.derivative()(li.x[0]) * np.minimum(x - li.x[0], 0.0)
        out[~left] = ri(np.minimum(y, ri.x[-1])) + ri.derivative()(ri.x[-1]) * np.maximum(y - ri.x[-1], 0.0)
        out = np.exp(out)
        return out if np.ndim(u) else float(out[0])

    def tail_interp(self, s):
        """P(S_t >= s) from the tabulated grid (fast, ~1e-6 accurate)."""
        s_arr = np.atleast_1d(np.asarray(s, dtype=float))
        if self.atom is not None:
            return (s_arr <= self.atom).astype(float)
        ls = np.log(self.s_grid)
        lq = np.log(np.clip(self.tail_grid, 1e-300, None))
        out = np.exp(np.interp(np.log(np.clip(s_arr, 1e-300, None)), ls, lq))
        hi = s_arr > self.s_grid[-1]
        if hi.any():
            slope = (lq[-1] - lq[-9]) / (ls[-1] - ls[-9])
            out[hi] = np.exp(lq[-1] + slope * (np.log(s_arr[hi]) - ls[-1]))
        lo = s_arr < self.s_grid[0]
        if lo.any():
            out[lo] = 1.0 - self.cdf_grid[0] * np.exp(
                _left_slope(self) * (np.log(np.clip(s_arr[lo], 1e-300, None)) - ls[0])
            )
        return np.clip(out, 0.0, 1.0)

    def extended_density(self, decades=12, points=600):
        """Density on the grid padded with power-law tails on both sides.

        Returns ``(s, f)`` suitable for trapezoidal integration in log s.
        """
        s, f = self.s_grid, self.density_grid
        ls = np.log(s)
        lf = np.log(np.clip(f, 1e-300, None))
        ext = decades * math.log(10.0)
        kl = _left_slope(self)
        sl = np.linspace(ls[0] - ext, ls[0], points, endpoint=False)
        fl = np.exp(lf[0] + (kl - 1.0) * (sl - ls[0]))
        kr = (lf[-1] - lf[-9]) / (ls[-1] - ls[-9])
        sr = np.linspace(ls[-1], ls[-1] + ext, points + 1)[1:]
        fr = np.exp(lf[-1] + kr * (sr - ls[-1]))
        return np.exp(np.concatenate([sl, ls, sr])), np.concatenate([fl, f, fr])


def _left_slope(law):
    """Log-log slope of the cdf at the left end of the grid."""
    lc = np.log(np.clip(law.cdf_grid[:9], 1e-300, None))
    ls = np.log(law.s_grid[:9])
    return max((lc[-1] - lc[0]) / (ls[-1] - ls[0]), 0.0)


def _bracket(fun, s0, going_up):
    """Step s by factors of 10 until fun(s) <= MASS_EPS."""
    s = s0
    for _ in range(600):
        if fun(s) <= MASS_EPS:
            return s
        s = s * 10.0 if going_up else s / 10.0
        if s > 1e290 or s < 1e-290:
            return s
    return s


def _log_bisect(fun, lo, hi):
    """Bisection in log s for the crossing of fun with MASS_EPS."""
    flo = fun(lo)
    for _ in range(60):
        mid = math.sqrt(lo * hi)
        fm = fun(mid)
        if (fm > MASS_EPS) == (flo > MASS_EPS):
            lo, flo = mid, fm
        else:
            hi = mid
        if hi / lo < 1.0005:
            break
    return math.sqrt(lo * hi)


def _tabulate(lw):
    spec, t = lw.spec, lw.t
    m = lw.inversion_order // 2

    def left(s):
        return float(_invert(spec, t, [s], m)[1][0])

    def right(s):
        return float(_invert(spec, t, [s], m)[2][0])

    s0 = 1.0 / phi_inverse(spec, 1.0 / t)
    lo = _bracket(left, s0, going_up=False)
    s_lo = _log_bisect(left, lo, max(s0, lo * 10.0)) if lo > 1e-290 else lo
    hi = _bracket(right, s0, going_up=True)
    s_hi = _log_bisect(right, min(s0, hi / 10.0), hi) if hi < 1e290 else hi
    s = np.geomspace(s_lo, s_hi, GRID_POINTS)
    dens, left_v, tail_v = _invert(spec, t, s, m)
    cdf = np.where(left_v <= 0.5, left_v, 1.0 - tail_v)
    tail = np.where(left_v <= 0.5, 1.0 - left_v, tail_v)
    dip = float(np.max(np.maximum.accumulate(cdf) - cdf))
    diag = {"spec": spec.to_dict(), "t": t, "support": [s_lo, s_hi], "max_cdf_dip": dip,
            "order": lw.inversion_order, "order_error": lw.order_error}
    if dip > 1e-4:
        raise NumericError("inverted cdf is not monotone within 1e-4", diag)
    cdf = np.maximum.accumulate(np.clip(cdf, 0.0, 1.0))
    tail = np.minimum.accumulate(np.clip(tail, 0.0, 1.0))
    if cdf[-1] < 1.0 - 1e-4:
        raise NumericError("cdf at the upper support end is below 1 - 1e-4", diag)
    dens = np.clip(dens, 0.0, None)
    mass = float(np.trapezoid(dens * s, np.log(s)))
    inside = float(cdf[-1] - cdf[0])
    drift = mass - inside
    diag["mass_drift"] = drift
    if abs(drift) > 1e-3:
        raise NumericError("density mass drift above 1e-3", diag)
    if mass > 0:
        dens = dens * (inside / mass)
    for arr in (s, dens, cdf, tail):
        arr.setflags(write=False)
    return LawTable(s, dens, cdf, tail, drift)


@lru_cache(maxsize=128)
def _law_cached(spec, t):
    if spec.family == "pure_drift":
        return SubordinatorLaw(spec, t, 0, atom=spec.drift_b * t)
    if spec.drift_b:
        raise PreconditionError("law() needs zero drift (or the pure_drift family)")
    m, err = choose_order(spec, t)
    return SubordinatorLaw(spec, t, 2 * m, err)


def law(spec: LaplaceExponentSpec, t: float) -> SubordinatorLaw:
    """Law of S_t (cached per spec and t)."""
    t = float(t)
    if not t > 0:
        raise DomainError("t must be > 0")
    return _law_cached(spec, t)


def sample(law_: SubordinatorLaw, n: int, seed: int, stream: int = 0) -> np.ndarray:
    """Inverse-transform samples of S_t; deterministic in (seed, stream)."""
    n = int(n)
    if n < 1:
        raise DomainError("n must be >= 1")
    u = rng(seed, stream).random(n)
    return law_.quantile(u)


def tail_prob(law_: SubordinatorLaw, r) -> float:
    """P(S_t >= r) for r > 0, clipped to [0, 1]."""
    if np.any(np.asarray(r) <= 0):
        raise DomainError("r must be > 0")
    return law_.tail(r)


# -- tail checks --------------------------------------------------------------------


@dataclass(frozen=True)
class TailCheckGrid:
    """(t, r) pairs inside the regime t phi(1/r) <= (1 - epsilon)/e."""

    pairs: tuple
    epsilon: float = 0.5
    n: int = 10**4
    seed: int = 0

    def validate(self, spec):
        if not 0 < self.epsilon < 1:
            raise PreconditionError("epsilon must lie in (0, 1)")
        if self.n < 10**4:
            raise PreconditionError("sample count must be at least 1e4")
        bound = (1.0 - self.epsilon) / math.e
        bad = [(t, r) for t, r in self.pairs if t * float(spec.phi(1.0 / r)) > bound * (1 + 1e-12)]
        if bad:
            raise PreconditionError("grid points outside the regime t*phi(1/r) <= (1-eps)/e", bad)
        if not self.pairs:
            raise PreconditionError("empty grid")

    @property
    def times(self):
        return tuple(sorted({t for t, _ in self.pairs}))


def tail_grid(spec, t_values, r_values, epsilon=0.5, n=10**4, seed=0) -> TailCheckGrid:
    """All pairs of the product grid that satisfy the regime inequality."""
    bound = (1.0 - epsilon) / math.e
    pairs = tuple(
        (float(t), float(r)) for t in t_values for r in r_values if t * float(spec.phi(1.0 / r)) <= bound
    )
    return TailCheckGrid(pairs, epsilon, int(n), int(seed))


def _slopes(t, r, y):
    """Least-squares slopes of y against log t and log r jointly."""
    X = np.column_stack([np.ones_like(t), np.log(t), np.log(r)])
    use = [0]
    if np.ptp(np.log(t)) > 0:
        use.append(1)
    if np.ptp(np.log(r)) > 0:
        use.append(2)
    coef, *_ = np.linalg.lstsq(X[:, use], y, rcond=None)
    out = {"slope_t": 0.0, "slope_r": 0.0}
    for i, c in zip(use, coef):
        if i == 1:
            out["slope_t"] = float(c)
        elif i == 2:
            out["slope_r"] = float(c)
    return out


def _tail_rows(spec, grid, probs):
    """Rows of the tail CSV; stderr is the binomial error of an n-sample estimate."""
    rows = []
    for (t, r), p in zip(grid.pairs, probs):
        lhs = t * float(spec.phi(1.0 / r))
        th = t * float(evaluate(spec, 1.0 / r).H)
        p = float(p)
        rows.append(
            {"t": t, "r": r, "regime_lhs": lhs, "tail_prob": p, "tH": th,
             "ratio": p / th if th > 0 else math.inf, "stderr": math.sqrt(p * (1.0 - p) / grid.n)}
        )
    return rows


def check_upper_tail(spec, grid: TailCheckGrid) -> BoundCheckReport:
    """P(S_t >= r(1 + e t phi(1/r))) <= C_S t H(1/r) with one fitted C_S."""
    grid.validate(spec)
    thr = np.array([r * (1.0 + math.e * t * float(spec.phi(1.0 / r))) for t, r in grid.pairs])
    probs = np.array([tail_prob(law(spec, t), s) for (t, _), s in zip(grid.pairs, thr)])
    rows = _tail_rows(spec, grid, probs)
    ratio = np.array([row["ratio"] for row in rows])
    c_s = float(np.max(ratio))
    med = float(np.median(ratio))
    ok = bool(np.isfinite(c_s) and c_s < 10.0 * med)
    t = np.array([p[0] for p in grid.pairs])
    r = np.array([p[1] for p in grid.pairs])
    slopes = _slopes(t, r, np.log(ratio)) if np.all(ratio > 0) else {"slope_t": math.nan, "slope_r": math.nan}
    consts = {"C_S": c_s, "median_ratio": med, "epsilon": grid.epsilon, **slopes}
    worst = rows[int(np.argmax(ratio))]
    return BoundCheckReport("upper_tail", consts, rows, ok, worst)


def check_lower_tail(spec, grid: TailCheckGrid, rtol=1e-3) -> BoundCheckReport:
    """P(S_t >= r) >= 1 - exp(-t mu(r, inf)).

    mu(r, inf) is the closed form when known, otherwise the lower bound
    (M^2/2) H(1/r) with M fitted from the scaling of H.
    """
    grid.validate(spec)
    tail_fn = spec.known_levy_tail
    M = None if tail_fn is not None else fit_M(spec)
    if tail_fn is None and M is None:
        raise PreconditionError("no closed-form Levy tail and H has no upper scaling with delta < 2")
    rows, notes = [], []
    worst, worst_ratio = None, math.inf
    ok = True
    for t, r in grid.pairs:
        if tail_fn is not None:
            mu = float(tail_fn(r))
        else:
            mu = levy_tail(spec, r, M=M).lower_bound
            if mu is None:
                notes.append(f"r={r:g} beyond M/lambda_U; skipped")
                continue
        rhs = -math.expm1(-t * mu)
        lhs = tail_prob(law(spec, t), r)
        passed = lhs >= rhs * (1.0 - rtol) - 1e-12
        ok &= passed
        ratio = lhs / rhs if rhs > 0 else math.inf
        row = {"t": t, "r": r, "tail_prob": lhs, "bound": rhs, "ratio": ratio, "pass": passed}
        rows.append(row)
        if ratio < worst_ratio:
            worst, worst_ratio = row, ratio
    consts = {"min_ratio": worst_ratio}
    if M is not None:
        consts["M"] = M
    return BoundCheckReport("lower_tail", consts, rows, bool(ok and rows), worst, notes)


def interval_tau(rho=0.05, alpha=2.0, beta=1.0):
    """1 - (1 - e^-rho)/(1 - e^-1) - e^(1/alpha - beta)."""
    return 1.0 - (-math.expm1(-rho)) / (-math.expm1(-1.0)) - math.exp(1.0 / alpha - beta)


def check_interval_prob(spec, grid: TailCheckGrid, L=8.0, rho=0.05) -> BoundCheckReport:
    """(a) P(r <= S_t <= L r) >= c_S t H(1/r); (b) the explicit interval bound.

    Part (b) checks P(1/(2 phi^-1(1/t)) <= S_t <= 1/phi^-1(rho/t)) >= tau for
    every time in the grid, by inversion and by Monte Carlo.
    """
    if not L > 1:
        raise PreconditionError("L must exceed 1")
    grid.validate(spec)
    rows = []
    for t, r in grid.pairs:
        lw = law(spec, t)
        lo_t, hi_t = lw.tail([r, L * r])
        p = float(lo_t - hi_t)
        th = t * float(evaluate(spec, 1.0 / r).H)
        rows.append({"t": t, "r": r, "interval_prob": p, "tH": th, "ratio": p / th})
    ratio = np.array([row["ratio"] for row in rows])
    c_s = float(ratio.min())
    ok_a = bool(c_s > 0 and c_s >= 1e-3 * np.median(ratio))
    tau = interval_tau(rho)
    inter = []
    ok_b = True
    for k, t in enumerate(grid.times):
        lw = law(spec, t)
        a = 1.0 / (2.0 * phi_inverse(spec, 1.0 / t))
        b = 1.0 / phi_inverse(spec, rho / t)
        qa, qb = lw.tail([a, b])
        p = float(qa - qb)
        xs = sample(lw, grid.n, grid.seed, 10_000 + k)
        pm = float(np.mean((xs >= a) & (xs <= b)))
        passed = p >= tau and pm >= tau
        ok_b &= passed
        inter.append({"t": t, "lower": a, "upper": b, "prob": p, "mc_prob": pm, "pass": passed})
    consts = {"c_S": c_s, "L": float(L), "rho": rho, "tau": tau, "min_interval_prob": min(i["prob"] for i in inter)}
    rep = BoundCheckReport("interval_prob", consts, rows, ok_a and ok_b, rows[int(np.argmin(ratio))])
    rep.notes.append({"interval_bound": inter})
    return rep


def check_two_sided(spec, grid: TailCheckGrid) -> BoundCheckReport:
    """P(S_t >= r) between c1 t H(1/r) and c2 t H(1/r); flat in t and r."""
    grid.validate(spec)
    notes = []
    hyp = spec.hypotheses
    if hyp["H_U_lt2"] is False:
        raise PreconditionError("H has no upper scaling with delta < 2")
    M = fit_M(spec)
    lam_u = spec.lambda_thresholds[1]
    if M is not None and lam_u > 0:
        bad = [(t, r) for t, r in grid.pairs if not r < M / lam_u]
        if bad:
            raise PreconditionError("grid points with r >= M/lambda_U", bad)
    if hyp["phi_L"] is False:
        notes.append("phi has no lower scaling (zero scaling order); reported for contrast")
    probs = np.array([tail_prob(law(spec, t), r) for t, r in grid.pairs])
    rows = _tail_rows(spec, grid, probs)
    ratio = np.array([row["ratio"] for row in rows])
    c1, c2 = float(ratio.min()), float(ratio.max())
    t = np.array([p[0] for p in grid.pairs])
    r = np.array([p[1] for p in grid.pairs])
    slopes = _slopes(t, r, np.log(ratio))
    ok = bool(c2 / c1 <= 1e3 and abs(slopes["slope_t"]) <= 0.2 and abs(slopes["slope_r"]) <= 0.2)
    consts = {"c1": c1, "c2": c2, "spread": c2 / c1, **slopes}
    if M is not None:
        consts["M"] = M
    worst = rows[int(np.argmax(np.abs(np.log(ratio / math.sqrt(c1 * c2)))))]
    return BoundCheckReport("two_sided_tail", consts, rows, ok, worst, notes)
