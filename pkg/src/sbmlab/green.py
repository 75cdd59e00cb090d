"""Green function G(r) = int_0^inf p(t, r) dt of transient subordinate BM."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate

from .bernstein import scaling_indices
from .errors import DomainError, NumericError, PreconditionError
from .heatkernel import p_fourier, p_subordinate
from .reports import BoundCheckReport

GREEN_COLUMNS = ("r", "d", "G", "envelope", "refined_envelope", "ratio")
DYADIC_FLOOR = 1e-8
TRANSIENCE_TOL = 1e-6
NEAR_DECADES = 3
FAR_DECADES = 14
QUAD_RTOL = 1e-5


def transience_check(spec, d):
    """Does int_0^1 y^(d-1)/phi(y^2) dy converge?

    Dyadic pieces [2^-(k+1), 2^-k] are summed down to 1e-8; the integral is
    declared finite iff the remainder below the last piece, extrapolated
    geometrically from the last two pieces, is within 1e-6 of the sum.
    """
    if d < 1:
        raise DomainError("d must be >= 1")

    def f(y):
        return y ** (d - 1) / float(spec.phi(y * y))

    pieces = []
    hi = 1.0
    while hi / 2 >= DYADIC_FLOOR:
        val, _ = integrate.quad(f, hi / 2, hi, epsrel=1e-10)
        pieces.append(val)
        hi /= 2
    total = math.fsum(pieces)
    rho = pieces[-1] / pieces[-2]
    if not rho < 1:
        return False
    remainder = pieces[-1] * rho / (1 - rho)
    return bool(remainder <= TRANSIENCE_TOL * total)


@dataclass(frozen=True)
class GreenEstimate:
    r: float
    d: int
    G: float
    G_near: float
    G_far: float
    T_star: float
    envelope: float
    refined_envelope: float | None
    ratio: float

    def row(self):
        return {"r": self.r, "d": self.d, "G": self.G, "envelope": self.envelope,
                "refined_envelope": self.refined_envelope, "ratio": self.ratio}


def refined_envelope(spec, r, d):
    """r^(2-d) log(1/r) for r < 1/2 and r^(2-d) otherwise (conjugate_gamma, d >= 3)."""
    if spec.family != "conjugate_gamma" or d < 3:
        return None
    return r ** (2 - d) * (math.log(1 / r) if r < 0.5 else 1.0)


def _p(spec, r, d):
    """t p(t, r) as a function of log t.

    The Fourier value is used even when its error is large relative to a
    tiny p: only the absolute error matters inside the time integral.
    """

    def f(log_t):
        t = math.exp(log_t)
        if d <= 3:
            try:
                return p_fourier(spec, t, r, d) * t
            except (DomainError, NumericError):
                pass
        return p_subordinate(spec, t, r, d).value * t

    return f


def _integrate_log(f, a, b):
    val, _ = integrate.quad(f, math.log(a), math.log(b), epsrel=QUAD_RTOL, epsabs=0, limit=200)
    return val


def green_numeric(spec, r, d, split=1.0):
    """G(r) split at T* = split / phi(r^-2).

    [0, T*]: quadrature in log t over three decades below T* plus a linear
    piece near 0.  [T*, inf): decade by decade until a decade adds less
    than 1e-5 of the total (at most 14 decades), then a power tail
    p ~ t^-kappa with kappa from the last decade.
    """
    r = float(r)
    if not r > 0:
        raise DomainError("r must be > 0")
    if not transience_check(spec, d):
        raise DomainError("process is recurrent in this dimension; G is infinite")
    t_star = split / float(spec.phi(r**-2.0))
    f = _p(spec, r, d)
    lo = t_star * 10.0**-NEAR_DECADES
    near = _integrate_log(f, lo, t_star)
    # p(t, r) is O(t) or smaller as t -> 0 off the diagonal
    near += 0.5 * f(math.log(lo))
    far = 0.0
    a = t_star
    last = None
    for _ in range(FAR_DECADES):
        piece = _integrate_log(f, a, 10 * a)
        far += piece
        a *= 10
        last = piece
        if piece <= 1e-5 * (near + far):
            break
    p_end = f(math.log(a)) / a
    p_mid = f(math.log(a / 10)) / (a / 10)
    kappa = -math.log10(p_end / p_mid)
    if not kappa > 1:
        raise NumericError("far tail does not decay faster than 1/t", {"r": r, "kappa": kappa, "t": a})
    far += p_end * a / (kappa - 1)
    if near < 0 or far < 0 or last is None:
        raise NumericError("negative Green function part", {"near": near, "far": far})
    G = near + far
    env = 1.0 / (r**d * float(spec.phi(r**-2.0)))
    return GreenEstimate(r, d, G, near, far, t_star, env, refined_envelope(spec, r, d), G / env)


def verify_green(spec, r_grid, d, c_max=10.0):
    """G / (1/(r^d phi(r^-2))) within [1/c, c] on the grid; PASS iff c <= c_max.

    For conjugate_gamma in d >= 3 the check also asks that
    G r^(d-2)/log(1/r) be flat within a factor 2 on r in [1e-3, 1e-1],
    and records the drift of the Newtonian ratio G r^(d-2) against log(1/r).
    """
    if not transience_check(spec, d):
        raise PreconditionError("process is recurrent in this dimension", [spec.label(), d])
    if d <= 2:
        rep = scaling_indices(spec, "phi", (1.0, 1e8))
        if not rep.delta < d / 2:
            raise PreconditionError(f"phi needs upper scaling delta < d/2 (fitted {rep.delta:.3g})", [d])
    r_grid = [float(r) for r in r_grid]
    ests = [green_numeric(spec, r, d) for r in r_grid]
    rows = [e.row() | {"G_near": e.G_near, "G_far": e.G_far} for e in ests]
    ratio = np.array([e.ratio for e in ests])
    centre = math.sqrt(ratio.min() * ratio.max())
    c = float(max(ratio.max() / centre, centre / ratio.min()))
    consts = {"c": c, "spread": float(ratio.max() / ratio.min()), "centre": centre}
    ok = c <= c_max
    notes = []
    if spec.family == "conjugate_gamma" and d >= 3:
        sel = [(e.r, e.G) for e in ests if 1e-3 <= e.r <= 1e-1]
        if len(sel) >= 2:
            rr = np.array([s[0] for s in sel])
            gg = np.array([s[1] for s in sel])
            newton = gg * rr ** (d - 2)
            corrected = newton / np.log(1 / rr)
            log_spread = float(corrected.max() / corrected.min())
            slope = float(np.polyfit(np.log(np.log(1 / rr)), np.log(newton), 1)[0])
            consts.update(log_corrected_spread=log_spread, newton_spread=float(newton.max() / newton.min()),
                          newton_loglog_slope=slope)
            ok = ok and log_spread <= 2.0
            notes.append("G r^(d-2) against log(1/r): slope 1 means drift proportional to log(1/r)")
    worst = rows[int(np.argmax(np.abs(np.log(ratio / centre))))]
    return BoundCheckReport("green", consts, rows, bool(ok), worst, notes)
