"""Zero-to-zero panel quadrature for radial Fourier integrals.

Computes I = int_0^Xi w(xi r) A(xi) dxi for the three weights used by the
radial inversion formulas in dimensions 1, 2, 3:

* ``"cos"``: w = cos(xi r)
* ``"j0"``:  w = xi J0(xi r)
* ``"sin"``: w = xi sin(xi r)

The amplitude A is smooth and decreasing away from the origin (it may have
a derivative singularity at 0).  Panels end at the zeros of the oscillating
factor; the first few go through adaptive QUADPACK, the rest through a
vectorized Gauss-Legendre rule.  Very long panel sequences are summed
directly up to a cap and the remainder is accelerated with the Euler
transform of the alternating panel series.
"""

from __future__ import annotations

import math

import numpy as np
from scipy import integrate, special

from .errors import NumericError

GL_NODES, GL_WEIGHTS = np.polynomial.legendre.leggauss(32)
QUAD_PANELS = 8
DIRECT_PANEL_CAP = 400_000
EULER_TERMS = 48
_CHUNK = 20_000

_J0_TABLE = special.jn_zeros(0, 200)


def j0_zeros(k):
    """First zeros j_{0,1..k}; McMahon's expansion beyond the table."""
    k = np.asarray(k)
    out = np.empty(k.shape)
    small = k <= 200
    out[small] = _J0_TABLE[k[small] - 1]
    b = (k[~small] - 0.25) * math.pi
    out[~small] = b + 1 / (8 * b) - 31 / (384 * b**3) + 3779 / (15360 * b**5)
    return out


def zeros(kind, r, k):
    """k-th positive zero (k >= 1, array) of the oscillating factor in xi."""
    k = np.asarray(k, dtype=np.int64)
    if kind == "cos":
        return (k - 0.5) * math.pi / r
    if kind == "sin":
        return k * math.pi / r
    return j0_zeros(k) / r


def weight(kind, r, xi):
    if kind == "cos":
        return np.cos(xi * r)
    if kind == "sin":
        return xi * np.sin(xi * r)
    return xi * special.j0(xi * r)


def _quad(f, a, b, scale):
    val, err = integrate.quad(f, a, b, epsabs=1e-17 * scale, epsrel=1e-13, limit=400)
    return val, err


def _gl_panels(f, edges):
    """Gauss-Legendre integrals over consecutive panels given their edges."""
    out = np.empty(len(edges) - 1)
    for start in range(0, len(edges) - 1, _CHUNK):
        e = edges[start : start + _CHUNK + 1]
        mid = 0.5 * (e[1:] + e[:-1])
        half = 0.5 * (e[1:] - e[:-1])
        x = mid[:, None] + half[:, None] * GL_NODES[None, :]
        out[start : start + len(e) - 1] = (f(x) @ GL_WEIGHTS) * half
    return out


def euler_tail(terms):
    """Sum of an alternating series from its first terms (Euler transform).

    With a_n = (-1)^n c_n, sum a_n = sum_j (-1)^j (Delta^j c)_0 / 2^(j+1).
    Returns (sum, error estimate from the last two partial sums).
    """
    a = np.asarray(terms, dtype=float)
    d = a * (-1.0) ** np.arange(a.size)
    total, prev = 0.0, math.nan
    for j in range(a.size):
        prev = total
        total += (-1.0) ** j * d[0] / 2.0 ** (j + 1)
        d = np.diff(d)
    return total, abs(total - prev)


def radial_integral(amp, kind, r, xi_max, xi_scale):
    """int_0^xi_max w(xi r) amp(xi) dxi with panels between zeros.

    ``xi_scale`` is the typical decay scale of ``amp`` (used to place the
    breakpoints near the origin when r = 0 or panels are wide).

    Returns (value, absolute error estimate).
    """

    def f(x):
        return weight(kind, r, x) * amp(x)

    # magnitude used for absolute tolerances
    if r == 0:
        pts = xi_scale * np.geomspace(1e-6, 1.0, 7)
        pts = np.concatenate([[0.0], pts[pts < xi_max], [xi_max]])
        total, err = 0.0, 0.0
        for a, b in zip(pts[:-1], pts[1:]):
            v, e = _quad(f, a, b, 1e-300)
            total += v
            err += e
        return total, err

    n_zeros = int(xi_max * r / math.pi) + 2
    # count zeros below xi_max exactly
    k_hi = n_zeros
    while zeros(kind, r, k_hi) < xi_max:
        k_hi += 1
    n_inside = k_hi - 1
    while n_inside > 0 and zeros(kind, r, n_inside) >= xi_max:
        n_inside -= 1

    scale = abs(_quad(lambda x: np.abs(weight(kind, r, x)) * amp(x), 0, min(xi_max, zeros(kind, r, 1)), 1e-300)[0])
    scale = max(scale, 1e-300)

    n_direct = min(n_inside, DIRECT_PANEL_CAP)
    edges = np.concatenate([[0.0], zeros(kind, r, np.arange(1, n_direct + 1))])
    if n_direct == n_inside:
        edges = np.concatenate([edges, [xi_max]])
    total, err = 0.0, 0.0
    nq = min(QUAD_PANELS, len(edges) - 1)
    # a panel much wider than the amplitude scale gets interior breakpoints
    for a, b in zip(edges[:nq], edges[1 : nq + 1]):
        inner = [a]
        if a == 0.0 and b > xi_scale:
            inner += list(xi_scale * np.geomspace(1e-6, 1.0, 7))
        inner = [x for x in inner if x < b] + [b]
        for lo, hi in zip(inner[:-1], inner[1:]):
            v, e = _quad(f, lo, hi, scale)
            total += v
            err += e
    if len(edges) - 1 > nq:
        panels = _gl_panels(f, edges[nq:])
        total += math.fsum(panels)
        err += 1e-15 * float(np.sum(np.abs(panels)))
    if n_direct < n_inside:
        k0 = n_direct
        ks = np.arange(k0, k0 + EULER_TERMS + 1)
        e2 = zeros(kind, r, np.maximum(ks, 1))
        terms = _gl_panels(f, e2)
        tail, terr = euler_tail(terms)
        if not math.isfinite(tail) or terr > 1e-6 * max(abs(total), scale):
            raise NumericError(
                "panel acceleration did not converge",
                {"kind": kind, "r": r, "xi_max": xi_max, "panels": n_inside, "tail_error": terr},
            )
        total += tail
        err += terr
    return total, err
