"""Gaver-Stehfest inversion of Laplace transforms on the real axis.

The weights alternate in sign and grow like 10**(0.9 M), so the sum is
formed in multiprecision arithmetic (gmpy2) whenever the transform can be
evaluated there.  A double-precision path with a short rule is kept for
transforms only available in floating point (interpolated tables).
"""

from __future__ import annotations

import math
from functools import lru_cache

import gmpy2
import numpy as np

LN2 = math.log(2.0)

# number of terms is 2*M
MP_ORDER = 20
FLOAT_ORDER = 7


def precision_bits(m):
    """Working precision for an order-m rule (about 2.2 m + 10 digits)."""
    return int((2.2 * m + 10) * 3.33) + 8


@lru_cache(maxsize=None)
def stehfest_weights(m, exact=True):
    """Weights V_1..V_2m of the Gaver-Stehfest rule.

    With ``exact`` the weights are Python integers/fractions converted to
    mpfr lazily by the caller; otherwise floats.
    """
    fac = math.factorial
    out = []
    for k in range(1, 2 * m + 1):
        acc = 0
        for j in range((k + 1) // 2, min(k, m) + 1):
            num = j**m * fac(2 * j)
            den = fac(m - j) * fac(j) * fac(j - 1) * fac(k - j) * fac(2 * j - k)
            acc += gmpy2.mpq(num, den)
        acc *= (-1) ** (m + k)
        out.append(acc)
    if exact:
        return tuple(out)
    return tuple(float(v) for v in out)


def invert_mp(kernel, s, m=MP_ORDER):
    """Invert transforms at the points ``s`` using mpfr arithmetic.

    ``kernel(lam)`` receives an mpfr node and returns a tuple of mpfr
    transform values; several transforms sharing the expensive part of the
    evaluation are inverted together.  Returns an array of shape
    (n_transforms, len(s)).
    """
    s = np.atleast_1d(np.asarray(s, dtype=float))
    bits = precision_bits(m)
    rows = None
    with gmpy2.context(gmpy2.get_context(), precision=bits):
        weights = [gmpy2.mpfr(v) for v in stehfest_weights(m)]
        ln2 = gmpy2.const_log2()
        for i, si in enumerate(s):
            a = ln2 / gmpy2.mpfr(float(si))
            acc = None
            for k, w in enumerate(weights, 1):
                vals = kernel(k * a)
                if acc is None:
                    acc = [w * v for v in vals]
                else:
                    for j, v in enumerate(vals):
                        acc[j] += w * v
            if rows is None:
                rows = np.empty((len(acc), len(s)))
            for j, v in enumerate(acc):
                rows[j, i] = float(a * v)
    return rows


def invert_float(kernel, s, m=FLOAT_ORDER):
    """Double-precision version of :func:`invert_mp`.

    ``kernel`` is vectorized: it takes an array of nodes and returns a tuple
    of arrays.
    """
    s = np.atleast_1d(np.asarray(s, dtype=float))
    w = np.array(stehfest_weights(m, exact=False))
    k = np.arange(1, 2 * m + 1)
    a = LN2 / s
    nodes = a[:, None] * k[None, :]
    vals = kernel(nodes)
    return np.array([a * (v @ w) for v in vals])
