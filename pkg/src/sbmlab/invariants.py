"""Invariant suites run by ``sbm-lab verify --all``.

Each suite returns a :class:`BoundCheckReport` whose constants are the
measured worst errors and whose ``passed`` flag applies the stated tolerance.
"""

from __future__ import annotations

import math

import numpy as np
from scipy import integrate

from .bernstein import evaluate, phi_inverse
from .exponents import LaplaceExponentSpec
from .green import green_numeric
from .heatkernel import EnvelopeConfig, chi_square_tail, envelope, p_fourier, p_subordinate, sbm_tail
from .reports import BoundCheckReport
from .subordinator import law, tail_prob


def default_families():
    return [
        LaplaceExponentSpec("stable", alpha=1.0),
        LaplaceExponentSpec("stable", alpha=0.6),
        LaplaceExponentSpec("conjugate_geometric", beta=1.0),
        LaplaceExponentSpec("conjugate_gamma"),
        LaplaceExponentSpec("geometric_stable", beta=1.0),
        LaplaceExponentSpec("pure_drift", drift_b=1.0),
    ]


def _radial_grid(spec, t, n=4000):
    scale = phi_inverse(spec, 1.0 / t) ** -0.5
    return scale * np.geomspace(1e-10, 1e10, n)


def _moment(spec, t, d):
    """Radial integrals of p(t, .) and p(t, .)^2 by trapezoid in log r."""
    r = _radial_grid(spec, t)
    p = p_subordinate(spec, t, r, d).value
    lr = np.log(r)
    if d == 1:
        mass = 2.0 * integrate.trapezoid(p * r, lr)
    else:
        mass = 4.0 * math.pi * integrate.trapezoid(p * r**3, lr)
    sq = 2.0 * integrate.trapezoid(p * p * r, lr)
    return r, p, mass, sq


def _times(spec, times):
    # geometric-stable: p(t, r) ~ r^(beta t - d) at 0, so small t puts
    # non-negligible mass below any fixed grid floor
    if spec.family == "geometric_stable":
        return tuple(4.0 / spec.beta * k for k in (1, 2))
    return times


def normalization(specs=None, times=(0.1, 1.0), tol=1e-3):
    """2 int p dr = 1 (d=1) and 4 pi int r^2 p dr = 1 (d=3)."""
    rows = []
    for spec in specs or default_families():
        for t in _times(spec, times):
            for d in (1, 3):
                _, _, mass, _ = _moment(spec, t, d)
                rows.append({"family": spec.label(), "t": t, "d": d, "mass": mass, "error": abs(mass - 1)})
    worst = max(rows, key=lambda row: row["error"])
    return BoundCheckReport("normalization", {"max_error": worst["error"], "tol": tol}, rows,
                            worst["error"] <= tol, worst)


def chapman_kolmogorov(specs=None, times=(0.1, 0.5), tol=1e-3):
    """p(2t, 0) = 2 int_0^inf p(t, r)^2 dr in d = 1."""
    rows = []
    for spec in specs or default_families():
        for t in _times(spec, times):
            _, _, _, sq = _moment(spec, t, 1)
            p2 = p_subordinate(spec, 2 * t, 0.0, 1).value
            err = abs(sq / p2 - 1)
            rows.append({"family": spec.label(), "t": t, "p_2t_0": p2, "convolution": sq, "error": err})
    worst = max(rows, key=lambda row: row["error"])
    return BoundCheckReport("chapman_kolmogorov", {"max_error": worst["error"], "tol": tol}, rows,
                            worst["error"] <= tol, worst)


def radial_monotonicity(specs=None, times=(0.01, 0.1, 1.0), dims=(1, 2, 3)):
    """p(t, r) >= 0 and nonincreasing in r on a log grid."""
    rows = []
    ok = True
    for spec in specs or default_families():
        for t in _times(spec, times):
            r = np.concatenate([[0.0], _radial_grid(spec, t, 400)[100:300]])
            for d in dims:
                p = p_subordinate(spec, t, r, d).value
                rise = float(np.max(np.diff(p) / np.maximum(p[:-1], 1e-300)))
                good = bool(np.all(p >= 0) and rise <= 1e-9)
                ok &= good
                rows.append({"family": spec.label(), "t": t, "d": d, "min_p": float(p.min()),
                             "max_relative_rise": rise, "pass": good})
    worst = max(rows, key=lambda row: row["max_relative_rise"])
    return BoundCheckReport("radial_monotonicity", {"max_relative_rise": worst["max_relative_rise"]},
                            rows, bool(ok), worst)


def doubling(specs=None, tol=1e-12):
    """phi(x lam) <= x phi(lam), H(x lam) <= x^2 H(lam), phi^-1(x y) >= x phi^-1(y), x >= 1."""
    rows = []
    ok = True
    for spec in specs or default_families():
        lam = np.geomspace(1e-4, 1e6, 200)
        for x in (2.0, 10.0):
            e0, e1 = evaluate(spec, lam), evaluate(spec, lam * x)
            v_phi = float(np.max(e1.phi / (x * e0.phi))) - 1
            with np.errstate(divide="ignore", invalid="ignore"):
                hr = np.where(e0.H > 0, e1.H / (x * x * e0.H), 0.0)
            v_h = float(np.max(hr)) - 1
            y = np.geomspace(1e-3, 60.0 / x if spec.family == "geometric_stable" else 1e3, 60)
            v_inv = float(np.max(x * phi_inverse(spec, y) / phi_inverse(spec, x * y))) - 1
            worst = max(v_phi, v_h, v_inv)
            good = worst <= tol
            ok &= good
            rows.append({"family": spec.label(), "x": x, "phi": v_phi, "H": v_h, "phi_inverse": v_inv,
                         "pass": good})
    worst = max(rows, key=lambda row: max(row["phi"], row["H"], row["phi_inverse"]))
    return BoundCheckReport("doubling", {"tol": tol}, rows, bool(ok), worst)


def inverse_round_trip(specs=None, tol=1e-12):
    """phi(phi^-1(y)) = y and phi^-1(phi(lam)) = lam."""
    rows = []
    for spec in specs or default_families():
        y = np.geomspace(1e-6, 1e6, 121)
        if spec.family == "geometric_stable":
            y = np.geomspace(1e-6, 200.0, 121)
        e1 = float(np.max(np.abs(spec.phi(phi_inverse(spec, y)) / y - 1)))
        lam = np.geomspace(1e-6, 1e6, 121)
        e2 = float(np.max(np.abs(phi_inverse(spec, spec.phi(lam)) / lam - 1)))
        rows.append({"family": spec.label(), "phi_of_inverse": e1, "inverse_of_phi": e2})
    worst = max(rows, key=lambda row: max(row["phi_of_inverse"], row["inverse_of_phi"]))
    err = max(worst["phi_of_inverse"], worst["inverse_of_phi"])
    # phi^-1(phi(lam)) loses accuracy where phi is flat; allow the conditioning
    return BoundCheckReport("inverse_round_trip", {"max_error": err, "tol": tol}, rows,
                            all(r["phi_of_inverse"] <= tol and r["inverse_of_phi"] <= 1e-9 for r in rows), worst)


def chi_square_sandwich(dims=(1, 2, 3), t0=1.0, t1=50.0, spread_max=10.0):
    """c^-1 t^(d/2-1) e^(-t/2) <= P(Y >= t) <= c t^(d/2-1) e^(-t/2) on [t0, t1]."""
    rows = []
    ok = True
    t = np.linspace(t0, t1, 200)
    for d in dims:
        ratio = chi_square_tail(d, t) / (t ** (d / 2 - 1) * np.exp(-t / 2))
        c = float(math.sqrt(ratio.max() / ratio.min()) * max(math.sqrt(ratio.max() * ratio.min()),
                                                            1 / math.sqrt(ratio.max() * ratio.min())))
        spread = float(ratio.max() / ratio.min())
        good = spread <= spread_max and bool(np.all(ratio * c >= 1 - 1e-12)) and bool(np.all(ratio <= c * (1 + 1e-12)))
        ok &= good
        rows.append({"d": d, "c": c, "spread": spread, "pass": good})
    worst = max(rows, key=lambda row: row["spread"])
    return BoundCheckReport("chi_square_sandwich", {"max_spread": worst["spread"]}, rows, bool(ok), worst)


def levy_tail_identity(alphas=(0.6, 1.0, 1.4), tol=1e-2):
    """Stable: phi(lam) = lam int_0^inf e^(-lam s) mu(s, inf) ds, and P(S_t >= r)/t -> mu(r, inf)."""
    rows = []
    ok = True
    for a in alphas:
        spec = LaplaceExponentSpec("stable", alpha=a)
        mu = spec.known_levy_tail
        rep_err = 0.0
        for lam in (0.1, 1.0, 10.0):
            val, _ = integrate.quad(lambda s: math.exp(-lam * s) * float(mu(s)), 0, np.inf, limit=200)
            rep_err = max(rep_err, abs(lam * val / float(spec.phi(lam)) - 1))
        t = 1e-4
        r = 1.0
        small_t = tail_prob(law(spec, t), r) / t
        lim_err = abs(small_t / float(mu(r)) - 1)
        good = rep_err <= 1e-8 and lim_err <= tol
        ok &= good
        rows.append({"alpha": a, "representation_error": rep_err, "small_time_error": lim_err, "pass": good})
    worst = max(rows, key=lambda row: row["small_time_error"])
    return BoundCheckReport("levy_tail_identity", {"tol": tol}, rows, bool(ok), worst)


def estimator_agreement(tol=1e-2):
    """p_fourier vs quadrature p_subordinate on 5x5 grids, d in {1, 3}."""
    cases = [
        (LaplaceExponentSpec("stable", alpha=1.0), (0.01, 1.0), (0.01, 3.0)),
        (LaplaceExponentSpec("stable", alpha=0.6), (0.05, 1.0), (0.01, 3.0)),
        (LaplaceExponentSpec("conjugate_geometric", beta=1.0), (0.1, 1.0), (0.01, 3.0)),
        (LaplaceExponentSpec("conjugate_gamma"), (0.1, 1.0), (0.01, 3.0)),
        (LaplaceExponentSpec("geometric_stable", beta=1.0), (5.0, 10.0), (0.1, 3.0)),
        (LaplaceExponentSpec("pure_drift", drift_b=1.0), (0.01, 1.0), (0.01, 3.0)),
    ]
    rows = []
    for spec, tr, rr in cases:
        for t in np.geomspace(*tr, 5):
            r = np.geomspace(*rr, 5)
            for d in (1, 3):
                ps = p_subordinate(spec, t, r, d).value
                for ri, pq in zip(r, ps):
                    pf, err = p_fourier(spec, t, ri, d, return_error=True)
                    # below the Fourier path's absolute accuracy there is nothing to compare
                    resolved = pf > 0 and err <= 1e-3 * pf
                    rows.append({"family": spec.label(), "t": float(t), "r": float(ri), "d": d,
                                 "p_fourier": pf, "p_subord": float(pq), "resolved": resolved,
                                 "error": abs(pq / pf - 1) if resolved else None})
    compared = [row for row in rows if row["resolved"]]
    counts = {}
    for row in compared:
        counts[row["family"]] = counts.get(row["family"], 0) + 1
    worst = max(compared, key=lambda row: row["error"])
    enough = min(counts.get(spec.label(), 0) for spec, _, _ in cases) >= 25
    consts = {"max_error": worst["error"], "tol": tol, "min_points_per_family": min(counts.values())}
    return BoundCheckReport("estimator_agreement", consts, rows, worst["error"] <= tol and enough, worst)


def tail_consistency(specs=None, tol=1e-3):
    """sbm_tail(t, r) against the radial integral of p over |x| >= r (d = 1, 3)."""
    rows = []
    for spec in specs or [LaplaceExponentSpec("stable", alpha=1.0), LaplaceExponentSpec("conjugate_geometric", beta=1.0)]:
        t = 0.5
        grid = _radial_grid(spec, t)
        for d in (1, 3):
            p = p_subordinate(spec, t, grid, d).value
            lr = np.log(grid)
            w = p * grid * (2.0 if d == 1 else 4.0 * math.pi * grid**2)
            # cumulative trapezoid from the far end
            seg = 0.5 * (w[1:] + w[:-1]) * np.diff(lr)
            outer = np.concatenate([np.cumsum(seg[::-1])[::-1], [0.0]])
            for r in (0.1, 0.5, 2.0):
                k = int(np.searchsorted(grid, r))
                frac = (math.log(r) - lr[k - 1]) / (lr[k] - lr[k - 1])
                radial = outer[k - 1] - frac * seg[k - 1]
                st = sbm_tail(spec, t, r, d)
                rows.append({"family": spec.label(), "t": t, "r": r, "d": d, "sbm_tail": st, "radial": radial,
                             "error": abs(st / radial - 1)})
    worst = max(rows, key=lambda row: row["error"])
    return BoundCheckReport("tail_consistency", {"max_error": worst["error"], "tol": tol}, rows,
                            worst["error"] <= tol, worst)


def boundary_coherence(specs=None, d=1, cfg=None):
    """Along t phi(r^-2) = 1 the two branches differ by at most e^(a_U) C^2."""
    cfg = cfg or EnvelopeConfig()
    rows = []
    ok = True
    for spec in specs or [LaplaceExponentSpec("stable", alpha=1.0), LaplaceExponentSpec("conjugate_geometric", beta=1.0)]:
        for t in np.geomspace(1e-3, 1.0, 7):
            r = phi_inverse(spec, 1.0 / t) ** -0.5
            env = envelope(spec, t, r, d, cfg)
            (nl, nu), (ol, ou) = env.branches["near_diagonal"], env.branches["off_diagonal"]
            factor = max(nu / ou, ou / nu, nl / ol, ol / nl)
            bound = math.exp(max(cfg.a_U, cfg.a_L)) * cfg.C**2
            good = factor <= bound
            ok &= good
            rows.append({"family": spec.label(), "t": float(t), "r": r, "factor": factor, "bound": bound,
                         "pass": good})
    worst = max(rows, key=lambda row: row["factor"])
    return BoundCheckReport("boundary_coherence", {"max_factor": worst["factor"]}, rows, bool(ok), worst)


def green_invariants(tol=1e-2):
    """Split additivity and r^(alpha-d) homogeneity for stable alpha=1, d=3."""
    spec = LaplaceExponentSpec("stable", alpha=1.0)
    g1 = green_numeric(spec, 1.0, 3)
    g_split = green_numeric(spec, 1.0, 3, split=2.0)
    rows = [{"check": "split", "error": abs(g_split.G / g1.G - 1)}]
    for c in (2.0, 4.0):
        gc = green_numeric(spec, c, 3)
        rows.append({"check": f"homogeneity_{c:g}", "error": abs(gc.G * c**2 / g1.G - 1)})
    rows.append({"check": "positive_parts", "error": 0.0 if g1.G_near >= 0 and g1.G_far >= 0 else math.inf})
    worst = max(rows, key=lambda row: row["error"])
    return BoundCheckReport("green_invariants", {"max_error": worst["error"], "tol": tol}, rows,
                            worst["error"] <= tol, worst)


SUITES = {
    "normalization": normalization,
    "chapman_kolmogorov": chapman_kolmogorov,
    "radial_monotonicity": radial_monotonicity,
    "doubling": doubling,
    "inverse_round_trip": inverse_round_trip,
    "chi_square_sandwich": chi_square_sandwich,
    "levy_tail_identity": levy_tail_identity,
    "estimator_agreement": estimator_agreement,
    "tail_consistency": tail_consistency,
    "boundary_coherence": boundary_coherence,
    "green_invariants": green_invariants,
}


def run_all(names=None):
    """Run the named suites (all by default) and return their reports."""
    return [SUITES[name]() for name in (names or SUITES)]
