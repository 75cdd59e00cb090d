import math

import numpy as np
import pytest
from scipy.special import erf, erfc

from sbmlab import subordinator as sb
from sbmlab.errors import DomainError, PreconditionError
from sbmlab.exponents import LaplaceExponentSpec as S


def half_stable_density(t, s):
    return t * s**-1.5 * np.exp(-t * t / (4 * s)) / (2 * math.sqrt(math.pi))


@pytest.mark.parametrize("t", [0.01, 1.0, 10.0])
def test_half_stable_density_and_cdf(stable1, t):
    lw = sb.law(stable1, t)
    s = t * t * np.array([0.05, 0.3, 1.0, 4.0, 50.0])
    np.testing.assert_allclose(lw.density(s), half_stable_density(t, s), rtol=1e-7)
    # P(S_t <= s) = erfc(t / (2 sqrt s))
    np.testing.assert_allclose(lw.cdf(s), erfc(t / (2 * np.sqrt(s))), rtol=1e-7)


def test_far_tail_keeps_relative_accuracy(stable1):
    lw = sb.law(stable1, 1.0)
    s = 1e8
    assert lw.tail(s) == pytest.approx(erf(0.5 / math.sqrt(s)), rel=1e-6)


def test_quantile_inverts_cdf(stable1):
    lw = sb.law(stable1, 1.0)
    u = np.array([1e-9, 1e-3, 0.2, 0.5, 0.9, 1 - 1e-5])
    q = lw.quantile(u)
    assert np.all(np.diff(q) > 0)
    np.testing.assert_allclose(lw.cdf(q[1:5]), u[1:5], rtol=1e-4)


def test_table_mass_and_tail_interp(cgeo1):
    lw = sb.law(cgeo1, 0.1)
    assert lw.mass_drift < 1e-5
    s = np.geomspace(*lw.support_hint, 9)[1:-1]
    np.testing.assert_allclose(lw.tail_interp(s), lw.tail(s), rtol=1e-4)


def test_pure_drift_is_an_atom(drift1):
    lw = sb.law(drift1, 2.0)
    assert lw.atom == 2.0
    assert lw.cdf(1.999) == 0.0 and lw.cdf(2.0) == 1.0
    with pytest.raises(DomainError):
        lw.density(1.0)


def test_sampling_is_deterministic_per_stream(stable1):
    lw = sb.law(stable1, 1.0)
    a = sb.sample(lw, 1000, seed=7, stream=3)
    b = sb.sample(lw, 1000, seed=7, stream=3)
    c = sb.sample(lw, 1000, seed=7, stream=4)
    assert np.array_equal(a, b) and not np.array_equal(a, c)


def test_samples_follow_the_law(stable1):
    lw = sb.law(stable1, 1.0)
    xs = sb.sample(lw, 200_000, seed=1)
    p = erf(0.5)
    est = np.mean(xs >= 1.0)
    assert abs(est - p) < 4 * math.sqrt(p * (1 - p) / xs.size)


def test_tail_grid_respects_regime(stable1):
    g = sb.tail_grid(stable1, [1e-3, 1e-2, 0.1], [1e-3, 0.1, 1.0], epsilon=0.5)
    bound = 0.5 / math.e
    assert all(t * math.sqrt(1 / r) <= bound for t, r in g.pairs)
    assert len(g.pairs) < 9


def test_tail_grid_validation(stable1):
    bad = sb.TailCheckGrid(((1.0, 1e-2),), 0.5, 10**4)
    with pytest.raises(PreconditionError, match="outside the regime"):
        sb.check_two_sided(stable1, bad)
    few = sb.TailCheckGrid(((1e-3, 1.0),), 0.5, 100)
    with pytest.raises(PreconditionError, match="sample count"):
        few.validate(stable1)


def test_tail_checks_pass_for_stable(stable1):
    g = sb.tail_grid(stable1, np.geomspace(1e-4, 1e-1, 4), np.geomspace(1e-3, 1.0, 5))
    for check in (sb.check_upper_tail, sb.check_lower_tail, sb.check_interval_prob, sb.check_two_sided):
        rep = check(stable1, g)
        assert rep.passed, rep.summary()


def test_two_sided_refuses_pure_drift(drift1):
    g = sb.TailCheckGrid(((1e-3, 1.0),), 0.5, 10**4)
    with pytest.raises(PreconditionError):
        sb.check_two_sided(drift1, g)


def test_interval_tau_value():
    # 1 - (1 - e^-0.05)/(1 - e^-1) - e^(-1/2)
    assert sb.interval_tau() == pytest.approx(1 - (1 - math.exp(-0.05)) / (1 - math.exp(-1)) - math.exp(-0.5))
