import math

import pytest

from sbmlab import green
from sbmlab.errors import DomainError, PreconditionError
from sbmlab.exponents import LaplaceExponentSpec as S


def test_transience(stable1, cgamma):
    assert green.transience_check(stable1, 3)
    assert green.transience_check(stable1, 2)  # 1/y^2 * y: alpha = 1 < d = 2
    assert not green.transience_check(stable1, 1)
    assert green.transience_check(cgamma, 3)
    assert not green.transience_check(S("pure_drift", drift_b=1.0), 2)
    with pytest.raises(DomainError):
        green.transience_check(stable1, 0)


@pytest.mark.parametrize("r", [0.01, 1.0, 100.0])
def test_stable_green_is_riesz(stable1, r):
    # alpha = 1, d = 3: G(r) = 1 / (2 pi^2 r^2)
    est = green.green_numeric(stable1, r, 3)
    assert est.G == pytest.approx(1 / (2 * math.pi**2 * r * r), rel=1e-6)
    assert est.G_near > 0 and est.G_far > 0


def test_newtonian_potential(drift1):
    assert green.green_numeric(drift1, 1.0, 3).G == pytest.approx(1 / (4 * math.pi), rel=1e-6)


def test_split_does_not_matter(stable1):
    a = green.green_numeric(stable1, 1.0, 3).G
    b = green.green_numeric(stable1, 1.0, 3, split=5.0).G
    assert a == pytest.approx(b, rel=1e-6)


def test_recurrent_dimension_rejected(stable1):
    with pytest.raises(DomainError, match="recurrent"):
        green.green_numeric(stable1, 1.0, 1)
    with pytest.raises(PreconditionError):
        green.verify_green(stable1, [1.0], 1)
    with pytest.raises(DomainError):
        green.green_numeric(stable1, 0.0, 3)


def test_refined_envelope_only_for_conjugate_gamma(stable1, cgamma):
    assert green.refined_envelope(stable1, 0.1, 3) is None
    assert green.refined_envelope(cgamma, 0.1, 3) == pytest.approx(10 * math.log(10))


def test_verify_green_stable(stable1):
    rep = green.verify_green(stable1, [0.1, 1.0, 10.0], 3)
    assert rep.passed
    # G r^3 phi(r^-2) = 1 / (2 pi^2) exactly
    assert rep.constants["c"] == pytest.approx(1.0, abs=1e-5)
