import numpy as np
import pytest

from sbmlab.calibration import EnvelopeCalibrator, bounds_from_terms, envelope_terms
from sbmlab.heatkernel import KernelGrid, envelope, EnvelopeConfig, kernel_rows


@pytest.fixture(scope="module")
def stable_data(stable1):
    g = KernelGrid.log((1e-3, 1.0), (1e-2, 10.0), 6, 6)
    rows = kernel_rows(stable1, g, 1)
    X = np.array([[r["t"], r["r"]] for r in rows])
    y = np.array([r["p"] for r in rows])
    return X, y


def test_terms_match_envelope(stable1):
    cfg = EnvelopeConfig(C=2.0, a_L=0.7, a_U=1.3)
    for t, r in [(1e-3, 1.0), (0.5, 0.1), (1e-2, 0.3)]:
        terms = envelope_terms(stable1, np.array([t]), np.array([r]), 1)
        lo, up = bounds_from_terms(terms, 2.0, 0.7, 1.3)
        env = envelope(stable1, t, r, 1, cfg)
        assert lo[0] == pytest.approx(env.lower) and up[0] == pytest.approx(env.upper)


def test_fit_sandwiches_data(stable1, stable_data):
    X, y = stable_data
    cal = EnvelopeCalibrator(spec=stable1, d=1).fit(X, y)
    assert cal.holds_
    assert np.all(cal.lower_ <= y) and np.all(y <= cal.upper_)
    assert 1 <= cal.C_ <= 10
    assert 1e-3 <= cal.a_L_ <= cal.a_U_ * 10
    assert cal.score(X, y) == 1.0
    env = cal.predict(X)
    np.testing.assert_allclose(env[:, 0], cal.lower_, rtol=1e-11)
    np.testing.assert_allclose(env[:, 1], cal.upper_, rtol=1e-11)


def test_fit_is_deterministic(stable1, stable_data):
    X, y = stable_data
    a = EnvelopeCalibrator(spec=stable1, d=1).fit(X, y)
    b = EnvelopeCalibrator(spec=stable1, d=1).fit(X, y)
    assert (a.C_, a.a_L_, a.a_U_) == (b.C_, b.a_L_, b.a_U_)


def test_params_round_trip(stable1):
    cal = EnvelopeCalibrator(spec=stable1, d=3, form="classical")
    assert cal.get_params()["form"] == "classical"
    assert cal.set_params(d=2).d == 2


def test_rejects_nonpositive_kernel(stable1):
    X = np.array([[0.1, 0.1], [0.2, 0.1]])
    with pytest.raises(ValueError):
        EnvelopeCalibrator(spec=stable1).fit(X, np.array([1.0, 0.0]))
