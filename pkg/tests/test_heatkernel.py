import math
import warnings

import numpy as np
import pytest
from scipy.special import erfc

from sbmlab import heatkernel as hk
from sbmlab.errors import DomainError, PreconditionError
from sbmlab.exponents import LaplaceExponentSpec as S


def cauchy(t, r, d):
    # p(t, x) for phi = sqrt(lam): Gamma((d+1)/2) pi^-(d+1)/2 t / (t^2 + r^2)^((d+1)/2)
    c = math.gamma((d + 1) / 2) / math.pi ** ((d + 1) / 2)
    return c * t / (t * t + r * r) ** ((d + 1) / 2)


@pytest.mark.parametrize("d", [1, 2, 3])
@pytest.mark.parametrize("t, r", [(1e-2, 0.0), (1e-2, 0.3), (1.0, 1.0), (0.5, 7.0)])
def test_fourier_cauchy(stable1, d, t, r):
    assert hk.p_fourier(stable1, t, r, d) == pytest.approx(cauchy(t, r, d), rel=1e-7)


@pytest.mark.parametrize("d", [1, 2, 3])
def test_fourier_and_subordination_gaussian(drift1, d):
    for t, r in [(0.1, 0.0), (1.0, 0.5), (2.0, 3.0)]:
        g = (4 * math.pi * t) ** (-d / 2) * math.exp(-r * r / (4 * t))
        assert hk.p_fourier(drift1, t, r, d) == pytest.approx(g, rel=1e-9)
        assert hk.p_subordinate(drift1, t, r, d).value == pytest.approx(g, rel=1e-12)


def test_fourier_domain_errors(stable1, geo1):
    with pytest.raises(DomainError, match="d in"):
        hk.p_fourier(stable1, 1.0, 1.0, 4)
    with pytest.raises(DomainError):
        hk.p_fourier(stable1, 0.0, 1.0, 1)
    # zero-order exponent: the amplitude decays too slowly at small t
    with pytest.raises(DomainError, match="decays like"):
        hk.p_fourier(geo1, 0.5, 0.1, 3)
    with pytest.raises(PreconditionError):
        hk.p_fourier(S("stable", alpha=1.0, drift_b=1.0), 1.0, 1.0, 1)


def test_subordination_quadrature_vectorized(stable1):
    r = np.array([0.0, 0.1, 1.0, 10.0])
    est = hk.p_subordinate(stable1, 0.3, r, 3)
    np.testing.assert_allclose(est.value, cauchy(0.3, r, 3), rtol=1e-4)
    assert est.value.shape == r.shape


def test_monte_carlo_reproducible_and_within_error(stable1):
    a = hk.p_subordinate(stable1, 1.0, 0.5, 1, mode="monte_carlo", n=50_000, seed=3)
    b = hk.p_subordinate(stable1, 1.0, 0.5, 1, mode="monte_carlo", n=50_000, seed=3)
    assert a == b
    assert abs(a.value - cauchy(1.0, 0.5, 1)) < 4 * a.stderr


def test_monte_carlo_variance_warning(geo1):
    # S_t^(-3/2) has infinite variance near r = 0 for the zero-order family
    with pytest.warns(hk.VarianceWarning):
        hk.p_subordinate(geo1, 1.0, 0.01, 3, mode="monte_carlo", n=20_000)


def test_subordinate_rejects_bad_input(stable1):
    with pytest.raises(DomainError):
        hk.p_subordinate(stable1, 1.0, -1.0, 1)
    with pytest.raises(DomainError):
        hk.p_subordinate(stable1, 1.0, 1.0, 1, mode="exact")


def test_kernel_value_prefers_fourier(stable1, geo1):
    p, pf, ps = hk.kernel_value(stable1, 0.1, 0.2, 1)
    assert pf is not None and ps is None and p == pf
    p, pf, ps = hk.kernel_value(geo1, 0.5, 0.1, 3)
    assert pf is None and p == ps


def test_chi_square_tail_values():
    assert hk.chi_square_tail(2, 2.0) == pytest.approx(math.exp(-1))
    assert hk.chi_square_tail(1, 4.0) == pytest.approx(erfc(math.sqrt(2)))
    with pytest.raises(DomainError):
        hk.chi_square_tail(1, -1.0)


def test_sbm_tail_cauchy(stable1):
    # d = 1 Cauchy: P(|X_t| >= r) = 1 - (2/pi) arctan(r/t)
    assert hk.sbm_tail(stable1, 1.0, 1.0, 1) == pytest.approx(0.5, abs=5e-6)
    assert hk.sbm_tail(stable1, 0.1, 2.0, 1) == pytest.approx(1 - 2 / math.pi * math.atan(20), rel=1e-4)


def test_sbm_tail_paths_agree(cgeo1):
    a = hk.sbm_tail(cgeo1, 0.1, 0.5, 2, path="generic")
    b = hk.sbm_tail(cgeo1, 0.1, 0.5, 2, path="exp")
    assert a == pytest.approx(b, rel=2e-5)
    with pytest.raises(DomainError):
        hk.sbm_tail(cgeo1, 0.1, 0.5, 3, path="exp")


def test_sbm_tail_gaussian(drift1):
    assert hk.sbm_tail(drift1, 1.0, 2.0, 2) == pytest.approx(math.exp(-1))


def test_envelope_config_validation():
    with pytest.raises(DomainError):
        hk.EnvelopeConfig(C=0.5)
    with pytest.raises(DomainError):
        hk.EnvelopeConfig(a_L=0.0)
    with pytest.raises(DomainError):
        hk.EnvelopeConfig(kappa=1.0)


def test_envelope_regimes(stable1):
    cfg = hk.EnvelopeConfig(C=2.0)
    near = hk.envelope(stable1, 1.0, 0.1, 1, cfg)
    assert near.regime == "near_diagonal"
    assert near.upper / near.lower == pytest.approx(4.0)
    far = hk.envelope(stable1, 1e-3, 1.0, 1, cfg)
    assert far.regime == "off_diagonal"
    assert far.lower <= cauchy(1e-3, 1.0, 1) <= far.upper
    # on the boundary t phi(r^-2) = 1 both branches are kept
    tie = hk.envelope(stable1, 0.5, 0.5, 1, cfg)
    assert set(tie.branches) == {"near_diagonal", "off_diagonal"}


def test_envelope_alt_variant_is_looser(cgeo1):
    env = hk.envelope(cgeo1, 1e-3, 0.5, 3, hk.EnvelopeConfig(C=3.0))
    assert env.lower_alt <= env.lower and env.upper_alt >= env.upper


def test_classical_form_only_for_stable(stable1, cgeo1):
    env = hk.envelope(stable1, 1e-2, 1.0, 1, form="classical")
    assert env.upper == pytest.approx(min(1e4**0.5, 1e-2 * 1.0))
    with pytest.raises(PreconditionError):
        hk.envelope(cgeo1, 1e-2, 1.0, 1, form="classical")
    with pytest.raises(DomainError):
        hk.off_diagonal_bounds(stable1, 1.0, 0.0, 1, hk.EnvelopeConfig())


def test_grids():
    g = hk.KernelGrid.log((1e-3, 1.0), (1e-2, 1.0), 4, 3, with_zero=True)
    assert g.r_values[0] == 0.0 and len(g.points()) == 12
    with pytest.raises(DomainError):
        hk.KernelGrid((), (1.0,))
    with pytest.raises(DomainError):
        hk.PointGrid(((0.0, 1.0),))


def test_gates_reject_geometric_stable(geo1):
    g = hk.KernelGrid.log((1e-2, 1.0), (1e-2, 1.0), 3, 3)
    with pytest.raises(PreconditionError, match="H must satisfy"):
        hk.verify_main_theorem(geo1, g, 1)


def test_gates_reject_points_beyond_eta(cgamma):
    # lambda_U = 2 for conjugate_gamma: r must stay below eta / sqrt(2)
    g = hk.PointGrid(((0.1, 0.1), (0.1, 1.0)))
    with pytest.raises(PreconditionError) as info:
        hk.check_gates(cgamma, g, hk.EnvelopeConfig())
    assert info.value.offending == [(0.1, 1.0)]


def test_main_theorem_small_grid(stable1):
    g = hk.KernelGrid.log((1e-3, 1.0), (1e-2, 10.0), 5, 5)
    rep = hk.verify_main_theorem(stable1, g, 1)
    assert rep.passed, rep.summary()
    assert all(row["ratio_lo"] >= 1 - 1e-9 and row["ratio_hi"] <= 1 + 1e-9 for row in rep.rows)


def test_near_diagonal_rejects_off_points(stable1):
    with pytest.raises(PreconditionError):
        hk.verify_near_diagonal(stable1, hk.PointGrid(((1e-3, 1.0),)), 1)


def test_blowup_needs_decreasing_sequence(geo1):
    with pytest.raises(DomainError):
        hk.blowup_probe(geo1, 3, 1.0, (0.1, 0.2))
    with pytest.raises(PreconditionError):
        hk.blowup_probe(geo1, 1, 1.0)


def test_blowup_contrast_for_stable(stable1):
    rep = hk.blowup_probe(stable1, 3)
    assert rep.name == "bounded" and rep.passed


def test_sbm_tail_exp_path_cauchy_d2(stable1):
    # d = 2 Cauchy: P(|X_t| >= r) = t / sqrt(t^2 + r^2)
    assert hk.sbm_tail(stable1, 1.0, 1.0, 2, path="exp") == pytest.approx(1 / math.sqrt(2), rel=1e-9)


def test_explicit_large_scale_form(cgeo1):
    g = hk.KernelGrid.log((0.6, 100.0), (0.6, 100.0), 5, 5)
    rep = hk.verify_example_form(cgeo1, g, 1, scale="large")
    assert rep.passed, rep.summary()
    with pytest.raises(PreconditionError, match="explicit-form region"):
        hk.verify_example_form(cgeo1, hk.KernelGrid.log((0.1, 1.0), (0.6, 1.0), 2, 2), 1, scale="large")


def test_explicit_form_only_for_conjugate_geometric(stable1):
    with pytest.raises(PreconditionError):
        hk.verify_example_form(stable1, hk.KernelGrid.log((1e-3, 1e-2), (1e-2, 1e-1), 2, 2), 1)


def test_classical_form_stable(stable1):
    g = hk.KernelGrid.log((1e-3, 1.0), (1e-2, 10.0), 5, 5)
    rep = hk.verify_classical(stable1, g, 1)
    assert rep.passed and rep.constants["C"] <= 10
