import json
import math

import numpy as np
import pytest

from sbmlab.errors import ConfigError, DomainError
from sbmlab.exponents import LaplaceExponentSpec as S
from sbmlab.exponents import load_spec, spec_from_dict

# (phi, phi', phi'', H) at lam = 0.01, 1, 100, computed with mpmath at 30 digits
FROZEN = {
    ("stable", 0.6, None): [
        (0.251188643150958, 7.535659294528741, -527.4961506170118, 0.1758320502056706),
        (1.0, 0.3, -0.21, 0.7),
        (3.9810717055349722, 0.011943215116604917, -8.360250581623441e-05, 2.7867501938744805),
    ],
    ("conjugate_geometric", None, 1.0): [
        (0.1049205868725707, 5.4882725283094995, -250.55055004544167, 0.05003786158947571),
        (1.4426950408889634, 0.9223527956375615, -0.27508021816963923, 0.5203422452514019),
        (41.703239142424636, 0.3379796571074164, -0.0005267553965780113, 7.905273431682991),
    ],
    ("conjugate_gamma", None, None): [
        (0.004991708071305288, 0.4983457287067951, -0.1641979625668626, 8.25078423733701e-06),
        (0.4426950408889634, 0.4020105503861595, -0.05963638217575313, 0.0406844905028039),
        (20.667906533553168, 0.17019409765763108, -0.0002700002805372159, 3.64849676779006),
    ],
    ("geometric_stable", None, 1.0): [
        (0.09531017980432487, 4.545454545454546, -247.93388429752065, 0.0498556343497794),
        (0.6931471805599453, 0.25, -0.1875, 0.4431471805599453),
        (2.3978952727983707, 0.004545454545454545, -4.338842975206611e-05, 1.943349818252916),
    ],
}


@pytest.mark.parametrize("key", list(FROZEN))
def test_closed_forms_match_frozen_values(key):
    fam, alpha, beta = key
    sp = S(fam, alpha=alpha, beta=beta)
    lam = np.array([0.01, 1.0, 100.0])
    got = np.array(sp.derivatives(lam)).T
    np.testing.assert_allclose(got, np.array(FROZEN[key]), rtol=1e-9)


def test_conjugate_gamma_series_branch_is_continuous(cgamma):
    lam = np.array([0.05 * (1 - 1e-9), 0.05 * (1 + 1e-9)])
    a, b = cgamma.phi(lam)
    assert abs(a / b - 1) < 1e-8
    # phi(lam) ~ lam / 2 at the origin
    assert cgamma.phi(np.array([1e-8]))[0] == pytest.approx(5e-9, rel=1e-7)


def test_drift_adds_linear_term():
    sp = S("stable", alpha=1.0, drift_b=2.0)
    assert float(sp.phi(4.0)) == pytest.approx(2.0 + 8.0)


@pytest.mark.parametrize(
    "kw, msg",
    [
        ({"family": "stable", "alpha": 2.5}, "alpha out of (0,2)"),
        ({"family": "stable"}, "alpha out of (0,2)"),
        ({"family": "geometric_stable", "beta": 0.0}, "beta out of (0,2]"),
        ({"family": "conjugate_geometric", "beta": 2.0}, "beta out of (0,2)"),
        ({"family": "pure_drift"}, "pure_drift needs drift_b > 0"),
        ({"family": "stable", "alpha": 1.0, "drift_b": -1.0}, "drift_b"),
        ({"family": "gamma"}, "unknown family"),
        ({"family": "conjugate_gamma", "alpha": 1.0}, "not a parameter"),
    ],
)
def test_invalid_specs_raise(kw, msg):
    with pytest.raises(ConfigError, match=msg.replace("(", r"\(").replace(")", r"\)").replace("]", r"\]")):
        S(**kw)


def test_lambda_must_be_positive(stable1):
    with pytest.raises(DomainError):
        stable1.phi(np.array([1.0, 0.0]))


def test_spec_round_trip_through_dict(tmp_path):
    for sp in (S("stable", alpha=0.6), S("conjugate_geometric", beta=1.5), S("pure_drift", drift_b=3.0)):
        assert spec_from_dict(sp.to_dict()) == sp
    path = tmp_path / "s.json"
    path.write_text(json.dumps({"family": "geometric_stable", "beta": 2}))
    assert load_spec(path) == S("geometric_stable", beta=2.0)


def test_spec_from_dict_rejects_unknown_and_bad_types():
    with pytest.raises(ConfigError, match="unknown spec keys"):
        spec_from_dict({"family": "stable", "alpha": 1.0, "gamma": 2})
    with pytest.raises(ConfigError, match="must be a number"):
        spec_from_dict({"family": "stable", "alpha": "1"})
    with pytest.raises(ConfigError, match="needs a 'family'"):
        spec_from_dict({"alpha": 1.0})


def test_user_table_reproduces_tabulated_function():
    lam = np.geomspace(1e-2, 1e4, 60)
    sp = S("user_table", points=tuple(zip(lam, np.sqrt(lam))))
    x = np.geomspace(2e-2, 5e3, 17)
    np.testing.assert_allclose(sp.phi(x), np.sqrt(x), rtol=1e-4)
    with pytest.raises(DomainError, match="outside the table span"):
        sp.phi(1e5)


def test_hypothesis_table():
    assert S("stable", alpha=1.0).hypotheses["classical"]
    assert not S("geometric_stable", beta=1.0).hypotheses["phi_L"]
    assert not S("pure_drift", drift_b=1.0).hypotheses["H_U_lt2"]
    assert S("conjugate_gamma").lambda_thresholds == (0.0, 2.0)


def test_known_levy_tail_only_for_stable(stable1, cgeo1):
    # alpha = 1: mu(r, inf) = r^(-1/2) / Gamma(1/2)
    assert float(stable1.known_levy_tail(1.0)) == pytest.approx(1 / math.sqrt(math.pi))
    assert cgeo1.known_levy_tail is None


def test_user_table_rejects_convex_and_unsorted():
    lam = np.geomspace(1e-2, 1e2, 10)
    with pytest.raises(ConfigError, match="not concave"):
        S("user_table", points=tuple(zip(lam, lam**1.5)))
    with pytest.raises(ConfigError, match="strictly increasing"):
        S("user_table", points=tuple(zip(lam[::-1], np.sqrt(lam))))
