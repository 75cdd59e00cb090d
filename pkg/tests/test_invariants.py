import pytest

from sbmlab import invariants

FAST = ["doubling", "inverse_round_trip", "chi_square_sandwich", "levy_tail_identity",
        "tail_consistency", "boundary_coherence"]


@pytest.mark.parametrize("name", FAST)
def test_fast_suites_pass(name):
    rep = invariants.SUITES[name]()
    assert rep.passed, rep.summary()


def test_suite_names():
    assert set(FAST) < set(invariants.SUITES)
    for required in ("normalization", "chapman_kolmogorov", "radial_monotonicity"):
        assert required in invariants.SUITES


def test_run_all_subset():
    reps = invariants.run_all(["doubling", "inverse_round_trip"])
    assert [r.name for r in reps] == ["doubling", "inverse_round_trip"]


def test_unknown_suite():
    with pytest.raises(KeyError):
        invariants.run_all(["nope"])
