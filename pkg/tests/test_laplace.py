import math

import gmpy2
import numpy as np
import pytest

from sbmlab.laplace import invert_float, invert_mp, stehfest_weights


def test_weights_sum_to_zero():
    for m in (4, 7, 10):
        assert sum(stehfest_weights(m)) == 0


def test_order_one_weights():
    # m = 1: V_1 = 2, V_2 = -2
    assert [int(v) for v in stehfest_weights(1)] == [2, -2]


def test_mp_inverts_exponential_and_half_stable():
    s = np.array([0.1, 1.0, 5.0])

    def kernel(lam):
        return (1 / (lam + 1), gmpy2.exp(-gmpy2.sqrt(lam)))

    exp_part, stable_part = invert_mp(kernel, s, m=20)
    np.testing.assert_allclose(exp_part, np.exp(-s), rtol=1e-10)
    # e^{-sqrt(lam)} is the transform of the 1/2-stable density at t = 1
    dens = s**-1.5 * np.exp(-1 / (4 * s)) / (2 * math.sqrt(math.pi))
    np.testing.assert_allclose(stable_part, dens, rtol=1e-8)


def test_float_rule_is_rough_but_close():
    s = np.array([0.5, 1.0, 2.0])
    (got,) = invert_float(lambda lam: (1 / (lam + 1),), s)
    np.testing.assert_allclose(got, np.exp(-s), rtol=1e-3)


@pytest.mark.parametrize("m", [10, 20, 30])
def test_higher_order_is_not_worse(m):
    s = np.array([2.0])
    (got,) = invert_mp(lambda lam: (1 / (lam * lam + 1),), s, m=m)
    assert abs(got[0] - math.sin(2.0)) < 1e-2
