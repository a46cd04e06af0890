import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.integrate import quad

from fracfd.kernel import Kernel, eval_kernel, make_kernel, normalization_constant, tail_integral


def test_fractional_value():
    assert eval_kernel(make_kernel(s=0.5), 0.0, 2.0) == pytest.approx(0.25, rel=1e-15)


def test_truncated_outside_horizon():
    k = make_kernel("truncated_fractional", s=0.5, epsilon=1.0)
    assert eval_kernel(k, 0.0, 2.0) == 0.0
    assert eval_kernel(k, 0.0, 0.5) == pytest.approx(0.5**-2)


def test_constant_ball():
    k = make_kernel("constant_ball", s=0.5, epsilon=1.0, constant=3.0)
    assert eval_kernel(k, 0.0, 0.9) == 3.0
    assert eval_kernel(k, 0.0, 1.1) == 0.0


def test_diagonal_rejected():
    with pytest.raises(ValueError):
        eval_kernel(make_kernel(s=0.3), 0.2, 0.2)


@pytest.mark.parametrize("kw", [
    dict(kind="fractional", s=1.2), dict(kind="fractional", s=0.5, epsilon=1.0),
    dict(kind="truncated_fractional", s=0.5), dict(kind="nope", s=0.5),
    dict(kind="constant_ball", s=0.5, epsilon=-1.0), dict(kind="fractional", s=0.5, constant=0.0),
])
def test_invalid_kernels(kw):
    with pytest.raises(ValueError):
        Kernel(**kw)


@settings(max_examples=200, deadline=None)
@given(st.floats(-5, 5), st.floats(-5, 5), st.sampled_from([0.1, 0.3, 0.5, 0.7, 0.9]),
       st.sampled_from(["fractional", "truncated_fractional", "constant_ball"]))
def test_symmetric_and_nonnegative(x, z, s, kind):
    if x == z:
        return
    k = make_kernel(kind, s, None if kind == "fractional" else 1.5)
    a, b = eval_kernel(k, x, z), eval_kernel(k, z, x)
    assert a == b and a >= 0


def test_symmetry_random_pairs():
    rng = np.random.default_rng(0)
    x, z = rng.uniform(-3, 3, (2, 1000))
    k = make_kernel(s=0.4)
    np.testing.assert_array_equal(eval_kernel(k, x, z), eval_kernel(k, z, x))


def test_truncated_with_large_horizon_matches_fractional():
    rng = np.random.default_rng(1)
    x, z = rng.uniform(-1, 2, (2, 500))
    a = eval_kernel(make_kernel(s=0.6), x, z)
    b = eval_kernel(make_kernel("truncated_fractional", s=0.6, epsilon=3.0), x, z)
    np.testing.assert_array_equal(a, b)


def test_tail_half_point():
    assert tail_integral(make_kernel(s=0.5), 0.5, (0.0, 1.0)) == pytest.approx(4.0, rel=1e-14)


def _tail_by_quadrature(s, x, a=0.0, b=1.0):
    left = quad(lambda z: (x - z) ** (-1 - 2 * s), -np.inf, a, epsabs=0, epsrel=1e-12, limit=500)[0]
    right = quad(lambda z: (z - x) ** (-1 - 2 * s), b, np.inf, epsabs=0, epsrel=1e-12, limit=500)[0]
    return left + right


@pytest.mark.parametrize("s", [0.1, 0.3, 0.5, 0.7, 0.9])
@pytest.mark.parametrize("x", [0.01, 0.2, 0.5, 0.77, 0.999])
def test_tail_matches_quadrature(s, x):
    got = tail_integral(make_kernel(s=s), x, (0.0, 1.0))
    assert got == pytest.approx(_tail_by_quadrature(s, x), rel=1e-8)


def test_tail_grows_toward_boundary():
    k = make_kernel(s=0.3)
    vals = [tail_integral(k, 10.0**-j, (0.0, 1.0)) for j in range(1, 12)]
    assert all(np.isfinite(vals)) and np.all(np.diff(vals) > 0)


def test_tail_outside_domain_rejected():
    with pytest.raises(ValueError):
        tail_integral(make_kernel(s=0.5), 1.0, (0.0, 1.0))


def test_truncated_tail_vanishes_far_from_complement():
    k = make_kernel("truncated_fractional", s=0.5, epsilon=0.2)
    assert tail_integral(k, 0.5, (0.0, 1.0)) == 0.0
    assert tail_integral(k, 0.1, (0.0, 1.0)) > 0.0


def test_normalization_half_is_one_over_pi():
    mp = mpmath.mpf
    ref = 4 ** mp("0.5") * mp("0.5") * mpmath.gamma(1) / (mpmath.sqrt(mpmath.pi) * mpmath.gamma(mp("0.5")))
    assert normalization_constant(0.5) == pytest.approx(float(ref), rel=1e-14)
    assert normalization_constant(0.5) == pytest.approx(1 / math.pi, rel=1e-14)


@pytest.mark.parametrize("s", [0.1, 0.2, 0.3, 0.4, 0.6, 0.7, 0.8, 0.9])
def test_normalization_against_mpmath(s):
    mp = mpmath.mpf(s)
    ref = 4**mp * mp * mpmath.gamma(mp + 0.5) / (mpmath.sqrt(mpmath.pi) * mpmath.gamma(1 - mp))
    got = normalization_constant(s)
    assert got > 0
    assert got == pytest.approx(float(ref), rel=1e-13)


def test_normalization_preset_and_default():
    assert make_kernel(s=0.5).constant == 1.0
    assert make_kernel(s=0.5, use_normalization_preset=True).constant == pytest.approx(1 / math.pi)
    with pytest.raises(ValueError):
        make_kernel(s=0.5, constant=2.0, use_normalization_preset=True)
    with pytest.raises(ValueError):
        normalization_constant(1.0)
