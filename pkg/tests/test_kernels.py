import math
import random
import warnings

import gmpy2
import mpmath
import pytest
from gmpy2 import mpfr

from sogkit import (
    bessel_k,
    custom_kernel,
    ewald_kernel,
    exponential_kernel,
    gaussian_kernel,
    imq_kernel,
    localize,
    make_kernel,
    matern_kernel,
)
from sogkit.errors import DomainError, InvalidParameter
from sogkit.numerics import workprec


def _mp(x):
    """Exact conversion of an mpfr to an mpmath value."""
    num, den = x.as_integer_ratio()
    return mpmath.mpf(num) / den


def _close(a, b, rel):
    return abs(float(a) - float(b)) <= rel * abs(float(b))


def test_gaussian_values():
    k = gaussian_kernel()
    assert k.eval(0.0) == 1
    assert math.isclose(float(gaussian_kernel(1).eval(1.0)), math.exp(-1), rel_tol=1e-15)
    with workprec(256):
        assert k.eval(mpfr(1)) == gmpy2.exp(mpfr(-100))


def test_imq_values():
    k = imq_kernel()
    assert math.isclose(float(k.eval(0.0)), math.sqrt(2), rel_tol=1e-15)
    with workprec(200):
        assert abs(k.eval(gmpy2.sqrt(mpfr(0.5))) - 1) < mpfr(2) ** -195
    assert math.isclose(float(k.eval(1.0)), 1 / math.sqrt(1.5), rel_tol=1e-15)


def test_ewald_values_and_taylor_branch():
    k = ewald_kernel()
    assert math.isclose(float(k.eval(0.0)), 2 / math.sqrt(math.pi), rel_tol=1e-15)
    assert math.isclose(float(k.eval(1.0)), math.erf(1.0), rel_tol=1e-15)
    with workprec(256):
        x = mpfr("1e-8")
        y2 = x * x
        ref = 2 / gmpy2.sqrt(gmpy2.const_pi()) * (1 - y2 / 3 + y2 * y2 / 10)
        assert abs(k.eval(x) - ref) < mpfr(10) ** -30 * ref


def test_exponential_values():
    k = exponential_kernel()
    assert k.eval(0.0) == 1
    assert math.isclose(float(k.eval(math.log(2))), 0.5, rel_tol=1e-15)
    assert math.isclose(float(k.eval(1.0)), math.exp(-1), rel_tol=1e-15)
    assert float(k.fprime_at_zero) == -1


def test_matern_values():
    k = matern_kernel(2)
    assert k.eval(0.0) == 1
    with workprec(200):
        mpmath.mp.prec = 200
        ref = 2 * mpmath.besselk(2, 2)
        assert abs(_mp(k.eval(mpfr(1))) - ref) < mpmath.mpf(2) ** -190
    # the analytic value is 2 K_2(2), about 0.50752
    assert round(float(k.eval(1.0)), 5) == 0.50752


def test_matern_half_is_exponential():
    k = matern_kernel(0.5)
    with workprec(128):
        for x in ("0.01", "0.3", "1", "4.5"):
            xm = mpfr(x)
            assert abs(k.eval(xm) - gmpy2.exp(-xm)) < mpfr(2) ** -120
    assert float(k.fprime_at_zero) == -1
    assert matern_kernel(0.25).fprime_at_zero is None


@pytest.mark.parametrize("bits", [53, 256, 880])
def test_bessel_k_against_mpmath(bits):
    rng = random.Random(bits)
    mpmath.mp.prec = bits + 40
    with workprec(bits):
        for _ in range(12):
            nu = rng.choice([0, 1, 2, 3, 0.5, 1.25, 2.7])
            x = mpfr(rng.choice([rng.uniform(0.01, 2), rng.uniform(2, 40)]))
            got = bessel_k(nu, x)
            ref = mpmath.besselk(mpmath.mpf(repr(nu)), _mp(x))
            assert abs(_mp(got) - ref) <= abs(ref) * mpmath.mpf(2) ** (2 - bits)


def test_bessel_k_half_closed_form_and_recurrence():
    with workprec(256):
        for x in (mpfr("0.1"), mpfr(1), mpfr(7)):
            ref = gmpy2.sqrt(gmpy2.const_pi() / (2 * x)) * gmpy2.exp(-x)
            assert abs(bessel_k(0.5, x) - ref) < ref * mpfr(2) ** -250
        for nu, x in ((1.5, mpfr("0.7")), (2, mpfr(3)), (3.25, mpfr(12))):
            lhs = bessel_k(nu + 1, x)
            rhs = bessel_k(nu - 1, x) + 2 * mpfr(nu) / x * bessel_k(nu, x)
            assert abs(lhs - rhs) < lhs * mpfr(2) ** -245
    assert round(float(bessel_k(2, 1.0)), 5) == 1.62484


def test_localize_window():
    one = custom_kernel("one", lambda x: mpfr(1), 1, decays=False)
    k = localize(one, 1, 1)
    assert k.eval(0.5) == 1
    assert k.eval(3.0) == 0
    with workprec(128):
        assert abs(k.eval(mpfr(1.5)) - mpfr(0.5)) < mpfr(2) ** -120


def test_localize_is_smooth_at_the_joins():
    k = localize(imq_kernel(), 1, 1)
    with workprec(300):
        h = mpfr(2) ** -30
        for x0 in (mpfr(1), mpfr(2)):
            f = [k.eval(x0 + j * h) for j in (-2, -1, 0, 1, 2)]
            left = (f[2] - 2 * f[1] + f[0]) / h ** 2
            right = (f[4] - 2 * f[3] + f[2]) / h ** 2
            assert abs(left - right) < 1e-6


def test_custom_kernel_decay_warning():
    with pytest.warns(UserWarning, match="declared decaying"):
        custom_kernel("flat", lambda x: mpfr(1), 1)
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        custom_kernel("decay", lambda x: gmpy2.exp(-x), 1)


def test_invalid_parameters_and_domain():
    with pytest.raises(InvalidParameter):
        gaussian_kernel(-1)
    with pytest.raises(InvalidParameter):
        matern_kernel(0)
    with pytest.raises(InvalidParameter):
        make_kernel("nope")
    with pytest.raises(InvalidParameter):
        make_kernel("gauss", alpha=1)
    with pytest.raises(DomainError):
        imq_kernel().eval(-1.0)


def test_make_kernel_aliases_and_params():
    assert make_kernel("gaussian").params == {"h": gaussian_kernel().params["h"]}
    assert make_kernel("matern", nu=0.5).descriptor() == {"kernel": "matern",
                                                          "params": {"nu": "0.5"}}
    assert gaussian_kernel(0.1).descriptor()["params"]["h"] == "0.1"
