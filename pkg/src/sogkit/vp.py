"""Sum-of-Gaussians approximation through the de la Vallee-Poussin sum.

The substitution ``x = sqrt(-n_c log((1 + cos t)/2))`` turns a radial
kernel f on [0, inf) into an even, 2 pi periodic function
``phi(t) = f(x(t))`` with ``phi(pi) = 0``. Its de la Vallee-Poussin (VP)
mean of order n,

    V_n = sum_{l<=n} a_l cos(l t) + sum_{l=1}^{n-1} (1 - l/n) a_{n+l} cos((n+l) t),

is a cosine polynomial of degree 2n-1. Since ``cos(m t) = T_m(u)`` with
``u = 2 exp(-x^2/n_c) - 1``, expanding the Chebyshev polynomials T_m gives
a sum of 2n Gaussians with the exponent ladder t_j = j/n_c:

    f(x) ~ f_p(x) = sum_{j=0}^{2n-1} w_j exp(-j x^2 / n_c).

The narrowest Gaussian has width s_min = sqrt(n_c/(2n-1)), so n_c sets a
floor on the bandwidth.
"""
import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from typing import Optional, Union

import gmpy2
import numpy as np
from gmpy2 import mpfr

from .errors import DomainError, InvalidParameter, LengthMismatch, NonDecayingKernel, QuadratureNotConverged
from .kernels import KernelSpec, _coerce_param, format_param
from .numerics import default_precision, hp, parse_param, precision_of, workprec

__all__ = [
    "VpConfig",
    "FourierCoeffs",
    "SogApproximant",
    "default_nc",
    "map_t_to_x",
    "map_x_to_t",
    "fourier_cosine_coeffs",
    "vp_weights",
    "vp_matrix",
    "build_sog",
    "evaluate",
    "evaluate_many",
    "evaluate_chebyshev_form",
    "value_at_zero",
]


def default_nc(n):
    """Bandwidth parameter ceil(n/4), which keeps s_min near 1/sqrt(8)."""
    return Fraction(-(-int(n) // 4))


@dataclass(frozen=True)
class VpConfig:
    """Construction settings.

    Parameters
    ----------
    n : int
        Half-order; the approximant has p = 2n Gaussians.
    n_c : real, optional
        Bandwidth parameter, stored as an exact rational. Defaults to
        ``ceil(n/4)``.
    quadrature_points : int or "adaptive"
        "adaptive" integrates the coefficients with tanh-sinh quadrature,
        halving the step until they settle. An integer N selects the
        N-interval trapezoid rule (a type-I DCT) with no convergence check.
    precision_bits : int or "auto"
        "auto" means `default_precision(n)`.
    """

    n: int
    n_c: Optional[Fraction] = None
    quadrature_points: Union[int, str] = "adaptive"
    precision_bits: Union[int, str] = "auto"

    def __post_init__(self):
        if isinstance(self.n, bool) or int(self.n) != self.n or self.n < 1:
            raise InvalidParameter(f"n must be a positive integer, got {self.n!r}")
        object.__setattr__(self, "n", int(self.n))
        nc = default_nc(self.n) if self.n_c is None else _coerce_param("n_c", self.n_c)
        if nc <= 0:
            raise InvalidParameter(f"n_c must be positive, got {format_param(nc)}")
        object.__setattr__(self, "n_c", nc)
        q = self.quadrature_points
        if q != "adaptive" and (isinstance(q, bool) or not isinstance(q, int) or q < 2):
            raise InvalidParameter(f"quadrature_points must be 'adaptive' or an integer >= 2, got {q!r}")
        b = self.precision_bits
        if b != "auto" and (isinstance(b, bool) or not isinstance(b, int) or b < 53):
            raise InvalidParameter(f"precision_bits must be 'auto' or an integer >= 53, got {b!r}")

    @property
    def bits(self):
        return default_precision(self.n) if self.precision_bits == "auto" else int(self.precision_bits)

    @property
    def p(self):
        return 2 * self.n


@dataclass(frozen=True)
class FourierCoeffs:
    """Cosine coefficients a_0 .. a_{2n-1} of phi(t).

    Attributes
    ----------
    a : ndarray of mpfr
    tail_estimate : mpfr
        Largest |a_k| over the last tenth of the indices.
    method : str
        "tanh-sinh" or "trapezoid".
    evaluations : int
        Number of kernel evaluations spent.
    change : mpfr or None
        Largest coefficient change between the last two quadrature levels.
    """

    a: np.ndarray
    tail_estimate: mpfr
    method: str = "given"
    evaluations: int = 0
    change: Optional[mpfr] = None

    def __len__(self):
        return len(self.a)

    @classmethod
    def from_values(cls, values, bits=None):
        a = np.empty(len(values), dtype=object)
        for i, v in enumerate(values):
            a[i] = v if isinstance(v, mpfr) else hp(v, bits)
        return cls(a, _tail(a))


def _tail(a):
    if len(a) == 0:
        return mpfr(0)
    k = max(1, math.ceil(len(a) / 10))
    return max(abs(v) for v in a[-k:])


# ---------------------------------------------------------------------------
# variable map

def _nc(n_c, bits=None):
    return parse_param(_coerce_param("n_c", n_c), bits)


def _x_from_half_angles(sin_half, cos_half, n_c, lower):
    # -2 log cos(t/2); for t <= pi/2 go through log1p to keep small x accurate
    if lower:
        return gmpy2.sqrt(-n_c * gmpy2.log1p(-gmpy2.square(sin_half)))
    return gmpy2.sqrt(-2 * n_c * gmpy2.log(cos_half))


def map_t_to_x(t, n_c):
    """x(t) = sqrt(-2 n_c log cos(t/2)) for t in [0, pi]; x(pi) = +inf."""
    bits = precision_of(t)
    with workprec(bits):
        t = t if isinstance(t, mpfr) else hp(t)
        pi = gmpy2.const_pi()
        if gmpy2.is_nan(t) or t < 0 or t > pi:
            raise DomainError(f"t must lie in [0, pi], got {t}")
        if t == pi:
            return mpfr("inf")
        nc = _nc(n_c)
        half = t / 2
        return _x_from_half_angles(gmpy2.sin(half), gmpy2.cos(half), nc, t <= pi / 2)


def map_x_to_t(x, n_c):
    """t(x) = 2 asin(sqrt(1 - exp(-x^2/n_c))), the inverse of `map_t_to_x`."""
    bits = precision_of(x)
    with workprec(bits):
        x = x if isinstance(x, mpfr) else hp(x)
        if gmpy2.is_nan(x) or x < 0:
            raise DomainError(f"x must be >= 0, got {x}")
        if gmpy2.is_infinite(x):
            return gmpy2.const_pi()
        y = gmpy2.square(x) / _nc(n_c)
        return 2 * gmpy2.asin(gmpy2.sqrt(-gmpy2.expm1(-y)))


# ---------------------------------------------------------------------------
# cosine coefficients

def _quadrature_bits(bits):
    """Precision for the coefficient integrals.

    The coefficients only need to be accurate to the size of the
    approximation error, far above 2^-bits; half the working precision plus
    a margin keeps every convergence test meaningful while halving the cost.
    The weights are then formed from them at full precision.
    """
    return min(bits, bits // 2 + 64)


def _cos_table(s, m_max):
    """rows cos(m s) for m = 0..m_max-1 over an array of angles s."""
    rows = np.empty((m_max, len(s)), dtype=object)
    one = np.array([mpfr(1)] * len(s), dtype=object)
    rows[0] = one
    if m_max > 1:
        c1 = np.array([gmpy2.cos(v) for v in s], dtype=object)
        rows[1] = c1
        two_c = 2 * c1
        for m in range(2, m_max):
            rows[m] = two_c * rows[m - 1] - rows[m - 2]
    return rows


def fourier_cosine_coeffs(kernel, config, *, max_levels=14):
    """Cosine coefficients of phi(t) = f(x(t)) on [0, pi].

    ``a_0 = (1/pi) int phi dt`` and ``a_k = (2/pi) int phi cos(k t) dt`` for
    k = 1..2n-1.

    Parameters
    ----------
    kernel : KernelSpec
        Must be declared decaying; phi(pi) is then 0.
    config : VpConfig
    max_levels : int
        Number of step halvings allowed in adaptive mode.

    Returns
    -------
    FourierCoeffs

    Raises
    ------
    NonDecayingKernel
    QuadratureNotConverged
        Adaptive mode did not reach a coefficient change below
        2^(-bits/2) * max|a_k| within `max_levels` halvings.

    Notes
    -----
    For kernels that decay only algebraically (IMQ, Ewald) phi has a
    logarithmic-type singularity at t = pi, so the equispaced trapezoid rule
    converges only algebraically there. The adaptive mode therefore uses
    tanh-sinh quadrature, whose nodes cluster double exponentially at both
    end points.
    """
    if not kernel.decays:
        raise NonDecayingKernel(
            f"kernel {kernel.name} is not declared decaying; localize it first")
    if config.quadrature_points == "adaptive":
        return _coeffs_tanh_sinh(kernel, config, max_levels)
    return _coeffs_trapezoid(kernel, config, int(config.quadrature_points))


def _coeffs_trapezoid(kernel, config, N):
    bits = config.bits
    m_max = 2 * config.n
    qb = _quadrature_bits(bits)
    with workprec(qb + 16):
        pi = gmpy2.const_pi()
        nc = _nc(config.n_c)
        t = np.array([pi * j / N for j in range(N)], dtype=object)
        phi = np.empty(N, dtype=object)
        for j, tj in enumerate(t):
            phi[j] = _phi_at(kernel, tj, nc, qb, pi)
        phi[0] = phi[0] / 2
        rows = _cos_table(t, m_max)
        sums = rows.dot(phi)
        a = np.empty(m_max, dtype=object)
        for m in range(m_max):
            a[m] = mpfr(sums[m] * (1 if m == 0 else 2) / N, bits)
    return FourierCoeffs(a, _tail(a), "trapezoid", N)


def _phi_at(kernel, t, nc, qb, pi):
    half = t / 2
    x = _x_from_half_angles(gmpy2.sin(half), gmpy2.cos(half), nc, t <= pi / 2)
    return kernel.eval(mpfr(x, qb))


def _coeffs_tanh_sinh(kernel, config, max_levels):
    bits = config.bits
    m_max = 2 * config.n
    qb = _quadrature_bits(bits)
    wp = qb + 16
    with workprec(wp):
        pi = gmpy2.const_pi()
        nc = _nc(config.n_c)
        fscale = max(abs(kernel.eval(mpfr(0, qb))), mpfr(2) ** -qb)
        cutoff = mpfr(2) ** -(qb + 8) * fscale
        tol = mpfr(2) ** -(bits // 2)

        # centre node tau = 0: t = pi/2, dt/dtau = pi^2/4
        phi_mid = kernel.eval(mpfr(_x_from_half_angles(
            gmpy2.sin(pi / 4), gmpy2.cos(pi / 4), nc, True), qb))
        centre = np.array([gmpy2.square(pi) / 4 * phi_mid * _cos_quarter(m) for m in range(m_max)],
                          dtype=object)
        total = centre.copy()
        evaluations = 1

        h = mpfr(1) / 4
        previous = None
        change = None
        for level in range(max_levels + 1):
            step = 1 if level == 0 else 2
            first = 1
            sums, used = _tanh_sinh_level(kernel, nc, qb, pi, h, first, step, m_max, cutoff,
                                          fscale)
            evaluations += used
            total = total + sums
            a = _scale_coeffs(total * h, pi, bits)
            if previous is not None:
                change = max(abs(x - y) for x, y in zip(a, previous))
                amax = max(abs(v) for v in a)
                if change <= tol * amax:
                    return FourierCoeffs(a, _tail(a), "tanh-sinh", evaluations, change)
            previous = a
            if level < max_levels:
                h = h / 2
        raise QuadratureNotConverged(
            f"cosine coefficients of kernel {kernel.name} still changed by {float(change):.3g} "
            f"after {max_levels} step halvings")


def _cos_quarter(m):
    """cos(m pi/2) as an exact small integer."""
    return (1, 0, -1, 0)[m % 4]


def _scale_coeffs(integrals, pi, bits):
    a = np.empty(len(integrals), dtype=object)
    for m, v in enumerate(integrals):
        a[m] = mpfr(v * (1 if m == 0 else 2) / pi, bits)
    return a


def _tanh_sinh_level(kernel, nc, qb, pi, h, first, step, m_max, cutoff, fscale):
    """Sums over the nodes tau = k h, k = first, first+step, ... of one level.

    Each tau > 0 gives the mirror pair t = s and t = pi - s with
    s = pi / (1 + exp(pi sinh tau)) and the common weight
    dt/dtau = pi^2 cosh(tau) E/(1 + E)^2, E = exp(pi sinh tau).
    """
    s_list, even, odd = [], [], []
    bound = fscale
    k = first
    quiet = 0
    while True:
        tau = k * h
        E = gmpy2.exp(pi * gmpy2.sinh(tau))
        s = pi / (1 + E)
        weight = gmpy2.square(pi) * gmpy2.cosh(tau) * E / gmpy2.square(1 + E)
        half = s / 2
        sin_h, cos_h = gmpy2.sin(half), gmpy2.cos(half)
        lo = kernel.eval(mpfr(_x_from_half_angles(sin_h, cos_h, nc, True), qb))
        hi = kernel.eval(mpfr(_x_from_half_angles(cos_h, sin_h, nc, False), qb))
        s_list.append(s)
        even.append(weight * (lo + hi))
        odd.append(weight * (lo - hi))
        bound = max(bound, abs(lo), abs(hi))
        # stop on the weight, not the samples: a narrow peak at t = 0 sits
        # behind a long stretch of negligible samples near t = pi/2
        if weight * bound < cutoff:
            quiet += 1
            if quiet >= 2:
                break
        else:
            quiet = 0
        k += step
    rows = _cos_table(np.array(s_list, dtype=object), m_max)
    ev = rows.dot(np.array(even, dtype=object))
    od = rows.dot(np.array(odd, dtype=object))
    sums = np.array([ev[m] if m % 2 == 0 else od[m] for m in range(m_max)], dtype=object)
    return sums, 2 * len(s_list)


# ---------------------------------------------------------------------------
# Gaussian weights

def _chebyshev_power_coeff(m, j):
    """Coefficient of r^j in T_m(2r - 1), exact.

    ``T_m(2r-1) = sum_{j=0}^m (-1)^(m-j) m/(m+j) C(m+j, m-j) 4^j r^j`` for
    m >= 1, and T_0 = 1.
    """
    if m == 0:
        return Fraction(1 if j == 0 else 0)
    if j > m:
        return Fraction(0)
    sign = -1 if (m - j) % 2 else 1
    return sign * Fraction(m, m + j) * math.comb(m + j, m - j) * 4 ** j


@lru_cache(maxsize=32)
def vp_matrix(n):
    """Exact 2n x 2n matrix K with w = K a, as a tuple of rows of Fractions.

    Column m carries the VP multiplier (1 for m <= n, 1 - l/n for m = n+l)
    times the r^j coefficients of T_m. Row by row this is:

    * j = 0: ``a_0 + sum_{l=1}^n (-1)^l a_l + sum_{l=1}^{n-1} (-1)^(n+l) (1-l/n) a_{n+l}``
    * 1 <= j <= n: ``4^j sum_{l=j}^n (-1)^(l-j) l/(l+j) C(l+j, l-j) a_l
      + sum_{l=1}^{n-1} c(j, l) a_{n+l}``
    * j > n: ``sum_{l=j-n}^{n-1} c(j, l) a_{n+l}``

    with ``c(j, l) = (-1)^(n+l-j) (1 - l/n) (n+l)/(n+l+j) C(n+l+j, n+l-j) 4^j``.
    """
    p = 2 * n
    rows = []
    for j in range(p):
        row = [Fraction(0)] * p
        for m in range(j, p):
            mult = Fraction(1) if m <= n else 1 - Fraction(m - n, n)
            if mult:
                row[m] = mult * _chebyshev_power_coeff(m, j)
        rows.append(tuple(row))
    return tuple(rows)


def vp_weights(a, n, bits=None):
    """Gaussian weights w_0..w_{2n-1} of the order-n VP sum.

    The combinatorial factors are exact rationals, rounded once to the
    working precision before being combined with the coefficients.

    Parameters
    ----------
    a : FourierCoeffs or sequence
        Cosine coefficients a_0..a_{2n-1}.
    n : int
    bits : int, optional
        Working precision; defaults to the widest precision in `a`, or
        `default_precision(n)` when `a` holds no mpfr.

    Returns
    -------
    ndarray of mpfr

    Examples
    --------
    >>> from fractions import Fraction as F
    >>> [int(w) for w in vp_weights([F(1, 2), F(1, 2), 0, 0], 2)]
    [0, 1, 0, 0]
    """
    values = a.a if isinstance(a, FourierCoeffs) else list(a)
    n = int(n)
    if n < 1:
        raise InvalidParameter(f"n must be >= 1, got {n}")
    if len(values) != 2 * n:
        raise LengthMismatch(f"expected {2 * n} coefficients for n={n}, got {len(values)}")
    if bits is None:
        has_mp = any(isinstance(v, mpfr) for v in values)
        bits = precision_of(*values) if has_mp else default_precision(n)
    K = vp_matrix(n)
    with workprec(bits):
        av = [v if isinstance(v, mpfr) else hp(v) for v in values]
        w = np.empty(2 * n, dtype=object)
        for j, row in enumerate(K):
            acc = mpfr(0)
            for m in range(j, 2 * n):
                c = row[m]
                if c:
                    acc += _fraction_to_mpfr(c) * av[m]
            w[j] = acc
    return w


def _fraction_to_mpfr(q):
    if q.denominator == 1:
        return mpfr(q.numerator)
    return mpfr(q.numerator) / q.denominator


# ---------------------------------------------------------------------------
# approximants

@dataclass(frozen=True)
class SogApproximant:
    """f_p(x) = sum_j w_j exp(-t_j x^2).

    Built by `build_sog` the exponents are the ladder t_j = j/n_c and
    `config` is set; hand-made approximants (``from_terms``) carry arbitrary
    exponents and no config.
    """

    weights: np.ndarray = field(repr=False)
    exponents: np.ndarray = field(repr=False)
    bits: int
    kernel: Optional[KernelSpec] = None
    config: Optional[VpConfig] = None
    coeffs: Optional[FourierCoeffs] = field(default=None, repr=False)

    @classmethod
    def from_terms(cls, terms, bits=256, kernel=None):
        w = np.array([hp(t[0], bits) if not isinstance(t[0], mpfr) else t[0] for t in terms], dtype=object)
        t = np.array([hp(t[1], bits) if not isinstance(t[1], mpfr) else t[1] for t in terms], dtype=object)
        return cls(w, t, int(bits), kernel)

    @property
    def is_ladder(self):
        return self.config is not None

    @property
    def terms(self):
        return list(zip(self.weights, self.exponents))

    @property
    def n(self):
        return self.config.n if self.config else None

    @property
    def n_c(self):
        return self.config.n_c if self.config else None

    @property
    def p(self):
        return len(self.weights)

    @property
    def s_min(self):
        """Smallest bandwidth 1/sqrt(max t_j)."""
        with workprec(self.bits):
            positive = [t for t in self.exponents if t > 0]
            if not positive:
                return mpfr("inf")
            return gmpy2.rec_sqrt(max(positive))

    @property
    def w_max(self):
        return max((abs(w) for w in self.weights), default=mpfr(0))

    @property
    def constant_term(self):
        """Value at x = infinity (the weight of any zero exponent)."""
        return sum((w for w, t in self.terms if t == 0), mpfr(0))


def build_sog(kernel, config):
    """Ladder SOG approximation of `kernel` with 2n Gaussians.

    Raises
    ------
    NonDecayingKernel, QuadratureNotConverged
    """
    if not isinstance(config, VpConfig):
        raise InvalidParameter("config must be a VpConfig")
    coeffs = fourier_cosine_coeffs(kernel, config)
    bits = config.bits
    weights = vp_weights(coeffs, config.n, bits)
    with workprec(bits):
        exps = np.array([_fraction_to_mpfr(Fraction(j) / config.n_c) for j in range(2 * config.n)],
                        dtype=object)
    return SogApproximant(weights, exps, bits, kernel, config, coeffs)


def evaluate(approx, x):
    """f_p(x) at the approximant's precision.

    Ladder approximants are summed by Horner's rule in r = exp(-x^2/n_c),
    which is exact algebra for t_j = j/n_c; other term lists are summed
    directly. The huge, alternating ladder weights need the full working
    precision here.
    """
    with workprec(approx.bits):
        x = x if isinstance(x, mpfr) else hp(x)
        if x < 0:
            raise DomainError(f"x must be >= 0, got {x}")
        x2 = gmpy2.square(x)
        if approx.is_ladder:
            r = gmpy2.exp(-x2 / parse_param(approx.n_c))
            acc = mpfr(0)
            for w in approx.weights[::-1]:
                acc = acc * r + w
            return acc
        return sum((w * gmpy2.exp(-t * x2) for w, t in approx.terms), mpfr(0))


def evaluate_many(approx, xs):
    return np.array([evaluate(approx, x) for x in xs], dtype=object)


def evaluate_chebyshev_form(a, n, n_c, x):
    """VP sum in Chebyshev form, without expanding into Gaussians.

    ``sum_{l<=n} a_l T_l(u) + sum_{l=1}^{n-1} (1 - l/n) a_{n+l} T_{n+l}(u)``
    with ``u = 2 exp(-x^2/n_c) - 1``, by the Clenshaw recurrence.
    """
    values = a.a if isinstance(a, FourierCoeffs) else list(a)
    n = int(n)
    if len(values) != 2 * n:
        raise LengthMismatch(f"expected {2 * n} coefficients for n={n}, got {len(values)}")
    bits = precision_of(*values, x)
    with workprec(bits):
        x = x if isinstance(x, mpfr) else hp(x)
        u = 2 * gmpy2.exp(-gmpy2.square(x) / _nc(n_c)) - 1
        c = _vp_damped(values, n)
        b1 = b2 = mpfr(0)
        two_u = 2 * u
        for ck in reversed(c[1:]):
            b1, b2 = two_u * b1 - b2 + ck, b1
        return u * b1 - b2 + c[0]


def _vp_damped(values, n):
    c = [v if isinstance(v, mpfr) else hp(v) for v in values]
    for ell in range(1, n):
        c[n + ell] = c[n + ell] * (1 - mpfr(ell) / n)
    return c


def value_at_zero(a, n):
    """V_n at t = 0, i.e. f_p(0): every T_m(1) equals 1."""
    values = a.a if isinstance(a, FourierCoeffs) else list(a)
    with workprec(precision_of(*values)):
        return sum(_vp_damped(values, int(n)), mpfr(0))
