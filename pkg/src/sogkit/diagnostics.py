"""Error metrics and experiment drivers.

The accuracy metric is the maximal relative error over M random monitoring
points in [0, x_max],

    eps_inf = max_i |f_p(x_i) - f(x_i)| / max_i |f(x_i)|.

Monitoring points come from numpy's counter-based Philox generator seeded
with `DEFAULT_SEED` (12345) unless another seed is given:
``numpy.random.Generator(numpy.random.Philox(seed)).random(M)``, scaled to
the domain. The float64 points are converted exactly to extended precision.
"""
import csv
import io
import math
import time
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence, Union

import gmpy2
import numpy as np
from gmpy2 import mpfr

from .errors import InvalidParameter
from .kernels import _coerce_param, format_param
from .numerics import workprec
from .reduction import BalancedSystem, ReducedSog, balance, evaluate_reduced, reduce_from_balanced, to_pole_system
from .vp import (
    SogApproximant,
    VpConfig,
    build_sog,
    default_nc,
    evaluate,
    fourier_cosine_coeffs,
    value_at_zero,
)

__all__ = [
    "DEFAULT_SEED",
    "DEFAULT_M",
    "ErrorReport",
    "SweepRow",
    "SweepResult",
    "RateFit",
    "TableRow",
    "TableResult",
    "monitoring_points",
    "max_relative_error",
    "max_relative_error_grid",
    "sweep_p",
    "sweep_bandwidth",
    "rate_at_zero",
    "fit_loglog",
    "reduction_table",
    "TABLE_ORDERS",
]

DEFAULT_SEED = 12345
DEFAULT_M = 1000
TABLE_ORDERS = (100, 90, 70, 50, 30, 10)


def monitoring_points(M=DEFAULT_M, domain=(0.0, 1.0), seed=DEFAULT_SEED):
    """M uniform float64 points in [lo, hi) from Philox(seed)."""
    lo, hi = _check_domain(domain)
    if isinstance(M, bool) or int(M) != M or M < 1:
        raise InvalidParameter(f"M must be a positive integer, got {M!r}")
    rng = np.random.Generator(np.random.Philox(int(seed)))
    return lo + (hi - lo) * rng.random(int(M))


def _check_domain(domain):
    lo, hi = (float(v) for v in domain)
    if not (0 <= lo < hi) or not math.isfinite(hi):
        raise InvalidParameter(f"domain must satisfy 0 <= lo < hi < inf, got {domain}")
    return lo, hi


@dataclass(frozen=True)
class ErrorReport:
    """Outcome of `max_relative_error`."""

    eps_inf: float
    M: int
    domain: tuple
    seed: Optional[int]
    argmax_x: float
    w_max: float
    s_min: float
    max_abs_error: float = 0.0
    f_max: float = 0.0


def _evaluator(approx):
    if isinstance(approx, ReducedSog):
        return evaluate_reduced
    if isinstance(approx, SogApproximant):
        return evaluate
    raise InvalidParameter(f"cannot evaluate object of type {type(approx).__name__}")


def _relative_error(approx, kernel, xs, bits):
    ev = _evaluator(approx)
    with workprec(bits):
        worst, worst_x, fmax = mpfr(0), float(xs[0]), mpfr(0)
        for x in xs:
            xm = mpfr(float(x))
            f = kernel.eval(xm)
            err = abs(ev(approx, xm) - f)
            fmax = max(fmax, abs(f))
            if err > worst:
                worst, worst_x = err, float(x)
        eps = worst / fmax if fmax > 0 else mpfr("inf") if worst > 0 else mpfr(0)
    return float(eps), worst_x, float(worst), float(fmax)


def max_relative_error(approx, kernel=None, M=DEFAULT_M, domain=(0.0, 1.0), seed=DEFAULT_SEED):
    """eps_inf of `approx` against `kernel` on M random points.

    Parameters
    ----------
    approx : SogApproximant or ReducedSog
    kernel : KernelSpec, optional
        Defaults to the kernel recorded in `approx`.
    M : int
    domain : (lo, hi)
    seed : int

    Returns
    -------
    ErrorReport
    """
    kernel = kernel if kernel is not None else approx.kernel
    if kernel is None:
        raise InvalidParameter("no kernel given and none recorded in the approximant")
    xs = monitoring_points(M, domain, seed)
    eps, xmax, abs_err, fmax = _relative_error(approx, kernel, xs, approx.bits)
    return ErrorReport(eps, int(M), tuple(float(v) for v in domain), int(seed), xmax,
                       float(approx.w_max), float(approx.s_min), abs_err, fmax)


def max_relative_error_grid(approx, kernel=None, M=DEFAULT_M, domain=(0.0, 1.0)):
    """Deterministic variant on M equispaced points including both ends."""
    kernel = kernel if kernel is not None else approx.kernel
    lo, hi = _check_domain(domain)
    xs = np.linspace(lo, hi, int(M))
    eps, xmax, abs_err, fmax = _relative_error(approx, kernel, xs, approx.bits)
    return ErrorReport(eps, int(M), (lo, hi), None, xmax,
                       float(approx.w_max), float(approx.s_min), abs_err, fmax)


# ---------------------------------------------------------------------------
# sweeps

@dataclass(frozen=True)
class SweepRow:
    swept_var: str
    p: int
    n_c: str
    s_min: float
    eps_inf: float
    w_max: float
    wall_ms: float


CSV_HEADER = ("swept_var", "p", "n_c", "s_min", "eps_inf", "w_max", "wall_ms")


@dataclass
class SweepResult:
    """Rows of a sweep, ordered by the swept variable.

    `swept_var` names the varied quantity ("p" or "n_c"); every row repeats
    it so the CSV is self-describing.
    """

    swept_var: str
    kernel: str
    rows: list = field(default_factory=list)

    def column(self, name):
        return [getattr(r, name) for r in self.rows]

    def to_csv(self, stream=None, timing=True):
        """Write CSV with the header swept_var,p,n_c,s_min,eps_inf,w_max,wall_ms.

        With ``timing=False`` the wall_ms column is left empty so the file
        depends only on the inputs.
        """
        out = stream if stream is not None else io.StringIO()
        writer = csv.writer(out, lineterminator="\n")
        writer.writerow(CSV_HEADER)
        for r in self.rows:
            writer.writerow([r.swept_var, r.p, r.n_c, repr(r.s_min), repr(r.eps_inf),
                             repr(r.w_max), f"{r.wall_ms:.1f}" if timing else ""])
        return out.getvalue() if stream is None else None


def _resolve_nc(policy, n):
    if policy in (None, "quarter"):
        return default_nc(n)
    if callable(policy):
        return policy(n)
    return policy


def _sweep_point(kernel, n, n_c, swept, M, seed, domain, precision_bits):
    t0 = time.perf_counter()
    cfg = VpConfig(n, n_c, precision_bits=precision_bits)
    approx = build_sog(kernel, cfg)
    rep = max_relative_error(approx, kernel, M, domain, seed)
    wall = (time.perf_counter() - t0) * 1000
    return SweepRow(swept, cfg.p, format_param(cfg.n_c), rep.s_min, rep.eps_inf, rep.w_max, wall)


def sweep_p(kernel, n_list, n_c_policy="quarter", M=DEFAULT_M, seed=DEFAULT_SEED,
            domain=(0.0, 1.0), precision_bits="auto"):
    """eps_inf and w_max as the number of Gaussians p = 2n grows.

    `n_c_policy` is "quarter" (n_c = ceil(n/4), which pins s_min near
    1/sqrt(8)), a fixed value, or a callable of n.
    """
    n_list = [int(n) for n in n_list]
    if n_list != sorted(n_list):
        raise InvalidParameter("n_list must be ascending")
    res = SweepResult("p", kernel.name)
    for n in n_list:
        res.rows.append(_sweep_point(kernel, n, _resolve_nc(n_c_policy, n), "p",
                                     M, seed, domain, precision_bits))
    return res


def sweep_bandwidth(kernel, n, n_c_list, M=DEFAULT_M, seed=DEFAULT_SEED,
                    domain=(0.0, 1.0), precision_bits="auto"):
    """eps_inf and w_max against s_min = sqrt(n_c/(2n-1)) at fixed n."""
    ncs = [_coerce_param("n_c", v) for v in n_c_list]
    if ncs != sorted(ncs):
        raise InvalidParameter("n_c_list must be ascending")
    res = SweepResult("n_c", kernel.name)
    for nc in ncs:
        res.rows.append(_sweep_point(kernel, n, nc, "n_c", M, seed, domain, precision_bits))
    return res


# ---------------------------------------------------------------------------
# convergence rate at the origin

@dataclass(frozen=True)
class RateFit:
    """Log-log fit of |f_p(0) - f(0)| against n.

    Attributes
    ----------
    slope, intercept : float
        OLS fit of log|error| on log n over the points used.
    n_list, errors : tuple
        All sampled n and the signed errors f_p(0) - f(0).
    used : tuple
        The n values entering the fit.
    leading_ratio : float or None
        When f'(0) != 0: error at the largest n divided by the predicted
        leading term -(ln 2/(n pi)) sqrt(n_c) f'(0).
    """

    slope: float
    intercept: float
    n_list: tuple
    errors: tuple
    used: tuple
    leading_ratio: Optional[float] = None


def fit_loglog(xs, ys, discard=0):
    """OLS slope and intercept of log|y| against log x after dropping `discard` leading points."""
    xs, ys = list(xs)[discard:], list(ys)[discard:]
    if len(xs) < 2:
        raise InvalidParameter("need at least two points to fit a rate")
    lx = np.log(np.asarray(xs, dtype=float))
    ly = np.log(np.abs(np.asarray(ys, dtype=float)))
    slope, intercept = np.polyfit(lx, ly, 1)
    return float(slope), float(intercept)


def rate_at_zero(kernel, n_list, n_c=4, precision_bits=256, discard=2):
    """Convergence of the construction at x = 0 as n grows with n_c fixed.

    f_p(0) only needs the cosine coefficients (every T_m(1) = 1), so the
    weights are never formed and a moderate precision suffices.

    Parameters
    ----------
    kernel : KernelSpec
        Must declare f'(0).
    n_list : sequence of int, ascending
    n_c : real
    precision_bits : int
    discard : int
        Number of smallest n left out of the fit as pre-asymptotic.
    """
    fp = kernel.fprime_at_zero
    if fp is None:
        raise InvalidParameter(f"kernel {kernel.name} does not declare f'(0)")
    n_list = [int(n) for n in n_list]
    if n_list != sorted(n_list):
        raise InvalidParameter("n_list must be ascending")
    errors = []
    for n in n_list:
        cfg = VpConfig(n, n_c, precision_bits=precision_bits)
        a = fourier_cosine_coeffs(kernel, cfg)
        with workprec(cfg.bits):
            errors.append(float(value_at_zero(a, n) - kernel.eval(mpfr(0))))
    slope, intercept = fit_loglog(n_list, errors, discard)
    ratio = None
    if float(fp) != 0:
        n = n_list[-1]
        lead = -(math.log(2) / (n * math.pi)) * math.sqrt(float(n_c)) * float(fp)
        ratio = errors[-1] / lead
    return RateFit(slope, intercept, tuple(n_list), tuple(errors),
                   tuple(n_list[discard:]), ratio)


# ---------------------------------------------------------------------------
# reduction tables

@dataclass(frozen=True)
class TableRow:
    q: int
    w_max: float
    s_q: float
    eps_inf: float
    hankel_bound: float
    complex_pairs: int
    wall_ms: float


@dataclass
class TableResult:
    kernel: str
    n: int
    n_c: str
    rows: list = field(default_factory=list)
    sigma: Optional[list] = None
    unreduced: Optional[SogApproximant] = field(default=None, repr=False)
    reduced: dict = field(default_factory=dict, repr=False)
    balanced: Optional[BalancedSystem] = field(default=None, repr=False)

    def row(self, q):
        return next(r for r in self.rows if r.q == q)

    def format(self):
        lines = [f"{self.kernel}: model reduction of {2 * self.n} Gaussians (n={self.n}, n_c={self.n_c})",
                 f"{'q':>5} {'w_max':>11} {'s_q':>7} {'eps_inf':>10} {'hankel_bound':>13} {'pairs':>5}"]
        for r in self.rows:
            lines.append(f"{r.q:>5} {r.w_max:>11.3g} {r.s_q:>7.3f} {r.eps_inf:>10.3g} "
                         f"{r.hankel_bound:>13.3g} {r.complex_pairs:>5}")
        return "\n".join(lines) + "\n"

    def to_csv(self, stream=None, timing=True):
        out = stream if stream is not None else io.StringIO()
        writer = csv.writer(out, lineterminator="\n")
        writer.writerow(("q", "w_max", "s_q", "eps_inf", "hankel_bound", "complex_pairs", "wall_ms"))
        for r in self.rows:
            writer.writerow([r.q, repr(r.w_max), repr(r.s_q), repr(r.eps_inf), repr(r.hankel_bound),
                             r.complex_pairs, f"{r.wall_ms:.1f}" if timing else ""])
        return out.getvalue() if stream is None else None


def reduction_table(kernel, n=50, n_c=13, orders=TABLE_ORDERS, M=DEFAULT_M, seed=DEFAULT_SEED,
                    domain=(0.0, 1.0), precision_bits="auto", approx=None):
    """Build once, balance once, then reduce to every order in `orders`.

    An order equal to p = 2n reports the unreduced approximant itself.
    """
    t0 = time.perf_counter()
    if approx is None:
        approx = build_sog(kernel, VpConfig(n, n_c, precision_bits=precision_bits))
    build_ms = (time.perf_counter() - t0) * 1000
    res = TableResult(kernel.name, approx.n, format_param(approx.n_c), unreduced=approx)
    bal = None
    for q in orders:
        t1 = time.perf_counter()
        if q == approx.p:
            rep = max_relative_error(approx, kernel, M, domain, seed)
            res.rows.append(TableRow(q, rep.w_max, rep.s_min, rep.eps_inf, 0.0, 0, build_ms))
            continue
        if bal is None:
            bal = balance(to_pole_system(approx))
            res.balanced = bal
            res.sigma = [float(s) for s in bal.sigma]
        red = reduce_from_balanced(bal, approx, q=q)
        res.reduced[q] = red
        rep = max_relative_error(red, kernel, M, domain, seed)
        wall = (time.perf_counter() - t1) * 1000
        res.rows.append(TableRow(q, float(red.w_max), float(red.s_min), rep.eps_inf,
                                 float(red.hankel_bound), red.complex_pairs, wall))
    return res
