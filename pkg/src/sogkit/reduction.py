"""Compression of a ladder SOG by balanced truncation.

In the variable y = x^2 a ladder approximant is a sum of decaying
exponentials ``w_0 + sum_j w_j exp(-a_j y)`` with a_j = j/n_c. Its Laplace
transform (leaving out the constant) is the sum of poles

    H(z) = sum_j w_j / (z + a_j) = c (zI - A)^(-1) b,

with the diagonal realization ``A = -diag(a_j)``, ``b_j = sqrt|w_j|`` and
``c_j = sign(w_j) sqrt|w_j|``. Balanced truncation keeps the q states with
the largest Hankel singular values; diagonalizing the reduced matrix and
transforming back gives q (possibly complex) Gaussians, with the
sup-norm error of H bounded by twice the sum of the discarded singular
values.

Pipeline: `to_pole_system` -> `gramians` -> `balance` -> `truncate` ->
`to_reduced_sog`, or `reduce` for all of it.
"""
import logging
from dataclasses import dataclass, field
from typing import Optional

import gmpy2
import numpy as np
from gmpy2 import mpc, mpfr

from .errors import InvalidInput, InvalidParameter, TargetUnreachable, UnstablePole
from .numerics import eig, hp, max_abs, pivoted_cholesky, precision_of, solve, svd, workprec, zeros
from .vp import SogApproximant

__all__ = [
    "PoleSystem",
    "BalancedSystem",
    "Truncation",
    "ReducedSog",
    "to_pole_system",
    "gramians",
    "lyapunov_residuals",
    "balance",
    "truncate",
    "choose_order",
    "reduce_from_balanced",
    "balanced_truncate",
    "to_reduced_sog",
    "reduce",
    "evaluate_reduced",
    "evaluate_complex",
    "transfer_full",
    "transfer_reduced",
    "hankel_check",
    "default_frequencies",
]

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class PoleSystem:
    """Diagonal state-space realization of a ladder SOG without its constant.

    Attributes
    ----------
    a : ndarray of mpfr
        Decay rates (the diagonal of -A), all positive.
    b, c : ndarray of mpfr
        ``b_j = sqrt|w_j|``, ``c_j = sign(w_j) b_j``.
    constant_term : mpfr
        The weight of the j = 0 Gaussian, carried through unchanged.
    index : tuple of int
        Ladder index j of each retained state.
    dropped : tuple of int
        Ladder indices pruned for negligible weight.
    """

    a: np.ndarray = field(repr=False)
    b: np.ndarray = field(repr=False)
    c: np.ndarray = field(repr=False)
    constant_term: mpfr
    bits: int
    index: tuple = ()
    dropped: tuple = ()

    @property
    def order(self):
        return len(self.a)

    @property
    def weights(self):
        return self.b * self.c


def to_pole_system(approx):
    """Sum-of-poles realization of a ladder approximant.

    Weights with ``|w_j| < 2^(-bits/2) * max|w|`` are pruned first; the
    square root of a weight that small only adds noise to the sign split.

    Raises
    ------
    InvalidInput
        If `approx` does not have the ladder exponents j/n_c.
    """
    if not isinstance(approx, SogApproximant) or not approx.is_ladder:
        raise InvalidInput("reduction needs a ladder approximant with exponents j/n_c")
    bits = approx.bits
    with workprec(bits):
        w = approx.weights
        t = approx.exponents
        wmax = max((abs(v) for v in w[1:]), default=mpfr(0))
        floor = wmax * mpfr(2) ** -(bits // 2)
        a, b, c, index, dropped = [], [], [], [], []
        for j in range(1, len(w)):
            if abs(w[j]) <= floor:
                dropped.append(j)
                continue
            r = gmpy2.sqrt(abs(w[j]))
            a.append(t[j])
            b.append(r)
            c.append(r if w[j] > 0 else -r)
            index.append(j)
        if dropped:
            log.info("pruned %d negligible ladder weights: %s", len(dropped), dropped)
        arr = lambda v: np.array(v, dtype=object)  # noqa: E731
        return PoleSystem(arr(a), arr(b), arr(c), w[0], bits, tuple(index), tuple(dropped))


def gramians(sys):
    """Controllability and observability Gramians in closed (Cauchy) form.

    For diagonal A the Lyapunov equations ``AP + PA^T + bb^T = 0`` and
    ``A^T Q + QA + c^T c = 0`` are solved entrywise by
    ``P_ij = b_i b_j/(a_i + a_j)`` and ``Q_ij = c_i c_j/(a_i + a_j)``.
    """
    with workprec(sys.bits):
        s = np.add.outer(sys.a, sys.a)
        P = np.outer(sys.b, sys.b) / s
        Q = np.outer(sys.c, sys.c) / s
    return P, Q


def lyapunov_residuals(sys, P, Q):
    """Largest entries of the two Lyapunov residuals and of bb^T."""
    with workprec(sys.bits):
        s = np.add.outer(sys.a, sys.a)
        bb = np.outer(sys.b, sys.b)
        rp = -s * P + bb
        rq = -s * Q + np.outer(sys.c, sys.c)
        return max_abs(rp), max_abs(rq), max_abs(bb)


@dataclass(frozen=True)
class BalancedSystem:
    """Square-root balancing data of a `PoleSystem`.

    ``T = S^(-1/2) U^T F_Q^T`` and ``Ti = F_P V S^(-1/2)`` where
    ``P = F_P F_P^T``, ``Q = F_Q F_Q^T`` and ``F_Q^T F_P = U S V^T``.
    """

    system: PoleSystem = field(repr=False)
    sigma: np.ndarray = field(repr=False)
    T: np.ndarray = field(repr=False)
    Ti: np.ndarray = field(repr=False)
    rank: int

    def hankel_tail(self, q):
        """2 * (sum of the Hankel singular values beyond the first q)."""
        with workprec(self.system.bits):
            return 2 * sum(self.sigma[q:], mpfr(0))


def balance(sys):
    """Hankel singular values and balancing transforms (square-root method).

    The Gramians are factored by diagonally pivoted Cholesky, which also
    caps the numerical rank; singular values below ``2^(-bits/2)`` times
    the largest one are treated as zero when fixing the rank.
    """
    bits = sys.bits
    P, Q = gramians(sys)
    with workprec(bits):
        FP = pivoted_cholesky(P).factor()
        FQ = pivoted_cholesky(Q).factor()
        U, sigma, V = svd(FQ.T @ FP)
        k = len(sigma)
        smax = sigma[0] if k else mpfr(0)
        floor = smax * mpfr(2) ** -(bits // 2)
        rank = sum(1 for s in sigma if s > floor)
        scale = np.array([gmpy2.rec_sqrt(s) for s in sigma[:rank]], dtype=object)
        T = (U[:, :rank] * scale).T @ FQ.T
        Ti = FP @ (V[:, :rank] * scale)
    return BalancedSystem(sys, sigma, T, Ti, rank)


def _plateau_end(sigma, q, bits):
    """Extend q so that no group of equal singular values is split."""
    tol = mpfr(2) ** -(bits // 2)
    while 0 < q < len(sigma) and abs(sigma[q] - sigma[q - 1]) <= tol * sigma[q - 1]:
        q += 1
    return q


@dataclass(frozen=True)
class Truncation:
    """Reduced realization (A_r, b_r, c_r) of order q and its error bound."""

    A: np.ndarray = field(repr=False)
    b: np.ndarray = field(repr=False)
    c: np.ndarray = field(repr=False)
    q: int
    hankel_bound: mpfr
    constant_term: mpfr
    bits: int
    sigma: np.ndarray = field(repr=False)


def choose_order(bal, q=None, delta=None):
    """Order selected by an explicit `q` or an error budget `delta`."""
    if (q is None) == (delta is None):
        raise InvalidParameter("give exactly one of q or delta")
    bits = bal.system.bits
    if q is not None:
        if isinstance(q, bool) or int(q) != q or q < 1:
            raise InvalidParameter(f"q must be a positive integer, got {q!r}")
        q = int(q)
        if q > bal.system.order:
            raise TargetUnreachable(f"q={q} exceeds the system order {bal.system.order}")
        if q > bal.rank:
            log.info("q=%d capped at the numerical Hankel rank %d", q, bal.rank)
            q = bal.rank
        return _plateau_end(bal.sigma, q, bits)
    with workprec(bits):
        delta = hp(delta)
        if not delta > 0:
            raise InvalidParameter(f"delta must be positive, got {delta}")
        for k in range(1, bal.rank + 1):
            if bal.hankel_tail(k) <= delta:
                return _plateau_end(bal.sigma, k, bits)
    raise TargetUnreachable(
        f"no order up to the numerical rank {bal.rank} meets delta={float(delta):.3g}; "
        f"the smallest bound is {float(bal.hankel_tail(bal.rank)):.3g}")


def truncate(bal, q=None, delta=None):
    """Leading q x q block of the balanced realization."""
    q = choose_order(bal, q, delta)
    sys = bal.system
    with workprec(sys.bits):
        T, Ti = bal.T[:q], bal.Ti[:, :q]
        A = -(T * sys.a) @ Ti
        b = T @ sys.b
        c = sys.c @ Ti
        return Truncation(A, b, c, q, bal.hankel_tail(q), sys.constant_term, sys.bits, bal.sigma)


def balanced_truncate(sys, q=None, delta=None):
    """Balance `sys` and truncate it to order q (or to error budget delta)."""
    return truncate(balance(sys), q, delta)


@dataclass(frozen=True)
class ReducedSog:
    """``w_const + sum_l w_l exp(-t_l x^2)`` with complex (w_l, t_l).

    Non-real terms come in conjugate pairs; `evaluate_reduced` combines each
    pair as 2 Re(w e^{-t x^2}) so the result is real.
    """

    weights: np.ndarray = field(repr=False)
    exponents: np.ndarray = field(repr=False)
    q: int
    hankel_bound: mpfr
    constant_term: mpfr
    bits: int
    sigma: Optional[np.ndarray] = field(default=None, repr=False)
    kernel: object = field(default=None, repr=False)
    n: Optional[int] = None
    n_c: object = None

    @property
    def terms(self):
        return list(zip(self.weights, self.exponents))

    @property
    def s_min(self):
        """Smallest bandwidth min_l 1/sqrt(Re t_l)."""
        with workprec(self.bits):
            return min((gmpy2.rec_sqrt(t.real) for t in self.exponents), default=mpfr("inf"))

    @property
    def w_max(self):
        with workprec(self.bits):
            return max((abs(w) for w in self.weights), default=mpfr(0))

    @property
    def complex_pairs(self):
        return sum(1 for t in self.exponents if t.imag > 0)

    def float_terms(self):
        """Terms rounded to complex128 (the form meant for fast evaluation)."""
        return [(complex(w), complex(t)) for w, t in self.terms]


def to_reduced_sog(A, b, c, constant_term, n_c=None, *, hankel_bound=None, sigma=None):
    """Gaussians of a reduced realization via its eigendecomposition.

    ``A = V diag(lam) V^(-1)`` gives ``c (zI - A)^(-1) b = sum_l w_l/(z - lam_l)``
    with ``w_l = (c V)_l (V^(-1) b)_l``, i.e. the terms ``w_l exp(lam_l y)``.

    Raises
    ------
    DefectiveMatrix
        `A` is numerically not diagonalizable.
    UnstablePole
        Some exponent has non-positive real part.
    """
    A = np.asarray(A, dtype=object)
    bits = precision_of(A, b, c)
    q = A.shape[0]
    with workprec(bits):
        lam, V = eig(A)
        left = np.asarray(c, dtype=object) @ V
        right = solve(V, np.array([mpc(v) for v in b], dtype=object))
        w = left * right
        t = -lam
        for i in range(q):
            if t[i].imag == 0:
                t[i] = mpc(t[i].real)
                w[i] = mpc(w[i].real)
        _pair_weights(w, t)
        bad = [i for i in range(q) if not t[i].real > 0]
        if bad:
            raise UnstablePole(f"{len(bad)} reduced exponent(s) with non-positive real part, "
                               f"e.g. {complex(t[bad[0]])}")
        if hankel_bound is None:
            hankel_bound = mpfr(0)
        return ReducedSog(w, t, q, hankel_bound, constant_term, bits, sigma, n_c=n_c)


def _pair_weights(w, t):
    """Make the weights of conjugate exponent pairs exactly conjugate."""
    used = set()
    for i in range(len(t)):
        if i in used or t[i].imag <= 0:
            continue
        target = t[i].conjugate()
        j = min((k for k in range(len(t)) if k not in used and k != i and t[k].imag < 0),
                key=lambda k: abs(t[k] - target), default=None)
        if j is None:
            continue
        used.update((i, j))
        mean = (w[i] + w[j].conjugate()) / 2
        w[i], w[j] = mean, mean.conjugate()


def reduce(approx, q=None, delta=None):
    """Reduce a ladder approximant to q Gaussians (or to error budget delta)."""
    sys = to_pole_system(approx)
    tr = balanced_truncate(sys, q, delta)
    red = to_reduced_sog(tr.A, tr.b, tr.c, tr.constant_term,
                         hankel_bound=tr.hankel_bound, sigma=tr.sigma)
    return _attach(red, approx)


def reduce_from_balanced(bal, approx, q=None, delta=None):
    """Like `reduce` but reusing a `balance` result across several orders."""
    tr = truncate(bal, q, delta)
    red = to_reduced_sog(tr.A, tr.b, tr.c, tr.constant_term,
                         hankel_bound=tr.hankel_bound, sigma=tr.sigma)
    return _attach(red, approx)


def _attach(red, approx):
    return ReducedSog(red.weights, red.exponents, red.q, red.hankel_bound, red.constant_term,
                      red.bits, red.sigma, approx.kernel, approx.n, approx.n_c)


# ---------------------------------------------------------------------------
# evaluation

def evaluate_reduced(red, x):
    """Real value of the reduced SOG at x >= 0; conjugate pairs as 2 Re."""
    with workprec(red.bits):
        x = x if isinstance(x, mpfr) else hp(x)
        x2 = gmpy2.square(x)
        acc = mpfr(red.constant_term)
        for w, t in red.terms:
            if t.imag == 0:
                acc += w.real * gmpy2.exp(-t.real * x2)
            elif t.imag > 0:
                acc += 2 * (w * gmpy2.exp(-t * x2)).real
        return acc


def evaluate_complex(red, x):
    """Plain complex sum over all terms, for checking realness."""
    with workprec(red.bits):
        x = x if isinstance(x, mpfr) else hp(x)
        x2 = gmpy2.square(x)
        acc = mpc(red.constant_term)
        for w, t in red.terms:
            acc += w * gmpy2.exp(-t * x2)
        return acc


def transfer_full(sys, z):
    """H(z) = sum_j w_j/(z + a_j) of the unreduced system."""
    with workprec(sys.bits):
        return sum((w / (z + a) for w, a in zip(sys.weights, sys.a)), mpc(0))


def transfer_reduced(red, z):
    """sum_l w_l/(z + t_l) of the reduced terms."""
    with workprec(red.bits):
        return sum((w / (z + t) for w, t in red.terms), mpc(0))


def default_frequencies(count=181):
    """omega = 0 followed by a log grid from 1e-3 to 1e6."""
    return [0.0] + list(np.logspace(-3, 6, count))


def hankel_check(sys, red, omegas=None):
    """Largest |H_full(i w) - H_reduced(i w)| over the frequency grid."""
    omegas = default_frequencies() if omegas is None else omegas
    with workprec(max(sys.bits, red.bits)):
        worst = mpfr(0)
        for om in omegas:
            z = mpc(0, hp(om))
            worst = max(worst, abs(transfer_full(sys, z) - transfer_reduced(red, z)))
        return worst
