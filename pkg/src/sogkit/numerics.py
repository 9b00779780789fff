"""Extended-precision scalars and the small dense linear algebra used by sogkit.

Scalars are `gmpy2.mpfr` (real) and `gmpy2.mpc` (complex) values. Each value
carries its own mantissa width, and arithmetic is rounded to the width of the
active gmpy2 context. The routines here read the widest precision found in
their inputs and run under a context of that width. Arithmetic between
mixed-precision operands is therefore carried out at the larger of the two.

Dense matrices are numpy arrays with ``dtype=object`` holding such scalars.
numpy's object loops give vectorised row and column operations without a
Python-level loop per element, which is what makes O(n^3) factorizations of
100x100 matrices at ~1000 bits practical.

Factorizations provided:

* `cholesky` / `pivoted_cholesky` for symmetric positive (semi-)definite
  matrices,
* `svd`, a one-sided (Hestenes) Jacobi SVD,
* `eig`, Hessenberg reduction followed by Francis double-shift QR (single
  shift complex QR for complex input), eigenvectors from the Schur form,
* `solve`, Gaussian elimination with partial pivoting.
"""
import math
from contextlib import contextmanager
from fractions import Fraction
from typing import NamedTuple

import gmpy2
import numpy as np
from gmpy2 import mpc, mpfr

from .errors import (
    ConvergenceFailure,
    DefectiveMatrix,
    IndefiniteMatrix,
    InvalidParameter,
    NotSymmetric,
    SingularMatrix,
)

__all__ = [
    "HiPrec",
    "workprec",
    "current_precision",
    "precision_of",
    "default_precision",
    "hp",
    "parse_param",
    "to_decimal",
    "from_decimal",
    "matrix",
    "zeros",
    "eye",
    "to_float",
    "max_abs",
    "cholesky",
    "pivoted_cholesky",
    "PivotedCholesky",
    "svd",
    "eig",
    "solve",
]

HiPrec = gmpy2.mpfr

_LOG10_2 = math.log10(2.0)


@contextmanager
def workprec(bits):
    """Run the enclosed block with a gmpy2 context of `bits` mantissa bits."""
    bits = int(bits)
    if bits < 2:
        raise InvalidParameter(f"precision must be at least 2 bits, got {bits}")
    with gmpy2.context(gmpy2.get_context(), precision=bits):
        yield bits


def current_precision():
    return gmpy2.get_context().precision


def _value_precision(x):
    if isinstance(x, mpfr):
        return x.precision
    if isinstance(x, mpc):
        return max(x.precision)
    return 0


def precision_of(*values):
    """Largest mantissa width found in the given scalars or arrays.

    Falls back to the active context precision when no extended-precision
    value is present.
    """
    bits = 0
    for v in values:
        if isinstance(v, np.ndarray):
            for x in v.flat:
                bits = max(bits, _value_precision(x))
        elif isinstance(v, (list, tuple)):
            bits = max(bits, precision_of(*v))
        else:
            bits = max(bits, _value_precision(v))
    return bits or current_precision()


def default_precision(n):
    """Working precision in bits for a construction of half-order `n`.

    The Gaussian weights are sums of terms as large as ~2**(8n) that cancel
    down to O(1) values, so the mantissa must grow linearly with n:
    ``max(256, 12*n + 256)``.
    """
    if n < 1:
        raise InvalidParameter(f"n must be >= 1, got {n}")
    return max(256, 12 * int(n) + 256)


def hp(value, bits=None):
    """Convert `value` to an mpfr, exactly where the input is binary.

    Floats are converted exactly. Strings are parsed as decimals and rounded
    once; Fractions are divided at the target precision.
    """
    if bits is None:
        bits = current_precision()
    if isinstance(value, Fraction):
        with workprec(bits):
            return mpfr(value.numerator) / mpfr(value.denominator)
    if isinstance(value, mpc):
        raise TypeError("complex value where a real was expected")
    return mpfr(value, bits)


def parse_param(value, bits=None):
    """Convert a user-facing parameter (h=0.1, n_c=13, ...) to an mpfr.

    Unlike `hp`, a Python float is read through its shortest decimal repr, so
    ``0.1`` means one tenth at the working precision rather than the binary
    double nearest to it.
    """
    if isinstance(value, float):
        value = repr(value)
    return hp(value, bits)


def to_decimal(x):
    """Decimal string that parses back to exactly `x` at its own precision."""
    if isinstance(x, mpc):
        raise TypeError("serialize real and imaginary parts separately")
    x = mpfr(x) if not isinstance(x, mpfr) else x
    if gmpy2.is_zero(x):
        return "-0" if gmpy2.is_signed(x) else "0"
    if not gmpy2.is_finite(x):
        return str(x)
    digits = int(math.ceil(x.precision * _LOG10_2)) + 1
    mantissa, exponent, _ = x.digits(10, digits)
    sign = ""
    if mantissa.startswith("-"):
        sign, mantissa = "-", mantissa[1:]
    mantissa = mantissa.rstrip("0") or "0"
    frac = mantissa[1:]
    head = f"{sign}{mantissa[0]}"
    return f"{head}.{frac}e{exponent - 1}" if frac else f"{head}e{exponent - 1}"


def from_decimal(text, bits):
    return mpfr(text, int(bits))


# ---------------------------------------------------------------------------
# dense matrices

def matrix(rows, bits=None):
    """Build an object-dtype matrix of mpfr from nested sequences."""
    arr = np.asarray(rows, dtype=object)
    if arr.ndim == 1:
        arr = arr.reshape(1, -1)
    out = np.empty(arr.shape, dtype=object)
    for idx, v in np.ndenumerate(arr):
        out[idx] = v if isinstance(v, (mpfr, mpc)) else hp(v, bits)
    return out


def zeros(shape, complex_=False):
    z = mpc(0) if complex_ else mpfr(0)
    out = np.empty(shape, dtype=object)
    out.fill(z)
    return out


def eye(n, complex_=False):
    out = zeros((n, n), complex_)
    one = mpc(1) if complex_ else mpfr(1)
    for i in range(n):
        out[i, i] = one
    return out


def to_float(a):
    a = np.asarray(a, dtype=object)
    if any(isinstance(x, mpc) for x in a.flat):
        return np.array([complex(x) for x in a.flat], dtype=complex).reshape(a.shape)
    return np.array([float(x) for x in a.flat], dtype=float).reshape(a.shape)


def max_abs(a):
    a = np.asarray(a, dtype=object)
    if a.size == 0:
        return mpfr(0)
    return max(abs(x) for x in a.flat)


def _square(M, what):
    M = np.asarray(M, dtype=object)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise InvalidParameter(f"{what} requires a square matrix, got shape {M.shape}")
    return M


def _check_symmetric(M, bits):
    scale = max_abs(M)
    tol = scale * mpfr(2) ** (-(bits // 2))
    diff = max_abs(M - M.T)
    if diff > tol:
        raise NotSymmetric(f"asymmetry {float(diff):.3e} exceeds tolerance {float(tol):.3e}")
    return scale


def cholesky(M):
    """Lower-triangular L with L @ L.T == M, for symmetric positive definite M.

    A pivot that is zero to within 2**(-bits/2) * max|M| is accepted only if
    the rest of its column vanishes as well (a semi-definite direction).
    Otherwise `IndefiniteMatrix` is raised. Use `pivoted_cholesky` for
    numerically low-rank matrices.
    """
    M = _square(M, "cholesky")
    bits = precision_of(M)
    with workprec(bits):
        scale = _check_symmetric(M, bits)
        tol = scale * mpfr(2) ** (-(bits // 2))
        n = M.shape[0]
        L = zeros((n, n))
        for k in range(n):
            d = M[k, k] - np.dot(L[k, :k], L[k, :k]) if k else M[k, k]
            col = M[k + 1:, k] - (L[k + 1:, :k] @ L[k, :k] if k else 0)
            if d > tol:
                L[k, k] = gmpy2.sqrt(d)
                L[k + 1:, k] = col / L[k, k]
            elif d < -tol:
                raise IndefiniteMatrix(f"negative pivot {float(d):.3e} at step {k}")
            elif max_abs(col) > tol:
                raise IndefiniteMatrix(f"zero pivot with nonzero column at step {k}")
        return L


class PivotedCholesky(NamedTuple):
    """Result of `pivoted_cholesky`.

    ``L`` is n x rank and lower trapezoidal in pivot order, so that
    ``M[perm][:, perm] ~= L @ L.T``.
    """

    L: np.ndarray
    perm: np.ndarray
    rank: int

    def factor(self):
        """n x rank factor F in the original ordering, F @ F.T ~= M."""
        F = np.empty(self.L.shape, dtype=object)
        F[self.perm] = self.L
        return F


def pivoted_cholesky(M, rtol=None):
    """Diagonally pivoted Cholesky factorization of a semi-definite matrix.

    Elimination stops once every remaining pivot is below
    ``rtol * (largest pivot)``; the number of steps taken is the numerical
    rank. The default ``rtol = 16 * n * 2**(-bits)`` sits just above the
    rounding noise of the Schur-complement updates.
    """
    M = _square(M, "pivoted_cholesky")
    bits = precision_of(M)
    n = M.shape[0]
    with workprec(bits):
        _check_symmetric(M, bits)
        if rtol is None:
            rtol = 16 * max(n, 1) * mpfr(2) ** (-bits)
        rtol = hp(rtol)
        d = np.array([M[i, i] for i in range(n)], dtype=object)
        perm = np.arange(n)
        L = zeros((n, n))
        dmax = max(d) if n else mpfr(0)
        if n and dmax < 0:
            raise IndefiniteMatrix("all diagonal entries are negative")
        rank = n
        for k in range(n):
            p = k + max(range(n - k), key=lambda i: d[k + i])
            if d[p] <= rtol * dmax:
                rank = k
                break
            if p != k:
                perm[[k, p]] = perm[[p, k]]
                d[[k, p]] = d[[p, k]]
                L[[k, p], :k] = L[[p, k], :k]
            L[k, k] = gmpy2.sqrt(d[k])
            if k + 1 < n:
                col = M[perm[k + 1:], perm[k]]
                if k:
                    col = col - L[k + 1:, :k] @ L[k, :k]
                L[k + 1:, k] = col / L[k, k]
                d[k + 1:] = d[k + 1:] - L[k + 1:, k] * L[k + 1:, k]
        if rank < n and min(d[rank:]) < -(mpfr(2) ** (-(bits // 2))) * dmax:
            raise IndefiniteMatrix("negative trailing pivot beyond tolerance")
        return PivotedCholesky(L[:, :rank].copy(), perm, rank)


def svd(M, max_sweeps=80):
    """Thin singular value decomposition ``M = U @ diag(sigma) @ V.T``.

    One-sided Jacobi: columns are rotated pairwise until mutually
    orthogonal to working precision. Columns are pre-sorted by norm, which
    keeps the sweep count low for graded matrices. Singular values come back
    non-increasing; left vectors belonging to zero singular values are
    completed to an orthonormal set.
    """
    M = np.asarray(M, dtype=object)
    if M.ndim != 2:
        raise InvalidParameter("svd requires a 2-d matrix")
    m, n = M.shape
    if m < n:
        U, s, V = svd(M.T, max_sweeps)
        return V, s, U
    bits = precision_of(M)
    with workprec(bits):
        cols = [M[:, j].copy() for j in range(n)]
        vcols = [eye(n)[:, j].copy() for j in range(n)]
        norms = [np.dot(c, c) for c in cols]
        order = sorted(range(n), key=lambda j: norms[j], reverse=True)
        cols = [cols[j] for j in order]
        vcols = [vcols[j] for j in order]
        norms = [norms[j] for j in order]
        tol = mpfr(2) ** (-bits) * m
        for _ in range(max_sweeps):
            rotated = False
            for i in range(n - 1):
                for j in range(i + 1, n):
                    a, b = norms[i], norms[j]
                    if not a or not b:
                        continue
                    g = np.dot(cols[i], cols[j])
                    if abs(g) <= tol * gmpy2.sqrt(a * b):
                        continue
                    rotated = True
                    zeta = (b - a) / (2 * g)
                    t = 1 / (abs(zeta) + gmpy2.sqrt(1 + zeta * zeta))
                    if zeta < 0:
                        t = -t
                    c = gmpy2.rec_sqrt(1 + t * t)
                    s = c * t
                    ci, cj = cols[i], cols[j]
                    cols[i], cols[j] = c * ci - s * cj, s * ci + c * cj
                    vi, vj = vcols[i], vcols[j]
                    vcols[i], vcols[j] = c * vi - s * vj, s * vi + c * vj
                    norms[i], norms[j] = a - t * g, b + t * g
            norms = [np.dot(c, c) for c in cols]
            if not rotated:
                break
        else:
            raise ConvergenceFailure(f"Jacobi SVD did not converge in {max_sweeps} sweeps")

        sigma = [gmpy2.sqrt(x) for x in norms]
        order = sorted(range(n), key=lambda j: sigma[j], reverse=True)
        sigma = np.array([sigma[j] for j in order], dtype=object)
        V = np.column_stack([vcols[j] for j in order])
        U = zeros((m, n))
        smax = sigma[0] if n else mpfr(0)
        null_tol = smax * mpfr(2) ** (-(bits // 2))
        good = []
        for k, j in enumerate(order):
            if sigma[k] > null_tol:
                U[:, k] = cols[j] / sigma[k]
                good.append(k)
        _complete_orthonormal(U, good)
        return U, sigma, V


def _complete_orthonormal(U, good):
    """Fill columns of U not listed in `good` with an orthonormal completion."""
    m, n = U.shape
    have = [U[:, k] for k in good]
    missing = [k for k in range(n) if k not in set(good)]
    e = 0
    for k in missing:
        while True:
            v = zeros(m)
            v[e % m] = mpfr(1)
            e += 1
            for _ in range(2):
                for h in have:
                    v = v - np.dot(h, v) * h
            nv = gmpy2.sqrt(np.dot(v, v))
            if nv > mpfr("0.5"):
                break
            if e > 2 * m:
                raise ConvergenceFailure("could not complete left singular basis")
        v = v / nv
        U[:, k] = v
        have.append(v)


# ---------------------------------------------------------------------------
# eigendecomposition

def _hessenberg(A):
    """Householder reduction A = Q H Q^H with H upper Hessenberg."""
    n = A.shape[0]
    cplx = any(isinstance(x, mpc) for x in A.flat)
    H = A.copy()
    Q = eye(n, complex_=cplx)
    for k in range(n - 2):
        x = H[k + 1:, k].copy()
        xnorm = gmpy2.sqrt(sum(abs(t) ** 2 for t in x))
        if xnorm == 0:
            continue
        if cplx:
            phase = x[0] / abs(x[0]) if x[0] != 0 else mpc(1)
        else:
            phase = 1 if x[0] >= 0 else -1
        alpha = -phase * xnorm
        v = x
        v[0] = v[0] - alpha
        vc = np.conj(v) if cplx else v
        beta = 2 / sum(abs(t) ** 2 for t in v)
        H[k + 1:, :] = H[k + 1:, :] - np.outer(beta * v, vc @ H[k + 1:, :])
        H[:, k + 1:] = H[:, k + 1:] - np.outer(H[:, k + 1:] @ v, beta * vc)
        Q[:, k + 1:] = Q[:, k + 1:] - np.outer(Q[:, k + 1:] @ v, beta * vc)
        H[k + 1, k] = alpha
        H[k + 2:, k] = 0 * alpha
    return H, Q


def _givens(a, b):
    """Complex rotation (c real, s) with [[c, s], [-conj(s), c]] @ [a, b] = [r, 0]."""
    if b == 0:
        return mpfr(1), mpc(0)
    if a == 0:
        return mpfr(0), mpc(1)
    aa, bb = abs(a), abs(b)
    r = gmpy2.sqrt(aa * aa + bb * bb)
    return aa / r, (a / aa) * b.conjugate() / r


def _schur(T, Z, max_iter_per_eig=60):
    """In-place complex Schur form by explicitly shifted QR on a Hessenberg T."""
    n = T.shape[0]
    bits = current_precision()
    eps = mpfr(2) ** (1 - bits)
    hi = n - 1
    its = 0
    while hi > 0:
        l = hi
        while l > 0:
            if abs(T[l, l - 1]) <= eps * (abs(T[l - 1, l - 1]) + abs(T[l, l])):
                T[l, l - 1] = mpc(0)
                break
            l -= 1
        if l == hi:
            hi -= 1
            its = 0
            continue
        its += 1
        if its > max_iter_per_eig:
            raise ConvergenceFailure(f"QR iteration stalled at index {hi}")
        if its % 11 == 10:
            mu = T[hi, hi] + abs(T[hi, hi - 1].real) + abs(T[hi - 1, hi - 2].real if hi >= 2 else 0)
        else:
            a, b = T[hi - 1, hi - 1], T[hi - 1, hi]
            c, d = T[hi, hi - 1], T[hi, hi]
            half = (a - d) / 2
            disc = gmpy2.sqrt(half * half + b * c)
            m1, m2 = (a + d) / 2 + disc, (a + d) / 2 - disc
            mu = m1 if abs(m1 - d) <= abs(m2 - d) else m2
        for i in range(l, hi + 1):
            T[i, i] -= mu
        rots = []
        for k in range(l, hi):
            c, s = _givens(T[k, k], T[k + 1, k])
            sc = s.conjugate()
            rk, rk1 = T[k, k:], T[k + 1, k:]
            T[k, k:], T[k + 1, k:] = c * rk + s * rk1, c * rk1 - sc * rk
            rots.append((c, s, sc))
        for k, (c, s, sc) in zip(range(l, hi), rots):
            top = min(k + 2, hi + 1)
            ck, ck1 = T[:top, k], T[:top, k + 1]
            T[:top, k], T[:top, k + 1] = c * ck + sc * ck1, c * ck1 - s * ck
            zk, zk1 = Z[:, k], Z[:, k + 1]
            Z[:, k], Z[:, k + 1] = c * zk + sc * zk1, c * zk1 - s * zk
        for i in range(l, hi + 1):
            T[i, i] += mu


def _triangular_eigvecs(T):
    n = T.shape[0]
    bits = current_precision()
    smin = max(max_abs(T), mpfr(1)) * mpfr(2) ** (-bits)
    Y = zeros((n, n), complex_=True)
    for k in range(n):
        lam = T[k, k]
        Y[k, k] = mpc(1)
        for i in range(k - 1, -1, -1):
            s = np.dot(T[i, i + 1:k + 1], Y[i + 1:k + 1, k])
            den = T[i, i] - lam
            if abs(den) < smin:
                den = mpc(smin)
            Y[i, k] = -s / den
    return Y


def _house(x):
    """Householder vector v (v[0] = 1) and beta with (I - beta v v^T) x = -+|x| e1."""
    xn = gmpy2.sqrt(np.dot(x, x))
    if not xn:
        return None, mpfr(0)
    v = x.copy()
    v[0] = x[0] + xn if x[0] >= 0 else x[0] - xn
    v = v / v[0]
    return v, 2 / np.dot(v, v)


def _real_schur(H, Z, max_iter_per_eig=80):
    """In-place real quasi-triangular Schur form by Francis double-shift QR.

    Leaves 1x1 and 2x2 diagonal blocks; the 2x2 blocks are triangularized
    afterwards in complex arithmetic by `_split_blocks`.
    """
    N = H.shape[0]
    bits = current_precision()
    eps = mpfr(2) ** (1 - bits)
    norm = max(max_abs(H), mpfr(2) ** (-bits))
    hi = N - 1
    its = 0
    while hi >= 0:
        l = hi
        while l > 0:
            s = abs(H[l - 1, l - 1]) + abs(H[l, l]) or norm
            if abs(H[l, l - 1]) <= eps * s:
                H[l, l - 1] = mpfr(0)
                break
            l -= 1
        if l >= hi - 1:
            hi = l - 1
            its = 0
            continue
        its += 1
        if its > max_iter_per_eig:
            raise ConvergenceFailure(f"QR iteration stalled at index {hi}")
        if its % 10 == 0:
            w = abs(H[hi, hi - 1]) + abs(H[hi - 1, hi - 2])
            s, t = w * mpfr("1.5"), w * w
        else:
            s = H[hi - 1, hi - 1] + H[hi, hi]
            t = H[hi - 1, hi - 1] * H[hi, hi] - H[hi - 1, hi] * H[hi, hi - 1]
        h00, h01, h10, h11 = H[l, l], H[l, l + 1], H[l + 1, l], H[l + 1, l + 1]
        x = h00 * h00 + h01 * h10 - s * h00 + t
        y = h10 * (h00 + h11 - s)
        z = h10 * H[l + 2, l + 1]
        for k in range(l, hi - 1):
            v, beta = _house(np.array([x, y, z], dtype=object))
            if v is not None:
                c0 = max(l, k - 1)
                blk = H[k:k + 3, c0:]
                H[k:k + 3, c0:] = blk - np.outer(beta * v, v @ blk)
                r = min(k + 4, hi + 1)
                blk = H[:r, k:k + 3]
                H[:r, k:k + 3] = blk - np.outer(blk @ v, beta * v)
                blk = Z[:, k:k + 3]
                Z[:, k:k + 3] = blk - np.outer(blk @ v, beta * v)
            x = H[k + 1, k]
            y = H[k + 2, k]
            if k < hi - 2:
                z = H[k + 3, k]
        v, beta = _house(np.array([x, y], dtype=object))
        if v is not None:
            blk = H[hi - 1:hi + 1, hi - 2:]
            H[hi - 1:hi + 1, hi - 2:] = blk - np.outer(beta * v, v @ blk)
            blk = H[:hi + 1, hi - 1:hi + 1]
            H[:hi + 1, hi - 1:hi + 1] = blk - np.outer(blk @ v, beta * v)
            blk = Z[:, hi - 1:hi + 1]
            Z[:, hi - 1:hi + 1] = blk - np.outer(blk @ v, beta * v)
        for i in range(l + 2, hi + 1):
            H[i, l:i - 1] = mpfr(0)


def _split_blocks(T, Z):
    """Triangularize the remaining 2x2 blocks of a complex-typed quasi-Schur form."""
    n = T.shape[0]
    k = 0
    while k < n - 1:
        if T[k + 1, k] == 0:
            k += 1
            continue
        a, b, c, d = T[k, k], T[k, k + 1], T[k + 1, k], T[k + 1, k + 1]
        half = (a - d) / 2
        disc = gmpy2.sqrt(half * half + b * c)
        lam = (a + d) / 2 + disc
        # eigenvector of the block for lam, taking the better-scaled formula
        u1, u2 = b, lam - a
        if abs(u1) + abs(u2) < abs(lam - d) + abs(c):
            u1, u2 = lam - d, c
        nu = gmpy2.sqrt(abs(u1) ** 2 + abs(u2) ** 2)
        u1, u2 = u1 / nu, u2 / nu
        g11, g12, g21, g22 = u1, -u2.conjugate(), u2, u1.conjugate()
        # T <- G^H T G, Z <- Z G
        rk, rk1 = T[k, :].copy(), T[k + 1, :].copy()
        T[k, :] = g11.conjugate() * rk + g21.conjugate() * rk1
        T[k + 1, :] = g12.conjugate() * rk + g22.conjugate() * rk1
        ck, ck1 = T[:, k].copy(), T[:, k + 1].copy()
        T[:, k] = ck * g11 + ck1 * g21
        T[:, k + 1] = ck * g12 + ck1 * g22
        zk, zk1 = Z[:, k].copy(), Z[:, k + 1].copy()
        Z[:, k] = zk * g11 + zk1 * g21
        Z[:, k + 1] = zk * g12 + zk1 * g22
        T[k + 1, k] = mpc(0)
        k += 2


def eig(M):
    """Eigenvalues and right eigenvectors of a square real or complex matrix.

    Returns ``(lam, V)`` with ``M @ V ~= V @ diag(lam)`` and unit 2-norm
    columns. Real input goes through Hessenberg reduction and Francis
    double-shift QR; complex input through single-shift complex QR.
    For real input, eigenvalues whose imaginary part is below
    2**(-bits/2) * max|M| are made exactly real (with real eigenvectors) and
    the rest are paired into exact complex conjugates. Ordering is by
    decreasing real part, then decreasing imaginary part.

    Raises `DefectiveMatrix` when the eigenvector matrix is numerically
    singular.
    """
    M = _square(M, "eig")
    n = M.shape[0]
    bits = precision_of(M)
    is_real = all(isinstance(x, mpfr) for x in M.flat)
    to_mpc = np.vectorize(mpc, otypes=[object])
    with workprec(bits):
        if n == 0:
            return np.empty(0, dtype=object), zeros((0, 0), True)
        if is_real:
            H, Q = _hessenberg(M)
            _real_schur(H, Q)
            T, Z = to_mpc(H), to_mpc(Q)
            _split_blocks(T, Z)
        else:
            H, Q = _hessenberg(to_mpc(M))
            T, Z = to_mpc(H), to_mpc(Q)
            if n > 1:
                _schur(T, Z)
        lam = np.array([T[i, i] for i in range(n)], dtype=object)
        V = Z @ _triangular_eigvecs(T)
        for k in range(n):
            V[:, k] = V[:, k] / gmpy2.sqrt(sum(abs(x) ** 2 for x in V[:, k]))
        if is_real:
            lam, V = _pair_conjugates(lam, V, max_abs(M) * mpfr(2) ** (-(bits // 2)))
        order = sorted(range(n), key=lambda i: (-lam[i].real, -lam[i].imag))
        lam, V = lam[order], V[:, order]
        _check_nonsingular(V, bits)
        return lam, V


def _pair_conjugates(lam, V, tol):
    n = len(lam)
    lam = lam.copy()
    V = V.copy()
    real_idx = [i for i in range(n) if abs(lam[i].imag) <= tol]
    for i in real_idx:
        lam[i] = mpc(lam[i].real)
        v = V[:, i]
        p = max(range(len(v)), key=lambda j: abs(v[j]))
        phase = abs(v[p]) / v[p]
        w = np.array([mpc((x * phase).real) for x in v], dtype=object)
        V[:, i] = w / gmpy2.sqrt(np.dot(w, w).real)
    upper = [i for i in range(n) if i not in set(real_idx) and lam[i].imag > 0]
    lower = [i for i in range(n) if i not in set(real_idx) and lam[i].imag < 0]
    if len(upper) != len(lower):
        raise ConvergenceFailure("complex eigenvalues of a real matrix do not pair up")
    for i in upper:
        target = lam[i].conjugate()
        j = min(lower, key=lambda k: abs(lam[k] - target))
        lower.remove(j)
        mean = (lam[i] + lam[j].conjugate()) / 2
        lam[i], lam[j] = mean, mean.conjugate()
        V[:, j] = np.array([x.conjugate() for x in V[:, i]], dtype=object)
    return lam, V


def _check_nonsingular(V, bits):
    try:
        _lu(V, mpfr(2) ** (-(bits // 2)))
    except SingularMatrix as exc:
        raise DefectiveMatrix("eigenvector matrix is numerically singular") from exc


def _lu(A, rtol):
    """Partial-pivoting LU in place on a copy; returns (LU, perm)."""
    A = A.copy()
    n = A.shape[0]
    perm = np.arange(n)
    scale = max_abs(A)
    if not scale:
        raise SingularMatrix("zero matrix")
    for k in range(n):
        p = k + max(range(n - k), key=lambda i: abs(A[k + i, k]))
        if abs(A[p, k]) <= rtol * scale:
            raise SingularMatrix(f"pivot {k} below tolerance")
        if p != k:
            A[[k, p]] = A[[p, k]]
            perm[[k, p]] = perm[[p, k]]
        if k + 1 < n:
            A[k + 1:, k] = A[k + 1:, k] / A[k, k]
            A[k + 1:, k + 1:] = A[k + 1:, k + 1:] - np.outer(A[k + 1:, k], A[k, k + 1:])
    return A, perm


def solve(A, B, rtol=None):
    """Solve ``A @ X = B`` by Gaussian elimination with partial pivoting.

    `B` may be a vector or a matrix. Raises `SingularMatrix` when a pivot
    falls below ``rtol * max|A|`` (default 2**(-bits/2)).
    """
    A = _square(A, "solve")
    B = np.asarray(B, dtype=object)
    bits = precision_of(A, B)
    with workprec(bits):
        if rtol is None:
            rtol = mpfr(2) ** (-(bits // 2))
        LU, perm = _lu(A, hp(rtol))
        X = B[perm].copy()
        n = A.shape[0]
        for k in range(n):
            if k:
                X[k] = X[k] - np.dot(LU[k, :k], X[:k])
        for k in range(n - 1, -1, -1):
            if k + 1 < n:
                X[k] = X[k] - np.dot(LU[k, k + 1:], X[k + 1:])
            X[k] = X[k] / LU[k, k]
        return X
