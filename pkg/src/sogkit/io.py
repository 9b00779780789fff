"""Approximant files.

JSON layout (every number stored as a decimal string that reads back to the
identical extended-precision value)::

    {
      "format": "sogkit-approximant",
      "version": 1,
      "header": {"kernel": "imq", "params": {}, "n": 50, "n_c": "13",
                 "precision_bits": 856, "reduced": false},
      "terms": [{"w": "...", "t": "..."}, ...],
      "footer": {"s_min": "...", "w_max": "...", "eps_inf": "..." | null}
    }

A reduced approximant has ``"reduced": true``, terms of the form
``{"w_re", "w_im", "t_re", "t_im"}``, and additionally ``"q"``,
``"constant_term"`` and ``"hankel_bound"`` in the header.

`export_csv` writes a flat float64 table for use outside extended
precision.
"""
import csv
import io
import json
import warnings
from fractions import Fraction

import gmpy2
import numpy as np
from gmpy2 import mpc, mpfr

from .errors import InvalidInput
from .kernels import _coerce_param, format_param, localize, make_kernel
from .numerics import from_decimal, to_decimal, workprec
from .reduction import ReducedSog
from .vp import SogApproximant, VpConfig, _fraction_to_mpfr

__all__ = ["dumps", "loads", "save", "load", "export_csv", "read_csv", "PrecisionLossWarning"]

FORMAT = "sogkit-approximant"
VERSION = 1


class PrecisionLossWarning(UserWarning):
    """Values were rounded when converted to float64."""


def _kernel_header(kernel):
    if kernel is None:
        return {"kernel": None, "params": {}}
    return kernel.descriptor()


def dumps(approx, eps_inf=None):
    """JSON text for a `SogApproximant` or `ReducedSog`."""
    if isinstance(approx, ReducedSog):
        doc = _reduced_doc(approx)
    elif isinstance(approx, SogApproximant):
        doc = _ladder_doc(approx)
    else:
        raise InvalidInput(f"cannot serialize {type(approx).__name__}")
    doc["footer"] = {
        "s_min": to_decimal(approx.s_min),
        "w_max": to_decimal(approx.w_max),
        "eps_inf": None if eps_inf is None else repr(float(eps_inf)),
    }
    return json.dumps(doc, indent=1) + "\n"


def _ladder_doc(approx):
    head = _kernel_header(approx.kernel)
    cfg = approx.config
    head.update({
        "n": cfg.n if cfg else None,
        "n_c": format_param(cfg.n_c) if cfg else None,
        "precision_bits": approx.bits,
        "reduced": False,
    })
    if cfg:
        head["quadrature_points"] = cfg.quadrature_points
    terms = [{"w": to_decimal(w), "t": to_decimal(t)} for w, t in approx.terms]
    return {"format": FORMAT, "version": VERSION, "header": head, "terms": terms}


def _reduced_doc(red):
    head = _kernel_header(red.kernel)
    head.update({
        "n": red.n,
        "n_c": None if red.n_c is None else format_param(red.n_c),
        "precision_bits": red.bits,
        "reduced": True,
        "q": red.q,
        "constant_term": to_decimal(red.constant_term),
        "hankel_bound": to_decimal(red.hankel_bound),
    })
    terms = [{"w_re": to_decimal(w.real), "w_im": to_decimal(w.imag),
              "t_re": to_decimal(t.real), "t_im": to_decimal(t.imag)} for w, t in red.terms]
    return {"format": FORMAT, "version": VERSION, "header": head, "terms": terms}


def save(approx, path, eps_inf=None):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(dumps(approx, eps_inf))


def _kernel_from_header(head):
    name = head.get("kernel")
    if name is None:
        return None
    params = dict(head.get("params") or {})
    x_c, delta = params.pop("x_c", None), params.pop("delta", None)
    try:
        base = make_kernel(name, **{k: _coerce_param(k, v) for k, v in params.items()})
    except InvalidInput:
        warnings.warn(f"kernel {name!r} is not built in; the approximant is loaded without it",
                      UserWarning, stacklevel=3)
        return None
    if x_c is not None:
        return localize(base, x_c, delta)
    return base


def loads(text):
    """Inverse of `dumps`. Returns (approximant, eps_inf or None)."""
    try:
        doc = json.loads(text)
        if doc.get("format") != FORMAT:
            raise InvalidInput("not a sogkit approximant file")
        head = doc["header"]
        bits = int(head["precision_bits"])
        terms = doc["terms"]
        kernel = _kernel_from_header(head)
        eps = (doc.get("footer") or {}).get("eps_inf")
        eps = None if eps is None else float(eps)
        if head.get("reduced"):
            return _load_reduced(head, terms, bits, kernel), eps
        return _load_ladder(head, terms, bits, kernel), eps
    except (KeyError, TypeError, ValueError, json.JSONDecodeError) as exc:
        if isinstance(exc, InvalidInput):
            raise
        raise InvalidInput(f"malformed approximant file: {exc}") from None


def load(path):
    with open(path, encoding="utf-8") as fh:
        return loads(fh.read())


def _load_ladder(head, terms, bits, kernel):
    with workprec(bits):
        w = np.array([from_decimal(d["w"], bits) for d in terms], dtype=object)
        t = np.array([from_decimal(d["t"], bits) for d in terms], dtype=object)
        config = None
        if head.get("n") is not None and head.get("n_c") is not None:
            n = int(head["n"])
            nc = _coerce_param("n_c", head["n_c"])
            if len(t) == 2 * n and _is_ladder(t, nc, bits):
                quad = head.get("quadrature_points", "adaptive")
                config = VpConfig(n, nc, quad, bits)
    return SogApproximant(w, t, bits, kernel, config)


def _is_ladder(t, nc, bits):
    with workprec(bits):
        return all(tj == _fraction_to_mpfr(Fraction(j) / nc) for j, tj in enumerate(t))


def _load_reduced(head, terms, bits, kernel):
    with workprec(bits):
        w = np.array([mpc(from_decimal(d["w_re"], bits), from_decimal(d["w_im"], bits))
                      for d in terms], dtype=object)
        t = np.array([mpc(from_decimal(d["t_re"], bits), from_decimal(d["t_im"], bits))
                      for d in terms], dtype=object)
        const = from_decimal(head["constant_term"], bits)
        hb = from_decimal(head["hankel_bound"], bits)
    n_c = head.get("n_c")
    return ReducedSog(w, t, int(head.get("q", len(terms))), hb, const, bits, None, kernel,
                      head.get("n"), None if n_c is None else _coerce_param("n_c", n_c))


# ---------------------------------------------------------------------------
# CSV

def _lossy(values):
    return any(gmpy2.is_finite(v) and mpfr(float(v), v.precision) != v for v in values)


def export_csv(approx, stream=None):
    """Flat float64 table of the terms.

    Ladder approximants give columns ``w,t``; reduced ones give
    ``w_re,w_im,t_re,t_im`` with the constant as a first row with t = 0.
    A `PrecisionLossWarning` is issued when any value is not exactly
    representable in float64, and a stronger one when the weights are so
    large that float64 evaluation would cancel catastrophically.
    """
    out = stream if stream is not None else io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    if isinstance(approx, ReducedSog):
        writer.writerow(("w_re", "w_im", "t_re", "t_im"))
        rows = [(approx.constant_term, mpfr(0), mpfr(0), mpfr(0))]
        rows += [(w.real, w.imag, t.real, t.imag) for w, t in approx.terms]
    elif isinstance(approx, SogApproximant):
        writer.writerow(("w", "t"))
        rows = [(w, t) for w, t in approx.terms]
    else:
        raise InvalidInput(f"cannot export {type(approx).__name__}")
    flat = [v for r in rows for v in r]
    if _lossy(flat):
        warnings.warn(f"values rounded from {approx.bits}-bit to 64-bit floating point",
                      PrecisionLossWarning, stacklevel=2)
    if float(approx.w_max) > 2 ** 26:
        warnings.warn(f"w_max = {float(approx.w_max):.3g}: evaluating these weights in 64-bit "
                      "arithmetic loses all accuracy to cancellation", PrecisionLossWarning,
                      stacklevel=2)
    for r in rows:
        writer.writerow([repr(float(v)) for v in r])
    return out.getvalue() if stream is None else None


def read_csv(text):
    """Parse `export_csv` output into a list of float or complex (w, t) pairs."""
    reader = csv.reader(io.StringIO(text))
    header = next(reader)
    rows = [[float(v) for v in r] for r in reader if r]
    if tuple(header) == ("w", "t"):
        return [(r[0], r[1]) for r in rows]
    if tuple(header) == ("w_re", "w_im", "t_re", "t_im"):
        return [(complex(r[0], r[1]), complex(r[2], r[3])) for r in rows]
    raise InvalidInput(f"unrecognised CSV header {header}")
