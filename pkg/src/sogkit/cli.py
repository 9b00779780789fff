"""Command-line interface: ``sogkit <command> ...`` (or ``python -m sogkit``).

Commands
--------
build    construct a ladder SOG and write it as JSON
reduce   compress a ladder SOG file by balanced truncation
eval     measure eps_inf of an approximant file against its kernel
sweep    eps_inf / w_max against p or against n_c, as CSV
table    reproduce a model-reduction table (1: IMQ, 2: Matern nu=2)
export   flatten an approximant file to a float64 CSV

Exit status: 0 success, 2 usage error, 3 numerical failure.
The environment variable SOGKIT_PRECISION_BITS supplies the precision when
``--precision`` is not given.
"""
import argparse
import json
import os
import sys
import warnings

from . import __version__
from .diagnostics import (
    DEFAULT_M,
    DEFAULT_SEED,
    TABLE_ORDERS,
    max_relative_error,
    max_relative_error_grid,
    reduction_table,
    sweep_bandwidth,
    sweep_p,
)
from .errors import InvalidInput, NumericalFailure
from .io import export_csv, load, save
from .kernels import KERNELS, format_param, make_kernel
from .reduction import ReducedSog, reduce
from .vp import SogApproximant, VpConfig, build_sog

__all__ = ["main", "build_parser"]

EXIT_OK, EXIT_USAGE, EXIT_NUMERICAL = 0, 2, 3
PRECISION_ENV = "SOGKIT_PRECISION_BITS"

TABLES = {
    "1": ("imq", {}),
    "2": ("matern", {"nu": "2"}),
}


class UsageError(InvalidInput):
    pass


class _Stage:
    """Name of the pipeline stage currently running, for error messages."""

    def __init__(self):
        self.name = "arguments"

    def __call__(self, name):
        self.name = name
        return self


# ---------------------------------------------------------------------------
# argument helpers

def _param(text):
    if "=" not in text:
        raise argparse.ArgumentTypeError(f"expected NAME=VALUE, got {text!r}")
    k, v = text.split("=", 1)
    return k.strip(), v.strip()


def _precision(text):
    if text == "auto":
        return "auto"
    try:
        bits = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"precision must be 'auto' or an integer, got {text!r}") from None
    if bits < 53:
        raise argparse.ArgumentTypeError("precision must be at least 53 bits")
    return bits


def _quadrature(text):
    if text == "adaptive":
        return text
    try:
        n = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"quadrature must be 'adaptive' or an integer, got {text!r}") from None
    return n


def _int_list(text):
    try:
        return [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def _str_list(text):
    return [v.strip() for v in text.split(",") if v.strip()]


def _resolve_precision(args):
    if args.precision is not None:
        return args.precision
    env = os.environ.get(PRECISION_ENV)
    if env:
        try:
            return _precision(env.strip())
        except argparse.ArgumentTypeError as exc:
            raise UsageError(f"{PRECISION_ENV}: {exc}") from None
    return "auto"


def _kernel_from_args(args):
    return make_kernel(args.kernel, **dict(args.param or []))


def _add_kernel(p):
    p.add_argument("--kernel", required=True, choices=sorted(KERNELS),
                   help="kernel name")
    p.add_argument("--param", action="append", type=_param, metavar="NAME=VALUE",
                   help="kernel parameter, e.g. h=0.1, alpha=1, nu=2 (repeatable)")


def _add_precision(p):
    p.add_argument("--precision", type=_precision, default=None,
                   help=f"working precision in bits or 'auto' (default: ${PRECISION_ENV} or auto)")


def _add_monitoring(p):
    p.add_argument("--M", type=int, default=DEFAULT_M, help="number of monitoring points")
    p.add_argument("--seed", type=int, default=DEFAULT_SEED, help="seed of the Philox generator")
    p.add_argument("--domain", type=float, nargs=2, default=(0.0, 1.0), metavar=("LO", "HI"),
                   help="interval of the monitoring points")


def build_parser():
    parser = argparse.ArgumentParser(
        prog="sogkit",
        description="Sum-of-Gaussians kernel approximation and balanced-truncation compression.")
    parser.add_argument("--version", action="version", version=f"sogkit {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")

    p = sub.add_parser("build", help="construct a ladder SOG approximant")
    _add_kernel(p)
    p.add_argument("--n", type=int, required=True, help="half-order; p = 2n Gaussians")
    p.add_argument("--nc", default=None, help="bandwidth parameter n_c (default ceil(n/4))")
    p.add_argument("--quadrature", type=_quadrature, default="adaptive",
                   help="'adaptive' (tanh-sinh) or a trapezoid point count")
    _add_precision(p)
    p.add_argument("--out", required=True, help="output JSON path")
    p.add_argument("--no-measure", action="store_true", help="skip the eps_inf measurement")
    _add_monitoring(p)

    p = sub.add_parser("reduce", help="compress a ladder approximant")
    p.add_argument("--in", dest="input", required=True, help="ladder approximant JSON")
    g = p.add_mutually_exclusive_group(required=True)
    g.add_argument("--q", type=int, help="number of Gaussians to keep")
    g.add_argument("--delta", type=float, help="bound on 2 * (sum of discarded Hankel singular values)")
    p.add_argument("--out", required=True, help="output JSON path")
    p.add_argument("--no-measure", action="store_true", help="skip the eps_inf measurement")
    _add_monitoring(p)

    p = sub.add_parser("eval", help="measure eps_inf of an approximant file")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--grid", action="store_true", help="equispaced instead of random points")
    p.add_argument("--format", choices=("text", "json"), default="text")
    _add_monitoring(p)

    p = sub.add_parser("sweep", help="accuracy and weight size against p or n_c")
    _add_kernel(p)
    p.add_argument("--mode", choices=("p", "bandwidth"), required=True)
    p.add_argument("--n-list", type=_int_list, help="ascending n values (mode p)")
    p.add_argument("--nc-policy", default="quarter",
                   help="'quarter' for ceil(n/4) or a fixed n_c (mode p)")
    p.add_argument("--n", type=int, help="fixed n (mode bandwidth)")
    p.add_argument("--nc-list", type=_str_list, help="ascending n_c values (mode bandwidth)")
    _add_precision(p)
    p.add_argument("--out", help="CSV path (default: standard output)")
    p.add_argument("--timing", action="store_true", help="fill the wall_ms column")
    _add_monitoring(p)

    p = sub.add_parser("table", help="model-reduction table for 100 initial Gaussians")
    p.add_argument("which", choices=sorted(TABLES), help="1: inverse multiquadric, 2: Matern nu=2")
    p.add_argument("--orders", type=_int_list, default=list(TABLE_ORDERS),
                   help="comma-separated q values")
    _add_precision(p)
    p.add_argument("--out", help="CSV path (default: CSV printed after the table)")
    p.add_argument("--timing", action="store_true", help="fill the wall_ms column")
    _add_monitoring(p)

    p = sub.add_parser("export", help="write an approximant as a float64 CSV")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--out", help="CSV path (default: standard output)")
    return parser


# ---------------------------------------------------------------------------
# commands

def _write_text(path, text, out):
    if path:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
    else:
        out.write(text)


def run_build(args, stage, out):
    stage("kernel")
    kernel = _kernel_from_args(args)
    cfg = VpConfig(args.n, args.nc, args.quadrature, _resolve_precision(args))
    stage("construction")
    approx = build_sog(kernel, cfg)
    eps = None
    if not args.no_measure:
        stage("error measurement")
        eps = max_relative_error(approx, kernel, args.M, tuple(args.domain), args.seed).eps_inf
    stage("writing output")
    save(approx, args.out, eps)
    line = (f"p={cfg.p} n_c={format_param(cfg.n_c)} s_min={float(approx.s_min):.6g} "
            f"w_max={float(approx.w_max):.6g} precision_bits={cfg.bits}")
    if eps is not None:
        line += f" eps_inf={eps:.6g}"
    out.write(line + "\n")


def run_reduce(args, stage, out):
    stage("reading input")
    approx, _ = load(args.input)
    if isinstance(approx, ReducedSog) or not approx.is_ladder:
        raise UsageError(f"{args.input} is not a ladder approximant; only the output of "
                         "'sogkit build' can be reduced")
    stage("reduction")
    red = reduce(approx, q=args.q, delta=args.delta)
    eps = None
    if not args.no_measure and approx.kernel is not None:
        stage("error measurement")
        eps = max_relative_error(red, approx.kernel, args.M, tuple(args.domain), args.seed).eps_inf
    stage("writing output")
    save(red, args.out, eps)
    line = (f"q={red.q} hankel_bound={float(red.hankel_bound):.6g} s_min={float(red.s_min):.6g} "
            f"w_max={float(red.w_max):.6g} complex_pairs={red.complex_pairs}")
    if eps is not None:
        line += f" eps_inf={eps:.6g}"
    out.write(line + "\n")


def run_eval(args, stage, out):
    stage("reading input")
    approx, _ = load(args.input)
    if approx.kernel is None:
        raise UsageError("the file does not name a built-in kernel to compare against")
    stage("error measurement")
    if args.grid:
        rep = max_relative_error_grid(approx, None, args.M, tuple(args.domain))
    else:
        rep = max_relative_error(approx, None, args.M, tuple(args.domain), args.seed)
    if args.format == "json":
        doc = {"eps_inf": rep.eps_inf, "M": rep.M, "domain": list(rep.domain), "seed": rep.seed,
               "argmax_x": rep.argmax_x, "w_max": rep.w_max, "s_min": rep.s_min}
        out.write(json.dumps(doc) + "\n")
    else:
        out.write(f"eps_inf={rep.eps_inf:.6g} argmax_x={rep.argmax_x:.6g} M={rep.M} "
                  f"seed={rep.seed} w_max={rep.w_max:.6g} s_min={rep.s_min:.6g}\n")


def run_sweep(args, stage, out):
    stage("kernel")
    kernel = _kernel_from_args(args)
    bits = _resolve_precision(args)
    stage("sweep")
    if args.mode == "p":
        if not args.n_list:
            raise UsageError("--mode p needs --n-list")
        res = sweep_p(kernel, args.n_list, args.nc_policy, args.M, args.seed, tuple(args.domain), bits)
    else:
        if args.n is None or not args.nc_list:
            raise UsageError("--mode bandwidth needs --n and --nc-list")
        res = sweep_bandwidth(kernel, args.n, args.nc_list, args.M, args.seed,
                              tuple(args.domain), bits)
    stage("writing output")
    _write_text(args.out, res.to_csv(timing=args.timing), out)


def run_table(args, stage, out):
    name, params = TABLES[args.which]
    kernel = make_kernel(name, **params)
    stage("table pipeline")
    res = reduction_table(kernel, 50, 13, args.orders, args.M, args.seed, tuple(args.domain),
                          _resolve_precision(args))
    stage("writing output")
    out.write(res.format())
    csv_text = res.to_csv(timing=args.timing)
    if args.out:
        _write_text(args.out, csv_text, out)
    else:
        out.write("\n" + csv_text)


def run_export(args, stage, out):
    stage("reading input")
    approx, _ = load(args.input)
    stage("export")
    _write_text(args.out, export_csv(approx), out)


COMMANDS = {
    "build": run_build,
    "reduce": run_reduce,
    "eval": run_eval,
    "sweep": run_sweep,
    "table": run_table,
    "export": run_export,
}


def main(argv=None, out=None, err=None):
    """Entry point; returns the exit status."""
    out = out or sys.stdout
    err = err or sys.stderr
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    stage = _Stage()
    with warnings.catch_warnings():
        warnings.simplefilter("default")
        warnings.showwarning = lambda msg, cat, *a, **k: err.write(f"sogkit: warning: {msg}\n")
        try:
            COMMANDS[args.command](args, stage, out)
        except InvalidInput as exc:
            err.write(f"sogkit {args.command}: {stage.name}: {exc}\n")
            return EXIT_USAGE
        except OSError as exc:
            err.write(f"sogkit {args.command}: {stage.name}: {exc}\n")
            return EXIT_USAGE
        except NumericalFailure as exc:
            err.write(f"sogkit {args.command}: {stage.name}: numerical failure: {exc}\n")
            return EXIT_NUMERICAL
        except (ArithmeticError, ValueError) as exc:
            err.write(f"sogkit {args.command}: {stage.name}: numerical failure: {exc}\n")
            return EXIT_NUMERICAL
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
