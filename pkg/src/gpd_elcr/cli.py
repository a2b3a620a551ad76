"""Command-line front end.

Exit codes: 0 success, 1 input/output error, 2 estimation failure,
3 open-ended confidence interval, 64 usage error.
"""

from __future__ import annotations

import argparse
import csv
import math
import os
import sys

import numpy as np

from .errors import CalibrationError, DomainError, EstimationError, ProfileFailure
from .mle import mle_fit
from .models import ModelSpec, extract_excesses
from .profile_ci import elp_ci, elw_ci, exponential_calibration, zhang_wald_ci
from .regions import el_region, ml_wald_region, write_grid_csv, write_region_csv, zhang_wald_region
from .sim import parse_method, run_coverage, write_coverage_csv
from .statfun import critical_value
from .zhang import DEFAULT_R, check_r, zhang_fit

EXIT_OK, EXIT_IO, EXIT_ESTIMATION, EXIT_OPEN_CI, EXIT_USAGE = 0, 1, 2, 3, 64


class UsageError(Exception):
    pass


class InputError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def read_values(path: str) -> np.ndarray:
    """Newline-delimited numbers; blank lines and ``#`` comments are skipped.

    A single non-numeric first data line is taken as a header.
    """
    try:
        if path == "-":
            lines = sys.stdin.read().splitlines()
        else:
            with open(path, encoding="utf-8") as fh:
                lines = fh.read().splitlines()
    except (OSError, UnicodeDecodeError) as exc:
        raise InputError(f"cannot read {path}: {exc}") from exc
    values = []
    seen_data = False
    for lineno, raw in enumerate(lines, start=1):
        text = raw.split("#", 1)[0].strip()
        if not text:
            continue
        try:
            v = float(text)
        except ValueError:
            if not seen_data:
                seen_data = True
                continue
            raise InputError(f"{path}:{lineno}: not a number: {text!r}") from None
        seen_data = True
        if not math.isfinite(v):
            raise InputError(f"{path}:{lineno}: non-finite value {text!r}")
        values.append(v)
    if not values:
        raise InputError(f"{path}: no data")
    return np.array(values)


def parse_k_range(text: str) -> list[int]:
    """``"200"``, ``"100,200"`` or ``"start:stop:step"`` (stop inclusive)."""
    out: list[int] = []
    try:
        for part in text.split(","):
            if ":" in part:
                start, stop, step = (int(v) for v in part.split(":"))
                if step <= 0 or stop < start:
                    raise UsageError(f"bad k range {part!r}")
                out.extend(range(start, stop + 1, step))
            else:
                out.append(int(part))
    except ValueError as exc:
        raise UsageError(f"bad k specification {text!r}") from exc
    if any(k < 5 for k in out):
        raise UsageError("k must be at least 5")
    return out


def _threads(value) -> int:
    if value is None:
        value = os.environ.get("GPD_ELCR_THREADS", "1")
    try:
        n = int(value)
    except ValueError as exc:
        raise UsageError(f"bad thread count {value!r}") from exc
    if n < 1:
        raise UsageError("thread count must be positive")
    return n


def _check_common(args) -> None:
    if hasattr(args, "r"):
        try:
            check_r(args.r)
        except DomainError as exc:
            raise UsageError(str(exc)) from exc
    if hasattr(args, "level") and not 0 < args.level < 1:
        raise UsageError("level must lie in (0, 1)")
    if getattr(args, "k", None) is not None and isinstance(args.k, int) and args.k < 5:
        raise UsageError("k must be at least 5")


def _excesses(args):
    data = read_values(args.input)
    if args.k >= data.size:
        raise UsageError(f"k={args.k} needs more than {data.size} observations")
    return data, extract_excesses(data, args.k)


class _Output:
    def __init__(self, path):
        self.path = path

    def __enter__(self):
        if self.path in (None, "-"):
            self.fh = sys.stdout
        else:
            try:
                self.fh = open(self.path, "w", encoding="utf-8", newline="")
            except OSError as exc:
                raise InputError(f"cannot write {self.path}: {exc}") from exc
        return self.fh

    def __exit__(self, *exc):
        if self.fh is not sys.stdout:
            self.fh.close()
        return False


def cmd_fit(args) -> int:
    _, ex = _excesses(args)
    fit = zhang_fit(ex.excesses, args.r)
    header = ["k", "threshold", "r", "gamma", "sigma", "b"]
    row = [ex.k, repr(ex.threshold), repr(args.r), repr(fit.gamma), repr(fit.sigma), repr(fit.b)]
    if args.mle:
        ml = mle_fit(ex.excesses)
        header += ["ml_gamma", "ml_sigma", "ml_loglik"]
        row += [repr(ml.params.gamma), repr(ml.params.sigma), repr(ml.loglik)]
    with _Output(args.output) as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerow(row)
    return EXIT_OK


def cmd_region(args) -> int:
    _, ex = _excesses(args)
    if args.dump_grid and args.method != "el":
        raise UsageError("--dump-grid is only available for --method el")
    fit = zhang_fit(ex.excesses, args.r)
    if args.method == "el":
        region = el_region(ex.excesses, args.r, args.level, calibration=args.calibration,
                           threads=_threads(args.threads), fit=fit)
    elif args.method == "zhang":
        region = zhang_wald_region(fit, ex.k, args.level)
    else:
        region = ml_wald_region(mle_fit(ex.excesses), ex.k, args.level)
    if region.clipped:
        print("warning: Wald ellipse reaches sigma <= 0; boundary clipped", file=sys.stderr)
    with _Output(args.output) as fh:
        write_region_csv(region, fh)
    if args.dump_grid:
        with _Output(args.dump_grid) as fh:
            write_grid_csv(region, fh)
    return EXIT_OK


def cmd_ci(args) -> int:
    data, ex = _excesses(args)
    if args.method == "elw":
        ci = elw_ci(ex.excesses, args.r, args.level, args.calibration)
        calibration = args.calibration
    elif args.method == "elp":
        ci = elp_ci(data, args.k, args.level, args.calib_reps, args.seed)
        calibration = f"exp(reps={args.calib_reps},seed={args.seed})"
    else:
        ci = zhang_wald_ci(ex.excesses, args.r, args.level)
        calibration = "normal"
    with _Output(args.output) as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["method", "level", "lo", "hi", "width", "estimate", "critical_value",
                    "calibration", "open_lo", "open_hi", "converged"])
        w.writerow([ci.method, repr(ci.level), repr(ci.lo), repr(ci.hi), repr(ci.width), repr(ci.estimate),
                    repr(ci.critical_value), calibration, int(ci.open_lo), int(ci.open_hi), int(ci.converged)])
    if ci.open_lo or ci.open_hi:
        print("interval is open-ended: the statistic stays below the critical value", file=sys.stderr)
        return EXIT_OPEN_CI
    return EXIT_OK


def cmd_coverage(args) -> int:
    try:
        model = ModelSpec.parse(args.model)
        methods = [parse_method(m) for m in args.methods.split(",")]
    except DomainError as exc:
        raise UsageError(str(exc)) from exc
    k_values = parse_k_range(args.k)
    if args.reps < 1:
        raise UsageError("reps must be at least 1")
    if any(k >= args.n for k in k_values):
        raise UsageError("every k must be below n")
    records = run_coverage(model, args.n, args.reps, k_values, methods, args.level, args.seed,
                           args.r, _threads(args.threads), args.calib_reps)
    with _Output(args.output) as fh:
        write_coverage_csv(records, fh)
    return EXIT_OK


def cmd_calibrate(args) -> int:
    if args.k < 5:
        raise UsageError("k must be at least 5")
    if args.calibration == "exp":
        value = exponential_calibration(args.k, args.level, args.reps, args.seed)
    else:
        value = critical_value(args.level, args.dim, args.calibration, k=args.k)
    with _Output(args.output) as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["calibration", "k", "level", "dim", "critical_value"])
        w.writerow([args.calibration, args.k, repr(args.level), args.dim, repr(value)])
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="gpd-elcr", description="Empirical likelihood inference for heavy-tailed GPD excesses.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def data_args(sp):
        sp.add_argument("input", help="newline-delimited numbers, '-' for stdin")
        sp.add_argument("--k", type=int, required=True, help="number of excesses")
        sp.add_argument("--r", type=float, default=DEFAULT_R)
        sp.add_argument("--output", "-o", default=None)

    sp = sub.add_parser("fit", help="Zhang (= maximum EL) estimate, optionally the MLE")
    data_args(sp)
    sp.add_argument("--mle", action="store_true")
    sp.set_defaults(func=cmd_fit)

    sp = sub.add_parser("region", help="joint confidence region boundary as CSV")
    data_args(sp)
    sp.add_argument("--method", choices=("el", "zhang", "ml"), default="el")
    sp.add_argument("--level", type=float, default=0.95)
    sp.add_argument("--calibration", choices=("chi2", "fisher"), default="fisher")
    sp.add_argument("--dump-grid", default=None, metavar="PATH")
    sp.add_argument("--threads", default=None)
    sp.set_defaults(func=cmd_region)

    sp = sub.add_parser("ci", help="confidence interval for the tail index")
    data_args(sp)
    sp.add_argument("--method", choices=("elw", "elp", "zhang"), default="elw")
    sp.add_argument("--level", type=float, default=0.95)
    sp.add_argument("--calibration", choices=("chi2", "fisher"), default="chi2")
    sp.add_argument("--calib-reps", type=int, default=10_000)
    sp.add_argument("--seed", type=int, default=0)
    sp.set_defaults(func=cmd_ci)

    sp = sub.add_parser("coverage", help="Monte-Carlo coverage table")
    sp.add_argument("--model", required=True, help="gpd:g,s | frechet:g | burr:lam,tau")
    sp.add_argument("--n", type=int, default=1000)
    sp.add_argument("--reps", type=int, default=2000)
    sp.add_argument("--k", required=True, help="k list, e.g. 100,200 or 50:500:25")
    sp.add_argument("--methods", default="el,zhang,ml")
    sp.add_argument("--level", type=float, default=0.95)
    sp.add_argument("--r", type=float, default=DEFAULT_R)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--calib-reps", type=int, default=10_000)
    sp.add_argument("--threads", default=None)
    sp.add_argument("--output", "-o", default=None)
    sp.set_defaults(func=cmd_coverage)

    sp = sub.add_parser("calibrate", help="critical values")
    sp.add_argument("--k", type=int, required=True)
    sp.add_argument("--level", type=float, default=0.95)
    sp.add_argument("--dim", type=int, choices=(1, 2), default=2)
    sp.add_argument("--calibration", choices=("chi2", "fisher", "exp"), default="fisher")
    sp.add_argument("--reps", type=int, default=10_000)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--output", "-o", default=None)
    sp.set_defaults(func=cmd_calibrate)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        _check_common(args)
        return args.func(args)
    except UsageError as exc:
        print(f"gpd-elcr: usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except CalibrationError as exc:
        print(f"gpd-elcr: usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except InputError as exc:
        print(f"gpd-elcr: {exc}", file=sys.stderr)
        return EXIT_IO
    except (EstimationError, DomainError, ProfileFailure, np.linalg.LinAlgError) as exc:
        print(f"gpd-elcr: estimation failed: {exc}", file=sys.stderr)
        return EXIT_ESTIMATION


if __name__ == "__main__":
    sys.exit(main())
