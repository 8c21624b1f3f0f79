"""
Command-line front end.

``conegam fit`` fits a formula to a CSV file and writes ``summary.json``
and ``fitted.csv`` to an output directory, together with a copy of the
data and the fit settings.  ``conegam grid`` refits from that directory
and writes ``grid.csv``.

Exit status: 0 on success, 2 on input errors, 3 on convergence failures.
"""

import argparse
import csv
import json
import shutil
import sys
from pathlib import Path

from .exceptions import ConeGamError, ConvergenceError, InvalidInputError
from .gam import DEFAULT_C
from .model import (export_surface_grid, fit_model, fitted_table, read_csv,
                    summarize)

EXIT_OK, EXIT_INPUT, EXIT_CONVERGENCE = 0, 2, 3
SETTINGS_FILE = "fit.json"
DATA_FILE = "data.csv"
SCHEMA_VERSION = 1


class _ArgumentParser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_INPUT, f"{self.prog}: error: {message}\n")


def _lambda_grid(text):
    try:
        vals = [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"invalid lambda grid {text!r}") from None
    if not vals or any(v < 0 for v in vals):
        raise argparse.ArgumentTypeError("lambda grid needs nonnegative numbers")
    return vals


def build_parser():
    p = _ArgumentParser(prog="conegam", description="Shape-constrained additive models.")
    sub = p.add_subparsers(dest="command", required=True)

    f = sub.add_parser("fit", help="fit a model to a CSV file")
    f.add_argument("--data", required=True, help="input CSV with a header row")
    f.add_argument("--model", required=True, help='formula, e.g. "y ~ s.incr(x) + z"')
    f.add_argument("--family", default="g", choices=["g", "p", "b", "gaussian",
                                                     "poisson", "binomial"])
    f.add_argument("--nsim", type=int, default=0,
                   help="null replicates for CIC (0 skips it)")
    f.add_argument("--seed", type=int, default=0, help="seed for all randomness (default 0)")
    f.add_argument("--c", type=float, default=DEFAULT_C, help="variance multiplier in [1, 2]")
    f.add_argument("--lambda-grid", type=_lambda_grid, default=None,
                   help="comma-separated penalties for a dd/ii/di surface")
    f.add_argument("--threads", type=int, default=1)
    f.add_argument("--out", required=True, help="output directory")

    g = sub.add_parser("grid", help="export a fitted surface on a grid")
    g.add_argument("--fit", required=True, help="output directory of a previous fit")
    g.add_argument("--x1", required=True)
    g.add_argument("--x2", required=True)
    g.add_argument("--resolution", type=int, default=25)
    g.add_argument("--scale", default="mean", choices=["mean", "eta"])
    g.add_argument("--categ", default=None, help="factor giving one surface per level")
    g.add_argument("--out", default=None, help="grid file (default <fit>/grid.csv)")
    return p


def _fmt(v):
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _write_csv(path, header, rows):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([_fmt(float(v)) if not isinstance(v, (int, str)) else v for v in r])


def _fit_from_settings(settings, data_path, threads=1):
    table = read_csv(data_path)
    return fit_model(settings["model"], table, settings["family"], settings["c"],
                     settings["nsim"], settings["seed"], threads,
                     settings["lambda_grid"])


def run_fit(args):
    if args.threads < 1:
        raise InvalidInputError("--threads must be >= 1")
    if args.nsim < 0:
        raise InvalidInputError("--nsim must be >= 0")
    table = read_csv(args.data)
    mf = fit_model(args.model, table, args.family, args.c, args.nsim, args.seed,
                   args.threads, args.lambda_grid)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    summary = {"schema_version": SCHEMA_VERSION, **summarize(mf)}
    summary["seed"] = args.seed
    with open(out / "summary.json", "w", encoding="utf-8") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True, allow_nan=False)
        fh.write("\n")
    header, rows = fitted_table(mf)
    _write_csv(out / "fitted.csv", header, rows)
    if Path(args.data).resolve() != (out / DATA_FILE).resolve():
        shutil.copyfile(args.data, out / DATA_FILE)
    settings = {"model": mf.spec.to_formula(), "family": mf.family.name,
                "c": args.c, "nsim": 0, "seed": args.seed,
                "lambda_grid": args.lambda_grid}
    if mf.spec.engine == "wps":
        # pin the selected penalty so the grid refit needs no search
        settings["lambda_grid"] = [mf.fit.lambda_used] if args.lambda_grid else None
    with open(out / SETTINGS_FILE, "w", encoding="utf-8") as fh:
        json.dump(settings, fh, indent=2, sort_keys=True)
        fh.write("\n")
    for note in mf.warnings:
        print(f"warning: {note}", file=sys.stderr)
    return EXIT_OK


def run_grid(args):
    fit_dir = Path(args.fit)
    try:
        with open(fit_dir / SETTINGS_FILE, encoding="utf-8") as fh:
            settings = json.load(fh)
    except FileNotFoundError:
        raise InvalidInputError(f"{fit_dir} does not hold a fit (no {SETTINGS_FILE})") from None
    mf = _fit_from_settings(settings, fit_dir / DATA_FILE)
    rows = export_surface_grid(mf, args.x1, args.x2, args.resolution, args.scale, args.categ)
    path = Path(args.out) if args.out else fit_dir / "grid.csv"
    _write_csv(path, ["x1_value", "x2_value", "level_label", "surface_value"], rows)
    return EXIT_OK


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        if args.command == "fit":
            return run_fit(args)
        return run_grid(args)
    except InvalidInputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except ConvergenceError as exc:
        print(f"convergence error: {exc}", file=sys.stderr)
        return EXIT_CONVERGENCE
    except ConeGamError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONVERGENCE
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
