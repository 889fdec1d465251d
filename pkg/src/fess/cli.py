"""Command-line interface.

Subcommands wire the library into reproducible batch runs: every
randomized command requires an explicit ``--seed``, outputs are plain
CSV/JSON written with fixed formatting, and reruns produce byte-identical
files. ``--threads`` caps internal worker counts and never changes
results (all reductions use fixed, canonical orderings).

Exit codes: 0 success, 1 computation failure, 2 usage/validation error.
Set ``FESS_LOG=DEBUG|INFO|WARNING`` for logging verbosity.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .dataset import CsvSchema, load_wide_csv, pairwise_distances, write_wide_csv, EvalGrid
from .errors import EstimationError, FitError, ValidationError
from .ess import ess_plugin
from .far1 import Far1Spec, far1_simulate, far1_sweep
from .fboxplot import functional_boxplot, subsample_experiment
from .variogram import (
    EmpiricalVariogram,
    FAMILIES,
    FitOptions,
    default_lag_bins,
    empirical_trace_variogram,
    fit_model,
    model_trace_variogram,
    write_model_json,
)

log = logging.getLogger("fess")

_CURVE_POINTS = 200


def _fmt(x: float) -> str:
    # shortest string that round-trips: lossless and deterministic
    return repr(float(x))


def _setup_logging() -> None:
    level = os.environ.get("FESS_LOG", "WARNING").upper()
    if level not in ("DEBUG", "INFO", "WARNING", "ERROR"):
        level = "WARNING"
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")


def _out_dir(args) -> Path:
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _load_dataset(args):
    schema = CsvSchema.from_json(args.schema) if getattr(args, "schema", None) else None
    dataset = load_wide_csv(args.input, schema)
    for w in dataset.warnings:
        log.warning("%s", w)
    return dataset


def _families(args) -> list[str]:
    fams = args.family if args.family else list(FAMILIES)
    for f in fams:
        if f not in FAMILIES:
            raise ValidationError(f"unknown family {f!r}; expected one of {FAMILIES}")
    return fams


def _fit_options(args) -> FitOptions:
    return FitOptions(nugget=args.nugget)


def _write_model_curve(model, h_max: float, path: Path, knots=None) -> None:
    h = np.linspace(0.0, h_max, _CURVE_POINTS)
    if knots is not None:
        # include the empirical lags so the curve passes through the
        # fitted values there exactly
        h = np.unique(np.concatenate([h, np.asarray(knots, dtype=float)]))
    g = model_trace_variogram(model, h)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write("h,gamma\n")
        for hi, gi in zip(h, g):
            fh.write(f"{_fmt(hi)},{_fmt(gi)}\n")


def cmd_variogram(args) -> int:
    dataset = _load_dataset(args)
    out = _out_dir(args)
    dist = pairwise_distances(dataset.xy)
    bins = default_lag_bins(dist, n_bins=args.bins)
    ev = empirical_trace_variogram(dataset, bins)
    ev.to_csv(out / "empirical_variogram.csv")
    log.info("wrote %s", out / "empirical_variogram.csv")
    for fam in _families(args):
        result = fit_model(ev, fam, _fit_options(args))
        for w in result.warnings:
            log.warning("%s: %s", fam, w)
        write_model_json(result, out / f"model_{fam}.json")
        _write_model_curve(
            result.model, float(bins.edges[-1]), out / f"model_curve_{fam}.csv",
            knots=ev.centers[ev.occupied],
        )
        print(
            f"{fam}: sill={result.model.sill:.6g} range={result.model.range_km:.6g} "
            f"nugget={result.model.nugget:.6g} sse={result.sse:.6g}"
        )
    return 0


def cmd_fit(args) -> int:
    ev = EmpiricalVariogram.from_csv(args.input)
    out = _out_dir(args)
    for fam in _families(args):
        result = fit_model(ev, fam, _fit_options(args))
        write_model_json(result, out / f"model_{fam}.json")
        _write_model_curve(
            result.model, float(np.max(ev.centers)) * 2.0, out / f"model_curve_{fam}.csv",
            knots=ev.centers[ev.occupied],
        )
        print(
            f"{fam}: sill={result.model.sill:.6g} range={result.model.range_km:.6g} "
            f"nugget={result.model.nugget:.6g} sse={result.sse:.6g}"
        )
    return 0


def cmd_ess(args) -> int:
    dataset = _load_dataset(args)
    fams = args.family if args.family else ["exponential"]
    for fam in fams:
        if fam not in FAMILIES:
            raise ValidationError(f"unknown family {fam!r}; expected one of {FAMILIES}")
    dist = pairwise_distances(dataset.xy)
    bins = default_lag_bins(dist, n_bins=args.bins)
    results = []
    for fam in fams:
        report = ess_plugin(dataset, fam, bins=bins, opts=_fit_options(args))
        results.append(report)
        print(
            f"{fam}: n={report.n} ess={report.ess:.6g} ratio={report.ratio:.4f} "
            f"recommended_subsample={report.recommended_subsample}"
        )
    if args.out_dir is not None:
        out = _out_dir(args)
        for fam, report in zip(fams, results):
            report.to_json(out / f"ess_{fam}.json")
            log.info("wrote %s", out / f"ess_{fam}.json")
    else:
        for report in results:
            print(json.dumps(report.to_dict(), indent=2, sort_keys=True))
    return 0


def cmd_far1_simulate(args) -> int:
    if not 0.0 < args.lambda0 < 1.0 or not 0.0 < args.eta0 < 1.0:
        raise ValidationError("decay bases must lie in (0, 1)")
    k = np.arange(1, args.terms + 1)
    spec = Far1Spec(
        lambdas=args.lambda0**k,
        etas=np.sqrt(args.eta0**k),
        grid=EvalGrid(np.linspace(0.0, 1.0, args.grid_points)),
        basis=args.basis,
    )
    dataset = far1_simulate(spec, args.n, args.seed)
    out = _out_dir(args)
    write_wide_csv(dataset, out / "far1_dataset.csv")
    print(f"simulated {dataset.n_curves} curves on {dataset.n_levels} grid points")
    return 0


def cmd_far1_sweep(args) -> int:
    values = [float(v) for v in args.values.split(",") if v.strip()]
    n_list = [int(v) for v in args.n_list.split(",") if v.strip()]
    rows = far1_sweep(args.axis, values, n_list, fixed=args.fixed)
    out = _out_dir(args)
    path = out / f"far1_sweep_{args.axis}.csv"
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write("axis_value,n,ess\n")
        for row in rows:
            fh.write(f"{_fmt(row.axis_value)},{row.n},{_fmt(row.ess)}\n")
    print(f"wrote {len(rows)} sweep rows to {path}")
    return 0


def _write_boxplot_csv(dataset, summary, path: Path) -> None:
    med = dataset.curves[summary.median_index]
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write("t,median,central_lo,central_hi,nonout_lo,nonout_hi\n")
        for j, t in enumerate(dataset.grid.points):
            fh.write(
                ",".join(
                    _fmt(v)
                    for v in (
                        t,
                        med[j],
                        summary.central_lower[j],
                        summary.central_upper[j],
                        summary.nonout_lower[j],
                        summary.nonout_upper[j],
                    )
                )
                + "\n"
            )


def _write_experiment(exp, out: Path) -> None:
    path = out / "subsample_metrics.csv"
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write("rep,md_l2,md_sup,crd_mean,crd_sup,cip\n")
        for r, m in enumerate(exp.replicates):
            fh.write(f"{r}," + ",".join(_fmt(v) for v in m.as_tuple()) + "\n")
    with open(out / "subsample_summary.json", "w", encoding="utf-8") as fh:
        json.dump(exp.to_dict(), fh, indent=2, sort_keys=True)
        fh.write("\n")
    print(
        "subsample means: md_l2=%.4g md_sup=%.4g crd_mean=%.4g crd_sup=%.4g "
        "cip=%.4f band_halfwidth=%.4g"
        % (*exp.means.as_tuple(), exp.median_band_halfwidth)
    )


def cmd_boxplot(args) -> int:
    dataset = _load_dataset(args)
    out = _out_dir(args)
    summary = functional_boxplot(dataset)
    _write_boxplot_csv(dataset, summary, out / "fboxplot.csv")
    with open(out / "fboxplot_outliers.json", "w", encoding="utf-8") as fh:
        json.dump({"outliers": [int(i) for i in summary.outliers]}, fh, sort_keys=True)
        fh.write("\n")
    print(f"median index {summary.median_index}, {summary.outliers.size} outliers")
    if args.size is not None or args.reps is not None:
        if args.size is None or args.reps is None or args.seed is None:
            raise ValidationError(
                "the subsample experiment needs --size, --reps and --seed"
            )
        exp = subsample_experiment(dataset, args.size, args.reps, args.seed)
        _write_experiment(exp, out)
    return 0


def cmd_subsample(args) -> int:
    dataset = _load_dataset(args)
    out = _out_dir(args)
    exp = subsample_experiment(dataset, args.size, args.reps, args.seed)
    _write_experiment(exp, out)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fess",
        description="Effective sample size toolkit for spatial functional data.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")

    sub = parser.add_subparsers(dest="command", required=True)

    def add_io(p, out_required=True):
        p.add_argument("--input", required=True, help="input file path")
        p.add_argument("--schema", default=None, help="sidecar JSON schema for CSV ingestion")
        if out_required:
            p.add_argument("--out-dir", required=True, help="output directory")
        else:
            p.add_argument("--out-dir", default=None, help="output directory")
        p.add_argument("--threads", type=int, default=1, help="worker cap (never changes results)")

    p = sub.add_parser("variogram", help="empirical trace-variogram and family fits")
    add_io(p)
    p.add_argument("--family", action="append", choices=FAMILIES, help="repeatable; default: all")
    p.add_argument("--bins", type=int, default=15)
    p.add_argument("--nugget", choices=("free", "zero"), default="zero")
    p.set_defaults(func=cmd_variogram)

    p = sub.add_parser("fit", help="fit families to an exported empirical variogram CSV")
    add_io(p)
    p.add_argument("--family", action="append", choices=FAMILIES, help="repeatable; default: all")
    p.add_argument("--nugget", choices=("free", "zero"), default="zero")
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("ess", help="plug-in functional ESS report")
    add_io(p, out_required=False)
    p.add_argument("--family", action="append", choices=FAMILIES, help="repeatable; default: exponential")
    p.add_argument("--bins", type=int, default=15)
    p.add_argument("--nugget", choices=("free", "zero"), default="zero")
    p.set_defaults(func=cmd_ess)

    far1 = sub.add_parser("far1", help="functional AR(1) tools")
    far1_sub = far1.add_subparsers(dest="subcommand", required=True)

    p = far1_sub.add_parser("simulate", help="simulate a stationary path")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--terms", type=int, default=25, help="truncation level")
    p.add_argument("--lambda0", type=float, default=0.5, help="eigenvalue decay base")
    p.add_argument("--eta0", type=float, default=0.5, help="noise-variance decay base")
    p.add_argument("--grid-points", type=int, default=22)
    p.add_argument("--basis", choices=("fourier", "cosine"), default="fourier")
    p.add_argument("--out-dir", required=True)
    p.add_argument("--threads", type=int, default=1)
    p.set_defaults(func=cmd_far1_simulate)

    p = far1_sub.add_parser("sweep", help="exact ESS over a decay-base grid")
    p.add_argument("--axis", choices=("lambda0", "eta0"), required=True)
    p.add_argument(
        "--values",
        default=",".join(format(v / 100.0, "g") for v in range(5, 100, 5)),
        help="comma-separated values in (0, 1)",
    )
    p.add_argument("--n-list", default="30,60,120")
    p.add_argument("--fixed", type=float, default=0.5, help="decay base of the fixed sequence")
    p.add_argument("--out-dir", required=True)
    p.add_argument("--threads", type=int, default=1)
    p.set_defaults(func=cmd_far1_sweep)

    p = sub.add_parser("boxplot", help="functional boxplot export (optionally with experiment)")
    add_io(p)
    p.add_argument("--size", type=int, default=None)
    p.add_argument("--reps", type=int, default=None)
    p.add_argument("--seed", type=int, default=None)
    p.set_defaults(func=cmd_boxplot)

    p = sub.add_parser("subsample", help="replicated subsample-fidelity experiment")
    add_io(p)
    p.add_argument("--size", type=int, required=True)
    p.add_argument("--reps", type=int, required=True)
    p.add_argument("--seed", type=int, required=True)
    p.set_defaults(func=cmd_subsample)

    return parser


def main(argv=None) -> int:
    _setup_logging()
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except ValidationError as exc:
        print(f"fess: error: {exc}", file=sys.stderr)
        return 2
    except (EstimationError, FitError) as exc:
        print(f"fess: computation failed: {exc}", file=sys.stderr)
        return 1
    except FileNotFoundError as exc:
        print(f"fess: error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"fess: i/o failure: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
