"""Command-line front end: ``design``, ``simulate``, ``analyze``, ``report``.

Exit codes: 0 success, 2 usage error, 3 data validation error,
4 numerical failure. The output directory defaults to
``$MULTISINE_BLA_OUTPUT_DIR`` or the current directory.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .bla import CURVES_HEADER, bla_to_dict, summary_metrics, variance_to_db, bla_from_dict
from .design import MultisineSpec, generate_multisine, load_design, save_design, select_excited_bins
from .errors import DesignError, NumericalError, PlantError, RecordError
from .frf import LpmConfig
from .pipeline import analyze_records
from .records import read_record_csv, segment_periods, write_record_csv
from .spectral import dft_period
from .synth import load_plant, run_experiment

log = logging.getLogger("multisine_bla")

OUTPUT_ENV = "MULTISINE_BLA_OUTPUT_DIR"
EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 0, 2, 3, 4
REPORT_NAME = "report.json"
FIGURE_FILES = ("reference", "time_periods", "spectra", "trajectories", "bla_curves")


class UsageError(Exception):
    pass


def _out_dir(args) -> Path:
    d = Path(args.out_dir or os.environ.get(OUTPUT_ENV) or ".")
    d.mkdir(parents=True, exist_ok=True)
    return d


def _rel(path: Path, start: Path) -> str:
    return Path(os.path.relpath(Path(path).resolve(), Path(start).resolve())).as_posix()


def _dump(doc, path: Path) -> None:
    path.write_text(json.dumps(doc, indent=2, allow_nan=False) + "\n", encoding="utf-8")


# design ------------------------------------------------------------------

def cmd_design(args) -> int:
    try:
        spec = MultisineSpec(
            reference_rate_hz=args.fs,
            samples_per_period=args.n,
            f_min_hz=args.fmin,
            f_max_hz=args.fmax,
            amplitude=args.amp,
            num_realizations=args.realizations,
            seed=args.seed,
            prefix_samples=args.prefix,
            upsample_factor=args.upsample,
        )
        bins = select_excited_bins(spec)
    except DesignError as exc:
        raise UsageError(str(exc)) from None
    path = _out_dir(args) / args.output
    save_design(spec, path)
    print(f"{bins.size} excited bins, f0 = {spec.f0:.6g} Hz")
    print(f"{'bin':>5} {'freq_hz':>12}")
    for k in bins:
        print(f"{k:>5d} {k * spec.f0:>12.6f}")
    print(f"design written to {path}")
    return EXIT_OK


# simulate ----------------------------------------------------------------

def cmd_simulate(args) -> int:
    if args.periods < 1:
        raise UsageError("--periods must be >= 1")
    design, phases = load_design(args.design)
    plant = load_plant(args.plant)
    M = args.realizations or design.num_realizations
    if not 1 <= M <= design.num_realizations:
        raise UsageError(f"--realizations must lie in [1, {design.num_realizations}]")
    out = _out_dir(args)
    records = run_experiment(plant, design, args.periods, M, phases=phases, periods_to_settle=args.settle)
    for rec in records:
        path = out / f"record_r{rec.metadata.realization_index}.csv"
        write_record_csv(rec, path)
        print(f"{path}: {len(rec.load)} rows")
    return EXIT_OK


# analyze -----------------------------------------------------------------

def _half_width(text: str):
    if text == "auto":
        return "auto"
    try:
        return int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"half width must be an integer or 'auto', got {text!r}") from None


def cmd_analyze(args) -> int:
    design, _ = load_design(args.design)
    try:
        lpm = LpmConfig(args.poly_order, args.half_width)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    records = [read_record_csv(p) for p in args.records]
    analysis = analyze_records(records, design, args.method, lpm, args.drift_threshold)
    out = _out_dir(args)
    res = analysis.bla
    summary = summary_metrics(res)
    doc = {
        "design": _rel(Path(args.design), out),
        "records": [_rel(Path(p), out) for p in args.records],
        "config": {
            "method": args.method,
            "poly_order": lpm.poly_order,
            "half_width": lpm.half_width,
            "drift_threshold": args.drift_threshold,
        },
        "record_means": [{"load": u, "indentation": y} for u, y in analysis.means],
        "dropped_samples": analysis.dropped_samples,
        "drift": analysis.drift.to_dict(),
        "bla": bla_to_dict(res),
        "summary": summary,
    }
    _dump(doc, out / REPORT_NAME)
    _write_table(out / "bla_curves.csv", *_curves_table(res), "csv")

    def fmt(v, spec=".2f"):
        return "n/a" if v is None else format(v, spec)

    print(f"records: {res.M}, periods per record: {res.P}, curve: {res.plotted}")
    print(f"median FRF magnitude: {fmt(summary['median_mag_db'])} dB")
    print(f"noise gap:            {fmt(summary['noise_gap_db'])} dB")
    print(f"total gap:            {fmt(summary['total_gap_db'])} dB")
    print(f"NL output fraction:   {fmt(summary['nl_fraction'], '.3f')}")
    if analysis.drift.flagged:
        print(f"set-point drift flagged for records {analysis.drift.flagged}")
    return EXIT_OK


# report ------------------------------------------------------------------

def _cell(v):
    return int(v) if isinstance(v, (int, np.integer)) else float(v)


def _write_table(path: Path, header, rows, fmt: str) -> Path:
    if fmt == "json":
        path = path.with_suffix(".json")
        cols = {h: [] for h in header}
        for row in rows:
            for h, v in zip(header, row):
                v = _cell(v)
                cols[h].append(v if not isinstance(v, float) or math.isfinite(v) else None)
        _dump({"columns": list(header), "data": cols}, path)
        return path
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(str(v) if isinstance(v, (int, np.integer)) else repr(float(v)) for v in row))
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path


def _curves_table(res):
    c = variance_to_db(res)
    K = len(res.excited_bins)
    nan = [math.nan] * K
    cols = [res.freq_hz, c.mag_db,
            nan if c.noise_db is None else c.noise_db,
            nan if c.total_db is None else c.total_db,
            nan if c.nl_db is None else c.nl_db]
    dn = res.dof_noise if res.var_noise is not None else 0
    dt = res.dof_total if res.var_total is not None else 0
    rows = [[float(col[j]) for col in cols] + [dn, dt] for j in range(K)]
    return CURVES_HEADER, rows


def cmd_report(args) -> int:
    report_path = Path(args.report)
    if not report_path.exists():
        raise FileNotFoundError(f"report {report_path} not found")
    doc = json.loads(report_path.read_text(encoding="utf-8"))
    base = report_path.parent
    design, phases = load_design(base / doc["design"])
    records = [read_record_csv(base / p) for p in doc["records"]]
    res = bla_from_dict(doc["bla"])
    out = _out_dir(args)
    fmt = args.format
    written = []

    rows = []
    for rec in records:
        idx = rec.metadata.realization_index
        ex = generate_multisine(design, idx, phases[idx])
        for n, v in enumerate(ex.period):
            rows.append([idx, n, n / design.reference_rate_hz, v])
    written.append(_write_table(out / "reference.csv", ("realization", "n", "time_s", "reference"), rows, fmt))

    rows, traj, spec_rows = [], [], []
    fmax = args.spectrum_fmax
    for rec in records:
        idx = rec.metadata.realization_index
        blk = segment_periods(rec).block
        fs = rec.metadata.sample_rate_hz
        N = blk.samples_per_period
        t = np.arange(N) / fs
        for p in range(blk.num_periods):
            for n in range(N):
                rows.append([idx, p, n, t[n], blk.periods_u[p, n], blk.periods_y[p, n]])
                traj.append([idx, p, blk.periods_u[p, n], blk.periods_y[p, n]])
            for name, x in (("load", blk.periods_u[p]), ("indentation", blk.periods_y[p])):
                X = dft_period(x, fs).coefficients
                kmax = X.size - 1 if fmax is None else min(X.size - 1, int(math.floor(fmax * N / fs)))
                for k in range(kmax + 1):
                    spec_rows.append([idx, p, name, k, k * fs / N, X[k].real, X[k].imag])
    written.append(_write_table(out / "time_periods.csv",
                                ("realization", "period", "n", "time_s", "load", "indentation"), rows, fmt))
    written.append(_write_spectra(out / "spectra.csv", spec_rows, fmt))
    written.append(_write_table(out / "trajectories.csv",
                                ("realization", "period", "load", "indentation"), traj, fmt))
    written.append(_write_table(out / "bla_curves.csv", *_curves_table(res), fmt))
    for p in written:
        print(p)
    return EXIT_OK


def _write_spectra(path: Path, rows, fmt: str) -> Path:
    header = ("realization", "period", "channel", "bin", "freq_hz", "re", "im")
    if fmt == "json":
        path = path.with_suffix(".json")
        cols = {h: [r[i] if i in (0, 1, 2, 3) else float(r[i]) for r in rows] for i, h in enumerate(header)}
        cols["realization"] = [int(v) for v in cols["realization"]]
        cols["period"] = [int(v) for v in cols["period"]]
        cols["bin"] = [int(v) for v in cols["bin"]]
        _dump({"columns": list(header), "data": cols}, path)
        return path
    lines = [",".join(header)]
    lines += [f"{r[0]},{r[1]},{r[2]},{r[3]},{float(r[4])!r},{float(r[5])!r},{float(r[6])!r}" for r in rows]
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path


# wiring ------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="multisine-bla", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    d = sub.add_parser("design", help="design a random-phase multisine")
    d.add_argument("--fs", type=float, default=31.25, help="reference (generation) rate in Hz")
    d.add_argument("--n", type=int, default=400, help="samples per period at the reference rate")
    d.add_argument("--fmin", type=float, default=0.06)
    d.add_argument("--fmax", type=float, default=1.0)
    d.add_argument("--amp", type=float, default=0.02, help="cosine amplitude per tone")
    d.add_argument("--prefix", type=int, default=100, help="steady-state prefix length")
    d.add_argument("--upsample", type=int, default=32, help="zero-order-hold factor")
    d.add_argument("--realizations", type=int, default=1)
    d.add_argument("--seed", type=int, default=0)
    d.add_argument("--output", default="design.json")
    d.add_argument("--out-dir")
    d.set_defaults(func=cmd_design)

    s = sub.add_parser("simulate", help="run a synthetic experiment")
    s.add_argument("--design", required=True)
    s.add_argument("--plant", required=True)
    s.add_argument("--periods", type=int, default=3)
    s.add_argument("--realizations", type=int, default=None, help="defaults to all design realizations")
    s.add_argument("--settle", type=int, default=3, help="minimum settling periods")
    s.add_argument("--out-dir")
    s.set_defaults(func=cmd_simulate)

    a = sub.add_parser("analyze", help="estimate the BLA from records")
    a.add_argument("records", nargs="+", help="record CSV files (sidecars alongside)")
    a.add_argument("--design", required=True)
    a.add_argument("--method", choices=("etfe", "lpm"), default="lpm")
    a.add_argument("--poly-order", type=int, default=2)
    a.add_argument("--half-width", type=_half_width, default="auto")
    a.add_argument("--drift-threshold", type=float, default=0.05)
    a.add_argument("--out-dir")
    a.set_defaults(func=cmd_analyze)

    r = sub.add_parser("report", help="emit plot-ready figure data")
    r.add_argument("--report", required=True)
    r.add_argument("--format", choices=("csv", "json"), default="csv")
    r.add_argument("--spectrum-fmax", type=float, default=5.0, help="highest spectrum frequency exported (Hz)")
    r.add_argument("--out-dir")
    r.set_defaults(func=cmd_report)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s: %(message)s")
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (RecordError, PlantError, DesignError, FileNotFoundError, json.JSONDecodeError, KeyError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (NumericalError, np.linalg.LinAlgError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except ValueError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
