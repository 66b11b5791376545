"""Command-line entry point: ``batsfit <subcommand> [options]``.

Options can also come from a JSON file given with ``--config``; keys are the
long option names with dashes replaced by underscores. Flags given on the
command line win over the file. Failures exit nonzero after printing a JSON
error document on stderr.
"""
from __future__ import annotations

import argparse
import csv
import io as _stdio
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .bootstrap import BootstrapPlan, bootstrap_fits, write_ci, write_replicates
from .covariates import PeriodicSplineBasis, calendar_year, day_of_year, read_covariate_csv
from .errors import BatsfitError, ConfigError
from .estimation import FitConfig, fit_bats, fit_gpd, fit_skew_normal, windowed_kde
from .io import config_hash, ingest_with_report, metadata_lines, write_series, write_table
from .scoring import (
    comparison_from_folds,
    fold_rows,
    run_crps_cv,
    run_wcrps_cv,
    write_fold_scores,
    write_summary,
)
from .seasonal import (
    DAY_GRID,
    SPREADS,
    quantile_change,
    quantile_curve,
    quantile_spreads,
    read_model,
    write_model,
)
from .simulate import daily_dates, simulate_series

log = logging.getLogger("batsfit")

DEFAULT_QUANTILES = (0.001, 0.01, 0.05, 0.25, 0.5, 0.75, 0.95, 0.99, 0.999)
MODEL_CHOICES = ("bats", "skew", "gpd-upper", "gpd-lower")

DEFAULTS = {
    "min_hours": 20.0,
    "fahrenheit": False,
    "station": None,
    "model_type": "bats",
    "p_mu": 0.95,
    "max_iterations": 3000,
    "gradient_tolerance": 1e-6,
    "scale_intercept_grid": [-1.0, 0.0, 1.0, 2.0],
    "constraint_margin": 1e-3,
    "seed": 0,
    "quantiles": list(DEFAULT_QUANTILES),
    "reference": "median",
    "replicates": 200,
    "level": 0.95,
    "half_window": 7,
    "grid_points": 201,
    "kind": "crps",
    "tail": "upper",
    "models": ["bats", "skew"],
    "levels": None,
    "bootstrap": False,
    "station_id": "synthetic",
}


def _floats(text):
    if isinstance(text, (list, tuple)):
        return [float(v) for v in text]
    return [float(v) for v in str(text).split(",") if v.strip()]


def _names(text):
    if isinstance(text, (list, tuple)):
        return list(text)
    return [v.strip() for v in str(text).split(",") if v.strip()]


def _years(text):
    a, _, b = str(text).partition(":")
    y0 = int(a)
    return y0, int(b) if b else y0


# ---------------------------------------------------------------------------
# option plumbing
# ---------------------------------------------------------------------------


def _resolve(args):
    opts = dict(DEFAULTS)
    if args.config:
        try:
            with open(args.config, encoding="utf-8") as fh:
                doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config file is not valid JSON: {exc}") from None
        if not isinstance(doc, dict):
            raise ConfigError("config file must hold a JSON object")
        opts.update(doc)
    opts.update({k: v for k, v in vars(args).items() if v is not None})
    qs = _floats(opts["quantiles"])
    if any(not 0.0 < q < 1.0 for q in qs):
        raise ConfigError("quantiles must lie strictly between 0 and 1")
    opts["quantiles"] = qs
    return opts


def _fit_config(opts):
    return FitConfig(max_iterations=int(opts["max_iterations"]),
                     gradient_tolerance=float(opts["gradient_tolerance"]),
                     scale_intercept_grid=tuple(_floats(opts["scale_intercept_grid"])),
                     constraint_margin=float(opts["constraint_margin"]),
                     rng_seed=int(opts["seed"]))


def _hashable_opts(opts):
    skip = {"command", "config", "handler", "out", "out_dir", "verbose"}
    return {k: v for k, v in opts.items() if k not in skip}


def _header(opts, **extra):
    return metadata_lines(_hashable_opts(opts), opts.get("seed"), **extra)


def _require(opts, *keys):
    for k in keys:
        if opts.get(k) in (None, ""):
            raise ConfigError(f"--{k.replace('_', '-')} is required")


def _emit_table(opts, columns, rows, **extra):
    out = opts.get("out")
    header = _header(opts, **extra)
    if out in (None, "-"):
        buf = _stdio.StringIO()
        for line in header:
            buf.write(f"# {line}\n")
        w = csv.writer(buf)
        w.writerow(columns)
        for r in rows:
            w.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in r])
        sys.stdout.write(buf.getvalue())
    else:
        Path(out).parent.mkdir(parents=True, exist_ok=True)
        write_table(out, columns, rows, header)


def _load_series(opts, covariate=None):
    _require(opts, "data")
    if covariate is None:
        _require(opts, "covariate")
        covariate = read_covariate_csv(opts["covariate"])
    series, report = ingest_with_report(opts["data"], covariate, float(opts["min_hours"]),
                                        bool(opts["fahrenheit"]), opts.get("station"))
    return series, report


def _fit(kind, series, opts, init=None):
    cfg = _fit_config(opts)
    if kind == "bats":
        return fit_bats(series, cfg, init=init)
    if kind == "skew":
        return fit_skew_normal(series, cfg, init=init)
    if kind in ("gpd-upper", "gpd-lower", "gpd"):
        tail = init.tail if init is not None else kind.split("-")[1]
        return fit_gpd(series, tail, float(opts["p_mu"]), cfg, init=init)
    raise ConfigError(f"unknown model type {kind!r}; choose from {MODEL_CHOICES}")


def _label(q):
    return f"q{q:g}"


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------


def cmd_fit(opts):
    _require(opts, "out")
    series, report = _load_series(opts)
    kind = opts["model_type"]
    res = _fit(kind, series, opts)
    model = res.model.with_vector(res.model.vector, ingest=report.to_dict(),
                                  station=series.station_id, seed=opts["seed"],
                                  config_hash=config_hash(_hashable_opts(opts)))
    Path(opts["out"]).parent.mkdir(parents=True, exist_ok=True)
    write_model(model, opts["out"])
    summary = {"model_type": kind, "out": opts["out"], **res.summary()}
    summary.pop("profile", None)
    print(json.dumps(summary, default=float))
    return 0


def cmd_quantiles(opts):
    _require(opts, "model", "year")
    model = read_model(opts["model"])
    qs = opts["quantiles"]
    curves = [quantile_curve(model, q, int(opts["year"])) for q in qs]
    rows = [(int(d), *[float(c[i]) for c in curves]) for i, d in enumerate(DAY_GRID)]
    _emit_table(opts, ["day", *[_label(q) for q in qs]], rows, year=opts["year"])
    return 0


def _pdf_original(model, d, year, x):
    p = model.params_at(np.full(x.shape, d), np.full(x.shape, year))
    if model.kind == "gpd":
        return np.asarray(p.pdf(model.sign * x))
    return np.asarray(p.pdf(x))


def cmd_density(opts):
    _require(opts, "model", "date")
    models = [read_model(m) for m in _names(opts["model"])]
    labels = []
    for m in models:
        lab = m.kind
        while lab in labels:
            lab += "_"
        labels.append(lab)
    data = None
    if opts.get("data"):
        data, _ = _load_series(opts, covariate=models[0].covariate)
    ref = models[0]
    rows = []
    for date in _names(opts["date"]):
        dd = np.datetime64(date, "D")
        d = float(day_of_year(dd, ref.first_obs))
        y = int(calendar_year(dd))
        if opts.get("grid"):
            lo, hi, n = _floats(opts["grid"])
        else:
            p = ref.params_at(d, y)
            lo, hi, n = float(p.quantile(1e-4)), float(p.quantile(1 - 1e-4)), opts["grid_points"]
        x = np.linspace(lo, hi, int(n))
        cols = [_pdf_original(m, d, y, x) for m in models]
        if data is not None:
            cols.append(windowed_kde(data, d, x, int(opts["half_window"]),
                                     first_obs=ref.first_obs))
        for i in range(x.size):
            rows.append((date, float(x[i]), *[float(c[i]) for c in cols]))
    columns = ["date", "x", *labels, *(["kde"] if data is not None else [])]
    _emit_table(opts, columns, rows)
    return 0


def cmd_score(opts):
    _require(opts, "out_dir")
    series, _ = _load_series(opts)
    out = Path(opts["out_dir"])
    out.mkdir(parents=True, exist_ok=True)
    names = _names(opts["models"])
    labels = []
    fitters = {}
    for n in names:
        if n not in ("bats", "skew"):
            raise ConfigError("score compares full-distribution models: bats or skew")
        lab = n if n not in labels else f"{n}_{len(labels) + 1}"
        labels.append(lab)
        fitters[lab] = (lambda kind: (lambda train: _fit(kind, train, opts).model))(n)
    header = _header(opts)
    if opts["kind"] == "crps":
        if len(labels) < 2:
            raise ConfigError("crps comparison needs at least two models")
        folds = run_crps_cv(series, fitters)
        write_fold_scores(out / "fold_scores.csv", fold_rows(folds), header)
        tables = {f"{labels[0]}-{b}": comparison_from_folds(folds, labels[0], b)
                  for b in labels[1:]}
        write_summary(out / "summary.csv", tables, header)
        print(json.dumps(tables))
        return 0
    if opts["kind"] != "wcrps":
        raise ConfigError("kind must be crps or wcrps")
    tail = opts["tail"]
    levels = _floats(opts["levels"]) if opts.get("levels") else None
    ref_basis = PeriodicSplineBasis()
    cfg = _fit_config(opts)

    def gpd_fitter(train, tl, thr):
        return fit_gpd(train, tl, float(opts["p_mu"]), cfg, threshold=thr).model

    by_level = run_wcrps_cv(series, fitters, gpd_fitter, ref_basis, tail, levels,
                            float(opts["p_mu"]))
    recs = []
    summary = {}
    for lv, folds in by_level.items():
        recs.extend(fold_rows(folds, label=f"{tail}:{lv:g}"))
        summary[f"{lv:g}"] = {lab: comparison_from_folds(folds, lab, "gpd", "wcrps")["Year"]
                              for lab in labels}
    write_fold_scores(out / "fold_scores.csv", recs, header)
    rows = [(tail, lv, *[summary[lv][lab] for lab in labels]) for lv in summary]
    write_table(out / "summary.csv", ["tail", "p_q", *[f"{lab}-gpd" for lab in labels]],
                rows, header)
    print(json.dumps(summary))
    return 0


def cmd_change(opts):
    _require(opts, "model", "year0", "year1")
    model = read_model(opts["model"])
    qs = opts["quantiles"]
    y0, y1 = int(opts["year0"]), int(opts["year1"])
    ref = opts["reference"]
    curves = [quantile_change(model, q, y0, y1, ref) for q in qs]
    columns = ["day", *[_label(q) for q in qs]]
    extra = []
    meta = {"year0": y0, "year1": y1, "reference": ref}
    if opts["bootstrap"]:
        series, _ = _load_series(opts, covariate=model.covariate)
        plan = BootstrapPlan(int(opts["replicates"]), int(opts["seed"]))
        funcs = {_label(q): (lambda q: (lambda m: quantile_change(m, q, y0, y1, ref)))(q)
                 for q in qs}
        res = bootstrap_fits(series, plan, lambda s, init: _fit(model.kind, s, opts, init),
                             funcs, model)
        cis = res.ci(float(opts["level"]))
        for q in qs:
            lo, hi = cis[_label(q)]
            extra.extend([lo, hi])
            columns.extend([f"{_label(q)}_lo", f"{_label(q)}_hi"])
        meta.update(failed_replicates=res.n_failed, reliable=res.reliable,
                    interpolation="linear")
        if opts.get("replicates_out"):
            write_replicates(opts["replicates_out"], res, _header(opts))
        if opts.get("ci_out"):
            write_ci(opts["ci_out"], res, float(opts["level"]), _header(opts))
    rows = [(int(d), *[float(c[i]) for c in curves + extra]) for i, d in enumerate(DAY_GRID)]
    _emit_table(opts, columns, rows, **meta)
    return 0


def cmd_spreads(opts):
    _require(opts, "model", "years")
    model = read_model(opts["model"])
    y0, y1 = _years(opts["years"])
    names = [n for n, _, _ in SPREADS]
    rows = []
    for y in range(y0, y1 + 1):
        _, means = quantile_spreads(model, y)
        rows.append((y, *[means[n] for n in names]))
    _emit_table(opts, ["year", *names], rows)
    return 0


def cmd_simulate(opts):
    _require(opts, "model", "years")
    model = read_model(opts["model"])
    if model.kind == "gpd":
        raise ConfigError("simulate needs a full-distribution model (bats or skew)")
    y0, y1 = _years(opts["years"])
    rng = np.random.default_rng(int(opts["seed"]))
    series = simulate_series(model, daily_dates(f"{y0}-01-01", f"{y1}-12-31"), rng,
                             station_id=opts["station_id"])
    header = _header(opts)
    if opts.get("out") in (None, "-"):
        tmp = _stdio.StringIO()
        tmp.write("".join(f"# {h}\n" for h in header))
        tmp.write("station,date,temp\n")
        for d, v in zip(series.dates, series.values):
            tmp.write(f"{series.station_id},{d},{float(v)!r}\n")
        sys.stdout.write(tmp.getvalue())
    else:
        Path(opts["out"]).parent.mkdir(parents=True, exist_ok=True)
        write_series(opts["out"], series, header)
    return 0


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------


def build_parser():
    p = argparse.ArgumentParser(prog="batsfit", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"batsfit {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--config", help="JSON file of option values")
        sp.add_argument("--out", help="output file ('-' or omitted: stdout)")
        sp.add_argument("--seed", type=int)
        sp.add_argument("-v", "--verbose", action="store_true", default=None)

    def data_opts(sp):
        sp.add_argument("--data", help="daily CSV: station,date,temp[,hours]")
        sp.add_argument("--covariate", help="yearly covariate CSV: year,value")
        sp.add_argument("--min-hours", type=float)
        sp.add_argument("--fahrenheit", action="store_true", default=None,
                        help="input temperatures are in Fahrenheit")
        sp.add_argument("--station", help="keep only this station id")

    def fit_opts(sp):
        sp.add_argument("--max-iterations", type=int)
        sp.add_argument("--gradient-tolerance", type=float)
        sp.add_argument("--scale-intercept-grid", help="comma-separated log-scale starts")
        sp.add_argument("--constraint-margin", type=float)
        sp.add_argument("--p-mu", type=float, help="GPD threshold level")

    sp = sub.add_parser("fit", help="fit a model to a daily series",
                        description="Errors: parse_error for malformed input, "
                        "insufficient_data for short records, config_error for bad options.")
    common(sp); data_opts(sp); fit_opts(sp)
    sp.add_argument("--model-type", choices=MODEL_CHOICES)
    sp.set_defaults(handler=cmd_fit)

    sp = sub.add_parser("quantiles", help="per-day quantile curves for one year",
                        description="Errors: parse_error for an unreadable model, "
                        "domain_error when the year lacks a covariate value.")
    common(sp)
    sp.add_argument("--model")
    sp.add_argument("--year", type=int)
    sp.add_argument("--quantiles", help="comma-separated levels")
    sp.set_defaults(handler=cmd_quantiles)

    sp = sub.add_parser("density", help="model densities (and KDE) on given dates",
                        description="Errors: parse_error, domain_error for an empty KDE window.")
    common(sp); data_opts(sp)
    sp.add_argument("--model", help="comma-separated model files")
    sp.add_argument("--date", help="comma-separated ISO dates")
    sp.add_argument("--grid", help="lo,hi,n")
    sp.add_argument("--grid-points", type=int)
    sp.add_argument("--half-window", type=int)
    sp.set_defaults(handler=cmd_density)

    sp = sub.add_parser("score", help="cross-validated CRPS / wCRPS comparison tables",
                        description="Errors: insufficient_data for fewer than 8 years "
                        "or too few exceedances, config_error for bad model lists.")
    common(sp); data_opts(sp); fit_opts(sp)
    sp.add_argument("--out-dir")
    sp.add_argument("--models", help="comma-separated: bats, skew")
    sp.add_argument("--kind", choices=("crps", "wcrps"))
    sp.add_argument("--tail", choices=("upper", "lower"))
    sp.add_argument("--levels", help="comma-separated p_q levels")
    sp.set_defaults(handler=cmd_score)

    sp = sub.add_parser("change", help="quantile change curves between two years",
                        description="Errors: domain_error for uncovered years; with "
                        "--bootstrap also those of fit.")
    common(sp); data_opts(sp); fit_opts(sp)
    sp.add_argument("--model")
    sp.add_argument("--year0", type=int)
    sp.add_argument("--year1", type=int)
    sp.add_argument("--quantiles")
    sp.add_argument("--reference", choices=("median", "same"))
    sp.add_argument("--bootstrap", action="store_true", default=None)
    sp.add_argument("--replicates", type=int)
    sp.add_argument("--level", type=float)
    sp.add_argument("--replicates-out")
    sp.add_argument("--ci-out")
    sp.set_defaults(handler=cmd_change)

    sp = sub.add_parser("spreads", help="annual mean quantile spreads",
                        description="Errors: domain_error for uncovered years.")
    common(sp)
    sp.add_argument("--model")
    sp.add_argument("--years", help="first:last")
    sp.set_defaults(handler=cmd_spreads)

    sp = sub.add_parser("simulate", help="synthetic daily series from a model",
                        description="Errors: config_error for GPD models, "
                        "domain_error for years without covariate values.")
    common(sp)
    sp.add_argument("--model")
    sp.add_argument("--years", help="first:last")
    sp.add_argument("--station-id")
    sp.set_defaults(handler=cmd_simulate)
    return p


def _error_doc(exc):
    code = getattr(exc, "code", None) or "error"
    if isinstance(exc, OSError):
        code = "io_error"
    return {"error": code, "type": type(exc).__name__, "message": str(exc),
            "format_version": 1}


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    handler = args.handler
    try:
        opts = _resolve(args)
        logging.basicConfig(level=logging.INFO if opts.get("verbose") else logging.WARNING,
                            format="%(levelname)s %(name)s: %(message)s")
        return handler(opts)
    except (BatsfitError, OSError, ValueError) as exc:
        sys.stderr.write(json.dumps(_error_doc(exc)) + "\n")
        return 2


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
