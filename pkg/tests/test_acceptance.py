"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Run with ``pytest tests/test_acceptance.py -v``. The lines are written past
pytest's capture so they appear in the normal log.
"""
import datetime as dt
import itertools
import math
import os
import time
from collections import Counter
from fractions import Fraction
from pathlib import Path

import numpy as np
import pytest
from scipy import stats
from scipy.integrate import quad

from batsfit.bootstrap import (
    BootstrapPlan,
    bootstrap_fits,
    calendar_decade,
    stratified_resample,
    write_ci,
    write_replicates,
)
from batsfit.covariates import read_covariate_csv
from batsfit.distributions import (
    BatsParams,
    bats_cdf,
    bats_logpdf,
    bats_pdf,
    bats_quantile,
    bats_support,
    h_inverse,
    h_transform,
    softplus_inverse,
)
from batsfit.estimation import (
    ObservationSeries,
    bats_negloglik,
    fit_bats,
    fit_skew_normal,
    negloglik_gradient,
    pinball_loss,
    quantile_regression,
)
from batsfit.io import ingest
from batsfit.scoring import (
    CensoredCdf,
    comparison_from_folds,
    crps,
    crps_comparison,
    make_cv_folds,
    run_crps_cv,
    wcrps,
    wcrps_comparison,
)
from batsfit.seasonal import LocationCoeffs, LogScaleCoeffs, SeasonalSkewNormalModel, quantile_curve
from batsfit.simulate import daily_dates
from helpers import (
    BASIS,
    central_difference,
    covariate,
    head,
    random_feasible_model,
    random_params,
    simulated,
    true_model,
)
from test_bootstrap import _coverage, _sparse_gaussian, weighted_median


@pytest.fixture
def report(capsys):
    def emit(n, ok, detail):
        with capsys.disabled():
            print(f"\n{'PASS' if ok else 'FAIL'} criterion {n}: {detail}")
        assert ok, f"criterion {n}: {detail}"
    return emit


# 1 ---------------------------------------------------------------------


def test_criterion_1_distribution_correctness(report):
    t0 = time.perf_counter()
    rng = np.random.default_rng(101)
    worst_int = worst_q = worst_h = 0.0
    levels = np.array([1e-9, 1e-4, 0.01, 0.25, 0.5, 0.75, 0.99, 1 - 1e-4, 1 - 1e-9])
    for _ in range(20):
        p = random_params(rng)
        lo, hi = bats_quantile(p, 1e-12), bats_quantile(p, 1 - 1e-12)
        val, _ = quad(lambda x: bats_pdf(p, x), lo, hi, epsabs=1e-11, limit=500,
                      points=[p.phi0, p.phi1])
        worst_int = max(worst_int, abs(val - 1.0))
        x = np.asarray(bats_quantile(p, levels))
        worst_q = max(worst_q, float(np.max(np.abs(bats_cdf(p, x) - levels))))
        xs = np.asarray(bats_quantile(p, levels[1:-1]))
        worst_h = max(worst_h, float(np.max(np.abs(h_inverse(p, h_transform(p, xs)) - xs))))
    dt_s = time.perf_counter() - t0
    ok = worst_int <= 1e-6 and worst_q < 1e-8 and worst_h < 1e-8 and dt_s < 30
    report(1, ok, f"|int pdf - 1| = {worst_int:.2e}, cdf/quantile {worst_q:.2e}, "
                  f"H roundtrip {worst_h:.2e}, {dt_s:.1f} s")


# 2 ---------------------------------------------------------------------


def test_criterion_2_kappa_continuity(report):
    base = dict(nu=10.0, phi0=-0.5, phi1=0.5, tau0=1.0, tau1=1.2)
    p0 = BatsParams(kappa0=0.0, kappa1=0.0, **base)
    x = np.linspace(bats_quantile(p0, 5e-5), bats_quantile(p0, 1 - 5e-5), 2001)
    ref = bats_logpdf(p0, x)
    worst = 0.0
    for k in (1e-6, -1e-6):
        pk = BatsParams(kappa0=k, kappa1=k, **base)
        worst = max(worst, float(np.max(np.abs(bats_logpdf(pk, x) - ref))))
    report(2, worst <= 1e-6, f"max |logpdf(kappa=+-1e-6) - logpdf(kappa=0)| = {worst:.2e} "
                             f"over the central 99.99% (required 1e-6)")


# 3 ---------------------------------------------------------------------


def test_criterion_3_tail_asymptotics(report):
    errs = []
    for nu, k1 in ((5.0, 0.5), (10.0, 0.25)):
        p = BatsParams(nu=nu, phi0=0.0, phi1=1.0 / k1, tau0=1.0, tau1=1.0, kappa0=0.0, kappa1=k1)
        sf = np.array([1e-6, 1e-8])
        x = np.asarray(bats_quantile(p, 1 - sf))
        slope = float((np.diff(np.log(sf)) / np.diff(np.log(x)))[0])
        errs.append(abs(slope / (-nu / k1) - 1.0))
    p = BatsParams(nu=10.0, phi0=0.0, phi1=1.0, tau0=1.5, tau1=1.5, kappa0=0.0, kappa1=-0.3)
    U = bats_support(p).upper
    exact = 1.0 + 1.5 * softplus_inverse(-1.0 / -0.3)
    ok = max(errs) < 0.05 and U == exact
    report(3, ok, f"slope relative errors {errs[0]:.3f}, {errs[1]:.3f}; "
                  f"U = {U!r} vs {exact!r}")


# 4 ---------------------------------------------------------------------


def test_criterion_4_gradient_fidelity(report):
    t0 = time.perf_counter()
    model = true_model()
    data = head(simulated(first=1980, last=1982), 1000)
    assert len(data) == 1000 and model.vector.size == 45
    rng = np.random.default_rng(404)
    worst = 0.0
    for _ in range(20):
        m = random_feasible_model(rng, model, data, bats_negloglik)
        g = negloglik_gradient(m, data)
        fd = central_difference(lambda v: bats_negloglik(m.with_vector(v), data), m.vector)
        worst = max(worst, float(np.max(np.abs(g - fd) / np.abs(fd))))
    dt_s = time.perf_counter() - t0
    report(4, worst < 1e-4 and dt_s < 120,
           f"max relative gradient error {worst:.2e} at 20 points, {dt_s:.1f} s")


# 5 ---------------------------------------------------------------------


def test_criterion_5_simulation_recovery(report):
    t0 = time.perf_counter()
    truth = true_model(beta1=2.0)
    data = simulated(truth, 1980, 2009, seed=7)
    res = fit_bats(data)
    m = res.model
    err50 = err999 = 0.0
    for year in range(1980, 2010):
        err50 = max(err50, float(np.max(np.abs(quantile_curve(m, 0.5, year)
                                                - quantile_curve(truth, 0.5, year)))))
        err999 = max(err999, float(np.max(np.abs(quantile_curve(m, 0.999, year)
                                                  - quantile_curve(truth, 0.999, year)))))
    feasible = m.kappa0 / m.nu > -0.5 and m.kappa1 / m.nu > -0.5
    dt_s = time.perf_counter() - t0
    ok = err50 <= 0.5 and err999 <= 3.0 and feasible and dt_s < 600
    report(5, ok, f"median curve {err50:.3f}, 0.999 curve {err999:.3f}, "
                  f"kappa/nu = ({m.kappa0 / m.nu:.2e}, {m.kappa1 / m.nu:.2e}), "
                  f"optimizer converged={res.converged}, {dt_s:.0f} s")


# 6 ---------------------------------------------------------------------


def _closed_form_gaussian_crps(mu, sigma, x):
    z = (x - mu) / sigma
    return sigma * (z * (2 * stats.norm.cdf(z) - 1) + 2 * stats.norm.pdf(z) - 1 / math.sqrt(math.pi))


class _Normal:
    def __init__(self, mu, sigma):
        d = stats.norm(mu, sigma)
        self.cdf, self.quantile = d.cdf, d.ppf


def test_criterion_6_crps_oracle(report):
    rng = np.random.default_rng(606)
    worst = 0.0
    for _ in range(50):
        mu, sigma = rng.normal(0, 5), rng.uniform(0.1, 5)
        x = mu + sigma * rng.normal(0, 2)
        d = _Normal(mu, sigma)
        got = crps(d.cdf, x, quantile=d.quantile)
        worst = max(worst, abs(got - _closed_form_gaussian_crps(mu, sigma, x)))
    worst_w = 0.0
    for mu in (-0.7, 0.3, 1.1):
        d = _Normal(0.0, 1.0)
        cz = CensoredCdf("full", mu, d)
        for x in (-2.0, mu, 0.9, 2.5):
            xc = cz.censor(x)
            ref = crps(cz, xc, lower=mu, upper=float(d.quantile(1 - 1e-10)), breakpoints=[mu])
            worst_w = max(worst_w, abs(wcrps(cz, xc, mu) - ref))
    report(6, worst < 1e-4 and worst_w < 1e-6,
           f"Gaussian CRPS max error {worst:.2e} over 50 triples; "
           f"wCRPS at q = mu vs censored CRPS {worst_w:.2e}")


# 7 ---------------------------------------------------------------------


def _vertex_objective(X, y, tau):
    n, p = X.shape
    best = math.inf
    for rows in itertools.combinations(range(n), p):
        A = X[list(rows)]
        if abs(np.linalg.det(A)) < 1e-10:
            continue
        b = np.linalg.solve(A, y[list(rows)])
        best = min(best, pinball_loss(y - X @ b, tau))
    return best


def test_criterion_7_quantile_regression_oracle(report):
    rng = np.random.default_rng(707)
    worst = 0.0
    for _ in range(25):
        p = int(rng.integers(1, 4))
        n = int(rng.integers(p + 3, 16))
        X = np.column_stack([np.ones(n), rng.normal(size=(n, p - 1))])
        y = X @ rng.normal(size=p) + rng.standard_t(3, n)
        tau = float(rng.uniform(0.05, 0.95))
        beta = quantile_regression(X, y, tau)
        worst = max(worst, abs(pinball_loss(y - X @ beta, tau) - _vertex_objective(X, y, tau)))
    report(7, worst < 1e-8, f"max objective gap {worst:.2e} over 25 instances")


# 8 ---------------------------------------------------------------------


def test_criterion_8_bootstrap_mechanics(report, tmp_path):
    t0 = time.perf_counter()
    years = list(range(1947, 2010))
    ref = Counter(calendar_decade(y) for y in years)
    plan = BootstrapPlan(n_replicates=1000, rng_seed=8)
    counts_ok = all(Counter(calendar_decade(y) for y in stratified_resample(years, plan, rng)) == ref
                    for rng in plan.replicate_rngs())

    data = _sparse_gaussian(3)
    full = weighted_median(data)
    blobs = []
    for k in range(2):
        res = bootstrap_fits(data, BootstrapPlan(n_replicates=50, rng_seed=9), weighted_median,
                             {"median": lambda m: m}, full)
        p1, p2 = tmp_path / f"rep{k}.csv", tmp_path / f"ci{k}.csv"
        write_replicates(p1, res)
        write_ci(p2, res)
        blobs.append((p1.read_bytes(), p2.read_bytes()))
    identical = blobs[0] == blobs[1]

    coverage = _coverage()
    dt_s = time.perf_counter() - t0
    ok = counts_ok and identical and 0.85 <= coverage <= 1.0 and dt_s < 600
    report(8, ok, f"decadal counts exact in 1000 resamples={counts_ok}, byte-identical={identical}, "
                  f"95% CI coverage {coverage:.2f} (50 experiments), {dt_s:.1f} s")


# 9 ---------------------------------------------------------------------

# per fold: (season, A, B); all values are dyadic so float arithmetic is exact
_FIXTURE = [
    [("DJF", 1.0, 1.5), ("DJF", 1.0, 1.5), ("JJA", 2.0, 2.0), ("MAM", 0.5, 1.0)],
    [("DJF", 2.0, 2.5), ("SON", 1.0, 0.75), ("JJA", 3.0, 3.5), ("MAM", 1.5, 1.0)],
    [("DJF", 0.5, 1.0), ("SON", 0.25, 0.5), ("JJA", 1.0, 1.0), ("MAM", 1.0, 1.5)],
]
# expected crps_comparison rows: 100 * sum_k mean(A-B) / sum_k mean(A), by hand
# e.g. Year: fold means of A are 9/8, 15/8, 11/16 and of A - B are -3/8, -1/16, -5/16
_EXPECTED_CRPS = {"Year": -1200 / 59, "DJF": -300 / 7, "MAM": -50 / 3, "JJA": -25 / 3, "SON": 0.0}
# expected wcrps_comparison rows use sum_k mean(B) in the denominator
_EXPECTED_WCRPS = {"Year": -1200 / 71, "DJF": -30.0, "MAM": -100 / 7, "JJA": -100 / 13, "SON": 0.0}


def _fixture_arrays():
    s = [np.array([r[0] for r in f]) for f in _FIXTURE]
    a = [np.array([r[1] for r in f]) for f in _FIXTURE]
    b = [np.array([r[2] for r in f]) for f in _FIXTURE]
    return a, b, s


def _fraction_table(denom):
    out = {}
    for row in ("Year", "DJF", "MAM", "JJA", "SON"):
        num = den = Fraction(0)
        for f in _FIXTURE:
            cell = [r for r in f if row == "Year" or r[0] == row]
            if not cell:
                continue
            num += sum(Fraction(r[1]) - Fraction(r[2]) for r in cell) / len(cell)
            den += sum(Fraction(r[1] if denom == "a" else r[2]) for r in cell) / len(cell)
        out[row] = 100 * num / den
    return out


def test_criterion_9_comparison_algebra(report, caplog):
    a, b, s = _fixture_arrays()
    with caplog.at_level("WARNING"):
        tab = crps_comparison(a, b, s)
        wtab = wcrps_comparison(a, b, s)
    skipped = "fold 0 has no observations in SON" in caplog.text
    hand = {k: float(v) for k, v in _fraction_table("a").items()}
    whand = {k: float(v) for k, v in _fraction_table("b").items()}
    # the literal tables and the exact rational evaluation agree with one another
    agree = hand == _EXPECTED_CRPS and whand == _EXPECTED_WCRPS
    exact = tab == _EXPECTED_CRPS and wtab == _EXPECTED_WCRPS
    # sign: A uniformly better (smaller) must give a negative entry
    better = crps_comparison([x * 0.5 for x in a], a, s)
    sign_ok = all(v < 0 for v in better.values()) and tab["Year"] < 0
    report(9, agree and exact and sign_ok and skipped,
           f"crps table {tab}, wcrps table {wtab}, negative when the first model scores lower={sign_ok}, "
           f"empty fold-season cell excluded={skipped}")


# 10 --------------------------------------------------------------------

_CV_COV = covariate(1990, 2002)
_CV_FIRST = dt.date(1990, 1, 1)


class _TrainingRecorder:
    def __init__(self):
        self.calls = []

    def __call__(self, train):
        self.calls.append(frozenset(int(y) for y in train.unique_years))
        zero = (0.0,) * 8
        return SeasonalSkewNormalModel(LocationCoeffs(0.0, zero), LogScaleCoeffs(0.0, zero),
                                       LogScaleCoeffs(0.0, zero), BASIS, _CV_COV, _CV_FIRST)


def test_criterion_10_cv_discipline(report):
    dates = daily_dates("1990-01-01", "2002-12-31")[::37]
    data = ObservationSeries.from_arrays(dates, np.sin(np.arange(dates.size)), _CV_COV)
    rec_a, rec_b = _TrainingRecorder(), _TrainingRecorder()
    folds = run_crps_cv(data, {"a": rec_a, "b": rec_b})
    disjoint = True
    for fs, ta, tb in zip(folds, rec_a.calls, rec_b.calls):
        scored = set(int(y) for y in np.unique(fs.dates.astype("datetime64[Y]").astype(int) + 1970))
        disjoint &= not (scored & ta) and not (scored & tb) and scored <= set(fs.test_years)
        disjoint &= fs.scores["a"].shape == fs.scores["b"].shape
    n_calls = len(rec_a.calls) == len(folds) == len(rec_b.calls)
    shapes = True
    for n in [8, 9, 10] + list(range(12, 81)):
        yrs = list(range(1950, 1950 + n))
        blocks = make_cv_folds(yrs)
        shapes &= [y for blk in blocks for y in blk] == yrs
        shapes &= all(len(blk) in (4, 5) and list(blk) == list(range(blk[0], blk[0] + len(blk)))
                      for blk in blocks)
    sizes = [len(f.test_years) for f in folds]
    report(10, disjoint and n_calls and shapes,
           f"{len(folds)} folds of sizes {sizes}; scored years never in training={disjoint}; "
           f"consecutive 4/5 blocks for n = 8..80 (n != 11)={shapes}")


# 11 --------------------------------------------------------------------


GSOD_DIR = os.environ.get("BATSFIT_GSOD_DIR")


@pytest.mark.slow
@pytest.mark.skipif(not GSOD_DIR, reason="set BATSFIT_GSOD_DIR to station exports")
def test_criterion_11_station_year_row(report):
    root = Path(GSOD_DIR)
    cov = read_covariate_csv(root / "covariate.csv")
    signs = {}
    for path in sorted(root.glob("*.csv")):
        if path.name == "covariate.csv":
            continue
        series = ingest(path, cov)
        folds = run_crps_cv(series, {"bats": lambda t: fit_bats(t).model,
                                     "skew": lambda t: fit_skew_normal(t).model})
        signs[path.stem] = comparison_from_folds(folds, "bats", "skew")["Year"]
    ok = bool(signs) and all(v < 0 for v in signs.values())
    report(11, ok, f"Year row per station: {signs}")
