import logging
from collections import Counter

import numpy as np
import pytest

from batsfit.bootstrap import (
    BootstrapPlan,
    bootstrap_fits,
    calendar_decade,
    percentile_ci,
    stratified_resample,
    write_ci,
    write_replicates,
)
from batsfit.errors import DomainError
from batsfit.estimation import FitConfig, ObservationSeries, fit_bats
from batsfit.simulate import daily_dates
from helpers import covariate, gaussian_series

YEARS = list(range(1947, 2010))


def _decade_counts(years):
    return Counter(calendar_decade(y) for y in years)


def test_calendar_decades():
    assert calendar_decade(1949) == 1940
    assert calendar_decade(1950) == 1950
    plan = BootstrapPlan()
    strata = plan.strata(YEARS)
    assert strata[1940] == [1947, 1948, 1949]
    assert sum(len(v) for v in strata.values()) == len(YEARS)


def test_decadal_counts_preserved():
    plan = BootstrapPlan(n_replicates=50, rng_seed=3)
    ref = _decade_counts(YEARS)
    for rng in plan.replicate_rngs():
        drawn = stratified_resample(YEARS, plan, rng)
        assert _decade_counts(drawn) == ref
        assert all(calendar_decade(y) in ref for y in drawn)


def test_single_year_decade_repeats():
    plan = BootstrapPlan()
    drawn = stratified_resample([1959, 1960, 1961], plan, np.random.default_rng(0))
    assert drawn[0] == 1959
    assert sorted(drawn[1:])[0] in (1960, 1961)


def test_selection_frequency():
    plan = BootstrapPlan()
    rng = np.random.default_rng(12)
    hits = sum(stratified_resample([1990, 1991], plan, rng).count(1990) for _ in range(10000))
    assert abs(hits / 20000 - 0.5) < 0.02


def test_resample_errors():
    with pytest.raises(DomainError):
        stratified_resample([], BootstrapPlan(), np.random.default_rng(0))
    with pytest.raises(DomainError):
        BootstrapPlan(n_replicates=0)


def test_percentile_ci_examples():
    lo, hi = percentile_ci(np.arange(1.0, 201.0))
    assert lo == pytest.approx(5.975, abs=1e-12)
    assert hi == pytest.approx(195.025, abs=1e-12)
    assert percentile_ci(np.full(40, 2.5)) == (2.5, 2.5)
    v = np.random.default_rng(0).normal(size=100)
    a, b = percentile_ci(v)
    a2, b2 = percentile_ci(v + 7.0)
    assert a2 == pytest.approx(a + 7.0, abs=1e-12) and b2 == pytest.approx(b + 7.0, abs=1e-12)
    assert a <= b
    lo2, hi2 = percentile_ci(np.column_stack([np.arange(1.0, 201.0), np.zeros(200)]))
    np.testing.assert_allclose(lo2, [5.975, 0.0])
    np.testing.assert_allclose(hi2, [195.025, 0.0])


def test_percentile_ci_errors():
    with pytest.raises(DomainError, match="20"):
        percentile_ci(np.arange(19.0))
    with pytest.raises(DomainError):
        percentile_ci(np.arange(30.0), level=1.0)


# ---------------------------------------------------------------------------
# replicate refitting
# ---------------------------------------------------------------------------


def _sparse_gaussian(seed, first=1980, last=2009, per_year=50, loc=0.0):
    dates = daily_dates(f"{first}-01-01", f"{last}-12-31")
    yrs = dates.astype("datetime64[Y]").astype(int) + 1970
    keep = np.concatenate([np.flatnonzero(yrs == y)[:per_year] for y in range(first, last + 1)])
    rng = np.random.default_rng(seed)
    return ObservationSeries.from_arrays(dates[keep], loc + rng.normal(size=keep.size),
                                         covariate(first, last))


def weighted_median(series, init=None):
    o = np.argsort(series.values, kind="stable")
    cw = np.cumsum(series.weights[o])
    return float(series.values[o][np.searchsorted(cw, 0.5 * cw[-1])])


def test_identity_plan_reproduces_full_fit():
    data = _sparse_gaussian(1, 1990, 1999)
    plan = BootstrapPlan(n_replicates=25, decade_of=lambda y: y)
    full = weighted_median(data)
    res = bootstrap_fits(data, plan, weighted_median, {"median": lambda m: m}, full)
    assert np.all(res.values["median"] == full)
    assert all(sorted(r) == list(range(1990, 2000)) for r in res.resamples)


def test_constant_functional_zero_width():
    data = _sparse_gaussian(2)
    plan = BootstrapPlan(n_replicates=30)
    res = bootstrap_fits(data, plan, weighted_median, {"c": lambda m: 4.0}, 0.0)
    lo, hi = res.ci()["c"]
    assert lo[0] == hi[0] == 4.0


def test_determinism_byte_identical(tmp_path):
    data = _sparse_gaussian(3)
    full = weighted_median(data)
    paths = []
    for k in range(2):
        res = bootstrap_fits(data, BootstrapPlan(n_replicates=40, rng_seed=9), weighted_median,
                             {"median": lambda m: m, "pair": lambda m: [m, 2 * m]}, full)
        p1, p2 = tmp_path / f"rep{k}.csv", tmp_path / f"ci{k}.csv"
        write_replicates(p1, res)
        write_ci(p2, res)
        paths.append((p1.read_bytes(), p2.read_bytes()))
    assert paths[0] == paths[1]
    other = bootstrap_fits(data, BootstrapPlan(n_replicates=40, rng_seed=10), weighted_median,
                           {"median": lambda m: m}, full)
    assert other.resamples != res.resamples


def test_failed_replicates_flagged(caplog):
    data = _sparse_gaussian(4, 1990, 1999)
    calls = {"n": 0}

    def flaky(series, init):
        calls["n"] += 1
        if calls["n"] % 3 == 0:
            raise RuntimeError("boom")
        return type("R", (), {"model": weighted_median(series), "converged": calls["n"] % 3 != 1})()

    with caplog.at_level(logging.WARNING):
        res = bootstrap_fits(data, BootstrapPlan(n_replicates=30), flaky, {"m": lambda m: m}, 0.0)
    assert res.converged.size == 30
    assert res.n_failed == 20
    assert not res.reliable and res.diagnostics["reliable"] is False
    assert "unreliable" in caplog.text
    assert np.all(np.isnan(res.values["m"][2::3]))


def _coverage(n_experiments=50, n_replicates=200):
    hits = 0
    for e in range(n_experiments):
        data = _sparse_gaussian(100 + e, loc=3.0)
        full = weighted_median(data)
        res = bootstrap_fits(data, BootstrapPlan(n_replicates=n_replicates, rng_seed=e),
                             weighted_median, {"median": lambda m: m}, full)
        lo, hi = res.ci()["median"]
        hits += bool(lo[0] <= 3.0 <= hi[0])
    return hits / n_experiments


def test_coverage_of_true_median():
    assert 0.85 <= _coverage() <= 1.0


def test_bootstrap_with_real_refits():
    data = gaussian_series(1998, 2001, seed=5)
    full = fit_bats(data, FitConfig(scale_intercept_grid=(0.0,)))

    def refit(series, init):
        return fit_bats(series, FitConfig(), init=init)

    res = bootstrap_fits(data, BootstrapPlan(n_replicates=3, rng_seed=1), refit,
                         {"kappa_over_nu": lambda m: [m.kappa0 / m.nu, m.kappa1 / m.nu]},
                         full.model)
    assert res.values["kappa_over_nu"].shape == (3, 2)
    assert np.all(np.isfinite(res.values["kappa_over_nu"]))
    assert np.all(res.values["kappa_over_nu"] > -0.5)
