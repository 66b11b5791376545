"""Decade-stratified bootstrap over years with percentile intervals."""
from __future__ import annotations

import csv
import logging
from collections import Counter
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import DomainError
from .estimation.series import ObservationSeries

log = logging.getLogger(__name__)

FAILURE_LIMIT = 0.10


def calendar_decade(year):
    return int(year) // 10 * 10


@dataclass(frozen=True)
class BootstrapPlan:
    n_replicates: int = 200
    rng_seed: int = 0
    decade_of: Callable = calendar_decade

    def __post_init__(self):
        if self.n_replicates < 1:
            raise DomainError("n_replicates must be positive")

    def strata(self, years):
        out = {}
        for y in sorted({int(y) for y in years}):
            out.setdefault(self.decade_of(y), []).append(y)
        return out

    def replicate_rngs(self):
        """One independent generator per replicate, fixed by ``rng_seed``."""
        seeds = np.random.SeedSequence(self.rng_seed).spawn(self.n_replicates)
        return [np.random.default_rng(s) for s in seeds]


def stratified_resample(years, plan: BootstrapPlan, rng):
    """Years drawn with replacement inside each decade, keeping each
    decade's count. Returned decade by decade."""
    years = list(years)
    if not years:
        raise DomainError("no years to resample")
    drawn = []
    for _, members in sorted(plan.strata(years).items()):
        idx = rng.integers(0, len(members), size=len(members))
        drawn.extend(members[i] for i in idx)
    return drawn


def percentile_ci(values, level=0.95):
    """Empirical ``(1-level)/2`` and ``(1+level)/2`` percentiles, linearly
    interpolated between order statistics at positions ``p (n - 1)``."""
    v = np.asarray(values, dtype=float)
    if v.ndim == 1:
        v = v[:, None]
        squeeze = True
    else:
        squeeze = False
    if v.shape[0] < 20:
        raise DomainError(f"percentile intervals need at least 20 values, got {v.shape[0]}")
    if not 0.0 < level < 1.0:
        raise DomainError("level must lie in (0, 1)")
    a = 0.5 * (1.0 - level)
    lo, hi = np.percentile(v, [100.0 * a, 100.0 * (1.0 - a)], axis=0, method="linear")
    if squeeze:
        return float(lo[0]), float(hi[0])
    return lo, hi


@dataclass
class BootstrapResult:
    names: tuple
    estimates: dict
    values: dict
    converged: np.ndarray
    resamples: list
    plan: BootstrapPlan
    diagnostics: dict = field(default_factory=dict)

    @property
    def n_failed(self):
        return int((~self.converged).sum())

    @property
    def reliable(self):
        return self.n_failed <= FAILURE_LIMIT * self.converged.size

    def ci(self, level=0.95):
        """Percentile interval per functional over converged replicates."""
        ok = self.converged
        return {n: percentile_ci(self.values[n][ok], level) for n in self.names}


def _as_fit(out):
    if hasattr(out, "converged") and hasattr(out, "model"):
        return out.model, bool(out.converged)
    return out, True


def bootstrap_fits(data: ObservationSeries, plan: BootstrapPlan, fit, functionals: dict,
                   full_model) -> BootstrapResult:
    """Refit on each resampled set of years and evaluate ``functionals``.

    ``fit(series, init)`` returns a fit result (with ``model`` and
    ``converged``) or a bare model; ``init`` is ``full_model``, the optimum on
    the full data. A year drawn k times enters with weight k.
    """
    names = tuple(functionals)
    estimates = {n: np.atleast_1d(np.asarray(f(full_model), dtype=float))
                 for n, f in functionals.items()}
    years = [int(y) for y in data.unique_years]
    R = plan.n_replicates
    values = {n: np.full((R, estimates[n].size), np.nan) for n in names}
    converged = np.zeros(R, dtype=bool)
    resamples = []
    for r, rng in enumerate(plan.replicate_rngs()):
        drawn = stratified_resample(years, plan, rng)
        resamples.append(drawn)
        series = data.with_year_counts(Counter(drawn))
        try:
            model, ok = _as_fit(fit(series, full_model))
        except Exception as exc:  # a failed replicate is flagged, never fatal
            log.warning("replicate %d failed: %s", r, exc)
            continue
        converged[r] = ok
        for n, f in functionals.items():
            values[n][r] = np.asarray(f(model), dtype=float).reshape(-1)
    res = BootstrapResult(names, estimates, values, converged, resamples, plan)
    res.diagnostics = {"n_replicates": R, "n_failed": res.n_failed,
                       "reliable": res.reliable, "interpolation": "linear (numpy type 7)"}
    if not res.reliable:
        log.warning("%d of %d replicates failed; intervals are unreliable", res.n_failed, R)
    return res


def write_replicates(path, result: BootstrapResult, header_lines=()):
    with open(path, "w", newline="") as fh:
        for line in header_lines:
            fh.write(f"# {line}\n")
        w = csv.writer(fh)
        w.writerow(["replicate", "converged", "functional_name", "grid_index", "value"])
        for r in range(result.converged.size):
            for n in result.names:
                for j, v in enumerate(result.values[n][r]):
                    w.writerow([r, int(result.converged[r]), n, j, repr(float(v))])


def write_ci(path, result: BootstrapResult, level=0.95, header_lines=()):
    cis = result.ci(level)
    with open(path, "w", newline="") as fh:
        for line in header_lines:
            fh.write(f"# {line}\n")
        fh.write(f"# failed_replicates={result.n_failed} reliable={result.reliable}\n")
        w = csv.writer(fh)
        w.writerow(["functional_name", "grid_index", "estimate", "lo", "hi"])
        for n in result.names:
            lo, hi = cis[n]
            for j, est in enumerate(result.estimates[n]):
                w.writerow([n, j, repr(float(est)), repr(float(lo[j])), repr(float(hi[j]))])
