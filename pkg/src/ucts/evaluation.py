"""Offline policy evaluation: oracle and IPS values, modified uplift curves, regret sweeps."""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, replace
from fractions import Fraction
from typing import Callable, Optional, Sequence

import numpy as np

from .data import Dataset
from .synthetic import SyntheticModel, oracle_policy_value

Z95 = 1.96


@dataclass(frozen=True)
class PolicyValueReport:
    value: float
    std_error: float
    n_test: int
    method: str  # "oracle" or "ips"

    CSV_COLUMNS = ("value", "std_error", "n_test", "method")

    def row(self):
        return [repr(self.value), repr(self.std_error), self.n_test, self.method]


@dataclass(frozen=True)
class MucCurve:
    control: int
    fractions: np.ndarray
    values: np.ndarray
    std_errors: np.ndarray

    CSV_COLUMNS = ("fraction", "n_treated", "value", "std_error")


def _assignments(policy, X, K) -> np.ndarray:
    chosen = np.asarray(policy(X) if callable(policy) else policy, dtype=np.int64).reshape(-1)
    if chosen.shape[0] != X.shape[0]:
        raise ValueError(f"policy returned {chosen.shape[0]} treatments for {X.shape[0]} rows")
    if chosen.size and (chosen.min() < 1 or chosen.max() > K):
        raise ValueError(f"policy selected a treatment outside 1..{K}")
    return chosen


def ips_value(policy, test: Dataset) -> PolicyValueReport:
    """Inverse-propensity estimate of the mean response under ``policy``.

    ``policy`` is a callable mapping the feature matrix to 1-based treatment
    ids, or an array of such ids (one per test row). The estimate is the mean
    of ``y * 1{policy(x) = t} / p_t`` and its standard error the sample standard
    deviation of those terms over ``sqrt(n)``.
    """
    chosen = _assignments(policy, test.features, test.K)
    p = test.propensities
    if np.any(p[chosen - 1] <= 0):
        raise ValueError("policy selects a treatment with zero propensity")
    terms = np.where(chosen == test.treatments, test.responses / p[test.treatments - 1], 0.0)
    n = terms.shape[0]
    se = float(np.std(terms, ddof=1) / math.sqrt(n)) if n > 1 else 0.0
    return PolicyValueReport(float(np.mean(terms)), se, n, "ips")


def oracle_value(policy, model: SyntheticModel, mc_samples: int = 1_000_000, seed=0) -> PolicyValueReport:
    value, se = oracle_policy_value(model, policy, mc_samples, seed)
    return PolicyValueReport(value, se, int(mc_samples), "oracle")


def _n_treated(q: float, n: int) -> int:
    return math.floor(Fraction(repr(float(q))) * n)


def muc_curve(model, test: Dataset, control: int, grid: Optional[Sequence[float]] = None) -> MucCurve:
    """Modified uplift curve of a fitted model on an RCT log.

    Rows are ranked by predicted lift ``max_t mu(x, t) - mu(x, control)``; at
    fraction ``q`` the top ``floor(q n)`` rows get the model's treatment and the
    others get ``control``. Each point is the IPS value of that assignment.
    """
    if not 1 <= control <= test.K:
        raise ValueError(f"control must lie in 1..{test.K}, got {control}")
    grid = np.arange(11) / 10.0 if grid is None else np.asarray(grid, dtype=np.float64)
    if grid.size == 0 or np.any(grid < 0) or np.any(grid > 1):
        raise ValueError("grid fractions must lie in [0, 1]")
    grid = np.unique(np.concatenate([[0.0], grid, [1.0]]))

    mu = model.predict_mu(test.features)
    best = np.argmax(mu, axis=1) + 1
    lift = mu.max(axis=1) - mu[:, control - 1] if mu.shape[0] else np.zeros(0)
    order = np.argsort(-lift, kind="stable")
    n = test.n
    values, errors = [], []
    for q in grid:
        assign = np.full(n, control, dtype=np.int64)
        top = order[: _n_treated(q, n)]
        assign[top] = best[top]
        rep = ips_value(assign, test)
        values.append(rep.value)
        errors.append(rep.std_error)
    return MucCurve(control, grid, np.array(values), np.array(errors))


@dataclass(frozen=True)
class SweepRow:
    n_per_treatment: int
    mean_value: float
    ci_radius: float
    n_seeds: int
    values: tuple

    CSV_COLUMNS = ("n_per_treatment", "mean_value", "ci_radius", "n_seeds")

    def row(self):
        return [self.n_per_treatment, repr(self.mean_value), repr(self.ci_radius), self.n_seeds]


def regret_sweep(model: SyntheticModel, sizes: Sequence[int], fit: Callable, seeds: Sequence[int],
                 mc_samples: int = 200_000, mc_seed: int = 12345) -> list:
    """Train on fresh samples of every size for every seed and score each fit by oracle value.

    ``fit(data, seed)`` returns a fitted model with ``select_treatment``. All
    fits are scored on the same Monte Carlo draw. The CI radius is 1.96 times
    the standard error of the mean over seeds.
    """
    if not sizes:
        raise ValueError("sizes must be non-empty")
    if len(seeds) < 2:
        raise ValueError("regret_sweep needs at least two seeds")
    rows = []
    for n in sizes:
        vals = []
        for s in seeds:
            data = model.sample(int(n), np.random.SeedSequence(entropy=int(s), spawn_key=(int(n),)))
            fitted = fit(data, int(s))
            vals.append(oracle_policy_value(model, fitted.select_treatment, mc_samples, mc_seed)[0])
        vals = np.array(vals)
        radius = Z95 * float(np.std(vals, ddof=1)) / math.sqrt(len(vals))
        rows.append(SweepRow(int(n), float(vals.mean()), radius, len(vals), tuple(vals.tolist())))
    return rows


def forest_fitter(config, method: str = "ucts", sma_params=None, n_jobs=1) -> Callable:
    """``fit(data, seed)`` callable for :func:`regret_sweep`."""
    from .baselines import RegressionForestParams, train_cts, train_sma
    from .forest import train

    def fit(data, seed):
        if method == "ucts":
            return train(data, replace(config, seed=seed), n_jobs=n_jobs)
        if method == "cts":
            return train_cts(data, replace(config, seed=seed), n_jobs=n_jobs)
        if method == "sma":
            return train_sma(data, replace(sma_params or RegressionForestParams(), seed=seed))
        raise ValueError(f"unknown method {method!r}")

    return fit


def write_report_csv(report: PolicyValueReport, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(PolicyValueReport.CSV_COLUMNS)
        w.writerow(report.row())


def write_curve_csv(curve: MucCurve, n_test: int, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(MucCurve.CSV_COLUMNS)
        for q, v, e in zip(curve.fractions, curve.values, curve.std_errors):
            w.writerow([repr(float(q)), _n_treated(q, n_test), repr(float(v)), repr(float(e))])


def write_sweep_csv(rows, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(SweepRow.CSV_COLUMNS)
        for r in rows:
            w.writerow(r.row())
