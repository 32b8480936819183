"""Rate and slope fitting for the experiment harness.

Fits are ordinary least squares on log-transformed data with confidence
intervals obtained by resampling replicas (the replica ensemble is the
unit of independence everywhere in the harness).
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import nnls

from .rng import derive_seed


def fit_loglog(x, y):
    """Slope and intercept of log y against log x."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if np.any(x <= 0) or np.any(y <= 0):
        raise ValueError("log-log fit needs positive data")
    slope, intercept = np.polyfit(np.log(x), np.log(y), 1)
    return float(slope), float(intercept)


def fit_exponential_decay(t, y):
    """Rate r and amplitude of y ~ A exp(-r t) by OLS on log y."""
    t = np.asarray(t, dtype=float)
    y = np.asarray(y, dtype=float)
    if np.any(y <= 0):
        raise ValueError("decay fit needs positive data")
    slope, intercept = np.polyfit(t, np.log(y), 1)
    return float(-slope), float(np.exp(intercept))


@dataclass(frozen=True)
class BootstrapCI:
    estimate: float
    lo: float
    hi: float
    resamples: int


def bootstrap_ci(statistic, replicas: int, resamples: int = 200, seed: int = 0):
    """Percentile CI of ``statistic(replica_index_array)`` under resampling.

    ``statistic`` maps a multiset of replica indices to a float; it is first
    evaluated on the identity to give the point estimate.  Resamples that
    fail (e.g. a degenerate fit window) are skipped.
    """
    est = float(statistic(np.arange(replicas)))
    rng = np.random.default_rng(derive_seed("bootstrap", seed))
    vals = []
    for _ in range(resamples):
        idx = rng.integers(0, replicas, size=replicas)
        try:
            vals.append(float(statistic(idx)))
        except (ValueError, FloatingPointError):
            continue
    if not vals:
        return BootstrapCI(est, np.nan, np.nan, 0)
    lo, hi = np.percentile(vals, [2.5, 97.5])
    return BootstrapCI(est, float(lo), float(hi), len(vals))


@dataclass(frozen=True)
class ThreeTermFit:
    """Nonnegative fit of alpha/sqrt(n) + beta sqrt(h) + gamma exp(-r t / 2)."""

    alpha: float
    beta: float
    gamma: float
    residual_rms: float
    max_error: float
    excluded_terms: tuple

    @property
    def relative_residual(self) -> float:
        return self.residual_rms / self.max_error if self.max_error > 0 else 0.0


def fit_three_term(points, errors, rate: float) -> ThreeTermFit:
    """Least-squares with nonnegative coefficients on the three-term model.

    ``points`` is an iterable of (n, h, t); an axis with a single distinct
    value is excluded from the fit (its coefficient is reported as 0).
    """
    pts = np.asarray(points, dtype=float)
    errs = np.asarray(errors, dtype=float)
    n, h, t = pts[:, 0], pts[:, 1], pts[:, 2]
    columns = {"n": 1.0 / np.sqrt(n), "h": np.sqrt(h),
               "t": np.exp(-rate * t / 2.0)}
    active = [name for name, col in columns.items()
              if np.unique(pts[:, "nht".index(name)]).size > 1]
    design = np.column_stack([columns[name] for name in active])
    coef, _ = nnls(design, errs)
    named = dict(zip(active, coef))
    fitted = design @ coef
    resid = float(np.sqrt(np.mean((errs - fitted) ** 2)))
    return ThreeTermFit(alpha=named.get("n", 0.0), beta=named.get("h", 0.0),
                        gamma=named.get("t", 0.0), residual_rms=resid,
                        max_error=float(np.max(errs)),
                        excluded_terms=tuple(sorted(set("nht") - set(active))))


def monotone_outside_bands(values, ses, factor: float = 2.0) -> bool:
    """True when the sequence never increases by more than ``factor`` SEs."""
    values = np.asarray(values, dtype=float)
    ses = np.asarray(ses, dtype=float)
    for j in range(values.size - 1):
        slack = factor * np.hypot(ses[j], ses[j + 1])
        if values[j + 1] > values[j] + slack:
            return False
    return True
