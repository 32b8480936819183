"""Semi-analytic ground truth for the affine one-dimensional system.

With f(x) = const_f - slope_f x and b(x, y) = const_b + self_b x + other_b y
the continuum system is Gaussian, so each label's marginal is determined by
its mean and second moment.  This module integrates the coupled moment ODEs
on a midpoint label grid, solves the stationary equations (the mean solves
a Fredholm equation of the second kind, handled by fixed-point iteration),
and packages the label-averaged marginals as Gaussian mixtures.

This oracle exists only for the affine d = 1 case; other drifts fall back
to large-population self-consistency checks in the experiment layer.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dynamics import LinearInteraction
from .graphon import Graphon
from .measures import MixtureLaw


class OracleNumericsError(RuntimeError):
    pass


class ConvergenceError(RuntimeError):
    pass


VARIANCE_TOL = 1e-9


@dataclass(frozen=True)
class MomentField:
    """Means and second moments on a midpoint label grid at one time."""

    labels: np.ndarray
    mean: np.ndarray
    second_moment: np.ndarray
    t: float

    def __post_init__(self):
        v = self.variance
        if np.min(v) < -VARIANCE_TOL:
            raise OracleNumericsError(
                f"negative variance {np.min(v):.3e} at t={self.t}")

    @property
    def variance(self) -> np.ndarray:
        return self.second_moment - self.mean ** 2


def label_grid(grid_size: int) -> np.ndarray:
    return (np.arange(grid_size) + 0.5) / grid_size


def _kernel_matrix(g: Graphon, labels: np.ndarray) -> np.ndarray:
    uu, vv = np.meshgrid(labels, labels, indexing="ij")
    return np.asarray(g.eval(uu, vv), dtype=float)


def _check_coeffs(c: LinearInteraction, for_stationary: bool = False):
    if c.slope_f <= 0 or c.slope_f - 2.0 * c.lip_b <= 0:
        raise ValueError("affine coefficients violate the contraction requirement")
    if for_stationary and c.slope_f - abs(c.self_b) - abs(c.other_b) <= 0:
        raise ValueError("stationary solve needs slope_f - |self_b| - |other_b| > 0")


def _rhs(c: LinearInteraction, sigma: float, w: np.ndarray, gbar: np.ndarray,
         m: np.ndarray, second: np.ndarray):
    interact = w @ m / m.size
    dm = c.const_f - c.slope_f * m + c.const_b * gbar + c.self_b * m * gbar \
        + c.other_b * interact
    dsecond = 2.0 * (c.const_f * m - c.slope_f * second + c.const_b * gbar * m
                     + c.self_b * second * gbar + c.other_b * m * interact) \
        + sigma ** 2
    return dm, dsecond


def integrate_moments(g: Graphon, coeffs: LinearInteraction, sigma: float,
                      grid_size: int, horizon: float, dt: float,
                      mean0, second0, snapshot_times=None):
    """RK4 integration of the coupled (mean, second moment) label ODEs.

    ``mean0`` and ``second0`` are scalars or arrays on the midpoint grid.
    Emits a MomentField at each requested time (default: horizon only).
    Label integrals use the midpoint rule, exact for step graphons aligned
    with the grid.
    """
    _check_coeffs(coeffs)
    cap = 0.1 / (coeffs.slope_f + abs(coeffs.self_b) + abs(coeffs.other_b))
    if dt > cap + 1e-12:
        raise ValueError(f"dt {dt} exceeds the stability requirement {cap}")
    labels = label_grid(grid_size)
    w = _kernel_matrix(g, labels)
    gbar = w.mean(axis=1)
    m = np.broadcast_to(np.asarray(mean0, float), labels.shape).astype(float).copy()
    s = np.broadcast_to(np.asarray(second0, float), labels.shape).astype(float).copy()
    if snapshot_times is None:
        snapshot_times = (horizon,)
    snapshot_times = sorted(float(t) for t in snapshot_times)
    if snapshot_times and snapshot_times[-1] > horizon + 1e-12:
        raise ValueError("snapshot beyond horizon")
    for t in snapshot_times:
        if dt > 0 and abs(t / dt - round(t / dt)) > 1e-9:
            raise ValueError("snapshot times must lie on the dt grid")
    out = []
    pending = list(snapshot_times)
    nsteps = int(round(horizon / dt)) if horizon > 0 else 0

    def emit(t):
        out.append(MomentField(labels=labels.copy(), mean=m.copy(),
                               second_moment=s.copy(), t=t))

    t = 0.0
    while pending and abs(pending[0] - t) <= 1e-9:
        emit(pending.pop(0))
    for k in range(nsteps):
        k1m, k1s = _rhs(coeffs, sigma, w, gbar, m, s)
        k2m, k2s = _rhs(coeffs, sigma, w, gbar, m + 0.5 * dt * k1m, s + 0.5 * dt * k1s)
        k3m, k3s = _rhs(coeffs, sigma, w, gbar, m + 0.5 * dt * k2m, s + 0.5 * dt * k2s)
        k4m, k4s = _rhs(coeffs, sigma, w, gbar, m + dt * k3m, s + dt * k3s)
        m = m + dt / 6.0 * (k1m + 2 * k2m + 2 * k3m + k4m)
        s = s + dt / 6.0 * (k1s + 2 * k2s + 2 * k3s + k4s)
        t = (k + 1) * dt
        while pending and pending[0] <= t + 1e-9:
            emit(pending.pop(0))
    return out


def solve_stationary(g: Graphon, coeffs: LinearInteraction, sigma: float,
                     grid_size: int, tol: float = 1e-12, max_iter: int = 10_000):
    """Stationary moment field by fixed-point iteration on the mean equation.

    Iterates mean <- (const_f + const_b gbar + other_b (W mean)/K) /
    (slope_f - self_b gbar) to ``tol`` in sup norm, then solves the second
    moment equation directly.  Returns (field, iterations).
    """
    _check_coeffs(coeffs, for_stationary=True)
    labels = label_grid(grid_size)
    w = _kernel_matrix(g, labels)
    gbar = w.mean(axis=1)
    denom = coeffs.slope_f - coeffs.self_b * gbar
    if np.min(denom) <= 0:
        raise ValueError("mean equation denominator not positive")
    m = np.zeros_like(labels)
    last_delta = np.inf
    bad_streak = 0
    iterations = 0
    for iterations in range(1, max_iter + 1):
        m_new = (coeffs.const_f + coeffs.const_b * gbar
                 + coeffs.other_b * (w @ m) / labels.size) / denom
        delta = float(np.max(np.abs(m_new - m)))
        m = m_new
        if delta <= tol:
            break
        if delta >= last_delta > 0:
            bad_streak += 1
            if bad_streak >= 5:
                raise ConvergenceError("fixed-point iteration is not contracting")
        else:
            bad_streak = 0
        last_delta = delta
    else:
        raise ConvergenceError("fixed-point iteration did not reach tolerance")
    interact = w @ m / labels.size
    second = (coeffs.const_f * m + coeffs.const_b * gbar * m
              + coeffs.other_b * m * interact + 0.5 * sigma ** 2) / denom
    field = MomentField(labels=labels, mean=m, second_moment=second, t=np.inf)
    return field, iterations


def averaged_law(field: MomentField) -> MixtureLaw:
    """Label-averaged marginal: equal-weight Gaussian mixture over the grid.

    Its second moment equals the grid quadrature of the second-moment field.
    """
    k = field.labels.size
    return MixtureLaw(weights=np.full(k, 1.0 / k), means=field.mean.copy(),
                      variances=np.maximum(field.variance, 0.0))


@dataclass(frozen=True)
class LabelContinuityReport:
    max_ratio: float
    ratios: np.ndarray
    boundary_jumps: tuple   # (label index, ratio) pairs straddling partition cuts
    ok: bool


def label_continuity_check(field: MomentField, g: Graphon,
                           declared: float = None) -> LabelContinuityReport:
    """W2 between adjacent labels' Gaussians, scaled by the label spacing.

    Pairs straddling a declared partition boundary are reported separately
    (jumps there are expected for step graphons).  Report-only.
    """
    sd = np.sqrt(np.maximum(field.variance, 0.0))
    du = np.diff(field.labels)
    w2 = np.hypot(np.diff(field.mean), np.diff(sd))
    ratios = w2 / du
    cuts = []
    if g.partition:
        interior = [b for (_, b) in g.partition[:-1]]
        for j in range(du.size):
            if any(field.labels[j] < c <= field.labels[j + 1] for c in interior):
                cuts.append(j)
    inside = np.setdiff1d(np.arange(du.size), cuts)
    max_ratio = float(ratios[inside].max()) if inside.size else 0.0
    jumps = tuple((int(j), float(ratios[j])) for j in cuts)
    ok = declared is None or max_ratio <= declared
    return LabelContinuityReport(max_ratio=max_ratio, ratios=ratios,
                                 boundary_jumps=jumps, ok=ok)
