"""Drift and diffusion specifications with certified contraction constants.

A drift pair (f, b) is accepted only when its declared constants give a
positive contraction rate ``dissipativity - 2 * lip_b``.  Constants are
declared by the constructor and statistically certified on sampled pairs;
inferring tight constants from arbitrary callables is ill-posed.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .rng import derive_seed


@dataclass(frozen=True)
class LinearInteraction:
    """Coefficients of an affine drift pair in one dimension.

    f(x) = const_f - slope_f * x
    b(x, y) = const_b + self_b * x + other_b * y
    """

    const_f: float = 0.0
    slope_f: float = 1.0
    const_b: float = 0.0
    self_b: float = 0.0
    other_b: float = 0.0

    @property
    def lip_b(self) -> float:
        return max(abs(self.self_b), abs(self.other_b))


@dataclass
class DriftSpec:
    """The pair (f, b) with declared Lipschitz and dissipativity constants.

    ``b`` must broadcast over its second argument: b(x_i of shape (d,),
    X of shape (m, d)) -> (m, d).  The constructor rejects specs whose
    declared constants give a nonpositive contraction rate.
    """

    dimension: int
    f: object
    b: object
    kind: str
    lip_f: float
    lip_b: float
    dissipativity: float
    linear: LinearInteraction = None
    certified: bool = None

    def __post_init__(self):
        if self.dimension < 1:
            raise ValueError("dimension must be >= 1")
        if self.contraction_rate <= 0:
            raise ValueError(
                f"contraction rate {self.contraction_rate} is not positive "
                f"(dissipativity {self.dissipativity}, lip_b {self.lip_b})")

    @property
    def contraction_rate(self) -> float:
        return self.dissipativity - 2.0 * self.lip_b

    def to_dict(self) -> dict:
        rec = {"kind": self.kind, "dimension": self.dimension,
               "lip_f": self.lip_f, "lip_b": self.lip_b,
               "dissipativity": self.dissipativity}
        if self.linear is not None:
            rec["coefficients"] = {
                "const_f": self.linear.const_f, "slope_f": self.linear.slope_f,
                "const_b": self.linear.const_b, "self_b": self.linear.self_b,
                "other_b": self.linear.other_b}
        return rec


def _linear_callables(c: LinearInteraction):
    def f(x):
        return c.const_f - c.slope_f * np.asarray(x, float)

    def b(x, y):
        x = np.asarray(x, float)
        y = np.asarray(y, float)
        return c.const_b + c.self_b * x + c.other_b * y

    return f, b


def linear_drift(const_f=0.0, slope_f=1.0, const_b=0.0, self_b=0.0, other_b=0.0,
                 dimension=1) -> DriftSpec:
    """Affine preset f(x) = const_f - slope_f x, b(x,y) = const_b + self_b x + other_b y.

    Requires slope_f > 0 and slope_f - 2 max(|self_b|, |other_b|) > 0.
    """
    coeffs = LinearInteraction(const_f, slope_f, const_b, self_b, other_b)
    if slope_f <= 0:
        raise ValueError("slope_f must be positive")
    f, b = _linear_callables(coeffs)
    return DriftSpec(dimension=dimension, f=f, b=b, kind="linear",
                     lip_f=slope_f, lip_b=coeffs.lip_b, dissipativity=slope_f,
                     linear=coeffs)


def mean_reverting_drift(pull: float, coupling: float, dimension=1) -> DriftSpec:
    """Preset f(x) = -(pull+coupling) x, b(x,y) = coupling (x + y).

    Requires pull > coupling > 0; the contraction rate is pull - coupling.
    """
    if not pull > coupling > 0:
        raise ValueError("requires pull > coupling > 0")
    coeffs = LinearInteraction(const_f=0.0, slope_f=pull + coupling,
                               const_b=0.0, self_b=coupling, other_b=coupling)
    f, b = _linear_callables(coeffs)
    return DriftSpec(dimension=dimension, f=f, b=b, kind="mean_reverting",
                     lip_f=pull + coupling, lip_b=coupling,
                     dissipativity=pull + coupling, linear=coeffs)


def custom_drift(dimension, f, b, lip_f, lip_b, dissipativity) -> DriftSpec:
    return DriftSpec(dimension=dimension, f=f, b=b, kind="custom",
                     lip_f=lip_f, lip_b=lip_b, dissipativity=dissipativity)


def drift_from_dict(rec: dict) -> DriftSpec:
    kind = rec["kind"]
    if kind == "linear":
        c = rec["coefficients"]
        return linear_drift(dimension=rec.get("dimension", 1), **c)
    if kind == "mean_reverting":
        return mean_reverting_drift(rec["pull"], rec["coupling"],
                                    dimension=rec.get("dimension", 1))
    raise ValueError(f"cannot rebuild drift of kind {kind!r} from a record")


@dataclass(frozen=True)
class DiffusionSpec:
    """Constant diffusion matrix sigma (d x d)."""

    sigma: np.ndarray

    def __post_init__(self):
        s = np.atleast_2d(np.asarray(self.sigma, dtype=float))
        object.__setattr__(self, "sigma", s)
        if s.shape[0] != s.shape[1]:
            raise ValueError("sigma must be square")
        if not np.all(np.isfinite(s)):
            raise ValueError("sigma must be finite")

    @classmethod
    def isotropic(cls, dimension: int, scale: float):
        return cls(scale * np.eye(dimension))

    @property
    def dimension(self) -> int:
        return self.sigma.shape[0]

    @property
    def is_zero(self) -> bool:
        return not np.any(self.sigma)


@dataclass(frozen=True)
class RateBounds:
    """Constants entering the explicit ergodicity envelopes.

    contraction_rate is dissipativity - 2 lip_b of the owning drift spec;
    limit_second_moment bounds the continuum system's second moments over
    time, finite_second_moment the finite system's.  source records whether
    they were declared or measured from a run.
    """

    contraction_rate: float
    limit_second_moment: float = 0.0
    finite_second_moment: float = 0.0
    source: str = "empirical"

    def __post_init__(self):
        if self.contraction_rate <= 0:
            raise ValueError("contraction rate must be positive")


@dataclass(frozen=True)
class DissipativityReport:
    ok: bool
    worst_margin: float
    counterexample: tuple = None
    lipschitz_f_ok: bool = True
    lipschitz_b_ok: bool = True


def certify_dissipativity(spec: DriftSpec, trials: int = 2000, radius: float = 10.0,
                          seed: int = 0) -> DissipativityReport:
    """Check the one-sided contraction inequality of f on sampled pairs.

    Samples pairs (x1, x2) uniformly in the ball of the given radius and
    evaluates (x1-x2).(f(x1)-f(x2)) + dissipativity |x1-x2|^2 <= 0, plus the
    declared Lipschitz bounds for f and b.  Report-only: failures flag the
    spec as uncertified instead of aborting.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    rng = np.random.default_rng(derive_seed("certify", seed))
    d = spec.dimension
    z = rng.standard_normal((2 * trials, d))
    z /= np.maximum(np.linalg.norm(z, axis=1, keepdims=True), 1e-300)
    r = radius * rng.random((2 * trials, 1)) ** (1.0 / d)
    pts = z * r
    x1, x2 = pts[:trials], pts[trials:]
    diff = x1 - x2
    sq = np.einsum("ij,ij->i", diff, diff)
    fd = np.array([spec.f(a) - spec.f(b_) for a, b_ in zip(x1, x2)])
    inner = np.einsum("ij,ij->i", diff, fd)
    margins = inner + spec.dissipativity * sq
    norm_margins = margins / np.maximum(sq, 1e-30)
    worst = float(np.max(norm_margins))
    ok = worst <= 1e-9
    counter = None
    if not ok:
        j = int(np.argmax(norm_margins))
        counter = (x1[j].copy(), x2[j].copy())

    fnorm = np.linalg.norm(fd, axis=1)
    lip_f_ok = bool(np.all(fnorm <= spec.lip_f * np.sqrt(sq) + 1e-9))
    y1, y2 = x2[::-1], x1[::-1]
    bd = np.array([spec.b(a, c) - spec.b(b_, e)
                   for a, b_, c, e in zip(x1, x2, y1, y2)])
    bbound = spec.lip_b * (np.sqrt(sq) + np.linalg.norm(y1 - y2, axis=1))
    lip_b_ok = bool(np.all(np.linalg.norm(bd, axis=1) <= bbound + 1e-9))

    spec.certified = bool(ok and lip_f_ok and lip_b_ok)
    return DissipativityReport(ok=spec.certified, worst_margin=worst,
                               counterexample=counter,
                               lipschitz_f_ok=lip_f_ok, lipschitz_b_ok=lip_b_ok)


def ergodicity_bound(rates: RateBounds, dissipativity: float, lip_b: float,
                     t) -> float:
    """Explicit envelope sqrt(4 m2 (c - L) / rate) exp(-rate t / 2).

    m2 is the limit second moment, c the dissipativity constant, L the
    interaction Lipschitz constant and rate the contraction rate; monotone
    decreasing in t.
    """
    rate = rates.contraction_rate
    if rate <= 0:
        raise ValueError("contraction rate must be positive")
    amp = np.sqrt(4.0 * rates.limit_second_moment * (dissipativity - lip_b) / rate)
    return amp * np.exp(-rate * np.asarray(t, dtype=float) / 2.0)


def lln_rate(n, dimension: int = 1):
    """Empirical-measure convergence rate n^(-1/d) + n^(-1/12)."""
    n = np.asarray(n, dtype=float)
    if np.any(n < 1):
        raise ValueError("n must be >= 1")
    if dimension < 1:
        raise ValueError("dimension must be >= 1")
    out = n ** (-1.0 / dimension) + n ** (-1.0 / 12.0)
    return out if out.ndim else float(out)
