"""Graphons: symmetric kernels on [0,1]^2 with norms and edge sampling.

Two representations are supported: a closed-form callable and a step
(block-constant) kernel given by block boundaries and a value matrix.
Norm computations additionally accept signed step kernels, which arise as
differences of graphons; graphon construction itself enforces values in
[0, 1].
"""
from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .rng import STREAM_EDGES, block_uniforms, derive_key

EXACT_BLOCK_LIMIT = 20


class CapabilityError(ValueError):
    """Requested an exact computation outside its supported size range."""


@dataclass(frozen=True)
class StepKernel:
    """Block-constant symmetric kernel, values of any sign in [-1, 1].

    ``boundaries`` has K+1 strictly increasing entries from 0 to 1; block k
    is [boundaries[k], boundaries[k+1]), the last block closed on the right.
    """

    boundaries: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        b = np.asarray(self.boundaries, dtype=float)
        v = np.asarray(self.values, dtype=float)
        object.__setattr__(self, "boundaries", b)
        object.__setattr__(self, "values", v)
        if b.ndim != 1 or b.size < 2:
            raise ValueError("boundaries must be a 1-d array of length >= 2")
        if not (np.all(np.diff(b) > 0) and b[0] == 0.0 and b[-1] == 1.0):
            raise ValueError("boundaries must increase strictly from 0 to 1")
        k = b.size - 1
        if v.shape != (k, k):
            raise ValueError("values must be K x K")
        if not np.array_equal(v, v.T):
            raise ValueError("values must be symmetric")
        if np.max(np.abs(v)) > 1.0 + 1e-12:
            raise ValueError("entries must lie in [-1, 1]")

    @property
    def num_blocks(self) -> int:
        return self.values.shape[0]

    @property
    def widths(self) -> np.ndarray:
        return np.diff(self.boundaries)

    def block_of(self, u) -> np.ndarray:
        """Index of the block containing u (right-open, last block closed)."""
        idx = np.searchsorted(self.boundaries, u, side="right") - 1
        return np.clip(idx, 0, self.num_blocks - 1)

    def __call__(self, u, v):
        return self.values[self.block_of(u), self.block_of(v)]


@dataclass(frozen=True)
class Graphon:
    """Symmetric measurable kernel G: [0,1]^2 -> [0,1].

    kind is ``"step"`` (block-constant, exact) or ``"closed_form"``
    (arbitrary callable; symmetry and range are spot-checked on a grid at
    construction since they cannot be proven from a callable).
    """

    kind: str
    fn: object = None
    step: StepKernel = None
    lipschitz: float = None
    partition: tuple = None
    label: str = ""

    @classmethod
    def from_step(cls, boundaries, values, lipschitz=None, label=""):
        kernel = StepKernel(np.asarray(boundaries, float), np.asarray(values, float))
        if np.min(kernel.values) < -1e-12 or np.max(kernel.values) > 1 + 1e-12:
            raise ValueError("graphon values must lie in [0, 1]")
        part = tuple(zip(kernel.boundaries[:-1], kernel.boundaries[1:]))
        return cls(kind="step", step=kernel, lipschitz=lipschitz,
                   partition=part, label=label or f"step{kernel.num_blocks}")

    @classmethod
    def constant(cls, p: float):
        if not 0.0 <= p <= 1.0:
            raise ValueError("constant graphon level must be in [0, 1]")
        return cls.from_step([0.0, 1.0], [[p]], lipschitz=0.0, label=f"const({p})")

    @classmethod
    def from_callable(cls, fn, label="", lipschitz=None, partition=None, check_points=41):
        """Wrap a closed-form kernel, spot-checking symmetry and range."""
        grid = np.linspace(0.0, 1.0, check_points)
        uu, vv = np.meshgrid(grid, grid, indexing="ij")
        vals = np.asarray(fn(uu, vv), dtype=float)
        if vals.shape != uu.shape:
            vals = np.vectorize(fn)(uu, vv).astype(float)
        if np.min(vals) < -1e-12 or np.max(vals) > 1 + 1e-12:
            raise ValueError("kernel range check failed: values outside [0, 1]")
        if not np.allclose(vals, vals.T, atol=1e-10):
            raise ValueError("kernel symmetry check failed on the grid")
        return cls(kind="closed_form", fn=fn, lipschitz=lipschitz,
                   partition=partition, label=label or "closed_form")

    def eval(self, u, v):
        """Evaluate G(u, v); raises on coordinates outside [0, 1]."""
        u = np.asarray(u, dtype=float)
        v = np.asarray(v, dtype=float)
        if np.any(u < 0) or np.any(u > 1) or np.any(v < 0) or np.any(v > 1):
            raise ValueError("coordinates must lie in [0, 1]")
        if self.kind == "step":
            out = self.step(u, v)
        else:
            out = np.asarray(self.fn(u, v), dtype=float)
        return out if out.ndim else float(out)

    def as_kernel(self) -> StepKernel:
        if self.kind != "step":
            raise CapabilityError("operation requires a step graphon")
        return self.step

    def fingerprint(self) -> str:
        """Short stable hash used in trajectory-file headers."""
        import hashlib

        h = hashlib.sha256()
        if self.kind == "step":
            h.update(b"step")
            h.update(self.step.boundaries.tobytes())
            h.update(self.step.values.tobytes())
        else:
            h.update(b"closed_form")
            h.update(self.label.encode())
        return h.hexdigest()[:16]

    # -- plain-text grid format: K, then K+1 boundaries, then K value rows --

    def save(self, path):
        kernel = self.as_kernel()
        lines = [str(kernel.num_blocks)]
        lines.append(" ".join(repr(float(x)) for x in kernel.boundaries))
        for row in kernel.values:
            lines.append(" ".join(repr(float(x)) for x in row))
        Path(path).write_text("\n".join(lines) + "\n")

    @classmethod
    def load(cls, path):
        tokens = Path(path).read_text().split("\n")
        tokens = [t for t in tokens if t.strip()]
        k = int(tokens[0])
        boundaries = np.array([float(x) for x in tokens[1].split()])
        if boundaries.size != k + 1:
            raise ValueError("expected K+1 boundaries")
        values = np.array([[float(x) for x in tokens[2 + i].split()] for i in range(k)])
        return cls.from_step(boundaries, values)


@dataclass
class EdgeWeights:
    """Frozen interaction weights xi for an n-particle system.

    deterministic mode: values[i, j] = G(i/n, j/n) exactly (labels i/n for
    i = 1..n).  bernoulli mode: the upper triangle (including the diagonal)
    is drawn independently with success probability G(i/n, j/n) and
    mirrored; the matrix is a pure function of (graphon, n, seed).
    """

    n: int
    mode: str
    seed: int = None
    block_values: np.ndarray = None   # set for deterministic step graphons
    block_index: np.ndarray = None
    _values: np.ndarray = field(default=None, repr=False)

    @property
    def values(self) -> np.ndarray:
        if self._values is None:
            # deterministic step mode materialises lazily from the blocks
            self._values = self.block_values[np.ix_(self.block_index, self.block_index)]
        return self._values

    @property
    def has_blocks(self) -> bool:
        return self.block_values is not None


def sample_edges(g: Graphon, n: int, mode: str = "deterministic", seed: int = None) -> EdgeWeights:
    """Sample the n x n interaction-weight matrix from graphon ``g``."""
    if n < 1:
        raise ValueError("n must be >= 1")
    labels = np.arange(1, n + 1) / n
    if mode == "deterministic":
        if g.kind == "step":
            idx = g.step.block_of(labels)
            return EdgeWeights(n=n, mode=mode, block_values=g.step.values.copy(),
                               block_index=idx)
        uu, vv = np.meshgrid(labels, labels, indexing="ij")
        return EdgeWeights(n=n, mode=mode, _values=np.asarray(g.eval(uu, vv), float))
    if mode == "bernoulli":
        if seed is None:
            raise ValueError("bernoulli mode requires a seed")
        uu, vv = np.meshgrid(labels, labels, indexing="ij")
        probs = np.asarray(g.eval(uu, vv), dtype=float)
        key = derive_key("edges", seed, n)
        uniforms = block_uniforms(key, 0, (n, n), STREAM_EDGES)
        upper = np.triu(uniforms < probs).astype(float)
        vals = upper + np.triu(upper, 1).T
        return EdgeWeights(n=n, mode=mode, seed=seed, _values=vals)
    raise ValueError(f"unknown edge mode {mode!r}")


@dataclass(frozen=True)
class CutNormResult:
    value: float
    row_blocks: tuple
    col_blocks: tuple
    exact: bool


def _block_masses(kernel: StepKernel) -> np.ndarray:
    w = kernel.widths
    return kernel.values * np.outer(w, w)


def cut_norm(kernel, exact: bool = True, candidates: int = 10_000, seed: int = 0) -> CutNormResult:
    """Cut norm sup_{S,T} |integral over S x T| of a step kernel.

    Exact mode enumerates row sets S over all 2^K block unions; for fixed S
    the optimal measurable T is the positivity (or negativity) set of the
    column masses, itself a block union, so the search is exhaustive.
    Randomized mode evaluates ``candidates`` random block-union pairs and
    returns a lower bound.
    """
    if isinstance(kernel, Graphon):
        kernel = kernel.as_kernel()
    masses = _block_masses(kernel)
    k = kernel.num_blocks
    if exact:
        if k > EXACT_BLOCK_LIMIT:
            raise CapabilityError(f"exact cut norm limited to K <= {EXACT_BLOCK_LIMIT}")
        best = -1.0
        best_s = best_t = ()
        shifts = np.arange(k, dtype=np.uint64)
        chunk = 1 << 14
        for start in range(0, 1 << k, chunk):
            masks = np.arange(start, min(start + chunk, 1 << k), dtype=np.uint64)
            sel = ((masks[:, None] >> shifts) & 1).astype(float)
            cols = sel @ masses                      # (chunk, K) column masses
            pos = np.where(cols > 0, cols, 0.0).sum(axis=1)
            neg = -np.where(cols < 0, cols, 0.0).sum(axis=1)
            vals = np.maximum(pos, neg)
            j = int(np.argmax(vals))
            if vals[j] > best:
                best = float(vals[j])
                srow = sel[j].astype(bool)
                cols_j = cols[j]
                sign = 1.0 if pos[j] >= neg[j] else -1.0
                tcol = (sign * cols_j) > 0
                best_s = tuple(np.nonzero(srow)[0])
                best_t = tuple(np.nonzero(tcol)[0])
        return CutNormResult(best, best_s, best_t, exact=True)
    rng = np.random.default_rng(derive_key("cutnorm", seed) & ((1 << 63) - 1))
    best = 0.0
    best_s = best_t = ()
    for _ in range(candidates):
        s = rng.random(k) < 0.5
        t = rng.random(k) < 0.5
        val = abs(float(masses[np.ix_(s, t)].sum()))
        if val > best:
            best, best_s, best_t = val, tuple(np.nonzero(s)[0]), tuple(np.nonzero(t)[0])
    return CutNormResult(best, best_s, best_t, exact=False)


def l_infty_to_l1_norm(kernel) -> float:
    """Operator norm L^inf -> L^1 of a step kernel.

    The optimiser is +-1 per block (the objective is convex in the block
    averages of the test function), found by exhaustive sign enumeration.
    """
    if isinstance(kernel, Graphon):
        kernel = kernel.as_kernel()
    k = kernel.num_blocks
    if k > EXACT_BLOCK_LIMIT:
        raise CapabilityError(f"exact operator norm limited to K <= {EXACT_BLOCK_LIMIT}")
    w = kernel.widths
    vw = kernel.values * w[None, :]                 # integral against sign pattern
    best = 0.0
    shifts = np.arange(k, dtype=np.uint64)
    chunk = 1 << 14
    for start in range(0, 1 << k, chunk):
        masks = np.arange(start, min(start + chunk, 1 << k), dtype=np.uint64)
        s = 2.0 * ((masks[:, None] >> shifts) & 1).astype(float) - 1.0
        inner = s @ vw.T                            # (chunk, K) row integrals
        vals = np.abs(inner) @ w
        best = max(best, float(vals.max()))
    return best


def step_difference(g1: Graphon, g2: Graphon) -> StepKernel:
    """Signed step kernel g1 - g2 on the common refinement of boundaries."""
    k1, k2 = g1.as_kernel(), g2.as_kernel()
    bounds = np.union1d(k1.boundaries, k2.boundaries)
    mids = 0.5 * (bounds[:-1] + bounds[1:])
    i1, i2 = k1.block_of(mids), k2.block_of(mids)
    vals = k1.values[np.ix_(i1, i1)] - k2.values[np.ix_(i2, i2)]
    return StepKernel(bounds, vals)


@dataclass(frozen=True)
class LipschitzReport:
    declared: float
    observed: float
    certified: bool
    violation: tuple = None   # ((u1, v1), (u2, v2), ratio) if not certified


def check_lipschitz(g: Graphon, declared: float, partition=None, tol: float = 1e-9,
                    grid: int = 256) -> LipschitzReport:
    """Estimate per-cell Lipschitz ratios of ``g`` on a dense grid.

    Within every cell of ``partition`` (default: the graphon's own partition,
    or the whole square) the kernel is sampled on a ``grid`` x ``grid`` mesh
    and the max finite-difference ratio between adjacent nodes is compared
    against the declared constant.  Report-only: a violation is returned,
    not raised.
    """
    if partition is None:
        partition = g.partition or ((0.0, 1.0),)
    worst = 0.0
    violation = None
    for (a1, b1) in partition:
        for (a2, b2) in partition:
            us = np.linspace(a1, b1, grid)
            vs = np.linspace(a2, b2, grid)
            uu, vv = np.meshgrid(us, vs, indexing="ij")
            vals = np.asarray(g.eval(uu, vv), dtype=float)
            du = us[1] - us[0] if grid > 1 else 1.0
            dv = vs[1] - vs[0] if grid > 1 else 1.0
            if du > 0:
                r = np.abs(np.diff(vals, axis=0)) / du
                j = np.unravel_index(np.argmax(r), r.shape)
                if r[j] > worst:
                    worst = float(r[j])
                    violation = ((us[j[0]], vs[j[1]]), (us[j[0] + 1], vs[j[1]]), worst)
            if dv > 0:
                r = np.abs(np.diff(vals, axis=1)) / dv
                j = np.unravel_index(np.argmax(r), r.shape)
                if r[j] > worst:
                    worst = float(r[j])
                    violation = ((us[j[0]], vs[j[1]]), (us[j[0]], vs[j[1] + 1]), worst)
    certified = worst <= declared + tol
    return LipschitzReport(declared=declared, observed=worst, certified=certified,
                           violation=None if certified else violation)
