"""Config-file parsing for the experiment harness.

Configs are plain-text nested key-value files (YAML).  The model section is
a tagged record: drift kind plus coefficients and declared constants, the
diffusion scale, a graphon, an initial law, and the edge-sampling mode.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import yaml

from .dynamics import DiffusionSpec, DriftSpec, linear_drift, mean_reverting_drift
from .engine import InitialLaw
from .graphon import Graphon

EXPERIMENTS = ("ergodicity", "euler_sweep", "lln_sweep", "interchange",
               "quenched_vs_annealed", "concentration")


def build_graphon(rec: dict) -> Graphon:
    kind = rec.get("kind", "constant")
    if kind == "constant":
        return Graphon.constant(float(rec["p"]))
    if kind == "step":
        return Graphon.from_step(rec["boundaries"], rec["values"],
                                 lipschitz=rec.get("lipschitz"))
    if kind == "file":
        return Graphon.load(rec["path"])
    if kind == "product":
        return Graphon.from_callable(lambda u, v: u * v, label="product",
                                     lipschitz=1.0)
    raise ValueError(f"unknown graphon kind {kind!r}")


def build_drift(rec: dict, dimension: int = 1) -> DriftSpec:
    kind = rec["kind"]
    if kind == "mean_reverting":
        return mean_reverting_drift(float(rec["pull"]), float(rec["coupling"]),
                                    dimension=dimension)
    if kind == "linear":
        return linear_drift(const_f=float(rec.get("const_f", 0.0)),
                            slope_f=float(rec["slope_f"]),
                            const_b=float(rec.get("const_b", 0.0)),
                            self_b=float(rec.get("self_b", 0.0)),
                            other_b=float(rec.get("other_b", 0.0)),
                            dimension=dimension)
    raise ValueError(f"unknown drift kind {kind!r}")


def build_initial(rec: dict) -> InitialLaw:
    if rec is None:
        return InitialLaw()
    kind = rec.get("kind", "gaussian")
    if kind == "point_mass":
        return InitialLaw(kind="point_mass", value=float(rec["value"]))
    if kind == "gaussian":
        return InitialLaw(kind="gaussian",
                          mean=float(rec.get("mean", 0.0)),
                          std=float(rec.get("std", 1.0)),
                          mean_slope=float(rec.get("mean_slope", 0.0)),
                          std_slope=float(rec.get("std_slope", 0.0)))
    raise ValueError(f"unknown initial law {kind!r}")


@dataclass(frozen=True)
class ModelConfig:
    drift: DriftSpec
    diffusion: DiffusionSpec
    graphon: Graphon
    initial: InitialLaw
    edge_mode: str = "deterministic"

    @property
    def dimension(self) -> int:
        return self.drift.dimension

    @property
    def sigma_scalar(self) -> float:
        return float(self.diffusion.sigma[0, 0])

    @property
    def has_oracle(self) -> bool:
        """The moment oracle covers affine drifts in one dimension."""
        c = self.drift.linear
        return (c is not None and self.dimension == 1
                and c.slope_f - abs(c.self_b) - abs(c.other_b) > 0)


def build_model(rec: dict) -> ModelConfig:
    dimension = int(rec.get("dimension", 1))
    drift = build_drift(rec["drift"], dimension)
    sigma = rec.get("sigma", 1.0)
    diffusion = (DiffusionSpec(np.asarray(sigma, dtype=float))
                 if isinstance(sigma, list)
                 else DiffusionSpec.isotropic(dimension, float(sigma)))
    return ModelConfig(drift=drift, diffusion=diffusion,
                       graphon=build_graphon(rec.get("graphon", {"kind": "constant", "p": 1.0})),
                       initial=build_initial(rec.get("initial")),
                       edge_mode=rec.get("edges", "deterministic"))


@dataclass
class ExperimentConfig:
    """All knobs of one experiment run; every seed is explicit."""

    experiment: str
    model: ModelConfig
    base_seed: int
    replicas: int = 4
    out_dir: str = None
    particles: int = 200
    step: float = 0.01
    horizon: float = None
    t_grid: tuple = (0.25, 0.5, 1.0, 2.0, 4.0, 8.0, 16.0)
    stability_cap: float = None
    edge_policy: str = "quenched"
    # sweep lists
    h_list: tuple = ()
    n_list: tuple = ()
    ref_refine: int = 16
    families: int = 4
    # estimator knobs
    oracle_grid: int = 32
    oracle_dt: float = 0.005
    w2_grid: int = 4096
    bootstrap_resamples: int = 200
    noise_floor_draws: int = 8
    # concentration
    n_exact: tuple = (1, 2, 5, 12, 30)
    n_mc: tuple = (100, 1000, 10000)
    interval_count: int = 32
    mc_replicas: int = 400
    raw: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        if self.experiment not in EXPERIMENTS:
            raise ValueError(f"unknown experiment {self.experiment!r}")
        if self.replicas < 1:
            raise ValueError("replicas must be >= 1")
        for name in ("h_list", "n_list", "t_grid", "n_exact", "n_mc"):
            vals = list(getattr(self, name))
            if vals and sorted(vals) != vals and sorted(vals, reverse=True) != vals:
                raise ValueError(f"{name} must be sorted")
        if self.horizon is None:
            self.horizon = max(self.t_grid) if self.t_grid else 1.0


_LIST_FIELDS = {"t_grid", "h_list", "n_list", "n_exact", "n_mc"}


def config_from_dict(rec: dict) -> ExperimentConfig:
    original = dict(rec)
    rec = dict(rec)
    model = build_model(rec.pop("model"))
    kwargs = {}
    for key in ("experiment", "base_seed", "replicas", "out_dir", "particles",
                "step", "horizon", "stability_cap", "edge_policy", "ref_refine",
                "families", "oracle_grid", "oracle_dt", "w2_grid",
                "bootstrap_resamples", "noise_floor_draws", "interval_count",
                "mc_replicas"):
        if key in rec:
            kwargs[key] = rec[key]
    for key in _LIST_FIELDS:
        if key in rec:
            kwargs[key] = tuple(rec[key])
    return ExperimentConfig(model=model, raw=original, **kwargs)


def load_config(path) -> ExperimentConfig:
    rec = yaml.safe_load(Path(path).read_text())
    if not isinstance(rec, dict):
        raise ValueError("config must be a mapping")
    return config_from_dict(rec)


def load_model(path) -> dict:
    """Load just the raw dict (for the simulate / oracle subcommands)."""
    rec = yaml.safe_load(Path(path).read_text())
    if not isinstance(rec, dict):
        raise ValueError("config must be a mapping")
    return rec
