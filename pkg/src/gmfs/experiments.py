"""Config-driven experiment runners verifying the convergence rates.

Each runner simulates the particle system, compares against the moment
oracle (affine models) or a self-consistency reference, fits decay or
convergence exponents, and emits a long-format results table, a fit table
with pass/fail per term, and a run manifest.  Acceptance checks target
slopes and rates, never unnamed constants.

Noise-floor discipline: rate fits exclude grid points within three standard
errors of the Monte Carlo floor of the estimator, and the excluded count is
reported in the manifest.
"""
from __future__ import annotations

import csv
import json
import time
from dataclasses import dataclass, field, replace

import numpy as np

from . import __version__
from .config import ExperimentConfig, ModelConfig
from .dynamics import RateBounds, ergodicity_bound, lln_rate
from .engine import (IntegratorConfig, IntegrationBlowup, ParticleState,
                     ensemble_run, integrate)
from .fitting import (bootstrap_ci, fit_exponential_decay, fit_loglog,
                      fit_three_term, monotone_outside_bands)
from .graphon import sample_edges
from .measures import (EmpiricalMeasure, GaussianLaw, MixtureLaw,
                       concentration_check, dyadic_intervals,
                       w2_empirical_1d, w2_empirical_vs_mixture_1d)
from .oracle import averaged_law, integrate_moments, label_grid, solve_stationary
from .rng import BrownianPath, derive_seed


@dataclass
class ExperimentResult:
    experiment: str
    rows: list = field(default_factory=list)        # (sweep_var, value, metric, est, se, reps)
    fits: list = field(default_factory=list)        # (term, est, ci_lo, ci_hi, passed)
    meta: dict = field(default_factory=dict)
    status: str = "pass"

    def add_row(self, sweep_var, value, metric, estimate, se, replicas):
        self.rows.append((sweep_var, value, metric, float(estimate),
                          float(se), int(replicas)))

    def add_fit(self, term, estimate, ci_lo, ci_hi, passed):
        self.fits.append((term, float(estimate), float(ci_lo), float(ci_hi),
                          bool(passed)))

    def finalize(self):
        if self.status != "inconclusive":
            self.status = "pass" if all(f[4] for f in self.fits) else "fail"
        return self

    @property
    def exit_code(self) -> int:
        return {"pass": 0, "fail": 2, "inconclusive": 3}[self.status]

    def write(self, out_dir):
        from pathlib import Path

        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        with open(out / "results.csv", "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["sweep_var", "value", "metric", "estimate", "se", "replicas"])
            for sweep_var, value, metric, est, se, reps in self.rows:
                w.writerow([sweep_var, value, metric, repr(est), repr(se), reps])
        with open(out / "fit.csv", "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["term", "estimate", "ci_lo", "ci_hi", "pass"])
            for term, est, lo, hi, ok in self.fits:
                w.writerow([term, repr(est), repr(lo), repr(hi), ok])
        with open(out / "meta.json", "w") as fh:
            json.dump(self.meta, fh, indent=2, sort_keys=True, default=str)
            fh.write("\n")
        return out


def _integrator(cfg: ExperimentConfig, level: int = 0,
                base_step: float = None) -> IntegratorConfig:
    return IntegratorConfig(horizon=cfg.horizon,
                            base_step=cfg.step if base_step is None else base_step,
                            level=level,
                            snapshot_times=tuple(cfg.t_grid),
                            stability_cap=cfg.stability_cap)


def _oracle_laws(model: ModelConfig, cfg: ExperimentConfig, times):
    """Mixture law of the label-averaged marginal at each requested time."""
    labels = label_grid(cfg.oracle_grid)
    m0, s0 = model.initial.moments(labels)
    fields = integrate_moments(model.graphon, model.drift.linear,
                               model.sigma_scalar, cfg.oracle_grid,
                               horizon=max(times), dt=cfg.oracle_dt,
                               mean0=m0, second0=s0, snapshot_times=times)
    return {f.t: averaged_law(f) for f in fields}


def _oracle_stationary(model: ModelConfig, cfg: ExperimentConfig) -> MixtureLaw:
    fld, _ = solve_stationary(model.graphon, model.drift.linear,
                              model.sigma_scalar, cfg.oracle_grid)
    return averaged_law(fld)


def _pooled(runs, idx) -> EmpiricalMeasure:
    return EmpiricalMeasure(np.concatenate([r.snapshots[idx][1].positions
                                            for r in runs]))


def _pooled_subset(runs, idx, members) -> EmpiricalMeasure:
    return EmpiricalMeasure(np.concatenate([runs[r].snapshots[idx][1].positions
                                            for r in members]))


def _jackknife_se(values_fn, replicas: int) -> float:
    """Leave-one-replica-out standard error of a pooled statistic."""
    if replicas < 2:
        return 0.0
    stats = np.array([values_fn([r for r in range(replicas) if r != j])
                      for j in range(replicas)])
    return float(np.sqrt((replicas - 1) / replicas
                         * np.sum((stats - stats.mean()) ** 2)))


def _noise_floor(law: MixtureLaw, count: int, draws: int, seed: int,
                 grid: int) -> float:
    """Monte Carlo floor of the sample-vs-law W2 estimator at this count."""
    vals = []
    for j in range(draws):
        atoms = law.sample(count, derive_seed(seed, "floor", j))
        vals.append(w2_empirical_vs_mixture_1d(EmpiricalMeasure(atoms), law,
                                               grid)[0])
    return float(np.mean(vals))


# ---------------------------------------------------------------------------
# ergodicity
# ---------------------------------------------------------------------------


def run_ergodicity(cfg: ExperimentConfig) -> ExperimentResult:
    """Fit the decay rate of W2(pooled law at t, limiting law).

    Oracle mode (affine models) compares against the stationary mixture;
    otherwise the late-time pooled cloud serves as the self-distance
    reference.  PASS requires the fitted rate to reach 80 percent of half
    the contraction rate and the explicit envelope (with the measured
    second-moment constant) to majorize the curve within its error band.
    """
    t0 = time.perf_counter()
    model = cfg.model
    res = ExperimentResult("ergodicity")
    rate = model.drift.contraction_rate
    runs = ensemble_run(model.drift, model.diffusion, model.graphon,
                        cfg.particles, cfg.replicas, cfg.edge_policy,
                        _integrator(cfg), cfg.base_seed, model.initial,
                        model.edge_mode)
    times = [t for t, _ in runs[0].snapshots]
    oracle_mode = model.has_oracle
    if oracle_mode:
        limit = _oracle_stationary(model, cfg)
    else:
        limit = None

    def pooled_w2(members, idx):
        pooled = _pooled_subset(runs, idx, members)
        if oracle_mode:
            return w2_empirical_vs_mixture_1d(pooled, limit, cfg.w2_grid)[0]
        ref = _pooled_subset(runs, len(times) - 1, members)
        return w2_empirical_1d(pooled, ref)

    errs, ses, second_moments = [], [], []
    for idx, t in enumerate(times):
        errs.append(pooled_w2(range(cfg.replicas), idx))
        ses.append(_jackknife_se(lambda mem, k=idx: pooled_w2(mem, k),
                                 cfg.replicas))
        pooled = _pooled(runs, idx)
        second_moments.append(float(np.mean(pooled.atoms ** 2)))
        res.add_row("t", t, "w2_to_limit", errs[-1], ses[-1], cfg.replicas)
        res.add_row("t", t, "second_moment", second_moments[-1], 0.0, cfg.replicas)

    errs = np.array(errs)
    if oracle_mode:
        floor = _noise_floor(limit, cfg.particles * cfg.replicas,
                             cfg.noise_floor_draws, cfg.base_seed, cfg.w2_grid)
        window = [j for j, e in enumerate(errs) if e > 3.0 * floor]
    else:
        # self-distance against the final snapshot: the previous grid point
        # sits at the fluctuation floor and the last one is identically zero
        floor = errs[-2] if errs.size >= 2 else 0.0
        window = [j for j, e in enumerate(errs) if e > 3.0 * floor
                  and times[j] < times[-1]]
    res.meta["noise_floor"] = floor
    res.meta["fit_window_size"] = len(window)
    res.meta["excluded_points"] = len(times) - len(window)
    if len(window) < 5:
        res.status = "inconclusive"
        res.meta["note"] = "fit window shorter than 5 grid points"
    else:
        tw = np.array([times[j] for j in window])

        def rate_stat(members):
            vals = np.array([pooled_w2(members, j) for j in window])
            if np.any(vals <= 0):
                raise ValueError("nonpositive distance in fit window")
            return fit_exponential_decay(tw, vals)[0]

        ci = bootstrap_ci(rate_stat, cfg.replicas, cfg.bootstrap_resamples,
                          seed=derive_seed(cfg.base_seed, "boot"))
        res.add_fit("decay_rate", ci.estimate, ci.lo, ci.hi,
                    ci.estimate >= 0.8 * rate / 2.0)

    # explicit envelope with the empirically measured second-moment constant
    initial_m2 = _initial_second_moment(model, cfg)
    m2 = max(max(second_moments), initial_m2)
    bounds = ergodicity_bound(
        RateBounds(contraction_rate=rate, limit_second_moment=m2),
        model.drift.dissipativity, model.drift.lip_b, np.array(times))
    margin = float(np.min(bounds + 2.0 * np.array(ses) - errs))
    if oracle_mode:
        res.add_fit("bound_margin", margin, margin, margin, margin >= 0.0)
    res.meta.update(contraction_rate=rate, second_moment_constant=m2,
                    oracle_mode=oracle_mode)
    _finish(res, cfg, t0)
    return res


def _initial_second_moment(model: ModelConfig, cfg: ExperimentConfig) -> float:
    labels = label_grid(cfg.oracle_grid)
    _, s0 = model.initial.moments(labels)
    return float(np.max(s0))


def _finish(res: ExperimentResult, cfg: ExperimentConfig, t0: float):
    res.finalize()
    res.meta.setdefault("experiment", res.experiment)
    res.meta["version"] = __version__
    res.meta["base_seed"] = cfg.base_seed
    res.meta["status"] = res.status
    res.meta["config"] = cfg.raw
    res.meta["wall_time_s"] = round(time.perf_counter() - t0, 3)
    if cfg.out_dir:
        res.write(cfg.out_dir)


# ---------------------------------------------------------------------------
# euler_sweep
# ---------------------------------------------------------------------------


def run_euler_sweep(cfg: ExperimentConfig) -> ExperimentResult:
    """Coupled coarse-vs-reference Euler runs over a step-size sweep.

    All schemes of one replica share the same Brownian path through the
    dyadic refinement, the same edges, and the same initial draw, so the
    max-over-snapshots mean-square gap isolates the discretization error.
    The slope band is [0.7, 1.3] for noisy runs and [1.7, 2.3] for the
    noiseless (sigma = 0) degenerate case, where the squared metric of a
    first-order deterministic scheme decays at slope 2.
    """
    t0 = time.perf_counter()
    model = cfg.model
    res = ExperimentResult("euler_sweep")
    hs = sorted(cfg.h_list, reverse=True)
    if len(hs) < 4:
        raise ValueError("euler sweep needs at least 4 step sizes")
    base = hs[0]
    levels = []
    for h in hs:
        lev = np.log2(base / h)
        if abs(lev - round(lev)) > 1e-9:
            raise ValueError("step sizes must be dyadic fractions of max(h)")
        levels.append(int(round(lev)))
    ref_extra = np.log2(cfg.ref_refine)
    if abs(ref_extra - round(ref_extra)) > 1e-9:
        raise ValueError("ref_refine must be a power of two")
    ref_level = levels[-1] + int(round(ref_extra))

    base_cfg = _integrator(cfg, base_step=base)
    labels = np.arange(1, cfg.particles + 1) / cfg.particles
    gaps = {h: [] for h in hs}
    dropped = set()
    for r in range(cfg.replicas):
        edges = sample_edges(model.graphon, cfg.particles, model.edge_mode,
                             seed=derive_seed(cfg.base_seed, "edges", r))
        x0 = model.initial.sample(labels, model.dimension,
                                  derive_seed(cfg.base_seed, "init", r))
        path = BrownianPath(seed=derive_seed(cfg.base_seed, "path", r),
                            path_id=r, base_step=base, max_level=ref_level)
        state0 = ParticleState(t=0.0, positions=x0, edges=edges)
        ref_snaps = integrate(state0, model.drift, model.diffusion,
                              replace(base_cfg, level=ref_level), path)
        ref_pos = {t: s.positions for t, s in ref_snaps}
        for h, lev in zip(hs, levels):
            if h in dropped:
                continue
            try:
                snaps = integrate(state0, model.drift, model.diffusion,
                                  replace(base_cfg, level=lev), path)
            except IntegrationBlowup as exc:
                dropped.add(h)
                res.meta.setdefault("dropped_h", []).append(
                    {"h": h, "replica": r, "error": str(exc)})
                continue
            gap = max(float(np.mean((s.positions - ref_pos[t]) ** 2))
                      for t, s in snaps)
            gaps[h].append(gap)

    kept = [h for h in hs if h not in dropped]
    per_rep = np.array([gaps[h] for h in kept])            # (H, R)
    for j, h in enumerate(kept):
        res.add_row("h", h, "max_mse_gap", per_rep[j].mean(),
                    per_rep[j].std(ddof=1) / np.sqrt(cfg.replicas)
                    if cfg.replicas > 1 else 0.0, cfg.replicas)
    res.meta["h_ref"] = base / 2 ** ref_level
    # a step size equal to the reference gives an exactly zero gap
    # (identical runs); it cannot enter the log fit
    zero_h = [h for j, h in enumerate(kept) if per_rep[j].mean() == 0.0]
    fit_idx = [j for j, h in enumerate(kept) if h not in zero_h]
    per_rep = per_rep[fit_idx]
    kept = [kept[j] for j in fit_idx]
    res.meta["excluded_points"] = len(dropped) + len(zero_h)
    if len(kept) < 2:
        res.status = "inconclusive"
        res.meta["note"] = "too many step sizes dropped"
    else:
        def slope_stat(members):
            means = per_rep[:, members].mean(axis=1)
            return fit_loglog(kept, means)[0]

        ci = bootstrap_ci(slope_stat, cfg.replicas, cfg.bootstrap_resamples,
                          seed=derive_seed(cfg.base_seed, "boot"))
        band = (1.7, 2.3) if model.diffusion.is_zero else (0.7, 1.3)
        res.add_fit("mse_gap_slope", ci.estimate, ci.lo, ci.hi,
                    band[0] <= ci.estimate <= band[1])
        res.meta["slope_band"] = list(band)
    _finish(res, cfg, t0)
    return res


# ---------------------------------------------------------------------------
# lln_sweep
# ---------------------------------------------------------------------------


def run_lln_sweep(cfg: ExperimentConfig) -> ExperimentResult:
    """Empirical-measure convergence over a particle-count sweep.

    Tracks sup over the time grid of the per-replica expected W2 to the
    oracle averaged law and of the pooled-law distance.  PASS requires the
    pooled slope to reach -0.35 and the per-replica error to stay below the
    rate envelope anchored at the smallest population.
    """
    t0 = time.perf_counter()
    model = cfg.model
    res = ExperimentResult("lln_sweep")
    if len(cfg.n_list) < 4:
        raise ValueError("lln sweep needs at least 4 population sizes")
    oracle_mode = model.has_oracle
    if oracle_mode:
        laws = _oracle_laws(model, cfg, tuple(cfg.t_grid))
    proxy_runs = None
    if not oracle_mode:
        proxy_runs = ensemble_run(model.drift, model.diffusion, model.graphon,
                                  max(cfg.n_list), cfg.replicas, cfg.edge_policy,
                                  _integrator(cfg),
                                  derive_seed(cfg.base_seed, "proxy"),
                                  model.initial, model.edge_mode)
        res.meta["note"] = "proxy mode against the largest population; not acceptance grade"

    ns = list(cfg.n_list)
    sup_mean, sup_mean_se, sup_pooled, sup_pooled_se = [], [], [], []
    per_rep_sup = []
    pooled_loo = np.empty((len(ns), cfg.replicas))   # leave-one-out sups
    for n in ns:
        runs = ensemble_run(model.drift, model.diffusion, model.graphon, n,
                            cfg.replicas, cfg.edge_policy, _integrator(cfg),
                            derive_seed(cfg.base_seed, n), model.initial,
                            model.edge_mode)
        times = [t for t, _ in runs[0].snapshots]
        rep_curves = np.empty((cfg.replicas, len(times)))
        refs = {}

        def pooled_value(members, idx):
            pooled = _pooled_subset(runs, idx, members)
            if oracle_mode:
                return w2_empirical_vs_mixture_1d(pooled, laws[times[idx]],
                                                  cfg.w2_grid)[0]
            return w2_empirical_1d(pooled, refs[idx])

        for idx, t in enumerate(times):
            if oracle_mode:
                law = laws[t]
                for r in range(cfg.replicas):
                    emp = EmpiricalMeasure(runs[r].snapshots[idx][1].positions)
                    rep_curves[r, idx] = w2_empirical_vs_mixture_1d(
                        emp, law, cfg.w2_grid)[0]
            else:
                refs[idx] = EmpiricalMeasure(
                    np.concatenate([p.snapshots[idx][1].positions
                                    for p in proxy_runs]))
                for r in range(cfg.replicas):
                    emp = EmpiricalMeasure(runs[r].snapshots[idx][1].positions)
                    rep_curves[r, idx] = w2_empirical_1d(emp, refs[idx])

        pooled_curve = np.array([pooled_value(range(cfg.replicas), idx)
                                 for idx in range(len(times))])
        # leave-one-replica-out pooled curves give both the per-point SE and
        # the jackknife spread of the sup
        loo = np.array([[pooled_value([r for r in range(cfg.replicas)
                                       if r != j], idx)
                         for idx in range(len(times))]
                        for j in range(cfg.replicas)])      # (R, T)
        scale = (cfg.replicas - 1) / cfg.replicas if cfg.replicas > 1 else 0.0
        pooled_se = np.sqrt(scale * np.sum((loo - loo.mean(axis=0)) ** 2,
                                           axis=0))
        mean_curve = rep_curves.mean(axis=0)
        j_sup = int(np.argmax(mean_curve))
        sup_mean.append(float(mean_curve[j_sup]))
        sup_mean_se.append(float(rep_curves[:, j_sup].std(ddof=1)
                                 / np.sqrt(cfg.replicas)) if cfg.replicas > 1 else 0.0)
        per_rep_sup.append(rep_curves[:, j_sup])
        pooled_loo[ns.index(n)] = loo.max(axis=1)
        k_sup = int(np.argmax(pooled_curve))
        sup_pooled.append(float(pooled_curve[k_sup]))
        sup_pooled_se.append(float(pooled_se[k_sup]))
        res.add_row("n", n, "sup_t_mean_w2", sup_mean[-1], sup_mean_se[-1],
                    cfg.replicas)
        res.add_row("n", n, "sup_t_pooled_w2", sup_pooled[-1], sup_pooled_se[-1],
                    cfg.replicas)
        res.add_row("n", n, "lln_rate", lln_rate(n, model.dimension), 0.0,
                    cfg.replicas)

    per_rep_sup = np.array(per_rep_sup)                     # (N, R)

    def mean_slope_stat(members):
        means = per_rep_sup[:, members].mean(axis=1)
        return fit_loglog(ns, means)[0]

    slope_pooled, _ = fit_loglog(ns, sup_pooled)
    loo_slopes = np.array([fit_loglog(ns, pooled_loo[:, j])[0]
                           for j in range(cfg.replicas)])
    scale = (cfg.replicas - 1) / cfg.replicas if cfg.replicas > 1 else 0.0
    slope_se = float(np.sqrt(scale * np.sum((loo_slopes - loo_slopes.mean()) ** 2)))
    ci = bootstrap_ci(mean_slope_stat, cfg.replicas, cfg.bootstrap_resamples,
                      seed=derive_seed(cfg.base_seed, "boot"))
    res.add_fit("pooled_w2_slope", slope_pooled,
                slope_pooled - 1.96 * slope_se, slope_pooled + 1.96 * slope_se,
                slope_pooled <= -0.35)
    res.add_fit("mean_w2_slope", ci.estimate, ci.lo, ci.hi, True)

    rates = np.array([lln_rate(n, model.dimension) for n in ns])
    anchor = sup_mean[0] / rates[0]
    majorized = all(sup_mean[j] <= anchor * rates[j] + 2.0 * sup_mean_se[j]
                    for j in range(len(ns)))
    res.add_fit("rate_envelope_constant", anchor, anchor, anchor, majorized)
    res.meta.update(oracle_mode=oracle_mode, excluded_points=0)
    _finish(res, cfg, t0)
    return res


# ---------------------------------------------------------------------------
# interchange
# ---------------------------------------------------------------------------


def run_interchange(cfg: ExperimentConfig) -> ExperimentResult:
    """Joint (n, h, t) sweep against the stationary oracle law.

    Fits the nonnegative three-term model alpha/sqrt(n) + beta sqrt(h) +
    gamma exp(-rate t / 2); PASS requires the fit residual below 20 percent
    of the largest grid error and monotone marginal sweeps outside error
    bands.
    """
    t0 = time.perf_counter()
    model = cfg.model
    res = ExperimentResult("interchange")
    if not model.has_oracle:
        raise ValueError("interchange experiment requires an affine model")
    limit = _oracle_stationary(model, cfg)
    rate = model.drift.contraction_rate
    ns = list(cfg.n_list)
    hs = list(cfg.h_list)
    ts = list(cfg.t_grid)
    points, errors, ses = [], [], []
    table = {}
    for n in ns:
        for h in hs:
            run_cfg = IntegratorConfig(horizon=cfg.horizon, base_step=h,
                                       snapshot_times=tuple(ts),
                                       stability_cap=cfg.stability_cap)
            runs = ensemble_run(model.drift, model.diffusion, model.graphon,
                                n, cfg.replicas, cfg.edge_policy, run_cfg,
                                derive_seed(cfg.base_seed, n, h),
                                model.initial, model.edge_mode)
            for idx, t in enumerate(ts):
                def stat(members, k=idx):
                    return w2_empirical_vs_mixture_1d(
                        _pooled_subset(runs, k, members), limit, cfg.w2_grid)[0]

                e = stat(range(cfg.replicas))
                se = _jackknife_se(stat, cfg.replicas)
                points.append((n, h, t))
                errors.append(e)
                ses.append(se)
                table[(n, h, t)] = (e, se)
                res.add_row("n/h/t", f"{n}/{h}/{t}", "w2_to_stationary", e, se,
                            cfg.replicas)

    fit = fit_three_term(points, errors, rate)
    res.add_fit("residual_over_max", fit.relative_residual, 0.0,
                fit.relative_residual, fit.relative_residual <= 0.20)
    for name, value in (("coef_inv_sqrt_n", fit.alpha),
                        ("coef_sqrt_h", fit.beta),
                        ("coef_exp_decay", fit.gamma)):
        res.add_fit(name, value, value, value, True)

    # marginal sweeps run from worst to best so the series should decrease
    best_n, best_h, best_t = max(ns), min(hs), max(ts)
    axes = {
        "monotone_in_n": [table[(n, best_h, best_t)] for n in sorted(ns)],
        "monotone_in_h": [table[(best_n, h, best_t)]
                          for h in sorted(hs, reverse=True)],
        "monotone_in_t": [table[(best_n, best_h, t)] for t in sorted(ts)],
    }
    for name, series in axes.items():
        vals = [v for v, _ in series]
        errs = [s for _, s in series]
        ok = len(vals) < 2 or monotone_outside_bands(vals, errs)
        res.add_fit(name, float(vals[-1] - vals[0]), 0.0, 0.0, ok)
    res.meta.update(excluded_terms=list(fit.excluded_terms),
                    max_grid_error=fit.max_error, contraction_rate=rate,
                    excluded_points=0)
    _finish(res, cfg, t0)
    return res


# ---------------------------------------------------------------------------
# quenched vs annealed
# ---------------------------------------------------------------------------


def run_quenched_vs_annealed(cfg: ExperimentConfig) -> ExperimentResult:
    """Compare edge-resampling policies on the self-distance decay.

    The per-replica proxy is the exact empirical W2 between the cloud at
    time t and the same replica's late-time cloud (for equal counts this is
    the population-normalized optimal coupling cost).  Quenched families
    (distinct frozen edge draws) are fitted separately; all rates must
    reach 80 percent of the contraction rate, and the two policies must
    agree within two standard errors.
    """
    t0 = time.perf_counter()
    model = cfg.model
    res = ExperimentResult("quenched_vs_annealed")
    if model.edge_mode != "bernoulli":
        raise ValueError("quenched_vs_annealed requires bernoulli edges")
    rate = model.drift.contraction_rate
    times = list(cfg.t_grid)
    run_cfg = _integrator(cfg)

    second_moment_peak = 0.0

    def policy_curves(policy, seed_tag, families):
        nonlocal second_moment_peak
        curves = []
        for fam in range(families):
            runs = ensemble_run(model.drift, model.diffusion, model.graphon,
                                cfg.particles, cfg.replicas, policy, run_cfg,
                                derive_seed(cfg.base_seed, seed_tag, fam),
                                model.initial, model.edge_mode)
            last = len(times) - 1
            fam_curves = []
            for r in range(cfg.replicas):
                ref = EmpiricalMeasure(runs[r].snapshots[last][1].positions)
                curve = [w2_empirical_1d(
                    EmpiricalMeasure(runs[r].snapshots[idx][1].positions), ref)
                    for idx in range(len(times))]
                fam_curves.append(curve)
                second_moment_peak = max(
                    second_moment_peak,
                    max(float(np.mean(s.positions ** 2))
                        for _, s in runs[r].snapshots))
            curves.append(np.array(fam_curves))
        return curves

    quenched = policy_curves("quenched", "quenched", cfg.families)
    annealed = policy_curves("annealed", "annealed", cfg.families)

    def fit_curve(mean_curve, floor):
        window = [j for j, e in enumerate(mean_curve[:-1])
                  if e > 3.0 * floor]
        if len(window) < 3:
            return None, window
        tw = np.array([times[j] for j in window])
        return fit_exponential_decay(tw, mean_curve[window])[0], window

    all_q = np.concatenate(quenched, axis=0)
    all_a = np.concatenate(annealed, axis=0)
    floor = float(np.mean(all_q[:, -2])) if len(times) >= 2 else 0.0
    res.meta["noise_floor"] = floor

    family_rates = []
    for fam, fam_curves in enumerate(quenched):
        r_fit, window = fit_curve(fam_curves.mean(axis=0), floor)
        if r_fit is None:
            res.status = "inconclusive"
            res.meta["note"] = f"family {fam}: fit window too short"
            continue
        family_rates.append(r_fit)
        res.add_fit(f"quenched_rate_family_{fam}", r_fit, r_fit, r_fit,
                    r_fit >= 0.8 * rate)
    ann_rate, window = fit_curve(all_a.mean(axis=0), floor)
    if ann_rate is None:
        res.status = "inconclusive"
        res.meta["note"] = "annealed fit window too short"
    mean_q = float(np.mean(family_rates)) if family_rates else np.nan

    for idx, t in enumerate(times):
        for name, curves in (("quenched_self_w2", all_q),
                             ("annealed_self_w2", all_a)):
            se = (float(curves[:, idx].std(ddof=1) / np.sqrt(curves.shape[0]))
                  if curves.shape[0] > 1 else 0.0)
            res.add_row("t", t, name, float(curves[:, idx].mean()), se,
                        curves.shape[0])

    if ann_rate is not None and family_rates:
        res.add_fit("annealed_rate", ann_rate, ann_rate, ann_rate,
                    ann_rate >= 0.8 * rate)

        def pooled_rate_stat(curves):
            def stat(members):
                vals = curves[members].mean(axis=0)
                win = [j for j, e in enumerate(vals[:-1]) if e > 3.0 * floor]
                tw = np.array([times[j] for j in win])
                return fit_exponential_decay(tw, vals[win])[0]

            return stat

        ci_q = bootstrap_ci(pooled_rate_stat(all_q), all_q.shape[0],
                            cfg.bootstrap_resamples,
                            seed=derive_seed(cfg.base_seed, "bootq"))
        ci_a = bootstrap_ci(pooled_rate_stat(all_a), all_a.shape[0],
                            cfg.bootstrap_resamples,
                            seed=derive_seed(cfg.base_seed, "boota"))
        se_q = (ci_q.hi - ci_q.lo) / 3.92 if np.isfinite(ci_q.lo) else np.inf
        se_a = (ci_a.hi - ci_a.lo) / 3.92 if np.isfinite(ci_a.lo) else np.inf
        gap = abs(ci_q.estimate - ci_a.estimate)
        tol = 2.0 * float(np.hypot(se_q, se_a))
        res.add_fit("policy_rate_gap", gap, 0.0, tol, gap <= tol)
    res.meta.update(contraction_rate=rate, mean_quenched_rate=mean_q,
                    finite_second_moment=second_moment_peak,
                    excluded_points=len(times) - 1 - len(window or []))
    _finish(res, cfg, t0)
    return res


# ---------------------------------------------------------------------------
# concentration
# ---------------------------------------------------------------------------


def run_concentration(cfg: ExperimentConfig) -> ExperimentResult:
    """Empirical-measure concentration against the min{2p, sqrt(p/n)} bound.

    Heterogeneous label-dependent Gaussians come from the oracle stationary
    field; interval counts are checked exactly (small n) or by Monte Carlo
    with a six-sigma band, and the sample-vs-average-law W2 is tabulated
    against the rate envelope anchored at the smallest n.
    """
    t0 = time.perf_counter()
    model = cfg.model
    res = ExperimentResult("concentration")
    if not model.has_oracle:
        raise ValueError("concentration experiment requires an affine model")
    fld, _ = solve_stationary(model.graphon, model.drift.linear,
                              model.sigma_scalar, cfg.oracle_grid)
    grid_means = fld.mean
    grid_sds = np.sqrt(np.maximum(fld.variance, 0.0))
    span = (float(np.min(grid_means - 4 * grid_sds)),
            float(np.max(grid_means + 4 * grid_sds)))
    intervals = dyadic_intervals(span[0], span[1], cfg.interval_count)

    def laws_for(n):
        idx = np.minimum((np.arange(1, n + 1) / n * cfg.oracle_grid).astype(int),
                         cfg.oracle_grid - 1)
        return [GaussianLaw(float(grid_means[j]), float(grid_sds[j]))
                for j in idx]

    violations = 0
    for n in list(cfg.n_exact) + list(cfg.n_mc):
        report = concentration_check(laws_for(n), intervals,
                                     replicas=cfg.mc_replicas,
                                     seed=derive_seed(cfg.base_seed, n))
        for j, row in enumerate(report.rows):
            res.add_row("n_interval", f"{n}/{j}", "abs_dev_lhs", row.lhs,
                        row.lhs_se, cfg.mc_replicas if not row.exact else 0)
            res.add_row("n_interval", f"{n}/{j}", "lemma_rhs", row.bound, 0.0, 0)
        violations += sum(r.violated for r in report.rows)
    res.add_fit("interval_violations", violations, 0.0, 0.0, violations == 0)

    # W2 between one draw per label-law and their average law, against the
    # rate envelope
    w2_means, w2_ses = [], []
    for n in cfg.n_mc:
        idx = np.minimum((np.arange(1, n + 1) / n * cfg.oracle_grid).astype(int),
                         cfg.oracle_grid - 1)
        uniq, counts = np.unique(idx, return_counts=True)
        mix = MixtureLaw(weights=counts / n, means=grid_means[uniq],
                         variances=(grid_sds[uniq]) ** 2)
        reps = max(8, cfg.mc_replicas // 8)
        vals = []
        rng_seed = derive_seed(cfg.base_seed, "w2", n)
        means_vec = grid_means[idx]
        sds_vec = grid_sds[idx]
        rng = np.random.default_rng(rng_seed)
        for _ in range(reps):
            sample = means_vec + sds_vec * rng.standard_normal(n)
            vals.append(w2_empirical_vs_mixture_1d(EmpiricalMeasure(sample),
                                                   mix, cfg.w2_grid)[0])
        w2_means.append(float(np.mean(vals)))
        w2_ses.append(float(np.std(vals, ddof=1) / np.sqrt(reps)))
        res.add_row("n", n, "mean_w2_to_avg_law", w2_means[-1], w2_ses[-1], reps)
        res.add_row("n", n, "lln_rate", lln_rate(n, 1), 0.0, reps)

    rates = np.array([lln_rate(n, 1) for n in cfg.n_mc])
    anchor = w2_means[0] / rates[0]
    majorized = all(w2_means[j] <= anchor * rates[j] + 2.0 * w2_ses[j]
                    for j in range(len(cfg.n_mc)))
    res.add_fit("rate_envelope_constant", anchor, anchor, anchor, majorized)
    res.meta["intervals"] = [list(iv) for iv in intervals]
    res.meta["excluded_points"] = 0
    _finish(res, cfg, t0)
    return res


RUNNERS = {
    "ergodicity": run_ergodicity,
    "euler_sweep": run_euler_sweep,
    "lln_sweep": run_lln_sweep,
    "interchange": run_interchange,
    "quenched_vs_annealed": run_quenched_vs_annealed,
    "concentration": run_concentration,
}


def run_experiment(cfg: ExperimentConfig) -> ExperimentResult:
    return RUNNERS[cfg.experiment](cfg)
