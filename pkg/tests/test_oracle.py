import numpy as np
import pytest

from gmfs.dynamics import LinearInteraction
from gmfs.fitting import fit_exponential_decay, fit_loglog
from gmfs.graphon import Graphon
from gmfs.oracle import (ConvergenceError, MomentField, OracleNumericsError,
                         averaged_law, integrate_moments, label_continuity_check,
                         label_grid, solve_stationary)


OU = LinearInteraction(const_f=0.0, slope_f=2.0)
G1 = Graphon.constant(1.0)


def test_ou_mean_decay_and_variance_limit():
    fields = integrate_moments(G1, OU, sigma=1.0, grid_size=8, horizon=6.0,
                               dt=0.01, mean0=1.0, second0=1.0,
                               snapshot_times=(1.0, 2.0, 6.0))
    for fld in fields[:2]:
        assert fld.mean == pytest.approx(np.exp(-2.0 * fld.t), rel=1e-6)
    final = fields[-1]
    assert final.second_moment == pytest.approx(1.0 / 4.0, abs=1e-5)


def test_stationary_start_is_fixed_point():
    # second0 = sigma^2 / (2 slope_f), mean0 = 0
    fields = integrate_moments(G1, OU, sigma=1.0, grid_size=4, horizon=3.0,
                               dt=0.02, mean0=0.0, second0=0.25,
                               snapshot_times=(0.0, 1.5, 3.0))
    for fld in fields:
        assert fld.mean == pytest.approx(np.zeros(4), abs=1e-12)
        assert fld.second_moment == pytest.approx(np.full(4, 0.25), abs=1e-10)


def test_grid_refinement_consistency():
    coeffs = LinearInteraction(const_f=0.3, slope_f=2.0, const_b=0.1,
                               self_b=0.5, other_b=0.3)
    g = Graphon.from_callable(lambda u, v: 0.5 * (u + v), lipschitz=1.0)
    out = {}
    for k in (64, 128):
        fld = integrate_moments(g, coeffs, 1.0, k, horizon=4.0, dt=0.01,
                                mean0=0.0, second0=1.0)[0]
        coarse = fld.mean.reshape(-1, k // 64).mean(axis=1)
        out[k] = coarse
    assert np.max(np.abs(out[64] - out[128])) <= 1e-5


def test_dt_stability_precondition():
    with pytest.raises(ValueError):
        integrate_moments(G1, OU, 1.0, 4, horizon=1.0, dt=0.2, mean0=0.0,
                          second0=1.0)


def test_variance_negativity_detection():
    with pytest.raises(OracleNumericsError):
        MomentField(labels=label_grid(2), mean=np.array([1.0, 1.0]),
                    second_moment=np.array([0.5, 1.5]), t=0.0)


def test_stationary_no_interaction():
    coeffs = LinearInteraction(const_f=1.0, slope_f=2.0)
    fld, iters = solve_stationary(G1, coeffs, sigma=1.0, grid_size=8)
    assert fld.mean == pytest.approx(np.full(8, 0.5), abs=1e-12)
    assert iters >= 1


def test_stationary_zero_const_closed_form():
    coeffs = LinearInteraction(const_f=0.0, slope_f=2.0, const_b=0.0,
                               self_b=0.5, other_b=0.3)
    fld, _ = solve_stationary(G1, coeffs, sigma=1.0, grid_size=8)
    assert fld.mean == pytest.approx(np.zeros(8), abs=1e-14)
    assert fld.second_moment == pytest.approx(np.full(8, 1.0 / 3.0), abs=1e-12)


def test_stationary_matches_time_integration():
    coeffs = LinearInteraction(const_f=0.4, slope_f=2.0, const_b=0.2,
                               self_b=0.5, other_b=0.3)
    g = Graphon.from_step([0.0, 0.5, 1.0], [[0.9, 0.2], [0.2, 0.6]])
    fld, _ = solve_stationary(g, coeffs, sigma=1.0, grid_size=32)
    evolved = integrate_moments(g, coeffs, 1.0, 32, horizon=40.0, dt=0.02,
                                mean0=0.0, second0=1.0)[0]
    assert np.max(np.abs(evolved.mean - fld.mean)) < 1e-8
    assert np.max(np.abs(evolved.second_moment - fld.second_moment)) < 1e-7


def test_two_block_component_variances():
    # closed form sigma^2 / (2 (slope_f - self_b * row_integral)) per block:
    # row integrals (0.8, 0) with self_b = 0.625 give variances 1/3 and 1/4,
    # and the mixture second moment is the measure-weighted average
    g = Graphon.from_step([0.0, 0.8, 1.0], [[1.0, 0.0], [0.0, 0.0]])
    coeffs = LinearInteraction(const_f=0.0, slope_f=2.0, self_b=0.625)
    fld, _ = solve_stationary(g, coeffs, sigma=1.0, grid_size=20)
    law = averaged_law(fld)
    first = fld.second_moment[fld.labels < 0.8]
    second = fld.second_moment[fld.labels >= 0.8]
    assert first == pytest.approx(np.full(16, 1.0 / 3.0), abs=1e-12)
    assert second == pytest.approx(np.full(4, 1.0 / 4.0), abs=1e-12)
    assert law.second_moment() == pytest.approx(0.8 / 3 + 0.2 / 4, abs=1e-12)


def test_two_block_equal_measure_variances():
    # equal blocks, row integrals (0.5, 0): variances 1/3.5 and 1/4
    g = Graphon.from_step([0.0, 0.5, 1.0], [[1.0, 0.0], [0.0, 0.0]])
    coeffs = LinearInteraction(const_f=0.0, slope_f=2.0, self_b=0.5)
    fld, _ = solve_stationary(g, coeffs, sigma=1.0, grid_size=16)
    law = averaged_law(fld)
    assert fld.second_moment[0] == pytest.approx(1.0 / 3.5, abs=1e-12)
    assert fld.second_moment[-1] == pytest.approx(0.25, abs=1e-12)
    assert law.second_moment() == pytest.approx((1 / 3.5 + 1 / 4) / 2, abs=1e-12)


def test_averaged_law_label_independent_is_single_gaussian():
    fld, _ = solve_stationary(G1, OU, sigma=1.0, grid_size=8)
    law = averaged_law(fld)
    assert np.ptp(law.means) == 0.0
    assert np.ptp(law.variances) == pytest.approx(0.0, abs=1e-15)


def test_time_integration_converges_exponentially():
    coeffs = LinearInteraction(const_f=0.0, slope_f=2.0, self_b=0.5,
                               other_b=0.3)
    margin = coeffs.slope_f - abs(coeffs.self_b) - abs(coeffs.other_b)
    fld_inf, _ = solve_stationary(G1, coeffs, sigma=1.0, grid_size=8)
    times = np.array([1.0, 2.0, 3.0, 4.0, 5.0])
    fields = integrate_moments(G1, coeffs, 1.0, 8, horizon=5.0, dt=0.01,
                               mean0=2.0, second0=4.5, snapshot_times=times)
    gaps = np.array([np.max(np.abs(f.mean - fld_inf.mean)) for f in fields])
    rate, _ = fit_exponential_decay(times, gaps)
    assert rate >= 0.8 * margin


def test_fixed_point_contracts_geometrically():
    coeffs = LinearInteraction(const_f=1.0, slope_f=2.0, const_b=0.3,
                               self_b=0.5, other_b=0.4)
    labels = label_grid(16)
    uu, vv = np.meshgrid(labels, labels, indexing="ij")
    w = np.asarray(G1.eval(uu, vv), float)
    gbar = w.mean(axis=1)
    denom = coeffs.slope_f - coeffs.self_b * gbar
    m = np.zeros(16)
    deltas = []
    for _ in range(12):
        m_new = (coeffs.const_f + coeffs.const_b * gbar
                 + coeffs.other_b * (w @ m) / 16) / denom
        deltas.append(float(np.max(np.abs(m_new - m))))
        m = m_new
    ratios = [deltas[j + 1] / deltas[j] for j in range(6) if deltas[j] > 0]
    bound = (abs(coeffs.self_b) + abs(coeffs.other_b)) / coeffs.slope_f + 1e-9
    assert all(r <= bound for r in ratios)


def test_non_contracting_inputs_rejected():
    with pytest.raises(ValueError):
        solve_stationary(G1, LinearInteraction(slope_f=2.0, self_b=1.2), 1.0, 8)
    with pytest.raises((ValueError, ConvergenceError)):
        integrate_moments(G1, LinearInteraction(slope_f=1.0, self_b=0.6),
                          1.0, 4, 1.0, 0.01, 0.0, 1.0)


def test_grid_self_convergence_order():
    coeffs = LinearInteraction(const_f=0.2, slope_f=2.0, const_b=0.1,
                               self_b=0.5, other_b=0.3)
    g = Graphon.from_callable(lambda u, v: 0.25 * (u + v) + 0.25,
                              lipschitz=0.25)
    ref, _ = solve_stationary(g, coeffs, 1.0, grid_size=512)
    law_ref = averaged_law(ref).second_moment()
    errs, ks = [], [16, 32, 64, 128]
    for k in ks:
        fld, _ = solve_stationary(g, coeffs, 1.0, grid_size=k)
        errs.append(abs(averaged_law(fld).second_moment() - law_ref))
    slope, _ = fit_loglog([1.0 / k for k in ks], errs)
    assert slope >= 1.5


def test_variance_stays_positive_along_flow():
    rng = np.random.default_rng(12)
    for _ in range(8):
        slope = float(rng.uniform(1.0, 3.0))
        b1 = float(rng.uniform(-0.4, 0.4) * slope / 2)
        b2 = float(rng.uniform(-0.4, 0.4) * slope / 2)
        coeffs = LinearInteraction(const_f=float(rng.normal()), slope_f=slope,
                                   const_b=float(rng.normal()), self_b=b1,
                                   other_b=b2)
        mean0 = float(rng.normal())
        fields = integrate_moments(G1, coeffs, sigma=float(rng.uniform(0, 2)),
                                   grid_size=8, horizon=3.0, dt=0.02,
                                   mean0=mean0,
                                   second0=mean0 ** 2 + float(rng.uniform(0.1, 3)),
                                   snapshot_times=(1.0, 2.0, 3.0))
        for fld in fields:
            assert np.min(fld.variance) > -1e-9


def test_label_continuity_constant_graphon():
    fld, _ = solve_stationary(G1, OU, 1.0, 16)
    report = label_continuity_check(fld, G1)
    assert report.max_ratio == pytest.approx(0.0, abs=1e-12)
    assert report.ok


def test_label_continuity_smooth_graphon_bounded():
    coeffs = LinearInteraction(const_f=0.0, slope_f=2.0, self_b=0.5)
    g = Graphon.from_callable(lambda u, v: u * v, lipschitz=1.0)
    fld, _ = solve_stationary(g, coeffs, 1.0, 64)
    report = label_continuity_check(fld, g)
    # d/du of sigma^2/(2(c - b u/2)) is bounded by ~0.1 here
    assert report.max_ratio < 0.2
    assert not report.boundary_jumps


def test_label_continuity_flags_block_boundary():
    coeffs = LinearInteraction(const_f=0.0, slope_f=2.0, self_b=0.9)
    g = Graphon.from_step([0.0, 0.5, 1.0], [[1.0, 0.0], [0.0, 0.0]])
    fld, _ = solve_stationary(g, coeffs, 1.0, 32)
    report = label_continuity_check(fld, g)
    assert len(report.boundary_jumps) == 1
    jump_ratio = report.boundary_jumps[0][1]
    assert jump_ratio > 5 * report.max_ratio
