import numpy as np
import pytest
from hypothesis import given, strategies as st

from gmfs.graphon import (CapabilityError, Graphon, StepKernel, check_lipschitz,
                          cut_norm, l_infty_to_l1_norm, sample_edges,
                          step_difference)

from _oracles import random_union_cut_norm


@pytest.fixture
def two_block():
    return Graphon.from_step([0.0, 0.5, 1.0], [[1.0, 0.0], [0.0, 1.0]])


def test_eval_constant():
    g = Graphon.constant(0.7)
    assert g.eval(0.3, 0.9) == 0.7


def test_eval_step_off_diagonal(two_block):
    assert two_block.eval(0.25, 0.75) == 0.0
    assert two_block.eval(0.25, 0.25) == 1.0


def test_step_block_convention(two_block):
    # blocks are right-open except the last, so 0.5 falls in block 1
    assert two_block.eval(0.5, 0.5) == 1.0
    assert two_block.eval(1.0, 1.0) == 1.0
    assert two_block.eval(0.5, 0.25) == 0.0


def test_eval_symmetry_random_pairs(two_block):
    rng = np.random.default_rng(0)
    for g in (two_block, Graphon.from_callable(lambda u, v: u * v)):
        u, v = rng.random(100), rng.random(100)
        assert np.array_equal(np.asarray(g.eval(u, v)), np.asarray(g.eval(v, u)))


def test_eval_domain_error():
    g = Graphon.constant(0.5)
    with pytest.raises(ValueError):
        g.eval(1.2, 0.5)
    with pytest.raises(ValueError):
        g.eval(0.5, -0.1)


def test_construction_rejects_bad_step():
    with pytest.raises(ValueError):
        Graphon.from_step([0.0, 0.4, 1.0], [[0.2, 0.3], [0.4, 0.2]])  # asymmetric
    with pytest.raises(ValueError):
        Graphon.from_step([0.0, 1.0], [[1.5]])  # out of range
    with pytest.raises(ValueError):
        Graphon.from_step([0.1, 1.0], [[0.5]])  # first boundary not 0


def test_closed_form_symmetry_check_rejects():
    with pytest.raises(ValueError):
        Graphon.from_callable(lambda u, v: np.clip(u - v + 0.5, 0, 1))


def test_sample_edges_all_ones_and_zeros():
    ones = sample_edges(Graphon.constant(1.0), 40, "bernoulli", seed=5)
    assert np.array_equal(ones.values, np.ones((40, 40)))
    zeros = sample_edges(Graphon.constant(0.0), 40, "bernoulli", seed=5)
    assert np.array_equal(zeros.values, np.zeros((40, 40)))


def test_sample_edges_bernoulli_mean():
    ew = sample_edges(Graphon.constant(0.5), 2000, "bernoulli", seed=9)
    off = ew.values[~np.eye(2000, dtype=bool)]
    assert abs(off.mean() - 0.5) < 0.01


def test_sample_edges_reproducible_and_symmetric():
    g = Graphon.constant(0.3)
    a = sample_edges(g, 60, "bernoulli", seed=123)
    b = sample_edges(g, 60, "bernoulli", seed=123)
    c = sample_edges(g, 60, "bernoulli", seed=124)
    assert np.array_equal(a.values, b.values)
    assert not np.array_equal(a.values, c.values)
    assert np.array_equal(a.values, a.values.T)
    assert set(np.unique(a.values)) <= {0.0, 1.0}


def test_sample_edges_deterministic_matches_eval(two_block):
    n = 10
    ew = sample_edges(two_block, n, "deterministic")
    labels = np.arange(1, n + 1) / n
    for i in range(n):
        for j in range(n):
            assert ew.values[i, j] == two_block.eval(labels[i], labels[j])


def test_cut_norm_constant():
    res = cut_norm(Graphon.constant(0.3))
    assert res.value == pytest.approx(0.3, abs=1e-15)
    assert res.exact


def test_cut_norm_signed_two_block():
    kernel = StepKernel(np.array([0.0, 0.5, 1.0]),
                        np.array([[0.2, -0.2], [-0.2, 0.2]]))
    res = cut_norm(kernel)
    assert res.value == pytest.approx(0.05, abs=1e-15)
    assert set(res.row_blocks) == set(res.col_blocks)
    assert len(res.row_blocks) == 1


def test_cut_norm_zero_kernel():
    assert cut_norm(Graphon.constant(0.0)).value == 0.0


def test_cut_norm_difference_symmetry():
    rng = np.random.default_rng(3)
    g1 = _random_step(rng, 3)
    g2 = _random_step(rng, 4)
    d12 = step_difference(g1, g2)
    d21 = step_difference(g2, g1)
    assert cut_norm(d12).value == pytest.approx(cut_norm(d21).value, abs=1e-15)


def test_cut_norm_capability_limit():
    values = np.zeros((21, 21))
    kernel = StepKernel(np.linspace(0, 1, 22), values)
    with pytest.raises(CapabilityError):
        cut_norm(kernel, exact=True)


def test_cut_norm_randomized_is_lower_bound():
    rng = np.random.default_rng(4)
    g = _random_step(rng, 5)
    exact = cut_norm(g, exact=True)
    lower = cut_norm(g, exact=False, candidates=200, seed=1)
    assert not lower.exact
    assert lower.value <= exact.value + 1e-15


def test_l_infty_to_l1_constant_and_zero():
    assert l_infty_to_l1_norm(Graphon.constant(0.4)) == pytest.approx(0.4, abs=1e-15)
    assert l_infty_to_l1_norm(Graphon.constant(0.0)) == 0.0


def test_l_infty_to_l1_signed_two_block():
    kernel = StepKernel(np.array([0.0, 0.5, 1.0]),
                        np.array([[0.2, -0.2], [-0.2, 0.2]]))
    assert l_infty_to_l1_norm(kernel) == pytest.approx(0.2, abs=1e-15)


def _random_step(rng, k):
    cuts = np.sort(rng.random(k - 1))
    bounds = np.concatenate(([0.0], cuts, [1.0]))
    vals = rng.random((k, k))
    vals = 0.5 * (vals + vals.T)
    return Graphon.from_step(bounds, vals)


@given(st.integers(0, 10_000))
def test_cut_norm_dominated_by_operator_norm(seed):
    rng = np.random.default_rng(seed)
    g = _random_step(rng, int(rng.integers(1, 5)))
    assert cut_norm(g).value <= l_infty_to_l1_norm(g) + 1e-12


def test_cut_norm_exact_equals_randomized_block_search():
    for seed in range(10):
        rng = np.random.default_rng(seed)
        g = _random_step(rng, int(rng.integers(1, 5)))
        exact = cut_norm(g, exact=True).value
        sampled = random_union_cut_norm(g.as_kernel(), 10_000, seed)
        assert abs(exact - sampled) <= 1e-12


def test_check_lipschitz_product_kernel():
    g = Graphon.from_callable(lambda u, v: u * v, lipschitz=1.0)
    report = check_lipschitz(g, declared=1.0, grid=64)
    assert report.certified
    assert report.observed <= 1.0 + 1e-9


def test_check_lipschitz_step_jump(two_block):
    report = check_lipschitz(two_block, declared=5.0,
                             partition=((0.0, 1.0),), grid=64)
    assert not report.certified
    assert report.violation is not None


def test_check_lipschitz_constant():
    report = check_lipschitz(Graphon.constant(0.5), declared=0.0, grid=32)
    assert report.certified


def test_save_load_roundtrip(tmp_path, two_block):
    path = tmp_path / "kernel.txt"
    two_block.save(path)
    loaded = Graphon.load(path)
    assert np.array_equal(loaded.step.values, two_block.step.values)
    assert np.array_equal(loaded.step.boundaries, two_block.step.boundaries)
    assert loaded.fingerprint() == two_block.fingerprint()
