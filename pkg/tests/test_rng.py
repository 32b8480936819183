import numpy as np
import pytest

from gmfs.rng import (BrownianPath, block_normals, block_uniforms, derive_key,
                      derive_seed)


def test_derive_key_stable_and_distinct():
    assert derive_key("a", 1) == derive_key("a", 1)
    assert derive_key("a", 1) != derive_key("a", 2)
    assert 0 <= derive_seed("x") < 2 ** 64


def test_block_draws_bit_identical():
    key = derive_key("t", 0)
    a = block_normals(key, 3, (5, 2))
    b = block_normals(key, 3, (5, 2))
    assert np.array_equal(a, b)
    assert not np.array_equal(a, block_normals(key, 4, (5, 2)))


def test_block_rows_stable_under_block_growth():
    # row i depends only on rows before it, so a bigger block shares a prefix
    key = derive_key("t", 1)
    small = block_normals(key, 0, (6, 3))
    big = block_normals(key, 0, (11, 3))
    assert np.array_equal(small, big[:6])
    u_small = block_uniforms(key, 2, (4, 4))
    u_big = block_uniforms(key, 2, (9, 4))
    assert np.array_equal(u_small, u_big[:4])


def test_refinement_sums_exactly():
    path = BrownianPath(seed=42, base_step=0.4, max_level=5)
    for k in (0, 3, 17):
        coarse = path.increment(0, k, 7, 2)
        for level in (1, 3, 5):
            fine = path.coarse_block(k, level, 7, 2)
            assert fine.shape == (2 ** level, 7, 2)
            tree = fine
            while tree.shape[0] > 1:
                tree = tree[0::2] + tree[1::2]
            assert np.array_equal(tree[0], coarse)


def test_intermediate_levels_consistent():
    path = BrownianPath(seed=1, base_step=0.1, max_level=4)
    mid = path.coarse_block(2, 2, 3, 1)
    fine = path.coarse_block(2, 4, 3, 1)
    rebuilt = fine
    while rebuilt.shape[0] > 4:
        rebuilt = rebuilt[0::2] + rebuilt[1::2]
    assert np.array_equal(rebuilt, mid)
    # increment(level, k) matches the block view
    assert np.array_equal(path.increment(2, 9, 3, 1),
                          path.coarse_block(2, 2, 3, 1)[1])


def test_paths_differ_by_seed_and_id():
    a = BrownianPath(seed=7, path_id=0, base_step=0.2)
    b = BrownianPath(seed=7, path_id=1, base_step=0.2)
    c = BrownianPath(seed=8, path_id=0, base_step=0.2)
    x = a.increment(0, 0, 4, 1)
    assert not np.array_equal(x, b.increment(0, 0, 4, 1))
    assert not np.array_equal(x, c.increment(0, 0, 4, 1))
    assert np.array_equal(x, BrownianPath(seed=7, path_id=0, base_step=0.2)
                          .increment(0, 0, 4, 1))


def test_increment_distribution():
    path = BrownianPath(seed=3, base_step=0.25, max_level=0)
    draws = np.concatenate([path.increment(0, k, 2000, 1).ravel()
                            for k in range(10)])
    # variance base_step, mean 0; 6 sigma bands for 20k samples
    assert abs(draws.mean()) < 6 * np.sqrt(0.25 / draws.size)
    assert abs(draws.var() - 0.25) < 6 * 0.25 * np.sqrt(2.0 / draws.size)


def test_level_validation():
    path = BrownianPath(seed=0, base_step=0.5, max_level=2)
    with pytest.raises(ValueError):
        path.increment(3, 0, 1, 1)
    with pytest.raises(ValueError):
        BrownianPath(seed=0, base_step=-1.0)
    assert path.step_at(2) == pytest.approx(0.125)
