import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from bdsde_split.brownian import (
    BrownianPath,
    TimeGrid,
    sample_path,
    sample_paths,
    sample_seed,
    splitmix64,
    standard_normals,
)


def test_time_grid():
    tg = TimeGrid(8, 2.0)
    assert tg.dt == 0.25
    assert abs(tg.dt * tg.n_steps - tg.horizon) <= 1e-12
    assert tg.time(8) == 2.0 and tg.time(3) == 0.75


@pytest.mark.parametrize("n", [0, -1, 2.5, True])
def test_time_grid_rejects_bad_steps(n):
    with pytest.raises(ValueError):
        TimeGrid(n)


def test_time_grid_rejects_bad_horizon():
    with pytest.raises(ValueError):
        TimeGrid(4, 0.0)


def test_single_step_path():
    p = sample_path(TimeGrid(1), 11)
    assert p.n_steps == 1 and p.b_T == p.increments[0]


def test_fixed_seed_is_deterministic():
    a = sample_path(TimeGrid(64), 123)
    b = sample_path(TimeGrid(64), 123)
    assert np.array_equal(a.increments, b.increments)
    assert not np.array_equal(a.increments, sample_path(TimeGrid(64), 124).increments)


def test_splitmix64_reference_values():
    # first outputs of the reference SplitMix64 generator seeded with 0
    state, outs = 0, []
    for _ in range(3):
        outs.append(splitmix64(state))
        state = (state + 0x9E3779B97F4A7C15) & ((1 << 64) - 1)
    assert outs == [0xE220A8397B1DCDAF, 0x6E789E6AA1B965F4, 0x06C45D188009454F]


def test_sample_keys_are_order_free():
    rows = sample_paths(TimeGrid(4), 42, 10)
    np.testing.assert_array_equal(rows[3:], sample_paths(TimeGrid(4), 42, 7, start=3))
    np.testing.assert_array_equal(rows[5], sample_path(TimeGrid(4), sample_seed(42, 5)).increments)
    with pytest.raises(ValueError):
        sample_seed(-1, 0)


def test_normals_are_finite_and_symmetric():
    z = standard_normals(9, 10 ** 5)
    assert np.all(np.isfinite(z))
    assert abs(z.mean()) < 4 / math.sqrt(10 ** 5)


@settings(max_examples=50, deadline=None)
@given(inc=st.lists(st.floats(-3, 3), min_size=1, max_size=40))
def test_cumulative_is_prefix_sum(inc):
    p = BrownianPath(np.array(inc))
    assert p.cumulative[0] == 0.0
    np.testing.assert_allclose(p.cumulative[1:], np.cumsum(inc), atol=1e-12)
    assert p.b_T == p.cumulative[-1]
    with pytest.raises(ValueError):
        p.cumulative[0] = 1.0


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 2 ** 63), log_n=st.integers(0, 7), log_f=st.integers(0, 7))
def test_coarsening_is_exact_pairwise_summation(seed, log_n, log_f):
    fine = sample_path(TimeGrid(2 ** (log_n + log_f)), seed)
    coarse = fine.coarsen(2 ** log_f)
    assert coarse.n_steps == 2 ** log_n
    ref = fine.increments.reshape(2 ** log_n, -1).sum(axis=1)
    assert np.array_equal(coarse.increments, ref)
    if log_f == 1:
        assert np.array_equal(coarse.increments, fine.increments[0::2] + fine.increments[1::2])


def test_coarsen_rejects_non_divisor():
    with pytest.raises(ValueError):
        sample_path(TimeGrid(6), 1).coarsen(4)


@pytest.fixture(scope="module")
def many_paths():
    return sample_paths(TimeGrid(4), 2024, 10 ** 5)


def test_increment_variance(many_paths):
    var = many_paths.var(axis=0, ddof=1)
    assert np.all(np.abs(var - 0.25) <= 0.01)


def test_increment_mean(many_paths):
    assert np.all(np.abs(many_paths.mean(axis=0)) <= 4 * math.sqrt(0.25 / 10 ** 5))


def test_increments_uncorrelated(many_paths):
    corr = np.corrcoef(many_paths.T)
    off = corr[~np.eye(4, dtype=bool)]
    assert np.all(np.abs(off) <= 4 / math.sqrt(10 ** 5))
