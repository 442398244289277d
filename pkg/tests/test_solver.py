import io
import math

import numpy as np
import pytest

from bdsde_split.brownian import BrownianPath, TimeGrid, sample_path, sample_paths, sample_seed
from bdsde_split.experiment import default_grid
from bdsde_split.model import Problem, example_1, example_3, zero_problem
from bdsde_split.quadrature import hermite_rule
from bdsde_split.solver import (
    SolverDivergence,
    level_grids,
    solve_backward,
    solve_batch,
    solve_bsde,
    step_bsde,
    step_sde,
    terminal_level,
    write_trace,
)
from bdsde_split.spatial import ValueLevel, build_grid, interpolate

RULE = hermite_rule(8)
GRID = build_grid(0.0, 4.0, 81)
PATH4 = BrownianPath(np.array([0.3, -0.2, 0.1, 0.25]))


def zeros4(t, x, y, b, bT):
    return np.zeros(np.broadcast(t, x, y, b, bT).shape)


def problem_with(f=None, g=None, g_y_g=None, terminal=None):
    return Problem(
        f=f or (lambda t, x, y, z, b, bT: np.zeros(np.broadcast(t, x, y, z).shape)),
        g=g or zeros4,
        g_y_g=g_y_g or zeros4,
        terminal=terminal or (lambda x, bT: 0 * x),
    )


def level_from(values, z, grid, i=4):
    return ValueLevel(np.asarray(values, float), np.asarray(values, float), np.asarray(z, float), i, grid)


# terminal level

def test_terminal_level_example_3():
    p = example_3()
    lv = terminal_level(p, GRID, PATH4)
    np.testing.assert_allclose(lv.y, 1.0 + GRID.nodes + PATH4.b_T / 2, atol=1e-14)
    np.testing.assert_array_equal(lv.y, lv.y_tilde)
    np.testing.assert_allclose(lv.z, 1.0, atol=1e-10)
    assert lv.time_index == 4


def test_terminal_level_zero():
    lv = terminal_level(problem_with(), GRID, PATH4)
    assert not lv.y.any() and not lv.z.any()


def test_terminal_level_exact_z_seed():
    p = example_1()
    lv = terminal_level(p, GRID, PATH4, exact_z_seed=True)
    np.testing.assert_allclose(lv.z, np.cos(1.0 + GRID.nodes), atol=1e-15)


def test_terminal_level_rejects_non_finite():
    p = problem_with(terminal=lambda x, bT: np.where(x > 1, np.nan, x))
    with pytest.raises(SolverDivergence, match="terminal"):
        terminal_level(p, GRID, PATH4)


# single steps

WIDE = GRID.widened(40)


def test_step_bsde_martingale_of_identity():
    y_tilde, z = step_bsde(problem_with(), GRID, RULE, 0.25, 1.0, level_from(WIDE.nodes, np.ones(WIDE.count), WIDE), PATH4)
    np.testing.assert_allclose(y_tilde, GRID.nodes, atol=1e-8)
    np.testing.assert_allclose(z, 1.0, atol=1e-8)


def test_step_bsde_constant():
    y_tilde, z = step_bsde(problem_with(), GRID, RULE, 0.25, 1.0, level_from(np.full(WIDE.count, 2.5), np.zeros(WIDE.count), WIDE), PATH4)
    np.testing.assert_allclose(y_tilde, 2.5, atol=1e-13)
    np.testing.assert_allclose(z, 0.0, atol=1e-13)


def test_step_bsde_unit_driver():
    p = problem_with(f=lambda t, x, y, z, b, bT: np.ones(np.broadcast(t, x, y, z).shape))
    y_tilde, z = step_bsde(p, GRID, RULE, 0.25, 1.0, level_from(np.zeros(WIDE.count), np.zeros(WIDE.count), WIDE), PATH4)
    np.testing.assert_allclose(y_tilde, 0.25, atol=1e-14)
    np.testing.assert_allclose(z, 0.0, atol=1e-14)


def test_step_sde_without_noise_coefficient():
    yt = np.sin(GRID.nodes)
    np.testing.assert_array_equal(step_sde(problem_with(), GRID, RULE, 0.25, 1.0, yt, 0.4, PATH4), yt)


def test_step_sde_unit_noise():
    p = problem_with(g=lambda t, x, y, b, bT: np.ones(np.broadcast(t, x, y).shape))
    yt = np.cos(GRID.nodes)
    np.testing.assert_allclose(step_sde(p, GRID, RULE, 0.25, 1.0, yt, 0.4, PATH4), yt + 0.4, atol=1e-14)


@pytest.mark.parametrize("db", [-0.7, 0.0, 0.31, 1.2])
def test_step_sde_linear_noise_matches_milstein_closed_form(db):
    lin = lambda t, x, y, b, bT: y + 0 * x  # noqa: E731
    p = problem_with(g=lin, g_y_g=lin)
    yt = 1.5 + np.sin(GRID.nodes)
    dt = 0.125
    got = step_sde(p, GRID, RULE, dt, 0.5, yt, db, PATH4, time_index=1)
    np.testing.assert_allclose(got, yt * (1 + db + 0.5 * (db * db - dt)), rtol=1e-12, atol=1e-12)


def test_step_bsde_matches_monte_carlo_oracle():
    """Smooth synthetic level data: quadrature kernels vs 10^6 plain Monte Carlo draws."""
    p = example_1()
    dt, n = 0.1, 10 ** 6
    nodes = WIDE.nodes
    nxt = level_from(np.sin(nodes) + 0.3 * nodes, np.cos(2 * nodes), WIDE)
    y_tilde, z = step_bsde(p, GRID, RULE, dt, 1.0, nxt, PATH4)
    rng = np.random.default_rng(99)
    for j in (GRID.center_index - 17, GRID.center_index, GRID.center_index + 9):
        x = GRID.nodes[j]
        dw = math.sqrt(dt) * rng.standard_normal(n)
        yp, zp = interpolate(nxt.y, WIDE, x + dw), interpolate(nxt.z, WIDE, x + dw)
        h = yp + dt * p.f(1.0, x + dw, yp, zp, PATH4.cumulative[4], PATH4.b_T)
        se_y = h.std(ddof=1) / math.sqrt(n)
        hz = h * dw / dt
        se_z = hz.std(ddof=1) / math.sqrt(n)
        assert abs(y_tilde[j] - h.mean()) <= 4 * se_y
        assert abs(z[j] - hz.mean()) <= 4 * se_z


# full sweeps

@pytest.mark.parametrize("n", [1, 2, 8, 32, 128])
def test_martingale_preserved(n):
    p = zero_problem(lambda x, bT: x + 0 * bT)
    grid = default_grid(p, RULE)
    tg = TimeGrid(n)
    res = solve_backward(p, grid, RULE, tg, sample_path(tg, sample_seed(5, 0)))
    mid = grid.middle_half()
    assert np.max(np.abs(res.level0.y - grid.nodes)[mid]) <= 1e-6
    assert np.max(np.abs(res.level0.z - 1.0)[mid]) <= 1e-6
    assert res.level0.time_index == 0 and res.level0.grid == grid


@pytest.mark.parametrize("k", range(4))
def test_example_3_z_close_to_one(k):
    p = example_3()
    grid = default_grid(p, RULE)
    tg = TimeGrid(32)
    res = solve_backward(p, grid, RULE, tg, sample_path(tg, sample_seed(42, k)))
    assert np.max(np.abs(res.level0.z - 1.0)[grid.middle_half()]) <= 0.05


def test_g_zero_reduces_to_bsde_bit_for_bit():
    base = example_1()
    p = Problem(f=base.f, g=zeros4, g_y_g=zeros4, terminal=base.terminal)
    tg = TimeGrid(8)
    path = sample_path(tg, 3)
    full = solve_backward(p, GRID, RULE, tg, path).level0
    bsde = solve_bsde(p, GRID, RULE, tg, path)
    assert np.array_equal(full.y, bsde.y)
    assert np.array_equal(full.y_tilde, bsde.y_tilde)
    assert np.array_equal(full.z, bsde.z)


def test_path_measurability():
    """Level i sees dB_j only for j >= i when the coefficients do not read B directly."""
    p = problem_with(
        f=lambda t, x, y, z, b, bT: 0.5 * np.sin(y) - 0.2 * z,
        g=lambda t, x, y, b, bT: 0.3 * np.cos(y) + 0.1 * np.sin(x),
        g_y_g=lambda t, x, y, b, bT: -0.3 * np.sin(y) * (0.3 * np.cos(y) + 0.1 * np.sin(x)),
        terminal=lambda x, bT: np.sin(x) + 0 * bT,
    )
    tg = TimeGrid(8)
    path = sample_path(tg, 17)
    base = solve_backward(p, GRID, RULE, tg, path, trace=True)
    for k in (0, 3, 7):
        bumped = path.increments.copy()
        bumped[k] += 0.8
        res = solve_backward(p, GRID, RULE, tg, BrownianPath(bumped), trace=True)
        for i in range(k + 1, 9):
            np.testing.assert_array_equal(res.levels[i].y, base.levels[i].y)
            np.testing.assert_array_equal(res.levels[i].z, base.levels[i].z)
        assert not np.array_equal(res.levels[k].y, base.levels[k].y)


def test_batch_matches_single_paths():
    p = example_3()
    tg = TimeGrid(8)
    inc = sample_paths(tg, 42, 5)
    batch = solve_batch(p, GRID, RULE, tg, inc).level0
    for k in range(5):
        single = solve_backward(p, GRID, RULE, tg, BrownianPath(inc[k])).level0
        np.testing.assert_allclose(batch.y[k], single.y, rtol=0, atol=1e-14)
        np.testing.assert_allclose(batch.z[k], single.z, rtol=0, atol=1e-14)


def test_level_grids_contain_every_probe():
    tg = TimeGrid(4)
    grids = level_grids(GRID, RULE, tg)
    assert grids[0] is GRID and len(grids) == 5
    for i in range(4):
        probes = RULE.probes(grids[i].nodes, tg.dt)
        assert probes.min() >= grids[i + 1].nodes[1] and probes.max() <= grids[i + 1].nodes[-2]
    assert all(g is GRID for g in level_grids(GRID, RULE, tg, extend=False))


def test_unextended_grid_still_solves():
    p = zero_problem(lambda x, bT: x + 0 * bT)
    grid = default_grid(p, RULE)
    tg = TimeGrid(16)
    res = solve_backward(p, grid, RULE, tg, sample_path(tg, 1), extend=False)
    np.testing.assert_allclose(res.level0.y[grid.middle_half()], grid.nodes[grid.middle_half()], atol=1e-6)


@pytest.mark.filterwarnings("ignore::RuntimeWarning")
def test_divergence_is_reported_with_context():
    # y' = y^2 blows up in finite backward time
    p = problem_with(f=lambda t, x, y, z, b, bT: 1e200 * y * y, terminal=lambda x, bT: 1.0 + 0 * x)
    tg = TimeGrid(4)
    with pytest.raises(SolverDivergence) as err:
        solve_batch(p, GRID, RULE, tg, np.zeros((3, 4)), sample_offset=10)
    assert err.value.time_index == 2 and err.value.node == 0 and err.value.sample == 10


def test_shape_and_horizon_checks():
    tg = TimeGrid(4)
    with pytest.raises(ValueError):
        solve_batch(example_1(), GRID, RULE, tg, np.zeros((2, 5)))
    with pytest.raises(ValueError):
        solve_batch(example_1(horizon=2.0), GRID, RULE, tg, np.zeros((2, 4)))


def test_trace_dump():
    tg = TimeGrid(2)
    res = solve_backward(example_3(), GRID, RULE, tg, sample_path(tg, 8), trace=True)
    assert [lv.time_index for lv in res.levels] == [0, 1, 2]
    buf = io.StringIO()
    write_trace(res, buf)
    lines = buf.getvalue().splitlines()
    assert lines[0] == "# time_index node y_tilde y z"
    rows = [line.split() for line in lines[1:]]
    assert len(rows) == sum(lv.grid.count for lv in res.levels)
    assert rows[0][0] == "2" and rows[-1][0] == "0"
    last = np.array([[float(v) for v in r[1:]] for r in rows if r[0] == "0"])
    np.testing.assert_array_equal(last[:, 0], GRID.nodes)
    np.testing.assert_array_equal(last[:, 2], res.level0.y)
    with pytest.raises(ValueError):
        write_trace(solve_backward(example_3(), GRID, RULE, tg, sample_path(tg, 8)), buf)
