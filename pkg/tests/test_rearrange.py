"""Sort-and-place rearrangement: exact conservation laws and inequalities."""

import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from deltaspec import (
    ConfigError,
    GridFunction,
    RankedCells,
    constant_coupling,
    hardy_littlewood_pairing,
    indicator_coupling,
    lp_norm,
    make_grid,
    oracle,
    ranked_cells,
    ranked_cells_from_points,
    steiner_symmetrize,
    symmetric_decreasing_rearrangement,
)

G16 = make_grid(1, 16, 8.0)
RANK16 = ranked_cells(G16)


def nonneg(grid, seed):
    rng = np.random.default_rng(seed)
    return GridFunction(grid, rng.uniform(0.0, 5.0, grid.cell_count))


def test_ranking_orders_by_distance_then_index():
    g = make_grid(1, 4, 2.0)  # nodes -2, -1, 0, 1
    r = ranked_cells(g)
    assert r.order.tolist() == [2, 1, 3, 0]
    assert np.all(np.diff(r.distances[r.order]) >= 0)


def test_rearrangement_places_sorted_values():
    g = make_grid(1, 4, 2.0)
    u = GridFunction(g, np.array([3.0, 1.0, 2.0, 0.0]))
    star = symmetric_decreasing_rearrangement(u, ranked_cells(g))
    # descending values 3,2,1,0 along the ranking |0| < |-1| < |1| < |-2|
    assert star.real_samples[ranked_cells(g).order].tolist() == [3.0, 2.0, 1.0, 0.0]
    assert star.real_samples.tolist() == [0.0, 2.0, 3.0, 1.0]


def test_centered_ball_indicator_is_fixed_point():
    c = indicator_coupling(1.0, "ball", 2.5, [0.0], 0.0, G16)
    chi = c.perturbation
    star = symmetric_decreasing_rearrangement(chi, RANK16)
    assert np.array_equal(star.samples, chi.samples)


def test_sorted_multiset_preserved():
    u = nonneg(G16, 0)
    star = symmetric_decreasing_rearrangement(u, RANK16)
    assert np.array_equal(np.sort(star.real_samples), np.sort(u.real_samples))


def test_lp_conservation_bitwise():
    for seed in range(10):
        u = nonneg(G16, seed)
        star = symmetric_decreasing_rearrangement(u, RANK16)
        for p in (1, 2, 4):
            assert lp_norm(star, p) == lp_norm(u, p)


def test_idempotence_bitwise():
    u = nonneg(G16, 4)
    s1 = symmetric_decreasing_rearrangement(u, RANK16)
    s2 = symmetric_decreasing_rearrangement(s1, RANK16)
    assert np.array_equal(s1.samples, s2.samples)


def test_square_commutes_with_rearrangement():
    u = nonneg(G16, 8)
    s = symmetric_decreasing_rearrangement
    lhs = s(u, RANK16).real_samples ** 2
    rhs = s(GridFunction(G16, u.real_samples**2), RANK16).real_samples
    assert np.array_equal(lhs, rhs)


def test_monotonicity_of_the_map():
    rng = np.random.default_rng(12)
    a = rng.uniform(0, 2, 16)
    b = a + rng.uniform(0, 1, 16)
    s = symmetric_decreasing_rearrangement
    sa = s(GridFunction(G16, a), RANK16).real_samples
    sb = s(GridFunction(G16, b), RANK16).real_samples
    assert np.all(sa <= sb)


def test_negative_sample_rejected_with_index():
    vals = np.ones(16)
    vals[3] = -0.5
    with pytest.raises(ConfigError, match="sample 3"):
        symmetric_decreasing_rearrangement(GridFunction(G16, vals), RANK16)


def test_hl_pairing_matches_brute_force():
    # sorted-against-sorted maximizes the pairing over all permutations
    g = make_grid(1, 8, 4.0)
    rng = np.random.default_rng(3)
    u = rng.uniform(0, 5, 8)
    v = rng.uniform(0, 5, 8)
    plain, paired = hardy_littlewood_pairing(
        GridFunction(g, u), GridFunction(g, v), ranked_cells(g)
    )
    w = g.spacing
    best = max(
        math.fsum(u[list(p)] * v) for p in itertools.permutations(range(8))
    )
    assert paired == best * w
    assert plain <= paired


def test_hl_equality_when_factors_agree():
    u = nonneg(G16, 6)
    plain, paired = hardy_littlewood_pairing(u, u, RANK16)
    assert plain == pytest.approx(lp_norm(u, 2) ** 2, rel=1e-14)
    assert paired >= plain


def test_hl_disjoint_indicators():
    a = np.zeros(16)
    b = np.zeros(16)
    a[2:5] = 1.0
    b[9:12] = 1.0
    plain, paired = hardy_littlewood_pairing(
        GridFunction(G16, a), GridFunction(G16, b), RANK16
    )
    assert plain == 0.0
    assert paired >= 0.0


def test_hl_grid_mismatch():
    other = make_grid(1, 32, 8.0)
    with pytest.raises(ConfigError):
        hardy_littlewood_pairing(nonneg(G16, 0), nonneg(other, 0), RANK16)


@settings(max_examples=60, deadline=None)
@given(
    st.lists(
        st.floats(min_value=0.0, max_value=1e6, allow_nan=False, width=64),
        min_size=16,
        max_size=16,
    )
)
def test_equimeasurability_property(values):
    u = GridFunction(G16, np.asarray(values))
    star = symmetric_decreasing_rearrangement(u, RANK16)
    assert np.array_equal(np.sort(star.real_samples), np.sort(u.real_samples))
    assert np.array_equal(
        symmetric_decreasing_rearrangement(star, RANK16).samples, star.samples
    )


@settings(max_examples=60, deadline=None)
@given(st.integers(min_value=0, max_value=2**31 - 1))
def test_hl_property(seed):
    rng = np.random.default_rng(seed)
    u = GridFunction(G16, rng.uniform(0, 10, 16))
    v = GridFunction(G16, rng.uniform(0, 10, 16))
    plain, paired = hardy_littlewood_pairing(u, v, RANK16)
    assert plain <= paired


def test_ranked_cells_validation():
    with pytest.raises(ConfigError):
        RankedCells(order=np.array([0, 0, 1]), distances=np.zeros(3))
    with pytest.raises(ConfigError):
        RankedCells(order=np.array([0, 1]), distances=np.array([1.0, 0.5]))


def test_steiner_fixed_point():
    points = np.linspace(-3.0, 3.0, 7)[:, None]
    rank = ranked_cells_from_points(points)
    cols = np.array([6.0, 5.0, 4.0, 3.0, 2.0, 1.0, 0.5])
    u = np.empty((7, 3))
    for j in range(3):
        u[rank.order, j] = np.sort((j + 1) * cols)[::-1]
    assert np.array_equal(steiner_symmetrize(u, rank), u)


def test_steiner_l2_exact_per_slice():
    points = np.linspace(-4.0, 4.0, 9)[:, None]
    rank = ranked_cells_from_points(points)
    rng = np.random.default_rng(14)
    u = rng.uniform(0, 3, (9, 5))
    star = steiner_symmetrize(u, rank)
    for j in range(5):
        assert math.fsum(map(float, star[:, j] ** 2)) == math.fsum(
            map(float, u[:, j] ** 2)
        )
        assert np.array_equal(np.sort(star[:, j]), np.sort(u[:, j]))


def test_steiner_decreases_box_dirichlet_energy():
    """Slice rearrangement never increases the finite-difference energy."""
    box = oracle.BoxGrid(
        dim=2,
        n_transverse=16,
        n_normal=8,
        half_extent_transverse=4.0,
        half_extent_normal=2.0,
    )
    lap = oracle.assemble(
        constant_coupling(0.0, make_grid(1, 8, 8.0)),
        oracle.SurfaceSpec(kind="hyperplane"),
        box,
    ).laplacian
    rank = ranked_cells_from_points(box.transverse_nodes())
    for seed in range(25):
        rng = np.random.default_rng(seed)
        u = rng.uniform(0.0, 1.0, box.interior_shape)
        star = steiner_symmetrize(u.reshape(15, 7), rank).ravel()
        flat = u.ravel()
        before = float(flat @ (lap @ flat))
        after = float(star @ (lap @ star))
        assert after <= before * (1 + 1e-12) + 1e-12


def test_steiner_shape_and_sign_checks():
    points = np.linspace(-1.0, 1.0, 5)[:, None]
    rank = ranked_cells_from_points(points)
    with pytest.raises(ConfigError):
        steiner_symmetrize(np.zeros((4, 2)), rank)
    with pytest.raises(ConfigError):
        steiner_symmetrize(-np.ones((5, 2)), rank)


def test_lp_norm_validation():
    with pytest.raises(ConfigError):
        lp_norm(nonneg(G16, 0), 0.0)
