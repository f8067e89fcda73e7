"""Coupling construction, positive part, compact support scanning."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from deltaspec import (
    ConfigError,
    GridFunction,
    constant_coupling,
    indicator_coupling,
    make_grid,
    perturbation_coupling,
    positive_part,
    random_bump_coupling,
    sample_coupling,
)

G64 = make_grid(1, 64, 8.0)


def test_constant_coupling_values():
    for a0 in (2.0, 0.0, -1.0):
        c = constant_coupling(a0, G64)
        assert c.is_constant
        assert np.all(sample_coupling(c).real_samples == a0)
        assert c.support_radius == 0.0


def test_indicator_ball_samples_open_region():
    c = indicator_coupling(3.0, "ball", 1.0, [0.0], 0.0, G64)
    x = G64.axis_nodes()
    expected = np.where(np.abs(x) < 1.0, 3.0, 0.0)
    assert np.array_equal(c.perturbation.real_samples, expected)
    assert not c.is_constant


def test_indicator_box_region_2d():
    g = make_grid(2, 16, 4.0)
    c = indicator_coupling(2.0, "box", 0.9, [0.5, -0.5], 1.0, g)
    delta = g.nodes() - np.array([0.5, -0.5])
    expected = np.where(np.max(np.abs(delta), axis=1) < 0.9, 2.0, 0.0)
    assert np.array_equal(c.perturbation.real_samples, expected)


def test_shifted_ball_equal_multiset():
    # shift by a lattice vector: sampling at cell centers makes the two
    # indicator couplings exactly equimeasurable
    g = make_grid(2, 32, 8.0)
    centered = indicator_coupling(3.0, "ball", 1.0, [0.0, 0.0], 0.0, g)
    shifted = indicator_coupling(3.0, "ball", 1.0, [2.0, 0.0], 0.0, g)
    assert np.array_equal(
        np.sort(centered.perturbation.real_samples),
        np.sort(shifted.perturbation.real_samples),
    )


def test_indicator_beta_zero_is_constant():
    c = indicator_coupling(0.0, "ball", 1.0, [0.0], 1.5, G64)
    ref = constant_coupling(1.5, G64)
    assert c.is_constant
    assert np.array_equal(
        sample_coupling(c).samples, sample_coupling(ref).samples
    )


def test_indicator_rejections():
    with pytest.raises(ConfigError):
        indicator_coupling(1.0, "ball", 8.0, [0.5], 0.0, G64)  # exits the box
    with pytest.raises(ConfigError):
        indicator_coupling(1.0, "ball", 0.0, [0.0], 0.0, G64)
    with pytest.raises(ConfigError):
        indicator_coupling(1.0, "ball", 1.0, [0.0, 0.0], 0.0, G64)
    with pytest.raises(ConfigError):
        indicator_coupling(1.0, "hexagon", 1.0, [0.0], 0.0, G64)


def test_positive_part_clips_and_keeps_background():
    x = G64.axis_nodes()
    mixed = np.where(np.abs(x) < 2.0, np.sin(x), 0.0)
    c = perturbation_coupling(GridFunction(G64, mixed), -0.5, 2.0)
    p = positive_part(c)
    assert p.background == -0.5
    assert np.array_equal(p.perturbation.real_samples, np.maximum(mixed, 0.0))
    # idempotence, bitwise
    pp = positive_part(p)
    assert np.array_equal(pp.perturbation.samples, p.perturbation.samples)


def test_positive_part_dominates_integral():
    x = G64.axis_nodes()
    mixed = np.where(np.abs(x) < 2.0, np.cos(3 * x), 0.0)
    c = perturbation_coupling(GridFunction(G64, mixed), 0.0, 2.0)
    h = G64.spacing
    assert np.sum(positive_part(c).perturbation.real_samples) * h >= (
        np.sum(mixed) * h
    )


def test_positive_part_of_nonpositive_is_constant():
    x = G64.axis_nodes()
    neg = np.where(np.abs(x) < 1.0, -2.0, 0.0)
    c = perturbation_coupling(GridFunction(G64, neg), 1.0, 1.5)
    assert positive_part(c).is_constant


def test_sample_coupling_round_trip():
    c = indicator_coupling(1.0, "ball", 1.0, [0.0], 1.0, G64)
    total = sample_coupling(c).real_samples
    assert set(np.unique(total)) == {1.0, 2.0}
    assert np.array_equal(total - 1.0, c.perturbation.real_samples)


def test_sample_of_positive_part_floors_at_background():
    rng = np.random.default_rng(5)
    x = G64.axis_nodes()
    vals = np.where(np.abs(x) < 3.0, rng.standard_normal(64), 0.0)
    c = perturbation_coupling(GridFunction(G64, vals), 0.75, 3.0)
    assert np.all(sample_coupling(positive_part(c)).real_samples >= 0.75)


def test_compact_support_scan_rejects_leakage():
    vals = np.zeros(64)
    vals[0] = 1.0  # x = -8, far outside radius 2
    with pytest.raises(ConfigError):
        perturbation_coupling(GridFunction(G64, vals), 0.0, 2.0)


def test_support_radius_must_fit_in_box():
    with pytest.raises(ConfigError):
        perturbation_coupling(GridFunction(G64, np.zeros(64)), 0.0, 8.0)


def test_perturbation_must_be_real():
    with pytest.raises(ConfigError):
        perturbation_coupling(GridFunction(G64, 1j * np.ones(64)), 0.0, 0.0)


def test_random_bump_coupling_deterministic():
    a = random_bump_coupling(G64, np.random.default_rng(9), 1.0)
    b = random_bump_coupling(G64, np.random.default_rng(9), 1.0)
    assert np.array_equal(a.perturbation.samples, b.perturbation.samples)
    assert a.background == 1.0
    assert a.support_radius == 6.0


def test_random_bump_family_attracts_and_mixes_signs():
    saw_negative = False
    for seed in range(20):
        c = random_bump_coupling(G64, np.random.default_rng(seed), 0.0)
        vals = c.perturbation.real_samples
        assert np.max(vals) > 0.0  # leading bump is attractive
        saw_negative = saw_negative or np.min(vals) < 0.0
    assert saw_negative


@settings(max_examples=50, deadline=None)
@given(st.integers(min_value=0, max_value=2**31 - 1))
def test_positive_part_idempotent_property(seed):
    rng = np.random.default_rng(seed)
    x = G64.axis_nodes()
    vals = np.where(np.abs(x) < 4.0, rng.uniform(-3, 3, 64), 0.0)
    c = perturbation_coupling(GridFunction(G64, vals), 0.0, 4.0)
    p = positive_part(c)
    assert np.array_equal(
        positive_part(p).perturbation.samples, p.perturbation.samples
    )
    assert np.all(p.perturbation.real_samples >= 0.0)
