import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from altphillips.energy import (
    EnergyParams,
    Weights,
    dirichlet_energy,
    discrete_laplacian,
    energy,
    energy_gradient,
    harmonic_replacement,
    scaling_identity,
    singular_density,
)
from altphillips.grid import BallRegion, CoefficientPair, ScalarField, box_grid, cell_ball_mask


def test_zero_field_has_zero_energy():
    g = box_grid(2, 16)
    co = CoefficientPair.constant(g, 0.5, 1.0)
    assert energy(ScalarField.constant(g, 0.0), co) == 0.0
    assert energy(ScalarField.constant(g, 0.0), co, EnergyParams(epsilon=1e-3)) == 0.0


def test_linear_field_on_unit_square():
    # int_[0,1]^2 1/2 + x1 = 1
    g = box_grid(2, 256, 0.0, 1.0)
    co = CoefficientPair.constant(g, 1.0, 1.0)
    v = ScalarField.from_function(g, lambda x, y: x)
    assert energy(v, co) == pytest.approx(1.0, abs=1e-6)


def test_parabola_energy_converges_to_four_thirds():
    errs = []
    for cells in (256, 512, 1024):
        g = box_grid(1, cells)
        co = CoefficientPair.constant(g, 1.0, 2.0)
        v = ScalarField.from_function(g, lambda x: np.maximum(x, 0.0) ** 2)
        errs.append(abs(energy(v, co) - 4.0 / 3.0))
    assert errs[-1] < 1e-5
    assert errs[0] > errs[1] > errs[2]


def test_region_weights_partition_the_box():
    g = box_grid(2, 32)
    region = BallRegion((0.1, -0.2), 0.5)
    inside = Weights(g, cell_ball_mask(g, region).astype(float))
    outside = Weights(g, (~cell_ball_mask(g, region)).astype(float))
    full = Weights(g)
    assert np.allclose(inside.nodes + outside.nodes, full.nodes)
    for a in range(2):
        assert np.allclose(inside.edges[a] + outside.edges[a], full.edges[a])
    assert full.nodes.sum() == pytest.approx(g.volume)


def test_gradient_of_constant_field():
    g = box_grid(2, 16)
    co = CoefficientPair.constant(g, 1.0, 1.0)
    v = ScalarField.constant(g, 0.7)
    grad = energy_gradient(v, co, EnergyParams(epsilon=1e-3)).values
    interior = ~g.boundary_mask
    assert np.allclose(grad[interior] / g.cell_volume, 1.0)
    assert np.all(grad[g.boundary_mask] == 0.0)


def test_gradient_at_zero_uses_right_derivative():
    g = box_grid(2, 16)
    co = CoefficientPair.constant(g, 0.5, 1.0)
    eps = 1e-4
    grad = energy_gradient(ScalarField.constant(g, 0.0), co, EnergyParams(epsilon=eps)).values
    interior = ~g.boundary_mask
    assert np.allclose(grad[interior] / g.cell_volume, 0.5 * eps**-0.5)


def test_gradient_requires_positive_epsilon():
    g = box_grid(1, 16)
    co = CoefficientPair.constant(g, 0.5, 1.0)
    with pytest.raises(ValueError, match="singular gradient"):
        energy_gradient(ScalarField.constant(g, 1.0), co, EnergyParams(epsilon=0.0))


def test_grid_mismatch_raises():
    co = CoefficientPair.constant(box_grid(1, 16), 0.5, 1.0)
    with pytest.raises(ValueError):
        energy(ScalarField.constant(box_grid(1, 32), 1.0), co)


def test_gradient_matches_central_differences():
    rng = np.random.default_rng(3)
    g = box_grid(2, 24)
    X, Y = g.coords
    gam = ScalarField(g, 0.6 + 0.3 * np.sin(X * Y) ** 2)
    co = CoefficientPair(gam, ScalarField(g, 1.0 + 0.5 * X**2))
    params = EnergyParams(epsilon=1e-3)
    v = 0.5 + 0.4 * np.sin(2 * X + Y)
    xi = np.where(g.boundary_mask, 0.0, rng.normal(size=g.shape))
    t = 1e-6
    fp = energy(ScalarField(g, v + t * xi), co, params)
    fm = energy(ScalarField(g, v - t * xi), co, params)
    dd = np.sum(energy_gradient(ScalarField(g, v), co, params).values * xi)
    assert dd == pytest.approx((fp - fm) / (2 * t), rel=1e-5)


@settings(max_examples=40, deadline=None)
@given(
    s=st.floats(0, 10),
    gamma=st.floats(0.05, 1.0),
    e1=st.floats(1e-8, 1e-1),
    factor=st.floats(1.0, 100.0),
)
def test_regularisation_is_monotone_and_bounded(s, gamma, e1, factor):
    e2 = e1 * factor
    g0 = singular_density(np.array(s), np.array(gamma), 0.0)
    g1 = singular_density(np.array(s), np.array(gamma), e1)
    g2 = singular_density(np.array(s), np.array(gamma), e2)
    assert g1 >= g2 - 1e-15
    assert g0 >= g1 - 1e-15
    assert g0 - g1 <= e1**gamma + 1e-15


def test_energy_epsilon_gap_bounded_by_volume():
    g = box_grid(2, 32)
    co = CoefficientPair(
        ScalarField.from_function(g, lambda x, y: 0.4 + 0.3 * x**2), ScalarField.from_function(g, lambda x, y: 1 + y**2)
    )
    v = ScalarField.from_function(g, lambda x, y: np.maximum(x, 0) ** 2 + 0.1 * np.abs(y))
    eps = 1e-3
    gap = energy(v, co) - energy(v, co, EnergyParams(epsilon=eps))
    assert 0 <= gap <= co.delta.values.max() * g.volume * eps**co.gamma_lo


def test_harmonic_replacement_fixed_point_and_1d_linear():
    g = box_grid(2, 32)
    lin = ScalarField.from_function(g, lambda x, y: 1 + x - 2 * y)
    h = harmonic_replacement(lin, BallRegion((0.0, 0.0), 0.6))
    assert np.allclose(h.values, lin.values, atol=1e-12)

    g1 = box_grid(1, 16, 0.0, 1.0)
    sq = ScalarField.from_function(g1, lambda x: x**2)
    h1 = harmonic_replacement(sq)
    assert np.allclose(h1.values, g1.axis(0), atol=1e-13)


def test_harmonic_replacement_is_discrete_harmonic_and_bounded():
    rng = np.random.default_rng(7)
    g = box_grid(2, 32)
    v = ScalarField(g, rng.uniform(0, 1, size=g.shape))
    h = harmonic_replacement(v)
    lap = discrete_laplacian(h.values, g)
    assert np.max(np.abs(lap[~g.boundary_mask])) < 1e-10 * 32**2
    bvals = v.values[g.boundary_mask]
    assert bvals.min() - 1e-12 <= h.values.min() and h.values.max() <= bvals.max() + 1e-12


def test_harmonic_replacement_empty_region_raises():
    g = box_grid(2, 16)
    with pytest.raises(ValueError, match="empty"):
        harmonic_replacement(ScalarField.constant(g, 1.0), BallRegion((0.0, 0.0), 0.01))


@settings(max_examples=20, deadline=None)
@given(seed=st.integers(0, 2**31 - 1), r=st.floats(0.3, 0.7))
def test_pythagoras_identity(seed, r):
    rng = np.random.default_rng(seed)
    g = box_grid(2, 32)
    region = BallRegion(tuple(rng.uniform(-0.2, 0.2, 2)), r)
    v = ScalarField(g, rng.normal(size=g.shape))
    h = harmonic_replacement(v, region)
    lhs = dirichlet_energy(ScalarField(g, v.values - h.values), region)
    rhs = dirichlet_energy(v, region) - dirichlet_energy(h, region)
    assert lhs == pytest.approx(rhs, rel=1e-8)


def test_scaling_identity_varying_exponent():
    g = box_grid(2, 256)
    X, Y = g.coords
    u = ScalarField(g, 1.0 + 0.3 * np.sin(2 * X - Y) ** 2)
    co = CoefficientPair(ScalarField(g, 0.6 + 0.2 * np.cos(X + Y) ** 2), ScalarField.constant(g, 1.5))
    lhs, rhs = scaling_identity(u, co, (0.1, -0.2), 0.4, 0.6, box_grid(2, 256))
    assert lhs == pytest.approx(rhs, rel=1e-2)
