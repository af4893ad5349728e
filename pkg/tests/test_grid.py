import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from altphillips.grid import (
    BallRegion,
    CoefficientPair,
    GridSpec,
    ScalarField,
    ball_mask,
    box_grid,
    cell_ball_mask,
    exponent_extrema,
    finite_difference_gradient,
    interpolate,
    pullback,
    read_field,
    sphere_points,
    sup_on_ball,
    sup_on_sphere,
    write_field,
)


def test_box_grid_geometry():
    g = box_grid(2, 256)
    assert g.shape == (257, 257)
    assert g.h == pytest.approx(2 / 256)
    assert g.upper == pytest.approx((1.0, 1.0))
    assert g.boundary_mask.sum() == 4 * 256
    assert g.volume == pytest.approx(4.0)


def test_grid_rejects_too_few_cells():
    with pytest.raises(ValueError):
        box_grid(2, 4)
    with pytest.raises(ValueError):
        GridSpec(3, (8, 8, 8), (0, 0, 0), (1, 1, 1))


def test_scalar_field_is_read_only_and_finite():
    g = box_grid(1, 16)
    f = ScalarField.constant(g, 1.0)
    with pytest.raises(ValueError):
        f.values[0] = 2.0
    bad = np.ones(g.shape)
    bad[3] = np.nan
    with pytest.raises(ValueError):
        ScalarField(g, bad)
    with pytest.raises(ValueError):
        ScalarField(g, np.ones(5))


def test_coefficient_pair_checks_H1():
    g = box_grid(1, 16)
    with pytest.raises(ValueError):
        CoefficientPair.constant(g, 0.0, 1.0)
    with pytest.raises(ValueError):
        CoefficientPair.constant(g, 1.2, 1.0)
    with pytest.raises(ValueError):
        CoefficientPair.constant(g, 0.5, 0.0)
    co = CoefficientPair.constant(g, 0.5, 2.0)
    assert (co.gamma_lo, co.gamma_hi, co.delta_lo) == (0.5, 0.5, 2.0)
    assert np.all(co.dgamma == 0.0)


def test_interpolation_reproduces_constants_bitwise():
    g = box_grid(2, 32)
    f = ScalarField.constant(g, 0.1)
    pts = np.random.default_rng(1).uniform(-1, 1, size=(200, 2))
    assert np.all(interpolate(f, pts) == 0.1)


def test_interpolation_exact_on_bilinear():
    g = box_grid(2, 32)
    fld = ScalarField.from_function(g, lambda x, y: 1 + 2 * x - 3 * y + 0.5 * x * y)
    pts = np.random.default_rng(2).uniform(-1, 1, size=(100, 2))
    want = 1 + 2 * pts[:, 0] - 3 * pts[:, 1] + 0.5 * pts[:, 0] * pts[:, 1]
    assert np.allclose(interpolate(fld, pts), want, atol=1e-13)


def test_interpolation_outside_raises():
    g = box_grid(1, 16)
    with pytest.raises(ValueError, match="outside"):
        interpolate(ScalarField.constant(g, 1.0), [[1.5]])


def test_ball_masks():
    g = box_grid(2, 64)
    m = ball_mask(g, BallRegion((0.0, 0.0), 0.5))
    assert m.sum() * g.cell_volume == pytest.approx(math.pi * 0.25, rel=0.03)
    c = cell_ball_mask(g, BallRegion((0.0, 0.0), 0.5))
    assert c.shape == (64, 64)
    assert c.sum() * g.cell_volume == pytest.approx(math.pi * 0.25, rel=0.03)


def test_sphere_sup_of_radial_field():
    g = box_grid(2, 128)
    f = ScalarField.from_function(g, lambda x, y: np.sqrt(x**2 + y**2) ** 1.5)
    assert sup_on_sphere(f, (0, 0), 0.5) == pytest.approx(0.5**1.5, rel=2e-3)
    assert sup_on_ball(f, (0, 0), 0.5) <= 0.5**1.5 + 1e-12
    with pytest.raises(ValueError, match="exits"):
        sup_on_sphere(f, (0.8, 0), 0.5)
    with pytest.raises(ValueError):
        sup_on_sphere(f, (0, 0), 0.5, samples=8)


def test_sphere_points_1d_are_endpoints():
    pts = sphere_points([0.2], 0.1, 512, 1)
    assert np.allclose(pts.ravel(), [0.1, 0.3])


def test_exponent_extrema():
    g = box_grid(2, 32)
    gam = ScalarField.from_function(g, lambda x, y: 0.5 + 0.2 * x)
    co = CoefficientPair(gam, ScalarField.constant(g, 1.0))
    lo, hi = exponent_extrema(co, BallRegion((0.0, 0.0), 0.25))
    assert lo == pytest.approx(0.45)
    assert hi == pytest.approx(0.55)
    with pytest.raises(ValueError, match="outside"):
        exponent_extrema(co, BallRegion((5.0, 5.0), 0.1))


def test_finite_difference_gradient_of_linear_field():
    g = box_grid(2, 16)
    f = ScalarField.from_function(g, lambda x, y: 3 * x - 2 * y)
    d = finite_difference_gradient(f)
    assert d.shape == (2, 17, 17)
    assert np.allclose(d[0], 3.0) and np.allclose(d[1], -2.0)


def test_pullback_identity_and_scaling():
    g = box_grid(2, 32)
    f = ScalarField.from_function(g, lambda x, y: x + 2 * y)
    assert np.allclose(pullback(f, (0, 0), 1.0, g), f.values)
    half = pullback(f, (0.1, 0.0), 0.5, g)
    X, Y = g.coords
    assert np.allclose(half, 0.1 + 0.5 * X + Y)


@settings(max_examples=25, deadline=None)
@given(
    dim=st.sampled_from([1, 2]),
    cells=st.integers(8, 20),
    lo=st.floats(-2, 0),
    width=st.floats(0.5, 3),
    seed=st.integers(0, 2**31 - 1),
)
def test_field_file_round_trip(tmp_path_factory, dim, cells, lo, width, seed):
    g = box_grid(dim, cells, lo, lo + width)
    vals = np.random.default_rng(seed).normal(size=g.shape) * 10.0 ** np.random.default_rng(seed).integers(-8, 8)
    f = ScalarField(g, vals)
    path = tmp_path_factory.mktemp("fields") / "f.apf"
    write_field(f, path)
    back = read_field(path)
    assert back.grid == g
    assert np.array_equal(back.values, f.values)


def test_read_field_rejects_garbage(tmp_path):
    p = tmp_path / "bad.apf"
    p.write_text("NOT-A-FIELD 1 2\n1 2 3\n")
    with pytest.raises(ValueError):
        read_field(p)
    p.write_text("AP-FIELD 1 1 8 0.25 -1.0\n" + "0\n" * 5)
    with pytest.raises(ValueError):
        read_field(p)
