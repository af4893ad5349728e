import numpy as np
import pytest

from altphillips import acceptance
from altphillips.blowup import (
    SINGULAR,
    BlowupSequence,
    ProfileFit,
    blowup_sequence,
    classify_blowup,
    half_plane_profile,
    reference_grid,
    rescale,
    rho_constant,
    write_blowup_csv,
)
from altphillips.fbanalysis import extract_free_boundary, nearest_boundary_point
from altphillips.grid import CoefficientPair, ScalarField, box_grid
from altphillips.minimize import el_residual


def test_rho_constant_examples():
    assert rho_constant(1.0, 2.0) == pytest.approx((1.0, 2.0))
    rho, beta = rho_constant(2.0 / 3.0, 1.0)
    assert beta == pytest.approx(1.5)
    assert rho == pytest.approx((9.0 / 8.0) ** -0.75)
    assert rho == pytest.approx(0.9154, abs=1e-4)
    for bad in ((0.0, 1.0), (1.2, 1.0), (0.5, 0.0)):
        with pytest.raises(ValueError):
            rho_constant(*bad)


def test_half_plane_profile_examples():
    ref = reference_grid(2)
    X, Y = ref.coords
    assert np.allclose(half_plane_profile(1.0, 2.0, (1.0, 0.0), ref).values, np.maximum(X, 0) ** 2)
    p = half_plane_profile(2.0 / 3.0, 1.0, (0.0, -1.0), ref)
    assert np.allclose(p.values, (9.0 / 8.0) ** -0.75 * np.maximum(-Y, 0) ** 1.5)
    with pytest.raises(ValueError):
        half_plane_profile(0.5, 1.0, (1.0, 1.0), ref)


@pytest.mark.parametrize("gamma0", [0.5, 2.0 / 3.0, 0.9])
def test_half_plane_profile_el_residual(gamma0):
    g = box_grid(1, 2048)
    co = CoefficientPair.constant(g, gamma0, 1.0)
    u = half_plane_profile(gamma0, 1.0, (1.0,), g)
    beta = 2.0 / (2.0 - gamma0)
    assert el_residual(u, co, 10 * g.h**beta) <= 1e-2


def test_rescale_fixed_point():
    g = box_grid(2, 256)
    X, Y = g.coords
    u = ScalarField(g, 0.7 * np.sqrt(X**2 + Y**2) ** 1.5)
    ref = reference_grid(2)
    R = np.sqrt(ref.coords[0] ** 2 + ref.coords[1] ** 2)
    inside = R <= 1.0
    for r in (0.1, 0.3, 0.6):
        v = rescale(u, (0.0, 0.0), r, ref, 1.5).values
        assert np.max(np.abs(v[inside] - 0.7 * R[inside] ** 1.5)) < 2e-2
        assert np.all(v[~inside] == 0.0)


def test_rescale_semigroup():
    g = box_grid(2, 256)
    u = ScalarField.from_function(g, lambda x, y: np.maximum(x + 0.3 * y, 0.0) ** 1.4 + 0.1 * y**2)
    ref = reference_grid(2)
    z0 = (0.05, -0.1)
    once = rescale(u, z0, 0.5, box_grid(2, 256), 1.4)
    twice = rescale(once, (0.0, 0.0), 0.5, ref, 1.4)
    direct = rescale(u, z0, 0.25, ref, 1.4)
    assert np.max(np.abs(twice.values - direct.values)) < 1e-2


def test_rescale_errors():
    g = box_grid(2, 64)
    u = ScalarField.constant(g, 1.0)
    ref = reference_grid(2)
    with pytest.raises(ValueError, match="under-resolved"):
        rescale(u, (0, 0), 4 * g.h, ref, 1.5)
    with pytest.raises(ValueError, match="exits"):
        rescale(u, (0.8, 0), 0.5, ref, 1.5)


@pytest.mark.parametrize("gamma0", [0.5, 2.0 / 3.0, 0.9])
@pytest.mark.parametrize("delta0", [0.5, 1.0, 2.0])
def test_profile_self_consistency(gamma0, delta0):
    g = box_grid(2, 256)
    nu = np.array([np.cos(0.3), np.sin(0.3)])
    u = half_plane_profile(gamma0, delta0, nu, g)
    co = CoefficientPair.constant(g, gamma0, delta0)
    seq = blowup_sequence(u, co, (0.0, 0.0), [0.5, 0.25, 0.125])
    fit = classify_blowup(seq, co)
    assert isinstance(fit, ProfileFit)
    assert np.degrees(np.arccos(np.clip(fit.nu @ nu, -1, 1))) <= 1e-2 * 180 / np.pi
    assert fit.rho == pytest.approx(rho_constant(gamma0, delta0)[0], rel=0.01)


def test_radial_cone_is_singular():
    g = box_grid(2, 256)
    X, Y = g.coords
    rho, beta = rho_constant(2.0 / 3.0, 1.0)
    u = ScalarField(g, rho * np.sqrt(X**2 + Y**2) ** beta)
    co = CoefficientPair.constant(g, 2.0 / 3.0, 1.0)
    seq = blowup_sequence(u, co, (0.0, 0.0), [0.5, 0.25, 0.125])
    assert classify_blowup(seq, co) == SINGULAR


def test_non_cauchy_sequence_raises():
    g = box_grid(2, 256)
    u = half_plane_profile(2.0 / 3.0, 1.0, (1.0, 0.0), g)
    co = CoefficientPair.constant(g, 2.0 / 3.0, 1.0)
    seq = blowup_sequence(u, co, (0.0, 0.0), [0.5, 0.25], beta=1.0)
    with pytest.raises(ValueError, match="not converged"):
        classify_blowup(seq, co)


def test_sequence_invariants():
    ref = reference_grid(2)
    f = ScalarField.constant(ref, 0.0)
    with pytest.raises(ValueError):
        BlowupSequence(np.zeros(2), 1.5, np.array([0.5]), [f])
    with pytest.raises(ValueError, match="decreasing"):
        BlowupSequence(np.zeros(2), 1.5, np.array([0.25, 0.5]), [f, f])
    with pytest.raises(ValueError):
        ProfileFit(np.array([1.0, 1.0]), 1.0, 0.0)
    with pytest.raises(ValueError):
        ProfileFit(np.array([1.0, 0.0]), -1.0, 0.0)


def test_exponent_locality_on_varying_exponent_run():
    # gamma = 0.5 + 0.4 x1^2 with the free boundary near x1 = 0, where gamma = gamma_lo
    _, prob, out = acceptance.solve("A5-coarse")
    u = out.u
    _, fb = extract_free_boundary(u, 1e-12 * max(float(u.values.max()), 1.0))
    z = nearest_boundary_point(fb, (0.0, 0.0))
    radii = [0.5, 0.35, 0.25, 0.177, 0.125]
    beta_lo = 2.0 / (2.0 - prob.coeffs.gamma_lo)

    def sups(beta):
        return blowup_sequence(u, prob.coeffs, z, radii, beta=beta).sups()

    right = sups(beta_lo)
    assert right.min() > 0 and right.max() / right.min() < 1.1
    # sups scale like r^(beta_lo - beta) along the decreasing ladder
    assert np.all(np.diff(sups(beta_lo - 0.1)) < 0)
    assert np.all(np.diff(sups(beta_lo + 0.1)) > 0)


def test_write_blowup_csv(tmp_path):
    g = box_grid(2, 256)
    u = half_plane_profile(2.0 / 3.0, 1.0, (1.0, 0.0), g)
    co = CoefficientPair.constant(g, 2.0 / 3.0, 1.0)
    seq = blowup_sequence(u, co, (0.0, 0.0), [0.5, 0.25, 0.125])
    p = tmp_path / "b.csv"
    write_blowup_csv(seq, p, [0.0, 0.0, 0.0], classify_blowup(seq, co), ["h"])
    lines = p.read_text().splitlines()
    assert lines[:2] == ["# h", "r,sup,distance_prev,defect"]
    assert len(lines) == 6 and lines[-1].startswith("fit,nu=")
