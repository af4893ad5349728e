import numpy as np
import pytest

from altphillips.blowup import half_plane_profile
from altphillips.grid import CoefficientPair, ScalarField, box_grid
from altphillips.weiss import (
    QuadParams,
    WeissPoint,
    check_monotone,
    homogeneity_defect,
    homogeneous_extension,
    integrand_slope,
    weiss_point,
    weiss_series,
    write_weiss_csv,
)

GAMMA = 2.0 / 3.0
# (1 - gamma/2) delta int_{B_1} u^gamma with u^gamma = rho^gamma x1^+ and int_{B_1} x1^+ = 2/3
W_PROFILE = (1 - GAMMA / 2) * (9.0 / 8.0) ** -0.5 * (2.0 / 3.0)


@pytest.fixture(scope="module")
def profile():
    g = box_grid(2, 256)
    u = half_plane_profile(GAMMA, 1.0, (1.0, 0.0), g)
    return u, CoefficientPair.constant(g, GAMMA, 1.0)


def test_profile_weiss_value_is_frozen():
    assert W_PROFILE == pytest.approx(0.419026, abs=1e-6)


def test_extension_of_constant_is_radial_power():
    g = box_grid(2, 64)
    u = ScalarField.constant(g, 1.0)
    beta = 1.5
    ext = homogeneous_extension(u, (0.0, 0.0), 0.5, beta)
    X, Y = g.coords
    R = np.sqrt(X**2 + Y**2)
    inside = R <= 0.5
    assert np.allclose(ext.values[inside], (R[inside] / 0.5) ** beta)
    assert np.all(ext.values[~inside] == 1.0)


def test_extension_fixes_homogeneous_fields():
    g = box_grid(2, 128)
    u = half_plane_profile(GAMMA, 1.0, (1.0, 0.0), g)
    ext = homogeneous_extension(u, (0.0, 0.0), 0.5, 1.5)
    assert np.max(np.abs(ext.values - u.values)) < 5e-3


def test_extension_checks():
    g = box_grid(2, 64)
    u = ScalarField.constant(g, 1.0)
    with pytest.raises(ValueError, match="under-resolved"):
        homogeneous_extension(u, (0, 0), 2 * g.h, 1.5)
    with pytest.raises(ValueError, match="exits"):
        homogeneous_extension(u, (0.8, 0), 0.5, 1.5)


def test_assemble_sums_terms():
    p = WeissPoint.assemble(0.1, 3.0, 1.0, 0.25, 0.125, 0.5)
    assert p.W == pytest.approx(3.0 - 1.0 - 0.25 - 0.125 - 0.5)


def test_constant_coefficients_have_no_error_terms(profile):
    u, co = profile
    s = weiss_series(u, co, (0.0, 0.0), [0.1, 0.2, 0.4])
    for p in s.points:
        assert p.err_gamma_jump == 0.0 and p.err_gamma_grad == 0.0 and p.err_delta_grad == 0.0
        assert p.W == pytest.approx(W_PROFILE, rel=0.02)
    drift = (s.W.max() - s.W.min()) / abs(s.W).max()
    assert drift <= 0.02


def test_scaled_profile_weiss_follows_closed_form(profile):
    # for the homogeneous solution W(c u) = delta int u^gamma (c^gamma - gamma c^2 / 2),
    # so c = 1.1 lowers W: the subtracted sphere term grows faster than the bulk
    u, co = profile
    c = 1.1
    big = ScalarField(u.grid, c * u.values)
    radii = [0.1, 0.2, 0.4]
    a = weiss_series(u, co, (0.0, 0.0), radii).W
    b = weiss_series(big, co, (0.0, 0.0), radii).W
    factor = (c**GAMMA - GAMMA * c**2 / 2) / (1 - GAMMA / 2)
    assert np.all(b < a)
    assert np.allclose(b, factor * W_PROFILE, rtol=0.02)


def test_radii_must_increase(profile):
    u, co = profile
    with pytest.raises(ValueError, match="increasing"):
        weiss_series(u, co, (0.0, 0.0), [0.2, 0.1])
    with pytest.raises(ValueError):
        weiss_point(u, co, (0.0, 0.0), 2 * u.grid.h)
    with pytest.raises(ValueError, match="exits"):
        weiss_point(u, co, (0.8, 0.0), 0.5)


def _series(W):
    pts = [WeissPoint.assemble(0.1 * (i + 1), w, 0.0, 0.0, 0.0, 0.0) for i, w in enumerate(W)]
    return type("S", (), {"W": np.array(W), "points": pts})()


def test_check_monotone_examples():
    r = check_monotone(_series([0.1, 0.2, 0.3]), 0.0)
    assert r.passed and r.worst_index is None and r.worst_violation == 0.0
    r = check_monotone(_series([0.1, 0.09, 0.3]), 0.02)
    assert r.passed
    r = check_monotone(_series([0.1, 0.05, 0.3]), 0.02)
    assert not r.passed and r.worst_index == 0
    assert r.worst_violation == pytest.approx(0.05)
    with pytest.raises(ValueError):
        check_monotone(_series([0.1, 0.2]), 0.0)


def test_homogeneity_defect(profile):
    u, _ = profile
    g = u.grid
    X, Y = g.coords
    radial = ScalarField(g, np.sqrt(X**2 + Y**2) ** 1.5)
    assert homogeneity_defect(radial, (0, 0), 1.5, [0.25, 0.5]) <= 1e-4
    assert homogeneity_defect(u, (0, 0), 1.5, [0.25, 0.5]) <= 1e-3
    shifted = ScalarField(g, np.maximum(X + 0.05, 0.0) ** 1.5)
    assert homogeneity_defect(shifted, (0, 0), 1.5, [0.25, 0.5]) > 1e-3


def test_gamma_jump_integrand_is_integrable():
    # gamma = 0.5 + 0.3 |x1|^0.5 with the exact profile trace as a rough stand-in minimiser
    g = box_grid(2, 256)
    X, _ = g.coords
    co = CoefficientPair(ScalarField(g, 0.5 + 0.3 * np.abs(X) ** 0.5), ScalarField.constant(g, 1.0))
    object.__setattr__(co, "holder_mu", 0.5)
    u = half_plane_profile(0.5, 1.0, (1.0, 0.0), g)
    radii = np.geomspace(8 * g.h, 0.4, 6)
    s = weiss_series(u, co, (0.0, 0.0), radii)
    assert all(np.isfinite(s.W))
    # the gamma-jump integrand is bounded by t^(mu-1); integrable at 0
    assert integrand_slope(s, 0) >= 0.5 - 1 - 0.2


def test_quadrature_parameters_converge(profile):
    u, co = profile
    lo = weiss_point(u, co, (0.0, 0.0), 0.3, QuadParams(angular=128, radial=16)).W
    hi = weiss_point(u, co, (0.0, 0.0), 0.3).W
    assert lo == pytest.approx(hi, rel=5e-3)


def test_write_weiss_csv(tmp_path, profile):
    u, co = profile
    s = weiss_series(u, co, (0.0, 0.0), [0.1, 0.2, 0.4])
    p = tmp_path / "w.csv"
    write_weiss_csv(s, p, ["hdr"])
    lines = p.read_text().splitlines()
    assert lines[0] == "# hdr"
    assert lines[1].split(",")[-1] == "W"
    assert len(lines) >= 5
