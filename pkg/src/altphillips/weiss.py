"""Weiss-type monotonicity quantity with exponent-dependent error integrals.

For a centre ``z0`` with ``gamma0 = gamma(z0)`` and ``beta0 = 2/(2-gamma0)``
the quantity evaluated at radius ``r`` is ::

    W(r) = r^-(n+2(beta0-1)) J(u, B_r) - beta0/2 r^-(n-1+2beta0) int_{dB_r} u^2
           - int_0^r t^-(n+beta0 gamma0+1) [ beta0 int_{B_t} (gamma-gamma0) delta w^gamma
                                            + int_{B_t} (Dgamma.(x-z0)) delta w^gamma ln w
                                            + int_{B_t} (Ddelta.(x-z0)) w^gamma ] dt

with ``w(., t)`` the ``beta0``-homogeneous extension of ``u|dB_t``.  Ball
integrals use polar quadrature (Gauss-Legendre in the radius, trapezoid in
the angle) on interpolated data, which keeps ``W`` a smooth function of ``r``.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .grid import (
    DEFAULT_SPHERE_SAMPLES,
    CoefficientPair,
    GridSpec,
    ScalarField,
    ball_mask,
    BallRegion,
    finite_difference_gradient,
    interpolate,
)

__all__ = [
    "QuadParams",
    "WeissPoint",
    "WeissSeries",
    "MonotoneReport",
    "homogeneous_extension",
    "weiss_point",
    "weiss_series",
    "check_monotone",
    "homogeneity_defect",
    "integrand_slope",
    "write_weiss_csv",
]


@dataclass(frozen=True)
class QuadParams:
    angular: int = DEFAULT_SPHERE_SAMPLES
    radial: int = 64
    t_ratio: float = 2.0**0.25
    t_min_cells: float = 4.0
    tail_points: int = 4


@dataclass(frozen=True)
class WeissPoint:
    r: float
    bulk: float
    sphere: float
    err_gamma_jump: float
    err_gamma_grad: float
    err_delta_grad: float
    W: float

    @classmethod
    def assemble(cls, r, bulk, sphere, e1, e2, e3) -> "WeissPoint":
        return cls(float(r), float(bulk), float(sphere), float(e1), float(e2), float(e3), float(bulk - sphere - e1 - e2 - e3))


@dataclass
class WeissSeries:
    center: np.ndarray
    beta0: float
    gamma0: float
    points: list[WeissPoint]
    # t-grid and the three scaled inner integrands t^-(n+beta0 gamma0+1) I_k(t)
    t: np.ndarray = field(default=None, repr=False)
    integrands: np.ndarray = field(default=None, repr=False)
    # per error term: True when the tail used the clamped power instead of the fit
    tail_fallback: tuple[bool, ...] = ()

    @property
    def radii(self) -> np.ndarray:
        return np.array([p.r for p in self.points])

    @property
    def W(self) -> np.ndarray:
        return np.array([p.W for p in self.points])


def _directions(dim: int, m: int) -> tuple[np.ndarray, np.ndarray]:
    """Unit directions and their sphere weights (on the unit sphere)."""
    if dim == 1:
        return np.array([[-1.0], [1.0]]), np.array([1.0, 1.0])
    th = 2.0 * np.pi * np.arange(m) / m
    return np.stack([np.cos(th), np.sin(th)], axis=1), np.full(m, 2.0 * np.pi / m)


class _Polar:
    """Polar quadrature of ``B_r(z0)``: nodes ``z0 + r*xi_k*theta_j``."""

    def __init__(self, dim: int, quad: QuadParams):
        self.dim = dim
        self.dirs, self.wdir = _directions(dim, quad.angular)
        xi, wxi = np.polynomial.legendre.leggauss(quad.radial)
        self.xi = 0.5 * (xi + 1.0)
        self.wxi = 0.5 * wxi

    def nodes(self, z0: np.ndarray, r: float) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Points (k, j, dim), weights (k, j), radii (k, 1)."""
        rho = r * self.xi[:, None]
        pts = z0 + rho[..., None] * self.dirs[None, :, :]
        w = (self.wxi * r)[:, None] * self.wdir[None, :] * rho ** (self.dim - 1)
        return pts, w, rho


def _interp(values: np.ndarray, pts: np.ndarray, grid: GridSpec) -> np.ndarray:
    shape = pts.shape[:-1]
    return interpolate(values, pts.reshape(-1, grid.dim), grid).reshape(shape)


def _interp_vec(values: np.ndarray, pts: np.ndarray, grid: GridSpec) -> np.ndarray:
    shape = pts.shape[:-1]
    flat = pts.reshape(-1, grid.dim)
    return np.stack([interpolate(values[a], flat, grid).reshape(shape) for a in range(grid.dim)], axis=-1)


def _center_exponents(coeffs: CoefficientPair, z0: np.ndarray) -> tuple[float, float]:
    gamma0 = float(interpolate(coeffs.gamma, z0[None, :])[0])
    return gamma0, 2.0 / (2.0 - gamma0)


def _xlogx_pow(w: np.ndarray, g: np.ndarray) -> np.ndarray:
    """``w**g * ln w`` with the limit 0 for ``w <= 0``."""
    out = np.zeros_like(w)
    pos = w > 0
    out[pos] = w[pos] ** g[pos] * np.log(w[pos])
    return out


def homogeneous_extension(u: ScalarField, z0, t: float, beta0: float) -> ScalarField:
    """``(|x-z0|/t)**beta0 * u(z0 + t (x-z0)/|x-z0|)`` on the nodes of ``B_t(z0)``.

    Nodes outside the ball keep the values of ``u``; the centre gets 0.
    """
    grid = u.grid
    if t < 4.0 * grid.h:
        raise ValueError("under-resolved: t below 4h")
    z0 = np.asarray(z0, dtype=float).reshape(grid.dim)
    if not grid.ball_inside(z0, t):
        raise ValueError("sphere exits domain")
    inside = ball_mask(grid, BallRegion(tuple(z0), t))
    x = np.stack([c[inside] for c in grid.coords], axis=1)
    rel = x - z0
    dist = np.sqrt(np.sum(rel**2, axis=1))
    out = np.array(u.values)
    vals = np.zeros(len(x))
    nz = dist > 0
    proj = z0 + t * rel[nz] / dist[nz, None]
    vals[nz] = (dist[nz] / t) ** beta0 * interpolate(u, proj)
    out[inside] = vals
    return ScalarField(grid, out)


class _WeissEvaluator:
    def __init__(self, u: ScalarField, coeffs: CoefficientPair, z0, quad: QuadParams):
        if u.grid != coeffs.grid:
            raise ValueError("field and coefficients live on different grids")
        self.grid = grid = u.grid
        self.u = u
        self.coeffs = coeffs
        self.quad = quad
        self.z0 = np.asarray(z0, dtype=float).reshape(grid.dim)
        self.gamma0, self.beta0 = _center_exponents(coeffs, self.z0)
        self.polar = _Polar(grid.dim, quad)
        self.du = finite_difference_gradient(u)
        self.n = grid.dim

    def _check(self, r: float):
        if not self.grid.ball_inside(self.z0, r):
            raise ValueError("ball exits domain")

    def bulk_and_sphere(self, r: float) -> tuple[float, float]:
        self._check(r)
        g, n, b0 = self.grid, self.n, self.beta0
        pts, w, _ = self.polar.nodes(self.z0, r)
        uval = _interp(self.u.values, pts, g)
        du = _interp_vec(self.du, pts, g)
        gam = _interp(self.coeffs.gamma.values, pts, g)
        dlt = _interp(self.coeffs.delta.values, pts, g)
        dens = 0.5 * np.sum(du**2, axis=-1) + dlt * np.maximum(uval, 0.0) ** gam
        J = float(np.sum(w * dens))
        sph = self.z0 + r * self.polar.dirs
        us = interpolate(self.u, sph)
        S = float(np.sum(self.polar.wdir * us**2)) * r ** (n - 1)
        bulk = r ** (-(n + 2.0 * (b0 - 1.0))) * J
        sphere = 0.5 * b0 * r ** (-((n - 1) + 2.0 * b0)) * S
        return bulk, sphere

    def integrands(self, t: float) -> np.ndarray:
        """Scaled inner integrals ``t^-(n+beta0 gamma0+1) I_k(t)`` for the three error terms."""
        self._check(t)
        g, n, b0, g0 = self.grid, self.n, self.beta0, self.gamma0
        pts, w, rho = self.polar.nodes(self.z0, t)
        us = interpolate(self.u, self.z0 + t * self.polar.dirs)
        wt = (rho / t) ** b0 * np.maximum(us, 0.0)[None, :]
        gam = _interp(self.coeffs.gamma.values, pts, g)
        dlt = _interp(self.coeffs.delta.values, pts, g)
        dgam = _interp_vec(self.coeffs.dgamma, pts, g)
        ddel = _interp_vec(self.coeffs.ddelta, pts, g)
        rel = pts - self.z0
        wg = wt**gam
        i1 = b0 * np.sum(w * (gam - g0) * dlt * wg)
        i2 = np.sum(w * np.sum(dgam * rel, axis=-1) * dlt * _xlogx_pow(wt, gam))
        i3 = np.sum(w * np.sum(ddel * rel, axis=-1) * wg)
        scale = t ** (-(n + b0 * g0 + 1.0))
        return scale * np.array([i1, i2, i3], dtype=float)

    def t_grid(self, radii: Sequence[float]) -> np.ndarray:
        t_min = self.quad.t_min_cells * self.grid.h
        r_max = max(radii)
        if min(radii) < t_min:
            raise ValueError("radius below the resolvable t floor")
        k = int(math.floor(math.log(r_max / t_min) / math.log(self.quad.t_ratio) + 1e-9))
        base = t_min * self.quad.t_ratio ** np.arange(k + 1)
        t = np.sort(np.concatenate([base, np.asarray(radii, dtype=float)]))
        keep = np.concatenate([[True], np.diff(t) > 1e-9 * t[1:]])
        t = t[keep]
        # snap onto the requested radii so that cumulative sums end exactly there
        for r in radii:
            t[np.argmin(np.abs(t - r))] = r
        return t

    def tail(self, t: np.ndarray, vals: np.ndarray) -> tuple[float, bool]:
        """Power-law completion of ``int_0^{t_min}`` from the first few t-nodes.

        The fitted power is clamped below at ``mu - 1`` (the Hoelder bound on
        the integrand) or at 0 when no modulus is known; the flag reports
        whether the clamp or the sign fallback was used.
        """
        m = min(self.quad.tail_points, len(t))
        head = vals[:m]
        if np.all(head == 0.0):
            return 0.0, False
        mu = self.coeffs.holder_mu
        p_floor = mu - 1.0 if mu is not None else 0.0
        fallback = True
        p = p_floor
        if m >= 2 and (np.all(head > 0) or np.all(head < 0)):
            fit = float(np.polyfit(np.log(t[:m]), np.log(np.abs(head)), 1)[0])
            if fit >= p_floor:
                p, fallback = fit, False
        if p <= -1.0:
            raise ValueError(f"non-integrable error integrand (power {p:.3f})")
        return float(vals[0] * t[0] / (p + 1.0)), fallback


def _cumulative_log_trapezoid(t: np.ndarray, vals: np.ndarray) -> np.ndarray:
    # int g dt = int g t d(ln t)
    f = vals * t[:, None]
    lt = np.log(t)
    inc = 0.5 * (f[1:] + f[:-1]) * np.diff(lt)[:, None]
    return np.vstack([np.zeros((1, vals.shape[1])), np.cumsum(inc, axis=0)])


def weiss_series(
    u: ScalarField, coeffs: CoefficientPair, z0, radii: Sequence[float], quad: QuadParams = QuadParams()
) -> WeissSeries:
    radii = np.asarray(radii, dtype=float)
    if np.any(np.diff(radii) <= 0):
        raise ValueError("radii must be strictly increasing")
    ev = _WeissEvaluator(u, coeffs, z0, quad)
    for r in radii:
        ev._check(r)
    t = ev.t_grid(radii)
    vals = np.array([ev.integrands(ti) for ti in t])
    cum = _cumulative_log_trapezoid(t, vals)
    tail_info = [ev.tail(t, vals[:, k]) for k in range(3)]
    tails = np.array([v for v, _ in tail_info])
    points = []
    for r in radii:
        i = int(np.argmin(np.abs(t - r)))
        errs = cum[i] + tails
        bulk, sphere = ev.bulk_and_sphere(r)
        points.append(WeissPoint.assemble(r, bulk, sphere, *errs))
    return WeissSeries(ev.z0, ev.beta0, ev.gamma0, points, t, vals, tuple(f for _, f in tail_info))


def weiss_point(u: ScalarField, coeffs: CoefficientPair, z0, r: float, quad: QuadParams = QuadParams()) -> WeissPoint:
    return weiss_series(u, coeffs, z0, [r], quad).points[0]


def integrand_slope(series: WeissSeries, term: int) -> float:
    """Log-log slope of ``|t^-(n+beta0 gamma0+1) I_term(t)|`` over the t-grid.

    ``term`` is 0 (gamma jump), 1 (gamma gradient) or 2 (delta gradient).
    """
    vals = np.abs(series.integrands[:, term])
    ok = vals > 0
    if ok.sum() < 2:
        raise ValueError("integrand vanishes on the t-grid")
    return float(np.polyfit(np.log(series.t[ok]), np.log(vals[ok]), 1)[0])


@dataclass
class MonotoneReport:
    passed: bool
    worst_violation: float
    worst_index: int | None
    slack: float


def check_monotone(series: WeissSeries, slack: float) -> MonotoneReport:
    """``W(r_{i+1}) >= W(r_i) - slack * max(1, |W(r_i)|)`` along the series."""
    W = series.W
    if len(W) < 3:
        raise ValueError("need at least 3 points")
    drops = (W[:-1] - W[1:]) / np.maximum(1.0, np.abs(W[:-1]))
    worst = int(np.argmax(drops))
    worst_val = float(max(drops[worst], 0.0))
    return MonotoneReport(bool(np.all(drops <= slack)), worst_val, worst if drops[worst] > 0 else None, slack)


def homogeneity_defect(
    u: ScalarField, z0, beta0: float, radii: Sequence[float], samples: int = DEFAULT_SPHERE_SAMPLES
) -> float:
    """``max_r int_{dB_r} (d_nu u - beta0 u / r)^2`` with centred radial differences."""
    grid = u.grid
    z0 = np.asarray(z0, dtype=float).reshape(grid.dim)
    dirs, wdir = _directions(grid.dim, samples)
    step = grid.h
    best = 0.0
    for r in radii:
        if not grid.ball_inside(z0, r + step) or r - step <= 0:
            raise ValueError("sphere exits domain")
        up = interpolate(u, z0 + (r + step) * dirs)
        dn = interpolate(u, z0 + (r - step) * dirs)
        mid = interpolate(u, z0 + r * dirs)
        dnu = (up - dn) / (2.0 * step)
        val = float(np.sum(wdir * (dnu - beta0 * mid / r) ** 2)) * r ** (grid.dim - 1)
        best = max(best, val)
    return best


def write_weiss_csv(series: WeissSeries, path: str | Path, header: Sequence[str] = ()) -> None:
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    with tmp.open("w", newline="", encoding="utf-8") as fh:
        for line in header:
            fh.write(f"# {line}\n")
        wr = csv.writer(fh)
        zcols = [f"z0_{a + 1}" for a in range(len(series.center))]
        wr.writerow(zcols + ["r", "bulk", "sphere", "err_gamma_jump", "err_gamma_grad", "err_delta_grad", "W"])
        for p in series.points:
            wr.writerow(
                [repr(float(z)) for z in series.center]
                + [repr(v) for v in (p.r, p.bulk, p.sphere, p.err_gamma_jump, p.err_gamma_grad, p.err_delta_grad, p.W)]
            )
    tmp.replace(path)
