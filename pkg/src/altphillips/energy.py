"""Discrete Alt-Phillips energy with a spatially varying exponent.

The Dirichlet term lives on grid edges (staggered differences) and the
singular term on nodes, both weighted cell by cell, so the discrete energy is
an honest function of the nodal values and :func:`energy_gradient` is its
exact derivative.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .grid import BallRegion, CoefficientPair, GridSpec, ScalarField, ball_mask, cell_ball_mask, pullback

__all__ = [
    "EnergyParams",
    "Weights",
    "energy",
    "energy_gradient",
    "dirichlet_energy",
    "singular_density",
    "harmonic_replacement",
    "discrete_laplacian",
    "scaled_problem",
    "scaling_identity",
]


@dataclass(frozen=True)
class EnergyParams:
    epsilon: float = 0.0
    region: BallRegion | None = None

    def __post_init__(self):
        if not self.epsilon >= 0:
            raise ValueError("epsilon must be nonnegative")


class Weights:
    """Edge and node quadrature weights induced by a set of active cells."""

    def __init__(self, grid: GridSpec, cells: np.ndarray | None = None):
        self.grid = grid
        if cells is None:
            cells = np.ones(grid.cells, dtype=float)
        cells = np.asarray(cells, dtype=float)
        self.cells = cells
        h = grid.spacing
        if grid.dim == 1:
            self.edges = [cells * (1.0 / h[0])]
            p = np.pad(cells, 1)
            self.nodes = 0.5 * (p[:-1] + p[1:]) * h[0]
        else:
            # x-edge (i,j)-(i+1,j) belongs to cells (i,j-1) and (i,j)
            px = np.pad(cells, ((0, 0), (1, 1)))
            py = np.pad(cells, ((1, 1), (0, 0)))
            ex = 0.5 * (px[:, :-1] + px[:, 1:]) * (h[1] / h[0])
            ey = 0.5 * (py[:-1, :] + py[1:, :]) * (h[0] / h[1])
            self.edges = [ex, ey]
            p = np.pad(cells, 1)
            self.nodes = 0.25 * (p[:-1, :-1] + p[1:, :-1] + p[:-1, 1:] + p[1:, 1:]) * (h[0] * h[1])

    @classmethod
    def for_region(cls, grid: GridSpec, region: BallRegion | None) -> "Weights":
        if region is None:
            return cls(grid)
        return cls(grid, cell_ball_mask(grid, region).astype(float))


def _diffs(u: np.ndarray, dim: int) -> list[np.ndarray]:
    return [np.diff(u, axis=a) for a in range(dim)]


def singular_density(u: np.ndarray, gamma: np.ndarray, epsilon: float) -> np.ndarray:
    """``(u+ + eps)**gamma - eps**gamma``; equals ``(u+)**gamma`` at ``eps = 0``."""
    s = np.maximum(u, 0.0)
    if epsilon == 0.0:
        return np.power(s, gamma)
    return np.power(s + epsilon, gamma) - np.power(epsilon, gamma)


def _check(v: ScalarField, coeffs: CoefficientPair):
    if v.grid != coeffs.grid:
        raise ValueError("field and coefficients live on different grids")


def _energy_values(u, gamma, delta, epsilon, w: Weights) -> float:
    dirichlet = sum(0.5 * np.sum(we * d * d) for we, d in zip(w.edges, _diffs(u, w.grid.dim)))
    return float(dirichlet + np.sum(w.nodes * delta * singular_density(u, gamma, epsilon)))


def _gradient_values(u, gamma, delta, epsilon, w: Weights) -> np.ndarray:
    g = np.zeros_like(u)
    for a, (we, d) in enumerate(zip(w.edges, _diffs(u, w.grid.dim))):
        flux = we * d
        lo = [slice(None)] * u.ndim
        hi = [slice(None)] * u.ndim
        lo[a] = slice(None, -1)
        hi[a] = slice(1, None)
        g[tuple(lo)] -= flux
        g[tuple(hi)] += flux
    # right derivative at the kink s = 0
    active = u >= 0.0
    force = delta * gamma * np.power(np.maximum(u, 0.0) + epsilon, gamma - 1.0)
    g += w.nodes * np.where(active, force, 0.0)
    g[w.grid.boundary_mask] = 0.0
    return g


def energy(v: ScalarField, coeffs: CoefficientPair, params: EnergyParams = EnergyParams()) -> float:
    """Discrete energy of ``v`` over the cells of ``params.region`` (whole box by default)."""
    _check(v, coeffs)
    w = Weights.for_region(v.grid, params.region)
    return _energy_values(v.values, coeffs.gamma.values, coeffs.delta.values, params.epsilon, w)


def energy_gradient(v: ScalarField, coeffs: CoefficientPair, params: EnergyParams) -> ScalarField:
    """Nodal derivative of the regularised energy; Dirichlet rows are zero."""
    _check(v, coeffs)
    if params.epsilon <= 0.0:
        raise ValueError("singular gradient: epsilon must be positive")
    w = Weights.for_region(v.grid, params.region)
    g = _gradient_values(v.values, coeffs.gamma.values, coeffs.delta.values, params.epsilon, w)
    return ScalarField(v.grid, g)


def dirichlet_energy(v: ScalarField, region: BallRegion | None = None) -> float:
    """``sum 1/2 |D_h v|^2`` over the cells of ``region``."""
    w = Weights.for_region(v.grid, region)
    return float(sum(0.5 * np.sum(we * d * d) for we, d in zip(w.edges, _diffs(v.values, v.grid.dim))))


def discrete_laplacian(u: np.ndarray, grid: GridSpec) -> np.ndarray:
    """Standard (2d+1)-point Laplacian at interior nodes; zero on the box faces."""
    out = np.zeros_like(u, dtype=float)
    h = grid.spacing
    if grid.dim == 1:
        out[1:-1] = (u[2:] - 2 * u[1:-1] + u[:-2]) / h[0] ** 2
    else:
        out[1:-1, 1:-1] = (u[2:, 1:-1] - 2 * u[1:-1, 1:-1] + u[:-2, 1:-1]) / h[0] ** 2 + (
            u[1:-1, 2:] - 2 * u[1:-1, 1:-1] + u[1:-1, :-2]
        ) / h[1] ** 2
    return out


def region_interior(grid: GridSpec, cells: np.ndarray) -> np.ndarray:
    """Nodes all of whose neighbouring cells are active (and not on the box faces)."""
    c = np.asarray(cells, dtype=bool)
    if grid.dim == 1:
        inner = np.zeros(grid.shape, dtype=bool)
        inner[1:-1] = c[:-1] & c[1:]
        return inner
    inner = np.zeros(grid.shape, dtype=bool)
    inner[1:-1, 1:-1] = c[:-1, :-1] & c[1:, :-1] & c[:-1, 1:] & c[1:, 1:]
    return inner


def laplace_solve(values: np.ndarray, unknown: np.ndarray, grid: GridSpec) -> np.ndarray:
    """Replace ``values`` on ``unknown`` nodes by the discrete-harmonic extension."""
    idx = -np.ones(grid.shape, dtype=np.int64)
    n = int(unknown.sum())
    if n == 0:
        raise ValueError("empty system: region has no interior nodes")
    idx[unknown] = np.arange(n)
    rows, cols, data = [], [], []
    rhs = np.zeros(n)
    pos = np.argwhere(unknown)
    k = idx[unknown]
    diag = np.zeros(n)
    for a in range(grid.dim):
        wa = 1.0 / grid.spacing[a] ** 2
        for step in (-1, 1):
            nb = pos.copy()
            nb[:, a] += step
            nk = idx[tuple(nb.T)]
            diag += wa
            inner = nk >= 0
            rows.append(k[inner])
            cols.append(nk[inner])
            data.append(np.full(int(inner.sum()), -wa))
            rhs[k[~inner]] += wa * values[tuple(nb[~inner].T)]
    rows.append(k)
    cols.append(k)
    data.append(diag)
    A = sp.csr_matrix((np.concatenate(data), (np.concatenate(rows), np.concatenate(cols))), shape=(n, n))
    sol = spla.spsolve(A.tocsc(), rhs)
    if not np.all(np.isfinite(sol)):
        raise ValueError("singular system in harmonic replacement")
    out = np.array(values, dtype=float)
    out[unknown] = sol
    return out


def harmonic_replacement(v: ScalarField, region: BallRegion | None = None) -> ScalarField:
    """Discrete-harmonic function in ``region`` agreeing with ``v`` elsewhere.

    The unknowns are the nodes surrounded by cells of the region, so the
    5-point equations are exactly the Euler-Lagrange equations of
    :func:`dirichlet_energy` restricted to the same region.
    """
    grid = v.grid
    if region is None:
        cells = np.ones(grid.cells, dtype=bool)
    else:
        cells = cell_ball_mask(grid, region)
    unknown = region_interior(grid, cells)
    return ScalarField(grid, laplace_solve(v.values, unknown, grid))


def scaled_problem(
    v: ScalarField, coeffs: CoefficientPair, x0, A: float, B: float, reference: GridSpec
) -> tuple[ScalarField, CoefficientPair]:
    """``w(x) = v(x0 + A x)/B`` on ``reference`` with the rescaled coefficients.

    ``gamma~(x) = gamma(x0 + A x)`` and ``delta~(x) = B**(gamma~ - 2) A**2 delta(x0 + A x)``.
    """
    if not (0 < A <= 1 and 0 < B <= 1):
        raise ValueError("need A, B in (0, 1]")
    _check(v, coeffs)
    # sample only what the cells of B_1 touch; the rest is padding
    n = reference.dim
    near = ball_mask(reference, BallRegion((0.0,) * n, 1.0 + 2.0 * reference.h))
    w = pullback(v, x0, A, reference, mask=near) / B
    gam = pullback(coeffs.gamma, x0, A, reference, mask=near)
    dlt = pullback(coeffs.delta, x0, A, reference, mask=near)
    gam[~near] = gam[near].max()
    dlt[~near] = dlt[near].max()
    dlt = B ** (gam - 2.0) * A**2 * dlt
    return ScalarField(reference, w), CoefficientPair(ScalarField(reference, gam), ScalarField(reference, dlt))


def scaling_identity(
    v: ScalarField, coeffs: CoefficientPair, x0, A: float, B: float, reference: GridSpec
) -> tuple[float, float]:
    """Both sides of ``J(v, B_A(x0)) = A**(n-2) B**2 J~(w, B_1)``.

    ``reference`` should cover ``B_1``; the left side is taken on the grid of ``v``.
    """
    n = v.grid.dim
    lhs = energy(v, coeffs, EnergyParams(region=BallRegion(tuple(np.atleast_1d(x0)), A)))
    w, co = scaled_problem(v, coeffs, x0, A, B, reference)
    rhs = A ** (n - 2) * B**2 * energy(w, co, EnergyParams(region=BallRegion((0.0,) * n, 1.0)))
    return lhs, rhs
