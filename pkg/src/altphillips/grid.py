"""Uniform Cartesian grids in one and two dimensions.

Nodal fields live on the closed box ``origin + [0, cells*spacing]``; balls are
realised as masks over node (or cell) centres.  Everything here is pure and
operates on immutable containers.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Sequence

import numpy as np

__all__ = [
    "GridSpec",
    "ScalarField",
    "BallRegion",
    "CoefficientPair",
    "box_grid",
    "ball_mask",
    "cell_ball_mask",
    "interpolate",
    "sphere_points",
    "exponent_extrema",
    "finite_difference_gradient",
    "sup_on_sphere",
    "sup_on_ball",
    "pullback",
    "write_field",
    "read_field",
    "DEFAULT_SPHERE_SAMPLES",
]

DEFAULT_SPHERE_SAMPLES = 512


def _as_tuple(x, dim: int, kind=float) -> tuple:
    if np.isscalar(x):
        return tuple(kind(x) for _ in range(dim))
    out = tuple(kind(v) for v in x)
    if len(out) != dim:
        raise ValueError(f"expected {dim} entries, got {len(out)}")
    return out


@dataclass(frozen=True)
class GridSpec:
    """Uniform grid with ``cells[a] + 1`` nodes along axis ``a``."""

    dim: int
    cells: tuple[int, ...]
    origin: tuple[float, ...]
    spacing: tuple[float, ...]

    def __post_init__(self):
        if self.dim not in (1, 2):
            raise ValueError("dim must be 1 or 2")
        object.__setattr__(self, "cells", _as_tuple(self.cells, self.dim, int))
        object.__setattr__(self, "origin", _as_tuple(self.origin, self.dim))
        object.__setattr__(self, "spacing", _as_tuple(self.spacing, self.dim))
        if any(c < 8 for c in self.cells):
            raise ValueError("need at least 8 cells per axis")
        if any(not (h > 0 and math.isfinite(h)) for h in self.spacing):
            raise ValueError("spacing must be positive")

    @property
    def shape(self) -> tuple[int, ...]:
        return tuple(c + 1 for c in self.cells)

    @property
    def size(self) -> int:
        return int(np.prod(self.shape))

    @property
    def upper(self) -> tuple[float, ...]:
        return tuple(o + c * h for o, c, h in zip(self.origin, self.cells, self.spacing))

    @property
    def h(self) -> float:
        """Largest spacing; the resolution scale used by tolerances."""
        return max(self.spacing)

    @property
    def cell_volume(self) -> float:
        return float(np.prod(self.spacing))

    @property
    def volume(self) -> float:
        return float(np.prod([c * h for c, h in zip(self.cells, self.spacing)]))

    def axis(self, a: int) -> np.ndarray:
        # multiplication, not accumulation: node coordinates are reproducible
        return self.origin[a] + np.arange(self.cells[a] + 1) * self.spacing[a]

    def cell_axis(self, a: int) -> np.ndarray:
        return self.origin[a] + (np.arange(self.cells[a]) + 0.5) * self.spacing[a]

    @cached_property
    def coords(self) -> tuple[np.ndarray, ...]:
        """Node coordinate arrays, each of shape ``self.shape``."""
        return tuple(np.meshgrid(*[self.axis(a) for a in range(self.dim)], indexing="ij"))

    @cached_property
    def cell_coords(self) -> tuple[np.ndarray, ...]:
        return tuple(np.meshgrid(*[self.cell_axis(a) for a in range(self.dim)], indexing="ij"))

    @cached_property
    def boundary_mask(self) -> np.ndarray:
        m = np.zeros(self.shape, dtype=bool)
        if self.dim == 1:
            m[[0, -1]] = True
        else:
            m[[0, -1], :] = True
            m[:, [0, -1]] = True
        return m

    def contains(self, points: np.ndarray, slack: float = 0.0) -> np.ndarray:
        """Which of ``points`` (shape ``(..., dim)``) lie in the closed box."""
        pts = np.asarray(points, dtype=float).reshape(-1, self.dim)
        ok = np.ones(len(pts), dtype=bool)
        tol = 1e-12 * max(1.0, max(abs(v) for v in self.upper + self.origin))
        for a in range(self.dim):
            ok &= pts[:, a] >= self.origin[a] - slack - tol
            ok &= pts[:, a] <= self.upper[a] + slack + tol
        return ok

    def ball_inside(self, center, radius: float) -> bool:
        c = np.asarray(center, dtype=float).reshape(self.dim)
        lo = c - radius
        hi = c + radius
        tol = 1e-12
        return bool(
            np.all(lo >= np.asarray(self.origin) - tol) and np.all(hi <= np.asarray(self.upper) + tol)
        )


def box_grid(dim: int, cells, lo: float = -1.0, hi: float = 1.0) -> GridSpec:
    """Grid on the cube ``[lo, hi]^dim`` with ``cells`` intervals per axis."""
    cells = _as_tuple(cells, dim, int)
    spacing = tuple((hi - lo) / c for c in cells)
    return GridSpec(dim, cells, (lo,) * dim, spacing)


@dataclass(frozen=True)
class ScalarField:
    """Nodal values on a grid; ``values`` has shape ``grid.shape``."""

    grid: GridSpec
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        v = np.array(self.values, dtype=float)
        if v.size != self.grid.size:
            raise ValueError(f"value count {v.size} != node count {self.grid.size}")
        v = v.reshape(self.grid.shape)
        if not np.all(np.isfinite(v)):
            raise ValueError("field values must be finite")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @classmethod
    def from_function(cls, grid: GridSpec, fn) -> "ScalarField":
        return cls(grid, np.broadcast_to(fn(*grid.coords), grid.shape))

    @classmethod
    def constant(cls, grid: GridSpec, c: float) -> "ScalarField":
        return cls(grid, np.full(grid.shape, float(c)))

    def with_values(self, values) -> "ScalarField":
        return ScalarField(self.grid, values)

    def __mul__(self, c: float) -> "ScalarField":
        return ScalarField(self.grid, self.values * c)

    __rmul__ = __mul__


@dataclass(frozen=True)
class BallRegion:
    center: tuple[float, ...]
    radius: float

    def __post_init__(self):
        object.__setattr__(self, "center", tuple(float(c) for c in np.atleast_1d(self.center)))
        if not self.radius > 0:
            raise ValueError("radius must be positive")


@dataclass(frozen=True)
class CoefficientPair:
    """Exponent field ``gamma`` and weight field ``delta`` with their bounds.

    Bounds default to the extrema of the nodal values.  ``holder_mu`` and
    ``holder_seminorm`` describe the modulus ``omega(t) = seminorm * t**mu`` of
    the exponent when known.
    """

    gamma: ScalarField
    delta: ScalarField
    gamma_lo: float | None = None
    gamma_hi: float | None = None
    delta_lo: float | None = None
    holder_mu: float | None = None
    holder_seminorm: float | None = None

    def __post_init__(self):
        if self.gamma.grid != self.delta.grid:
            raise ValueError("gamma and delta live on different grids")
        g = self.gamma.values
        d = self.delta.values
        lo = float(g.min()) if self.gamma_lo is None else float(self.gamma_lo)
        hi = float(g.max()) if self.gamma_hi is None else float(self.gamma_hi)
        dlo = float(d.min()) if self.delta_lo is None else float(self.delta_lo)
        object.__setattr__(self, "gamma_lo", lo)
        object.__setattr__(self, "gamma_hi", hi)
        object.__setattr__(self, "delta_lo", dlo)
        if not (0.0 < lo <= hi <= 1.0):
            raise ValueError(f"need 0 < gamma_lo <= gamma_hi <= 1, got {lo}, {hi}")
        if g.min() < lo or g.max() > hi:
            raise ValueError("gamma outside its declared bounds")
        if not dlo > 0 or d.min() < dlo:
            raise ValueError("delta must be bounded below by a positive delta_lo")
        if self.holder_mu is not None and not (0.0 < self.holder_mu <= 1.0):
            raise ValueError("holder_mu must lie in (0, 1]")

    @classmethod
    def constant(cls, grid: GridSpec, gamma: float, delta: float) -> "CoefficientPair":
        return cls(ScalarField.constant(grid, gamma), ScalarField.constant(grid, delta))

    @property
    def grid(self) -> GridSpec:
        return self.gamma.grid

    @cached_property
    def dgamma(self) -> np.ndarray:
        return finite_difference_gradient(self.gamma)

    @cached_property
    def ddelta(self) -> np.ndarray:
        return finite_difference_gradient(self.delta)

    def modulus(self, t):
        if self.holder_mu is None or self.holder_seminorm is None:
            return None
        return self.holder_seminorm * np.asarray(t, dtype=float) ** self.holder_mu


def ball_mask(grid: GridSpec, region: BallRegion) -> np.ndarray:
    """Nodes whose centres lie in the closed ball."""
    c = np.asarray(region.center, dtype=float)
    d2 = sum((x - ci) ** 2 for x, ci in zip(grid.coords, c))
    return d2 <= region.radius**2 * (1 + 1e-12)


def cell_ball_mask(grid: GridSpec, region: BallRegion) -> np.ndarray:
    """Cells whose centres lie in the closed ball."""
    c = np.asarray(region.center, dtype=float)
    d2 = sum((x - ci) ** 2 for x, ci in zip(grid.cell_coords, c))
    return d2 <= region.radius**2 * (1 + 1e-12)


def interpolate(fld: ScalarField | np.ndarray, points, grid: GridSpec | None = None) -> np.ndarray:
    """Multilinear interpolation of nodal values at ``points`` (shape ``(m, dim)``).

    Written in difference form so that constant fields are reproduced bit for
    bit.  Points outside the box raise ``ValueError``.
    """
    if isinstance(fld, ScalarField):
        grid = fld.grid
        vals = fld.values
    else:
        vals = np.asarray(fld)
    pts = np.asarray(points, dtype=float).reshape(-1, grid.dim)
    if not np.all(grid.contains(pts)):
        raise ValueError("interpolation point outside domain")
    idx = []
    frac = []
    for a in range(grid.dim):
        s = (pts[:, a] - grid.origin[a]) / grid.spacing[a]
        i = np.clip(np.floor(s).astype(np.int64), 0, grid.cells[a] - 1)
        t = np.clip(s - i, 0.0, 1.0)
        idx.append(i)
        frac.append(t)
    if grid.dim == 1:
        (i,), (t,) = idx, frac
        v0 = vals[..., i]
        return v0 + t * (vals[..., i + 1] - v0)
    (i, j), (s, t) = idx, frac
    v00 = vals[..., i, j]
    v10 = vals[..., i + 1, j]
    v01 = vals[..., i, j + 1]
    v11 = vals[..., i + 1, j + 1]
    return v00 + s * (v10 - v00) + t * (v01 - v00) + s * t * ((v11 - v10) - (v01 - v00))


def sphere_points(center, radius: float, samples: int, dim: int) -> np.ndarray:
    """Equally spaced points on the sphere; the two endpoints in 1D."""
    c = np.asarray(center, dtype=float).reshape(dim)
    if dim == 1:
        return np.array([[c[0] - radius], [c[0] + radius]])
    theta = 2.0 * np.pi * np.arange(samples) / samples
    return c + radius * np.stack([np.cos(theta), np.sin(theta)], axis=1)


def _region_nodes(grid: GridSpec, region: BallRegion) -> np.ndarray:
    mask = ball_mask(grid, region)
    if not mask.any():
        raise ValueError("region outside domain")
    return mask


def exponent_extrema(coeffs: CoefficientPair, region: BallRegion) -> tuple[float, float]:
    """Min and max of the exponent over the grid nodes inside ``region``."""
    mask = _region_nodes(coeffs.grid, region)
    g = coeffs.gamma.values[mask]
    return float(g.min()), float(g.max())


def finite_difference_gradient(fld: ScalarField) -> np.ndarray:
    """Central differences inside, one-sided on the box faces.

    Returns an array of shape ``(dim, *grid.shape)``.
    """
    grid = fld.grid
    if grid.dim == 1:
        return np.gradient(fld.values, grid.spacing[0])[None, ...]
    return np.stack(np.gradient(fld.values, *grid.spacing))


def _check_sphere(grid: GridSpec, center, radius: float):
    if not grid.ball_inside(center, radius):
        raise ValueError("sphere exits domain")


def sup_on_sphere(fld: ScalarField, center, radius: float, samples: int = DEFAULT_SPHERE_SAMPLES) -> float:
    grid = fld.grid
    if grid.dim == 2 and samples < 16:
        raise ValueError("need at least 16 sphere samples in 2D")
    _check_sphere(grid, center, radius)
    pts = sphere_points(center, radius, samples, grid.dim)
    return float(interpolate(fld, pts).max())


def sup_on_ball(fld: ScalarField, center, radius: float) -> float:
    grid = fld.grid
    _check_sphere(grid, center, radius)
    mask = _region_nodes(grid, BallRegion(center, radius))
    return float(fld.values[mask].max())


def pullback(
    fld: ScalarField | np.ndarray,
    x0,
    scale: float,
    reference: GridSpec,
    source: GridSpec | None = None,
    mask: np.ndarray | None = None,
) -> np.ndarray:
    """Values ``fld(x0 + scale * x)`` at the nodes ``x`` of ``reference``.

    With ``mask`` only the selected nodes are sampled and the rest are 0.
    """
    if isinstance(fld, ScalarField):
        source = fld.grid
    x0 = np.asarray(x0, dtype=float).reshape(reference.dim)
    if mask is None:
        mask = np.ones(reference.shape, dtype=bool)
    pts = x0 + scale * np.stack([c[mask] for c in reference.coords], axis=1)
    out = np.zeros(reference.shape)
    out[mask] = interpolate(fld, pts, source)
    return out


# -- AP-FIELD v1 ------------------------------------------------------------

def write_field(fld: ScalarField, path: str | Path) -> None:
    """Write ``fld`` in the AP-FIELD v1 text format (atomic replace)."""
    g = fld.grid
    head = ["AP-FIELD", "1", str(g.dim)]
    head += [str(c) for c in g.cells]
    head += [repr(float(h)) for h in g.spacing]
    head += [repr(float(o)) for o in g.origin]
    body = "\n".join(f"{v:.17g}" for v in fld.values.ravel(order="C"))
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(" ".join(head) + "\n" + body + "\n", encoding="utf-8")
    tmp.replace(path)


def read_field(path: str | Path) -> ScalarField:
    text = Path(path).read_text(encoding="utf-8")
    header, _, rest = text.partition("\n")
    tok = header.split()
    if len(tok) < 3 or tok[0] != "AP-FIELD" or tok[1] != "1":
        raise ValueError(f"{path}: not an AP-FIELD v1 file")
    dim = int(tok[2])
    want = 3 + 3 * dim
    if dim not in (1, 2) or len(tok) != want:
        raise ValueError(f"{path}: malformed AP-FIELD header")
    cells = tuple(int(t) for t in tok[3 : 3 + dim])
    spacing = tuple(float(t) for t in tok[3 + dim : 3 + 2 * dim])
    origin = tuple(float(t) for t in tok[3 + 2 * dim : 3 + 3 * dim])
    grid = GridSpec(dim, cells, origin, spacing)
    vals = np.array(rest.split(), dtype=float)
    return ScalarField(grid, vals)


def nearest_node(grid: GridSpec, point: Sequence[float]) -> tuple[int, ...]:
    p = np.asarray(point, dtype=float).reshape(grid.dim)
    return tuple(
        int(np.clip(round((p[a] - grid.origin[a]) / grid.spacing[a]), 0, grid.cells[a])) for a in range(grid.dim)
    )
