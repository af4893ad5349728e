"""Free boundary extraction and geometric diagnostics of minimisers."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np
from scipy import ndimage

from .grid import (
    DEFAULT_SPHERE_SAMPLES,
    BallRegion,
    CoefficientPair,
    GridSpec,
    ScalarField,
    ball_mask,
    finite_difference_gradient,
    interpolate,
    sup_on_ball,
    sup_on_sphere,
)
from .minimize import default_floor

__all__ = [
    "PositivitySet",
    "FreeBoundary",
    "GrowthReport",
    "extract_free_boundary",
    "fit_growth_exponent",
    "radii_ladder",
    "gradient_growth_ratio",
    "density_ratio",
    "porosity_ratio",
    "box_counting_dimension",
    "nearest_boundary_point",
    "sample_boundary_points",
    "write_growth_csv",
]


@dataclass(frozen=True)
class PositivitySet:
    grid: GridSpec
    mask: np.ndarray = field(repr=False)
    floor: float = 0.0


@dataclass(frozen=True)
class FreeBoundary:
    """Cells whose corners straddle the positivity threshold."""

    grid: GridSpec
    cells: np.ndarray = field(repr=False)  # (m, dim) integer cell indices
    mask: np.ndarray = field(repr=False)  # boolean over cells

    @property
    def points(self) -> np.ndarray:
        g = self.grid
        return np.asarray(g.origin) + (self.cells + 0.5) * np.asarray(g.spacing)

    def __len__(self) -> int:
        return len(self.cells)


def _corners(mask: np.ndarray, dim: int) -> list[np.ndarray]:
    if dim == 1:
        return [mask[:-1], mask[1:]]
    return [mask[:-1, :-1], mask[1:, :-1], mask[:-1, 1:], mask[1:, 1:]]


def extract_free_boundary(u: ScalarField, floor: float) -> tuple[PositivitySet, FreeBoundary]:
    """Threshold ``u > floor`` and collect the cells where the mask changes."""
    if not floor > 0:
        raise ValueError("floor must be positive")
    mask = u.values > floor
    if not mask.any():
        raise ValueError("empty positivity set")
    corners = _corners(mask, u.grid.dim)
    any_pos = np.logical_or.reduce(corners)
    all_pos = np.logical_and.reduce(corners)
    fb_mask = any_pos & ~all_pos
    mask.setflags(write=False)
    fb_mask.setflags(write=False)
    return PositivitySet(u.grid, mask, float(floor)), FreeBoundary(u.grid, np.argwhere(fb_mask), fb_mask)


def radii_ladder(r_min: float, r_max: float, count: int | None = None, ratio: float = math.sqrt(2.0)) -> np.ndarray:
    """Geometric radii from ``r_min`` to ``r_max`` (ratio ``sqrt 2`` unless ``count`` is given)."""
    if not 0 < r_min < r_max:
        raise ValueError("need 0 < r_min < r_max")
    if count is None:
        count = int(math.floor(math.log(r_max / r_min) / math.log(ratio) + 1e-9)) + 1
        return r_min * ratio ** np.arange(count)
    return np.geomspace(r_min, r_max, count)


def _max_inside_radius(grid: GridSpec, z0) -> float:
    z = np.asarray(z0, dtype=float)
    return float(min(np.min(z - np.asarray(grid.origin)), np.min(np.asarray(grid.upper) - z)))


@dataclass
class GrowthReport:
    center: np.ndarray
    radii: np.ndarray
    sup_ball: np.ndarray
    sup_sphere: np.ndarray
    fitted_beta: float
    target_beta: float
    nondeg_constant: float
    growth_constant: float
    intercept: float
    dropped: int = 0

    def fixed_slope_residual(self, beta: float) -> float:
        """RMS log-residual of the ball sups against ``c * r**beta`` with ``c`` fitted."""
        lr = np.log(self.radii)
        ls = np.log(self.sup_ball)
        c = np.mean(ls - beta * lr)
        return float(np.sqrt(np.mean((ls - c - beta * lr) ** 2)))

    @property
    def fit_residual(self) -> float:
        lr = np.log(self.radii)
        ls = np.log(self.sup_ball)
        return float(np.sqrt(np.mean((ls - self.intercept - self.fitted_beta * lr) ** 2)))


def fit_growth_exponent(
    u: ScalarField,
    coeffs: CoefficientPair,
    z0,
    r_min: float | None = None,
    r_max: float | None = None,
    count: int | None = None,
    samples: int = DEFAULT_SPHERE_SAMPLES,
) -> GrowthReport:
    """Fit ``sup_{B_r(z0)} u ~ r**beta`` over a geometric ladder of radii.

    ``target_beta`` is ``2/(2 - gamma(z0))``.  Non-degeneracy uses sphere sups
    and the growth constant ball sups.
    """
    grid = u.grid
    z0 = np.asarray(z0, dtype=float).reshape(grid.dim)
    h = grid.h
    r_min = 8.0 * h if r_min is None else r_min
    if r_max is None:
        r_max = min(0.5, _max_inside_radius(grid, z0))
    if r_min < 4.0 * h:
        raise ValueError("r_min below 4h is under-resolved")
    if not r_max > r_min:
        raise ValueError("fewer than 3 usable radii: r_max <= r_min")
    radii = radii_ladder(r_min, r_max, count)
    if count is None and len(radii) < 4:
        radii = radii_ladder(r_min, r_max, 4)
    gamma0 = float(interpolate(coeffs.gamma, z0[None, :])[0])
    target = 2.0 / (2.0 - gamma0)
    sb = np.array([sup_on_ball(u, z0, r) for r in radii])
    ss = np.array([sup_on_sphere(u, z0, r, samples) for r in radii])
    keep = (sb > 0) & (ss > 0)
    if keep.sum() < 3:
        raise ValueError("fewer than 3 usable radii")
    radii, sb, ss = radii[keep], sb[keep], ss[keep]
    slope, intercept = np.polyfit(np.log(radii), np.log(sb), 1)
    return GrowthReport(
        center=z0,
        radii=radii,
        sup_ball=sb,
        sup_sphere=ss,
        fitted_beta=float(slope),
        target_beta=target,
        nondeg_constant=float(np.min(ss / radii**target)),
        growth_constant=float(np.max(sb / radii**target)),
        intercept=float(intercept),
        dropped=int((~keep).sum()),
    )


def gradient_growth_ratio(u: ScalarField, coeffs: CoefficientPair, floor: float | None = None) -> float:
    """``max |D_h u|^2 / u**gamma`` over interior nodes above the floor."""
    grid = u.grid
    if floor is None:
        floor = default_floor(grid.h, coeffs.gamma_hi)
    sel = (u.values > floor) & ~grid.boundary_mask
    if not sel.any():
        raise ValueError("empty positivity set")
    du = finite_difference_gradient(u)
    g2 = np.sum(du**2, axis=0)[sel]
    return float(np.max(g2 / u.values[sel] ** coeffs.gamma.values[sel]))


def _ball_nodes(grid: GridSpec, z0, r: float) -> np.ndarray:
    if not grid.ball_inside(z0, r):
        raise ValueError("ball outside domain")
    return ball_mask(grid, BallRegion(tuple(np.atleast_1d(z0)), r))


def density_ratio(positivity: PositivitySet, z0, r: float) -> float:
    """Fraction of nodes of ``B_r(z0)`` in the positivity set."""
    inside = _ball_nodes(positivity.grid, z0, r)
    return float(positivity.mask[inside].sum() / inside.sum())


def porosity_ratio(positivity: PositivitySet, z0, r: float, fb: FreeBoundary | None = None) -> float:
    """Largest clearance from the free boundary inside ``B_r(z0)``, divided by ``r``.

    Clearance of a cell centre ``y`` is the smaller of its distance to the
    nearest free boundary cell (Euclidean distance transform on the cell
    lattice) and its distance to the sphere ``dB_r(z0)``.
    """
    grid = positivity.grid
    if not grid.ball_inside(z0, r):
        raise ValueError("ball outside domain")
    if fb is None:
        corners = _corners(positivity.mask, grid.dim)
        fb_mask = np.logical_or.reduce(corners) & ~np.logical_and.reduce(corners)
    else:
        fb_mask = fb.mask
    z = np.asarray(z0, dtype=float)
    d2 = sum((c - zi) ** 2 for c, zi in zip(grid.cell_coords, z))
    in_ball = d2 <= r * r
    if not in_ball.any():
        raise ValueError("ball contains no cells")
    to_sphere = r - np.sqrt(d2[in_ball])
    if fb_mask.any():
        dist = ndimage.distance_transform_edt(~fb_mask, sampling=grid.spacing)[in_ball]
        clearance = np.minimum(dist, to_sphere)
    else:
        clearance = to_sphere
    return float(np.clip(clearance.max() / r, 0.0, 1.0))


def box_counting_dimension(fb: FreeBoundary, scales: Sequence[float] | None = None) -> float:
    """Slope of ``log N(s)`` against ``log(1/s)`` for boxes of side ``s``."""
    if len(fb) == 0:
        raise ValueError("empty free boundary")
    grid = fb.grid
    if scales is None:
        scales = 2.0 * grid.h * 2.0 ** np.arange(5)
    scales = np.asarray(scales, dtype=float)
    if len(scales) < 4:
        raise ValueError("need at least 4 scales")
    if np.any(scales < 2.0 * grid.h * (1 - 1e-12)):
        raise ValueError("scales must be at least 2h")
    pts = fb.points - np.asarray(grid.origin)
    counts = []
    for s in scales:
        boxes = np.floor(pts / s).astype(np.int64)
        counts.append(len(np.unique(boxes, axis=0)))
    slope = np.polyfit(np.log(1.0 / scales), np.log(counts), 1)[0]
    return float(slope)


def nearest_boundary_point(fb: FreeBoundary, target) -> np.ndarray:
    if len(fb) == 0:
        raise ValueError("empty free boundary")
    pts = fb.points
    d = np.sum((pts - np.asarray(target, dtype=float)) ** 2, axis=1)
    return pts[int(np.argmin(d))]


def sample_boundary_points(fb: FreeBoundary, limit: int = 64, region: BallRegion | None = None) -> np.ndarray:
    """Deterministic subsample of at most ``limit`` boundary cell centres."""
    pts = fb.points
    if region is not None:
        d = np.sqrt(np.sum((pts - np.asarray(region.center)) ** 2, axis=1))
        pts = pts[d <= region.radius]
    if len(pts) <= limit:
        return pts
    idx = np.round(np.linspace(0, len(pts) - 1, limit)).astype(int)
    return pts[idx]


def write_growth_csv(reports: Sequence[GrowthReport], path: str | Path, header: Sequence[str] = ()) -> None:
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    with tmp.open("w", newline="", encoding="utf-8") as fh:
        for line in header:
            fh.write(f"# {line}\n")
        wr = csv.writer(fh)
        dim = len(reports[0].center) if reports else 2
        zcols = [f"z0_{a + 1}" for a in range(dim)]
        wr.writerow(
            zcols
            + ["r", "sup_ball", "sup_sphere", "target_beta", "fitted_beta", "nondeg_constant", "growth_constant"]
        )
        for rep in reports:
            for r, sb, ss in zip(rep.radii, rep.sup_ball, rep.sup_sphere):
                wr.writerow(
                    [repr(float(z)) for z in rep.center]
                    + [repr(float(v)) for v in (r, sb, ss, rep.target_beta, rep.fitted_beta)]
                    + [repr(rep.nondeg_constant), repr(rep.growth_constant)]
                )
    tmp.replace(path)
