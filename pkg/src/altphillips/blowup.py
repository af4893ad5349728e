"""Blow-up rescalings ``u_r(x) = u(z0 + r x) / r**beta`` and their classification."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .grid import (
    BallRegion,
    CoefficientPair,
    GridSpec,
    ScalarField,
    ball_mask,
    box_grid,
    finite_difference_gradient,
    interpolate,
    pullback,
)
from .minimize import default_floor

__all__ = [
    "BlowupSequence",
    "ProfileFit",
    "reference_grid",
    "rescale",
    "blowup_sequence",
    "rescaled_sups",
    "rho_constant",
    "half_plane_profile",
    "classify_blowup",
    "write_blowup_csv",
]

REFERENCE_CELLS = 128


def reference_grid(dim: int = 2, cells: int = REFERENCE_CELLS) -> GridSpec:
    """The fixed comparison grid over ``[-1, 1]**dim``."""
    return box_grid(dim, cells)


def _unit_ball(reference: GridSpec) -> np.ndarray:
    return ball_mask(reference, BallRegion((0.0,) * reference.dim, 1.0))


def rescale(
    u: ScalarField, z0, r: float, reference: GridSpec, beta: float, min_cells: float = 8.0
) -> ScalarField:
    """``u(z0 + r x) / r**beta`` at reference nodes in ``B_1``, zero elsewhere."""
    grid = u.grid
    if r < min_cells * grid.h * (1 - 1e-12):
        raise ValueError(f"under-resolved: r={r:g} below {min_cells:g}h")
    z0 = np.asarray(z0, dtype=float).reshape(grid.dim)
    if not grid.ball_inside(z0, r):
        raise ValueError("ball exits domain")
    vals = pullback(u, z0, r, reference, mask=_unit_ball(reference)) / r**beta
    return ScalarField(reference, vals)


def _sup_distance(a: ScalarField, b: ScalarField) -> float:
    return float(np.max(np.abs(a.values - b.values)))


@dataclass
class BlowupSequence:
    center: np.ndarray
    beta: float
    radii: np.ndarray
    fields: list[ScalarField] = field(repr=False)
    distances: np.ndarray = None  # sup |u_{r_k} - u_{r_{k-1}}|, k >= 1

    def __post_init__(self):
        if len(self.radii) != len(self.fields) or len(self.radii) < 2:
            raise ValueError("need at least two rescalings")
        if np.any(np.diff(self.radii) >= 0):
            raise ValueError("radii must be strictly decreasing")
        ref = self.fields[0].grid
        if any(f.grid != ref for f in self.fields):
            raise ValueError("rescalings live on different grids")
        if self.distances is None:
            self.distances = np.array([_sup_distance(a, b) for a, b in zip(self.fields[:-1], self.fields[1:])])

    @property
    def reference(self) -> GridSpec:
        return self.fields[0].grid

    @property
    def last(self) -> ScalarField:
        return self.fields[-1]

    def sups(self) -> np.ndarray:
        return np.array([float(np.max(np.abs(f.values))) for f in self.fields])


def blowup_sequence(
    u: ScalarField,
    coeffs: CoefficientPair,
    z0,
    radii: Sequence[float],
    reference: GridSpec | None = None,
    beta: float | None = None,
) -> BlowupSequence:
    """Rescalings over decreasing ``radii``; ``beta`` defaults to ``2/(2-gamma(z0))``."""
    z0 = np.asarray(z0, dtype=float).reshape(u.grid.dim)
    if reference is None:
        reference = reference_grid(u.grid.dim)
    if beta is None:
        g0 = float(interpolate(coeffs.gamma, z0[None, :])[0])
        beta = 2.0 / (2.0 - g0)
    radii = np.asarray(sorted(radii, reverse=True), dtype=float)
    fields = [rescale(u, z0, r, reference, beta) for r in radii]
    return BlowupSequence(z0, float(beta), radii, fields)


def rescaled_sups(u: ScalarField, z0, radii: Sequence[float], beta: float) -> np.ndarray:
    """``sup_{B_r(z0)} u / r**beta`` on node values (no reference grid involved)."""
    grid = u.grid
    z0 = np.asarray(z0, dtype=float).reshape(grid.dim)
    out = []
    for r in radii:
        if not grid.ball_inside(z0, r):
            raise ValueError("ball exits domain")
        m = ball_mask(grid, BallRegion(tuple(z0), r))
        out.append(float(u.values[m].max()) / r**beta)
    return np.array(out)


def rho_constant(gamma0: float, delta0: float) -> tuple[float, float]:
    """``(rho, beta)`` with ``beta = 2/(2-gamma0)`` and ``rho = ((beta-1) beta/(gamma0 delta0))**(1/(gamma0-2))``."""
    if not (0.0 < gamma0 <= 1.0):
        raise ValueError(f"gamma0 must lie in (0, 1], got {gamma0}")
    if not delta0 > 0.0:
        raise ValueError(f"delta0 must be positive, got {delta0}")
    beta = 2.0 / (2.0 - gamma0)
    rho = ((beta - 1.0) * beta / (gamma0 * delta0)) ** (1.0 / (gamma0 - 2.0))
    return rho, beta


def _unit(nu, dim: int) -> np.ndarray:
    nu = np.asarray(nu, dtype=float).reshape(dim)
    norm = float(np.linalg.norm(nu))
    if not abs(norm - 1.0) <= 1e-9:
        raise ValueError("nu must be a unit vector")
    return nu / norm


def _half_plane_basis(reference: GridSpec, nu: np.ndarray, beta: float) -> np.ndarray:
    s = sum(c * n for c, n in zip(reference.coords, nu))
    return np.maximum(s, 0.0) ** beta


def half_plane_profile(gamma0: float, delta0: float, nu, reference: GridSpec, offset: float = 0.0) -> ScalarField:
    """``rho0 * ((x . nu - offset)_+)**beta0`` on every node of ``reference``."""
    rho, beta = rho_constant(gamma0, delta0)
    nu = _unit(nu, reference.dim)
    s = sum(c * n for c, n in zip(reference.coords, nu)) - offset
    return ScalarField(reference, rho * np.maximum(s, 0.0) ** beta)


@dataclass(frozen=True)
class ProfileFit:
    nu: np.ndarray
    rho: float
    sup_error: float

    def __post_init__(self):
        if not abs(float(np.linalg.norm(self.nu)) - 1.0) <= 1e-9:
            raise ValueError("nu must be a unit vector")
        if not self.rho > 0:
            raise ValueError("rho must be positive")

    def angle_to(self, direction) -> float:
        """Angle in degrees between ``nu`` and ``direction``."""
        d = np.asarray(direction, dtype=float)
        c = float(np.dot(self.nu, d) / np.linalg.norm(d))
        return math.degrees(math.acos(max(-1.0, min(1.0, c))))


SINGULAR = "singular"


def classify_blowup(seq: BlowupSequence, coeffs: CoefficientPair, tol: float = 0.05) -> ProfileFit | str:
    """Fit the last rescaling by ``rho ((x . nu)_+)**beta``.

    ``nu`` is the normalised mean of ``D u_r`` over ``{u_r > floor} cap B_{1/2}``
    and ``rho`` the least-squares amplitude over ``B_1``.  Returns ``"singular"``
    when the sup error exceeds ``5 tol``.
    """
    if seq.distances[-1] > tol:
        raise ValueError(f"not converged: last distance {seq.distances[-1]:.3g} > {tol:g}")
    last = seq.last
    ref = last.grid
    inner = ball_mask(ref, BallRegion((0.0,) * ref.dim, 0.5))
    floor = default_floor(ref.h, coeffs.gamma_hi)
    sel = inner & (last.values > floor)
    if not sel.any():
        return SINGULAR
    du = finite_difference_gradient(last)
    mean = np.array([du[a][sel].mean() for a in range(ref.dim)])
    norm = float(np.linalg.norm(mean))
    if norm == 0.0:
        return SINGULAR
    nu = mean / norm
    ball = _unit_ball(ref)
    basis = _half_plane_basis(ref, nu, seq.beta)[ball]
    data = last.values[ball]
    denom = float(np.dot(basis, basis))
    if denom == 0.0:
        return SINGULAR
    rho = float(np.dot(basis, data) / denom)
    if not rho > 0:
        return SINGULAR
    err = float(np.max(np.abs(data - rho * basis)))
    if err > 5.0 * tol:
        return SINGULAR
    return ProfileFit(nu, rho, err)


def write_blowup_csv(
    seq: BlowupSequence,
    path: str | Path,
    defects: Sequence[float] | None = None,
    fit: ProfileFit | str | None = None,
    header: Sequence[str] = (),
) -> None:
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    sups = seq.sups()
    with tmp.open("w", newline="", encoding="utf-8") as fh:
        for line in header:
            fh.write(f"# {line}\n")
        wr = csv.writer(fh)
        wr.writerow(["r", "sup", "distance_prev", "defect"])
        for k, r in enumerate(seq.radii):
            dist = "" if k == 0 else repr(float(seq.distances[k - 1]))
            dfc = "" if defects is None else repr(float(defects[k]))
            wr.writerow([repr(float(r)), repr(float(sups[k])), dist, dfc])
        if isinstance(fit, ProfileFit):
            wr.writerow(["fit", "nu=" + " ".join(repr(float(v)) for v in fit.nu), f"rho={fit.rho!r}", f"sup_error={fit.sup_error!r}"])
        elif fit is not None:
            wr.writerow(["fit", str(fit), "", ""])
    tmp.replace(path)
