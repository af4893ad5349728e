"""Projected descent for the regularised energy with epsilon-continuation."""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .energy import (
    EnergyParams,
    Weights,
    _energy_values,
    _gradient_values,
    discrete_laplacian,
    energy,
    harmonic_replacement,
)
from .grid import CoefficientPair, GridSpec, ScalarField

__all__ = [
    "SolverParams",
    "Problem",
    "MinimizeResult",
    "LogEntry",
    "minimize",
    "el_residual",
    "default_floor",
    "competitor_test",
    "CompetitorReport",
    "write_log_csv",
]

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class SolverParams:
    """Descent controls.

    ``pg_tol`` is an absolute sup-norm bound on the projected gradient; when
    left as ``None`` it resolves to ``1e-8`` times the cell volume, i.e. a
    pointwise residual of ``1e-8`` in the Euler-Lagrange equation.
    ``step_init = None`` means the inverse of the Dirichlet Hessian diagonal.
    """

    epsilon_schedule: tuple[float, ...] = (1e-1, 1e-2, 1e-3, 1e-4, 1e-5, 1e-6)
    max_iters: int = 20000
    pg_tol: float | None = None
    armijo_c: float = 1e-4
    step_init: float | None = None
    step_shrink: float = 0.5
    bb_steps: bool = True
    method: str = "two-metric"

    def __post_init__(self):
        sched = tuple(float(e) for e in self.epsilon_schedule)
        object.__setattr__(self, "epsilon_schedule", sched)
        if any(e <= 0 for e in sched):
            raise ValueError("epsilon schedule must be positive")
        if any(b >= a for a, b in zip(sched, sched[1:])):
            raise ValueError("epsilon schedule must be strictly decreasing")
        if self.max_iters < 0:
            raise ValueError("max_iters must be nonnegative")
        if self.pg_tol is not None and not self.pg_tol > 0:
            raise ValueError("pg_tol must be positive")
        if not 0 < self.armijo_c < 1:
            raise ValueError("armijo_c must lie in (0, 1)")
        if self.method not in ("two-metric", "gradient"):
            raise ValueError(f"unknown method {self.method!r}")
        if not 0 < self.step_shrink < 1:
            raise ValueError("step_shrink must lie in (0, 1)")

    def tolerance(self, grid: GridSpec) -> float:
        return self.pg_tol if self.pg_tol is not None else 1e-8 * grid.cell_volume


@dataclass(frozen=True)
class Problem:
    coeffs: CoefficientPair
    boundary_datum: ScalarField
    solver: SolverParams = SolverParams()

    def __post_init__(self):
        if self.boundary_datum.grid != self.coeffs.grid:
            raise ValueError("boundary datum and coefficients live on different grids")
        phi = self.boundary_datum.values[self.grid.boundary_mask]
        if phi.min() < 0:
            raise ValueError("boundary datum must be nonnegative on the Dirichlet nodes")

    @property
    def grid(self) -> GridSpec:
        return self.coeffs.grid

    @property
    def phi_max(self) -> float:
        return float(self.boundary_datum.values[self.grid.boundary_mask].max())


class LogEntry(tuple):
    """``(stage, iter, energy, pg_norm, step)``."""

    __slots__ = ()
    fields = ("stage", "iter", "energy", "pg_norm", "step")

    def __new__(cls, stage, it, e, pg, step):
        return super().__new__(cls, (int(stage), int(it), float(e), float(pg), float(step)))

    stage = property(lambda s: s[0])
    iter = property(lambda s: s[1])
    energy = property(lambda s: s[2])
    pg_norm = property(lambda s: s[3])
    step = property(lambda s: s[4])


@dataclass
class MinimizeResult:
    u: ScalarField
    log: list[LogEntry]
    converged: list[bool]
    pg_tol: float
    stage_epsilons: tuple[float, ...] = field(default_factory=tuple)

    def stage_log(self, stage: int) -> list[LogEntry]:
        return [e for e in self.log if e.stage == stage]


def _projected_gradient(u: np.ndarray, g: np.ndarray, free: np.ndarray) -> np.ndarray:
    pg = np.where(u > 0.0, g, np.minimum(g, 0.0))
    pg[~free] = 0.0
    return pg


def dirichlet_hessian(grid: GridSpec, w: Weights) -> sp.csr_matrix:
    """Hessian of the discrete Dirichlet term over all nodes (row-major)."""
    idx = np.arange(grid.size).reshape(grid.shape)
    rows, cols, vals = [], [], []
    for a, we in enumerate(w.edges):
        lo = [slice(None)] * grid.dim
        hi = [slice(None)] * grid.dim
        lo[a] = slice(None, -1)
        hi[a] = slice(1, None)
        i = idx[tuple(lo)].ravel()
        j = idx[tuple(hi)].ravel()
        c = we.ravel()
        rows += [i, j, i, j]
        cols += [i, j, j, i]
        vals += [c, c, -c, -c]
    return sp.csr_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(grid.size, grid.size)
    )


class _DirichletMetric:
    """Factorisations of the Dirichlet Hessian restricted to node subsets."""

    def __init__(self, grid: GridSpec, w: Weights):
        self.H = dirichlet_hessian(grid, w)
        self._key = None
        self._lu = None
        self._sub = None

    def solve(self, rhs: np.ndarray, subset: np.ndarray) -> np.ndarray:
        key = subset.tobytes()
        if key != self._key:
            sel = np.flatnonzero(subset.ravel())
            self._sub = sel
            self._lu = spla.splu(self.H[sel][:, sel].tocsc())
            self._key = key
        out = np.zeros(rhs.size)
        out[self._sub] = self._lu.solve(rhs.ravel()[self._sub])
        return out.reshape(rhs.shape)


def minimize(problem: Problem) -> MinimizeResult:
    """Projected descent with Armijo backtracking, one stage per epsilon.

    Interior values are clamped to ``>= 0``; boundary nodes stay at the datum.
    Each stage starts from the previous stage's iterate; the first starts from
    the harmonic extension of the boundary datum.  Every logged iterate was
    accepted by the Armijo test along the projection arc, so energies never
    increase within a stage.

    With ``method="two-metric"`` the free variables away from the bound move
    along the gradient measured in the Dirichlet metric, while variables
    pinned at zero take plain gradient steps; ``method="gradient"`` is the
    unscaled projected gradient iteration.
    """
    params = problem.solver
    if not params.epsilon_schedule:
        raise ValueError("empty epsilon schedule")
    grid = problem.grid
    free = ~grid.boundary_mask
    w = Weights(grid)
    gamma = problem.coeffs.gamma.values
    delta = problem.coeffs.delta.values
    tol = params.tolerance(grid)
    scaled = params.method == "two-metric"
    metric = _DirichletMetric(grid, w) if scaled else None

    start = np.where(grid.boundary_mask, problem.boundary_datum.values, 0.0)
    u = np.array(harmonic_replacement(ScalarField(grid, start)).values)
    u[free] = np.maximum(u[free], 0.0)

    hess_diag = 2.0 * sum(grid.cell_volume / h**2 for h in grid.spacing)
    base_step = params.step_init if params.step_init is not None else 1.0 / hess_diag
    unit = 1.0 if scaled else base_step
    step_min = unit * 1e-12
    step_max = unit * 1e8

    entries: list[LogEntry] = []
    converged: list[bool] = []
    for stage, eps in enumerate(params.epsilon_schedule):
        E = _energy_values(u, gamma, delta, eps, w)
        g = _gradient_values(u, gamma, delta, eps, w)
        if not math.isfinite(E):
            raise FloatingPointError("diverged: non-finite energy")
        pg = _projected_gradient(u, g, free)
        pg_norm = float(np.abs(pg).max())
        entries.append(LogEntry(stage, 0, E, pg_norm, 0.0))
        step = unit
        ok = pg_norm <= tol
        it = 0
        while not ok and it < params.max_iters:
            it += 1
            if scaled:
                # nodes held at the bound by the gradient (Bertsekas' two-metric split)
                reach = np.abs(u - np.maximum(u - base_step * g, 0.0)).max()
                pinned = free & (u <= min(reach, 1e-3 * max(problem.phi_max, 1.0))) & (g > 0)
                moving = free & ~pinned
                d = np.zeros_like(u)
                d[pinned] = -base_step * g[pinned]
                d += -metric.solve(np.where(moving, g, 0.0), moving)
            else:
                d = -g
                moving = free
            alpha = step
            while True:
                trial = u + alpha * d
                trial[free] = np.maximum(trial[free], 0.0)
                trial[~free] = u[~free]
                s = trial - u
                Et = _energy_values(trial, gamma, delta, eps, w)
                if not math.isfinite(Et):
                    raise FloatingPointError("diverged: non-finite energy")
                decrease = float(np.sum(g * s))
                if decrease < 0 and Et <= E + params.armijo_c * decrease:
                    break
                alpha *= params.step_shrink
                if alpha < step_min:
                    break
            if alpha < step_min:
                log.debug("stage %d: line search stalled at iter %d", stage, it)
                break
            gt = _gradient_values(trial, gamma, delta, eps, w)
            if params.bb_steps:
                y = gt - g
                sy = float(np.sum(s * y))
                if scaled:
                    sm = np.where(moving, s, 0.0).ravel()
                    num = float(sm @ (metric.H @ sm))
                else:
                    num = float(np.sum(s * s))
                step = num / sy if sy > 0 and num > 0 else alpha * 2.0
            else:
                step = alpha / params.step_shrink
            step = float(np.clip(step, step_min * 1e3, step_max))
            u, g, E = trial, gt, Et
            pg = _projected_gradient(u, g, free)
            pg_norm = float(np.abs(pg).max())
            entries.append(LogEntry(stage, it, E, pg_norm, alpha))
            ok = pg_norm <= tol
        converged.append(bool(ok))
        log.info("stage %d eps=%.1e iters=%d pg=%.3e converged=%s", stage, eps, it, pg_norm, ok)
    return MinimizeResult(ScalarField(grid, u), entries, converged, tol, params.epsilon_schedule)


def default_floor(h: float, gamma_hi: float) -> float:
    """Positivity floor ``10 h**(2/(2-gamma_hi))``."""
    return 10.0 * h ** (2.0 / (2.0 - gamma_hi))


def el_residual(u: ScalarField, coeffs: CoefficientPair, positivity_floor: float | None = None) -> float:
    """Relative Euler-Lagrange residual ``|Lap u - delta gamma u^(gamma-1)| u^(1-gamma)``.

    Maximised over interior nodes above the floor.
    """
    grid = u.grid
    if positivity_floor is None:
        positivity_floor = default_floor(grid.h, coeffs.gamma_hi)
    v = u.values
    sel = (v > positivity_floor) & ~grid.boundary_mask
    if not sel.any():
        raise ValueError("empty positivity set")
    lap = discrete_laplacian(v, grid)[sel]
    g = coeffs.gamma.values[sel]
    d = coeffs.delta.values[sel]
    s = v[sel]
    res = np.abs(lap * s ** (1.0 - g) - d * g)
    return float(res.max())


@dataclass
class CompetitorReport:
    energy_u: float
    energies: list[float]
    margins: list[float]
    slack: float

    @property
    def passed(self) -> bool:
        return all(m >= -self.slack for m in self.margins)


def competitor_test(u: ScalarField, problem: Problem, competitors: Sequence[ScalarField]) -> CompetitorReport:
    """Compare the unregularised energy of ``u`` against admissible competitors."""
    grid = problem.grid
    bmask = grid.boundary_mask
    phi = problem.boundary_datum.values[bmask]
    tol = problem.solver.tolerance(grid)
    slack = tol * grid.size
    e_u = energy(u, problem.coeffs)
    energies, margins = [], []
    for v in competitors:
        if v.grid != grid:
            raise ValueError("competitor on a different grid")
        if not np.array_equal(v.values[bmask], phi):
            raise ValueError("competitor violates the boundary data")
        e_v = energy(v, problem.coeffs)
        energies.append(e_v)
        margins.append(e_v - e_u)
    report = CompetitorReport(e_u, energies, margins, slack)
    if not report.passed:
        raise AssertionError(f"competitor beats the minimiser: margins {margins} below -{slack:g}")
    return report


def write_log_csv(result: MinimizeResult, path: str | Path, header: Sequence[str] = ()) -> None:
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    with tmp.open("w", newline="", encoding="utf-8") as fh:
        for line in header:
            fh.write(f"# {line}\n")
        wr = csv.writer(fh)
        wr.writerow(LogEntry.fields)
        for e in result.log:
            wr.writerow([e[0], e[1], repr(e[2]), repr(e[3]), repr(e[4])])
    tmp.replace(path)
