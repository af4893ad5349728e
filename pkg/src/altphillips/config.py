"""Sectioned ``key = value`` experiment configurations.

Example::

    [grid]
    dim = 2
    cells = 256
    extent = -1, 1

    [coefficients]
    gamma = constant(2/3)
    delta = constant(1)

    [boundary]
    datum = profile_trace(2/3, 1, e1, 0.2)

    [solver]
    epsilon_schedule = 1e-1, 1e-2, 1e-3, 1e-4, 1e-5, 1e-6

    [analysis]
    r_min_cells = 8
    r_max = 0.4

    [output]
    dir = out
    emit_plots = true
"""

from __future__ import annotations

import configparser
import hashlib
from dataclasses import dataclass, field, fields
from pathlib import Path

from .families import FamilySpec, boundary_datum, coefficient_pair, parse_family
from .grid import CoefficientPair, GridSpec, box_grid
from .minimize import Problem, SolverParams

__all__ = ["ConfigError", "AnalysisParams", "ExperimentConfig", "parse_config", "load_config"]


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class AnalysisParams:
    r_min_cells: float = 8.0
    r_max: float | None = None
    radii_count: int | None = None
    floor: float | None = None  # positivity floor; None means the solver default
    location_floor_rel: float = 1e-12
    angular: int = 512
    radial: int = 64
    slack: float = 0.02
    blowup_tol: float = 0.05
    blowup_radii: tuple[float, ...] = (0.5, 0.25, 0.125, 0.0625)
    centers: str = "auto"
    max_centers: int = 64


@dataclass(frozen=True)
class ExperimentConfig:
    grid: GridSpec
    gamma: FamilySpec
    delta: FamilySpec
    datum: FamilySpec
    solver: SolverParams = SolverParams()
    analysis: AnalysisParams = AnalysisParams()
    out_dir: Path = Path("out")
    emit_plots: bool = False
    digest: str = ""
    base: Path | None = field(default=None, compare=False)

    def coefficients(self) -> CoefficientPair:
        return coefficient_pair(self.gamma, self.delta, self.grid)

    def problem(self) -> Problem:
        co = self.coefficients()
        return Problem(co, boundary_datum(self.datum, self.grid, self.base), self.solver)


def _floats(text: str) -> tuple[float, ...]:
    parts = [p for p in text.replace(",", " ").split() if p]
    if not parts:
        raise ConfigError("empty list")
    return tuple(float(p) for p in parts)


def _opt_float(text: str | None) -> float | None:
    if text is None or text.strip().lower() in ("", "none", "auto"):
        return None
    return float(text)


_KNOWN = {
    "grid": {"dim", "cells", "extent"},
    "coefficients": {"gamma", "delta"},
    "boundary": {"datum"},
    "solver": {"epsilon_schedule", "max_iters", "pg_tol", "armijo_c", "step_init", "step_shrink", "bb_steps", "method"},
    "analysis": {f.name for f in fields(AnalysisParams)},
    "output": {"dir", "emit_plots"},
}


def parse_config(text: str, base: Path | None = None) -> ExperimentConfig:
    cp = configparser.ConfigParser(interpolation=None)
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"parse error: {exc}") from exc
    for sec in cp.sections():
        if sec not in _KNOWN:
            raise ConfigError(f"unknown section [{sec}]")
        extra = set(cp[sec]) - _KNOWN[sec]
        if extra:
            raise ConfigError(f"unknown keys in [{sec}]: {', '.join(sorted(extra))}")
    for sec in ("grid", "coefficients", "boundary"):
        if sec not in cp:
            raise ConfigError(f"missing section [{sec}]")
    try:
        g = cp["grid"]
        dim = int(g.get("dim", "2"))
        cells = int(g["cells"])
        lo, hi = _floats(g.get("extent", "-1, 1"))
        grid = box_grid(dim, cells, lo, hi)

        c = cp["coefficients"]
        gamma = parse_family(c["gamma"])
        delta = parse_family(c.get("delta", "constant(1)"))
        datum = parse_family(cp["boundary"]["datum"])

        s = cp["solver"] if "solver" in cp else {}
        kw = {}
        if "epsilon_schedule" in s:
            kw["epsilon_schedule"] = _floats(s["epsilon_schedule"])
        if "max_iters" in s:
            kw["max_iters"] = int(s["max_iters"])
        for key in ("pg_tol", "step_init"):
            if key in s:
                kw[key] = _opt_float(s[key])
        for key in ("armijo_c", "step_shrink"):
            if key in s:
                kw[key] = float(s[key])
        if "bb_steps" in s:
            kw["bb_steps"] = cp.getboolean("solver", "bb_steps")
        if "method" in s:
            kw["method"] = s["method"].strip()
        solver = SolverParams(**kw)

        a = cp["analysis"] if "analysis" in cp else {}
        akw = {}
        for f in fields(AnalysisParams):
            if f.name not in a:
                continue
            raw = a[f.name]
            if f.name in ("r_max", "floor"):
                akw[f.name] = _opt_float(raw)
            elif f.name in ("radii_count",):
                akw[f.name] = None if raw.strip().lower() in ("", "none", "auto") else int(raw)
            elif f.name in ("angular", "radial", "max_centers"):
                akw[f.name] = int(raw)
            elif f.name == "blowup_radii":
                akw[f.name] = _floats(raw)
            elif f.name == "centers":
                akw[f.name] = raw.strip()
            else:
                akw[f.name] = float(raw)
        analysis = AnalysisParams(**akw)

        o = cp["output"] if "output" in cp else {}
        out_dir = Path(o.get("dir", "out"))
        emit = cp.getboolean("output", "emit_plots") if "output" in cp and "emit_plots" in o else False
    except ConfigError:
        raise
    except (KeyError, ValueError, TypeError) as exc:
        raise ConfigError(f"invalid configuration: {exc}") from exc
    digest = hashlib.sha256(text.encode("utf-8")).hexdigest()[:16]
    cfg = ExperimentConfig(grid, gamma, delta, datum, solver, analysis, out_dir, emit, digest, base)
    try:
        cfg.coefficients()
    except ValueError as exc:
        raise ConfigError(f"invalid coefficients: {exc}") from exc
    return cfg


def load_config(path: str | Path) -> ExperimentConfig:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from exc
    return parse_config(text, base=path.parent)
