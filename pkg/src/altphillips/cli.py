"""Command-line harness: ``altphillips {minimize,growth,weiss,blowup,suite}``.

Exit codes: 0 ok, 2 usage or parse error, 3 empty result, 4 property violation.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path
from typing import Sequence

import numpy as np

from . import __version__
from .blowup import ProfileFit, blowup_sequence, classify_blowup, write_blowup_csv
from .config import ConfigError, ExperimentConfig, load_config
from .fbanalysis import extract_free_boundary, fit_growth_exponent, sample_boundary_points, write_growth_csv
from .grid import read_field, write_field
from .minimize import el_residual, minimize, write_log_csv
from .weiss import QuadParams, check_monotone, homogeneity_defect, weiss_series, write_weiss_csv

EXIT_OK, EXIT_USAGE, EXIT_EMPTY, EXIT_VIOLATION = 0, 2, 3, 4

log = logging.getLogger("altphillips")

# spheres of the unit reference ball used for the homogeneity defect
DEFECT_RADII = (0.25, 0.5, 0.75)


class CliError(Exception):
    def __init__(self, message: str, code: int = EXIT_USAGE):
        super().__init__(message)
        self.code = code


def _manifest(cfg: ExperimentConfig | None, command: str, seed: int) -> list[str]:
    digest = cfg.digest if cfg is not None else "none"
    return [f"altphillips {__version__} command={command} config_sha256={digest} seed={seed}"]


_PLOT_TEMPLATE = '''"""Plot {csv} (generated)."""
import csv
import matplotlib.pyplot as plt

rows = [r for r in csv.reader(open({csv!r})) if r and not r[0].startswith("#")]
head, data = rows[0], rows[1:]
data = [r for r in data if r[0] != "fit"]
cols = {{name: [float(r[i]) if r[i] else float("nan") for r in data] for i, name in enumerate(head)}}
fig, ax = plt.subplots()
for y in {ycols!r}:
    ax.{plot}(cols[{x!r}], cols[y], "o-", label=y)
ax.set_xlabel({x!r})
ax.legend()
fig.savefig({png!r}, dpi=120)
'''


def _emit_plot(cfg: ExperimentConfig, csv_path: Path, x: str, ycols: Sequence[str], loglog: bool = False) -> None:
    if not cfg.emit_plots:
        return
    script = _PLOT_TEMPLATE.format(
        csv=csv_path.name, x=x, ycols=list(ycols), png=csv_path.with_suffix(".png").name, plot="loglog" if loglog else "plot"
    )
    path = csv_path.with_name("plot_" + csv_path.stem + ".py")
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(script, encoding="utf-8")
    tmp.replace(path)


def _out_dir(cfg: ExperimentConfig, override: str | None) -> Path:
    out = Path(override) if override else cfg.out_dir
    out.mkdir(parents=True, exist_ok=True)
    return out


def _load_field(path: str | None, cfg: ExperimentConfig):
    if path is None:
        raise CliError("--field is required")
    try:
        fld = read_field(path)
    except (OSError, ValueError) as exc:
        raise CliError(f"cannot read field: {exc}") from exc
    if fld.grid != cfg.grid:
        raise CliError("field grid does not match the configured grid")
    return fld


def _parse_points(text: str, dim: int) -> list[np.ndarray]:
    pts = []
    for chunk in text.split(";"):
        chunk = chunk.strip()
        if not chunk:
            continue
        vals = [float(v) for v in chunk.replace(",", " ").split()]
        if len(vals) != dim:
            raise CliError(f"point {chunk!r} does not have {dim} coordinates")
        pts.append(np.array(vals))
    if not pts:
        raise CliError("no points given")
    return pts


def _positivity_floor(cfg: ExperimentConfig, u) -> float:
    if cfg.analysis.floor is not None:
        return cfg.analysis.floor
    return cfg.analysis.location_floor_rel * max(float(u.values.max()), 1.0)


def cmd_minimize(cfg: ExperimentConfig, args) -> int:
    out = _out_dir(cfg, args.out)
    prob = cfg.problem()
    res = minimize(prob)
    write_field(res.u, out / "solution.apf")
    write_log_csv(res, out / "log.csv", _manifest(cfg, "minimize", args.seed))
    try:
        resid = el_residual(res.u, prob.coeffs, cfg.analysis.floor)
    except ValueError:
        resid = float("nan")
    summary = {
        "converged": all(res.converged),
        "iterations": len(res.log),
        "energy": res.log[-1].energy if res.log else float("nan"),
        "max_u": float(res.u.values.max()),
        "el_residual": resid,
    }
    print(json.dumps(summary, sort_keys=True))
    return EXIT_OK


def cmd_growth(cfg: ExperimentConfig, args) -> int:
    u = _load_field(args.field, cfg)
    coeffs = cfg.coefficients()
    a = cfg.analysis
    centers = args.centers or a.centers
    if centers == "auto":
        try:
            _, fb = extract_free_boundary(u, _positivity_floor(cfg, u))
        except ValueError as exc:
            raise CliError(str(exc), EXIT_EMPTY) from exc
        if len(fb) == 0:
            raise CliError("empty free boundary", EXIT_EMPTY)
        pts = list(sample_boundary_points(fb, a.max_centers))
    else:
        pts = _parse_points(centers, cfg.grid.dim)
    reports = []
    skipped: dict[str, int] = {}
    for z in pts:
        try:
            reports.append(
                fit_growth_exponent(u, coeffs, z, a.r_min_cells * cfg.grid.h, a.r_max, a.radii_count, a.angular)
            )
        except ValueError as exc:
            log.info("skipping center %s: %s", z, exc)
            skipped[str(exc)] = skipped.get(str(exc), 0) + 1
    for reason, n in sorted(skipped.items()):
        log.warning("skipped %d center(s): %s", n, reason)
    if not reports:
        raise CliError("no center admitted a growth fit", EXIT_EMPTY)
    out = _out_dir(cfg, args.out)
    path = out / "growth.csv"
    write_growth_csv(reports, path, _manifest(cfg, "growth", args.seed))
    _emit_plot(cfg, path, "r", ["sup_ball", "sup_sphere"], loglog=True)
    betas = [r.fitted_beta for r in reports]
    print(json.dumps({"centers": len(reports), "beta_min": min(betas), "beta_max": max(betas)}, sort_keys=True))
    return EXIT_OK


def _single_center(args, cfg) -> np.ndarray:
    if not args.center:
        raise CliError("--center is required")
    pts = _parse_points(args.center, cfg.grid.dim)
    if len(pts) != 1:
        raise CliError("exactly one center expected")
    return pts[0]


def cmd_weiss(cfg: ExperimentConfig, args) -> int:
    u = _load_field(args.field, cfg)
    coeffs = cfg.coefficients()
    a = cfg.analysis
    z = _single_center(args, cfg)
    r_max = a.r_max if a.r_max is not None else 0.4
    radii = np.geomspace(a.r_min_cells * cfg.grid.h, r_max, a.radii_count or 6)
    quad = QuadParams(angular=a.angular, radial=a.radial)
    try:
        series = weiss_series(u, coeffs, z, radii, quad)
    except ValueError as exc:
        raise CliError(str(exc)) from exc
    out = _out_dir(cfg, args.out)
    path = out / "weiss.csv"
    write_weiss_csv(series, path, _manifest(cfg, "weiss", args.seed))
    _emit_plot(cfg, path, "r", ["W", "bulk", "sphere"])
    rep = check_monotone(series, a.slack)
    print(json.dumps({"monotone": rep.passed, "worst_violation": rep.worst_violation, "slack": a.slack}, sort_keys=True))
    return EXIT_OK if rep.passed else EXIT_VIOLATION


def cmd_blowup(cfg: ExperimentConfig, args) -> int:
    u = _load_field(args.field, cfg)
    coeffs = cfg.coefficients()
    a = cfg.analysis
    z = _single_center(args, cfg)
    radii = [r for r in a.blowup_radii if r >= 8.0 * cfg.grid.h]
    if len(radii) < len(a.blowup_radii):
        log.warning("dropped %d blow-up radii below 8h", len(a.blowup_radii) - len(radii))
    if len(radii) < 2:
        raise CliError("fewer than two blow-up radii at or above 8h")
    try:
        seq = blowup_sequence(u, coeffs, z, radii)
    except ValueError as exc:
        raise CliError(str(exc)) from exc
    defects = [homogeneity_defect(f, np.zeros(cfg.grid.dim), seq.beta, DEFECT_RADII) for f in seq.fields]
    try:
        fit = classify_blowup(seq, coeffs, a.blowup_tol)
        code = EXIT_OK
    except ValueError as exc:
        fit = "not converged"
        log.warning("%s", exc)
        code = EXIT_VIOLATION
    out = _out_dir(cfg, args.out)
    path = out / "blowup.csv"
    write_blowup_csv(seq, path, defects, fit, _manifest(cfg, "blowup", args.seed))
    _emit_plot(cfg, path, "r", ["sup", "distance_prev"], loglog=True)
    if isinstance(fit, ProfileFit):
        summary = {"fit": "profile", "nu": [float(v) for v in fit.nu], "rho": fit.rho, "sup_error": fit.sup_error}
    else:
        summary = {"fit": fit}
    summary["last_distance"] = float(seq.distances[-1])
    print(json.dumps(summary, sort_keys=True))
    return code


def cmd_suite(args) -> int:
    from .acceptance import CRITERIA, run

    only = None
    if args.only:
        only = [s.strip() for s in args.only.split(",") if s.strip()]
        unknown = [s for s in only if s not in CRITERIA]
        if unknown:
            raise CliError(f"unknown criteria: {', '.join(unknown)}")
    names = [n for n in CRITERIA if only is None or n in only]
    ok = True
    lines = []
    for name in names:
        res = run(name, args.seed)
        ok &= res.passed
        print(res.line(), flush=True)
        lines.append(res.line())
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        path = out / "suite.txt"
        tmp = path.with_name(path.name + ".tmp")
        tmp.write_text("\n".join(_manifest(None, "suite", args.seed) + lines) + "\n", encoding="utf-8")
        tmp.replace(path)
    return EXIT_OK if ok else EXIT_VIOLATION


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="altphillips", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, config=True):
        if config:
            sp.add_argument("--config", required=True, help="experiment config file")
        sp.add_argument("--out", help="output directory (overrides [output] dir)")
        sp.add_argument("--seed", type=int, default=0)
        return sp

    common(sub.add_parser("minimize", help="solve the configured problem"))
    g = common(sub.add_parser("growth", help="growth exponents at free boundary points"))
    g.add_argument("--field", required=True)
    g.add_argument("--centers", help='"auto" or "x y; x y; ..."')
    w = common(sub.add_parser("weiss", help="Weiss series at one center"))
    w.add_argument("--field", required=True)
    w.add_argument("--center", required=True)
    b = common(sub.add_parser("blowup", help="blow-up ladder and profile fit at one center"))
    b.add_argument("--field", required=True)
    b.add_argument("--center", required=True)
    s = common(sub.add_parser("suite", help="run the acceptance battery"), config=False)
    s.add_argument("--only", help="comma-separated criteria, e.g. A1,A3")
    return p


_COMMANDS = {"minimize": cmd_minimize, "growth": cmd_growth, "weiss": cmd_weiss, "blowup": cmd_blowup}


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code is not None else EXIT_OK
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        if args.command == "suite":
            return cmd_suite(args)
        cfg = load_config(args.config)
        return _COMMANDS[args.command](cfg, args)
    except ConfigError as exc:
        print(f"altphillips: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except CliError as exc:
        print(f"altphillips: {exc}", file=sys.stderr)
        return exc.code


if __name__ == "__main__":
    sys.exit(main())
