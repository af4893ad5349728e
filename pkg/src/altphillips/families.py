"""Named coefficient and boundary-datum families.

Families are written as call expressions, e.g. ``holder_bump(0.5, 0.3, 0.5, 0)``
or ``profile_trace(2/3, 1, [1 0], 0.2)``; keyword arguments such as
``axis=1`` are allowed after the positional ones.
"""

from __future__ import annotations

import ast
import re
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .blowup import rho_constant
from .grid import CoefficientPair, GridSpec, ScalarField, read_field

__all__ = [
    "FamilySpec",
    "parse_family",
    "gamma_field",
    "delta_field",
    "coefficient_pair",
    "boundary_datum",
    "GAMMA_FLOOR",
    "DELTA_FLOOR",
]

GAMMA_FLOOR = 0.05
DELTA_FLOOR = 1e-3

_CALL = re.compile(r"^\s*([A-Za-z_][A-Za-z0-9_]*)\s*\((.*)\)\s*$", re.S)


@dataclass(frozen=True)
class FamilySpec:
    name: str
    args: tuple
    kwargs: tuple  # sorted (key, value) pairs

    def kw(self, key: str, default=None):
        return dict(self.kwargs).get(key, default)

    def __str__(self) -> str:
        parts = [_fmt(a) for a in self.args] + [f"{k}={_fmt(v)}" for k, v in self.kwargs]
        return f"{self.name}({', '.join(parts)})"


def _fmt(v) -> str:
    if isinstance(v, tuple):
        return "[" + " ".join(repr(float(x)) for x in v) + "]"
    if isinstance(v, str):
        return v
    return repr(v)


def _split_top(text: str) -> list[str]:
    out, depth, cur = [], 0, []
    for ch in text:
        if ch in "[(":
            depth += 1
        elif ch in "])":
            depth -= 1
        if ch == "," and depth == 0:
            out.append("".join(cur))
            cur = []
        else:
            cur.append(ch)
    if depth != 0:
        raise ValueError("unbalanced brackets")
    tail = "".join(cur)
    if tail.strip() or out:
        out.append(tail)
    return [s.strip() for s in out]


_SAFE_NODES = (ast.Expression, ast.BinOp, ast.UnaryOp, ast.Constant, ast.Add, ast.Sub, ast.Mult, ast.Div, ast.Pow, ast.USub, ast.UAdd)


def _number(tok: str) -> float:
    """Numeric literal or simple arithmetic such as ``2/3``."""
    tree = ast.parse(tok, mode="eval")
    if not all(isinstance(n, _SAFE_NODES) for n in ast.walk(tree)):
        raise ValueError(f"not a number: {tok!r}")
    val = eval(compile(tree, "<family>", "eval"), {"__builtins__": {}})
    return float(val)


def _value(tok: str):
    if not tok:
        raise ValueError("empty argument")
    if tok.startswith("["):
        if not tok.endswith("]"):
            raise ValueError(f"bad vector {tok!r}")
        return tuple(_number(t) for t in tok[1:-1].replace(",", " ").split())
    if tok[0] in "\"'":
        return tok.strip("\"'")
    try:
        return _number(tok)
    except (SyntaxError, ValueError):
        return tok


def parse_family(text: str) -> FamilySpec:
    m = _CALL.match(text)
    if not m:
        raise ValueError(f"expected name(args), got {text!r}")
    args, kwargs = [], {}
    for tok in _split_top(m.group(2)):
        key, eq, rest = tok.partition("=")
        if eq and re.fullmatch(r"[A-Za-z_]\w*", key.strip()):
            kwargs[key.strip()] = _value(rest.strip())
        else:
            if kwargs:
                raise ValueError("positional argument after keyword")
            args.append(_value(tok))
    return FamilySpec(m.group(1), tuple(args), tuple(sorted(kwargs.items())))


def _want(spec: FamilySpec, n: int):
    if len(spec.args) != n:
        raise ValueError(f"{spec.name} takes {n} positional arguments, got {len(spec.args)}")
    for a in spec.args:
        if not isinstance(a, float):
            raise ValueError(f"{spec.name}: numeric arguments expected")


def _axis(spec: FamilySpec, grid: GridSpec) -> int:
    ax = int(spec.kw("axis", 1))
    if not 1 <= ax <= grid.dim:
        raise ValueError(f"axis {ax} out of range")
    return ax - 1


def _point(value, dim: int) -> np.ndarray:
    v = np.atleast_1d(np.asarray(value, dtype=float))
    if v.size == 1:
        return np.full(dim, float(v[0]))
    if v.size != dim:
        raise ValueError("point has the wrong dimension")
    return v


def _raw(spec: FamilySpec, grid: GridSpec) -> tuple[np.ndarray, float | None]:
    """Unclamped values and the Hoelder exponent when the family has one."""
    X = grid.coords
    shape = grid.shape
    if spec.name == "constant":
        _want(spec, 1)
        return np.full(shape, spec.args[0]), None
    if spec.name == "affine":
        _want(spec, 2)
        a, b = spec.args
        return a + b * X[_axis(spec, grid)], 1.0
    if spec.name == "holder_bump":
        if len(spec.args) != 4 or not all(isinstance(a, (float, tuple)) for a in spec.args):
            raise ValueError("holder_bump takes (value0, amplitude, mu, x0)")
        g0, amp, mu, x0 = spec.args
        if not mu > 0:
            raise ValueError("holder_bump: mu must be positive")
        if spec.kw("axis") is not None:
            ax = _axis(spec, grid)
            dist = np.abs(X[ax] - _point(x0, 1)[0])
        else:
            c = _point(x0, grid.dim)
            dist = np.sqrt(sum((x - ci) ** 2 for x, ci in zip(X, c)))
        return g0 + amp * dist**mu, min(float(mu), 1.0)
    if spec.name == "sinusoid":
        _want(spec, 3)
        mean, amp, freq = spec.args
        return mean + amp * np.sin(2.0 * np.pi * freq * X[_axis(spec, grid)]), 1.0
    raise ValueError(f"unknown coefficient family {spec.name!r}")


def gamma_field(spec: FamilySpec | str, grid: GridSpec) -> tuple[ScalarField, float | None]:
    if isinstance(spec, str):
        spec = parse_family(spec)
    v, mu = _raw(spec, grid)
    return ScalarField(grid, np.clip(v, GAMMA_FLOOR, 1.0)), mu


def delta_field(spec: FamilySpec | str, grid: GridSpec) -> ScalarField:
    if isinstance(spec, str):
        spec = parse_family(spec)
    v, _ = _raw(spec, grid)
    return ScalarField(grid, np.maximum(v, DELTA_FLOOR))


def coefficient_pair(gamma: FamilySpec | str, delta: FamilySpec | str, grid: GridSpec) -> CoefficientPair:
    g, mu = gamma_field(gamma, grid)
    return CoefficientPair(g, delta_field(delta, grid), holder_mu=mu)


def _direction(value, dim: int) -> np.ndarray:
    if isinstance(value, str):
        sign = -1.0 if value.startswith("-") else 1.0
        m = re.fullmatch(r"[+-]?e([12])", value)
        if not m or int(m.group(1)) > dim:
            raise ValueError(f"bad direction {value!r}")
        nu = np.zeros(dim)
        nu[int(m.group(1)) - 1] = sign
        return nu
    nu = np.atleast_1d(np.asarray(value, dtype=float))
    if nu.size != dim:
        raise ValueError("direction has the wrong dimension")
    norm = float(np.linalg.norm(nu))
    if norm == 0.0:
        raise ValueError("direction must be nonzero")
    return nu / norm


def boundary_datum(spec: FamilySpec | str, grid: GridSpec, base: Path | None = None) -> ScalarField:
    """Datum field on all nodes; only its boundary values constrain the problem."""
    if isinstance(spec, str):
        spec = parse_family(spec)
    if spec.name == "constant":
        _want(spec, 1)
        if spec.args[0] < 0:
            raise ValueError("boundary datum must be nonnegative")
        return ScalarField.constant(grid, spec.args[0])
    if spec.name == "profile_trace":
        if len(spec.args) != 4:
            raise ValueError("profile_trace takes (gamma0, delta0, nu, offset)")
        g0, d0, nu, off = spec.args
        rho, beta = rho_constant(float(g0), float(d0))
        nu = _direction(nu, grid.dim)
        s = sum(c * n for c, n in zip(grid.coords, nu)) - float(off)
        return ScalarField(grid, rho * np.maximum(s, 0.0) ** beta)
    if spec.name == "field_file":
        if len(spec.args) != 1:
            raise ValueError("field_file takes one path")
        path = Path(str(spec.args[0]))
        if base is not None and not path.is_absolute():
            path = base / path
        fld = read_field(path)
        if fld.grid != grid:
            raise ValueError("field_file grid does not match the configured grid")
        return fld
    raise ValueError(f"unknown boundary family {spec.name!r}")
