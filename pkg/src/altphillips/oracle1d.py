"""One-dimensional ground truth for the free boundary problem.

Two routes that never touch the grid minimiser:

* :func:`exact_profile` -- the closed-form half-line solution
  ``rho0 * (x - x_fb)_+ ** beta0`` for constant coefficients;
* :func:`shoot` -- outward shooting from a trial free boundary for varying
  coefficients, with bisection on the free boundary location.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np
from scipy.integrate import solve_ivp

__all__ = [
    "ExactProfile1D",
    "exact_profile",
    "ShootResult",
    "shoot",
    "local_growth_exponent",
    "write_samples_csv",
]


def _check_coeffs(gamma0: float, delta0: float):
    if not (0.0 < gamma0 <= 1.0) or not delta0 > 0.0:
        raise ValueError(f"need 0 < gamma0 <= 1 and delta0 > 0, got {gamma0}, {delta0}")


def _frozen_constants(gamma0: float, delta0: float) -> tuple[float, float]:
    # balance of rho*beta*(beta-1)*s**(beta-2) against delta*gamma*(rho*s**beta)**(gamma-1)
    beta0 = 2.0 / (2.0 - gamma0)
    rho0 = (delta0 * gamma0 / (beta0 * (beta0 - 1.0))) ** (1.0 / (2.0 - gamma0))
    return beta0, rho0


@dataclass(frozen=True)
class ExactProfile1D:
    gamma0: float
    delta0: float
    x_fb: float
    beta0: float
    rho0: float

    def __call__(self, x):
        s = np.maximum(np.asarray(x, dtype=float) - self.x_fb, 0.0)
        return self.rho0 * s**self.beta0

    def derivative(self, x):
        s = np.maximum(np.asarray(x, dtype=float) - self.x_fb, 0.0)
        return self.rho0 * self.beta0 * s ** (self.beta0 - 1.0)

    def second_derivative(self, x):
        s = np.asarray(x, dtype=float) - self.x_fb
        out = np.zeros_like(s)
        pos = s > 0
        out[pos] = self.rho0 * self.beta0 * (self.beta0 - 1.0) * s[pos] ** (self.beta0 - 2.0)
        return out

    def inverse(self, value: float) -> float:
        """Point ``x > x_fb`` with ``u(x) = value``."""
        return self.x_fb + (value / self.rho0) ** (1.0 / self.beta0)


def exact_profile(gamma0: float, delta0: float, x_fb: float) -> ExactProfile1D:
    _check_coeffs(gamma0, delta0)
    beta0, rho0 = _frozen_constants(gamma0, delta0)
    return ExactProfile1D(float(gamma0), float(delta0), float(x_fb), beta0, rho0)


@dataclass
class ShootResult:
    x_fb: float
    x: np.ndarray
    u: np.ndarray
    du: np.ndarray
    sigma: float
    right_value: float
    iterations: int
    beta_fb: float
    dense: Callable = field(repr=False, default=None)

    def __call__(self, x):
        """Evaluate the solution (zero to the left of the free boundary)."""
        x = np.asarray(x, dtype=float)
        out = np.zeros_like(x)
        lo = self.x_fb + self.sigma
        seeded = (x > self.x_fb) & (x < lo)
        inner = x >= lo
        if np.any(inner):
            out[inner] = self.dense(x[inner])[0]
        if np.any(seeded):
            # frozen-coefficient expansion below the seed point
            u0 = self.dense(np.array([lo]))[0, 0]
            out[seeded] = u0 * ((x[seeded] - self.x_fb) / self.sigma) ** self.beta_fb
        return out


def _integrate(gamma, delta, x_fb, sigma, b, rtol, atol, dense=False):
    g0 = float(gamma(x_fb))
    d0 = float(delta(x_fb))
    _check_coeffs(g0, d0)
    beta, rho = _frozen_constants(g0, d0)
    x0 = x_fb + sigma
    y0 = [rho * sigma**beta, rho * beta * sigma ** (beta - 1.0)]

    def rhs(x, y):
        u = y[0]
        if u <= 0.0:
            return [y[1], 0.0]
        return [y[1], float(delta(x)) * float(gamma(x)) * u ** (float(gamma(x)) - 1.0)]

    sol = solve_ivp(rhs, (x0, b), y0, method="RK45", rtol=rtol, atol=atol, dense_output=dense)
    if sol.status != 0 or not np.all(np.isfinite(sol.y)):
        raise FloatingPointError(f"integration blew up from x_fb={x_fb}: {sol.message}")
    return sol, beta


def shoot(
    gamma: Callable[[float], float],
    delta: Callable[[float], float],
    a: float,
    b: float,
    right_value: float,
    sigma: float | None = None,
    tol: float = 1e-9,
    samples: int = 2001,
    rtol: float = 1e-11,
    atol: float = 1e-14,
    max_bisect: int = 200,
) -> ShootResult:
    """Solve ``u'' = delta gamma u**(gamma-1)`` on ``{u > 0}`` with ``u(b) = right_value``.

    The free boundary ``x_fb`` in ``(a, b)`` is located by bisection; each trial
    seeds the frozen-coefficient expansion at ``x_fb + sigma`` and integrates to
    ``b`` with an adaptive Dormand-Prince pair.
    """
    if not right_value > 0:
        raise ValueError("right_value must be positive")
    if not b > a:
        raise ValueError("need a < b")
    if sigma is None:
        sigma = 1e-6 * (b - a)

    def end_value(x_fb):
        sol, _ = _integrate(gamma, delta, x_fb, sigma, b, rtol, atol)
        return float(sol.y[0, -1])

    lo, hi = a, b - 2.0 * sigma
    # u(b) decreases as the free boundary moves right
    if end_value(lo) < right_value:
        raise ValueError("no interior free boundary: right_value unreachable")
    if end_value(hi) > right_value:
        raise ValueError("no interior free boundary: right_value below reach")
    it = 0
    mid = 0.5 * (lo + hi)
    while it < max_bisect:
        it += 1
        mid = 0.5 * (lo + hi)
        val = end_value(mid)
        if abs(val - right_value) <= tol or hi - lo <= 4 * np.finfo(float).eps * max(1.0, abs(mid)):
            break
        if val > right_value:
            lo = mid
        else:
            hi = mid
    sol, beta = _integrate(gamma, delta, mid, sigma, b, rtol, atol, dense=True)
    xs = np.linspace(mid + sigma, b, samples)
    ys = sol.sol(xs)
    return ShootResult(mid, xs, ys[0], ys[1], sigma, float(right_value), it, beta, sol.sol)


def write_samples_csv(result: ShootResult, path: str | Path, header=()) -> None:
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    with tmp.open("w", newline="", encoding="utf-8") as fh:
        for line in header:
            fh.write(f"# {line}\n")
        wr = csv.writer(fh)
        wr.writerow(["x", "u", "du"])
        for x, u, du in zip(result.x, result.u, result.du):
            wr.writerow([repr(float(x)), repr(float(u)), repr(float(du))])
    tmp.replace(path)


def local_growth_exponent(result: ShootResult, window: float = 1e-2, points: int = 50) -> float:
    """Log-log slope of the shot solution on ``(x_fb, x_fb + window]``."""
    s = np.geomspace(window * 1e-2, window, points)
    vals = result(result.x_fb + s)
    slope = np.polyfit(np.log(s), np.log(vals), 1)[0]
    return float(slope)

