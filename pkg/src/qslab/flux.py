"""Strictly concave flux functions on [0, 1] and their pointwise algebra.

A flux ``J`` is admissible when ``J(0) = J(1) = 0`` and ``J`` is strictly
concave, so that it has a unique maximiser ``m`` and every level ``y`` in
``[0, J(m)]`` is hit once on each side of ``m``.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np
from scipy.interpolate import PchipInterpolator

ROOT_TOL = 1e-12
CONCAVITY_SAMPLES = 1024


class InvalidFluxError(ValueError):
    """The supplied callables do not define an admissible flux."""


class FluxDomainError(ValueError):
    """An argument lies outside the domain of a flux operation."""


def bisect(fun: Callable, lo, hi, tol: float = ROOT_TOL, maxiter: int = 200):
    """Vectorised bisection for a function that is decreasing on ``[lo, hi]``.

    ``fun`` must change sign from non-negative at ``lo`` to non-positive at
    ``hi``. Works elementwise on array brackets.
    """
    lo = np.array(lo, dtype=float, copy=True)
    hi = np.array(hi, dtype=float, copy=True)
    for _ in range(maxiter):
        if np.all(hi - lo <= tol):
            break
        mid = 0.5 * (lo + hi)
        pos = fun(mid) > 0.0
        lo = np.where(pos, mid, lo)
        hi = np.where(pos, hi, mid)
    return 0.5 * (lo + hi)


@dataclass(frozen=True)
class FluxModel:
    """A strictly concave flux with roots at 0 and 1.

    Attributes
    ----------
    eval_fn, deriv_fn : callable
        Vectorised ``J`` and ``J'``.
    name : str
        Identifier used in configs and reports.
    m : float
        Location of the maximum of ``J``.
    jmax : float
        ``J(m)``.
    """

    eval_fn: Callable = field(repr=False)
    deriv_fn: Callable = field(repr=False)
    name: str
    m: float
    jmax: float

    @property
    def max_speed(self) -> float:
        # J' is decreasing, so |J'| peaks at an endpoint
        return float(max(abs(self.deriv_fn(0.0)), abs(self.deriv_fn(1.0))))

    def checked(self, u):
        """Evaluate ``J`` with inputs clamped to [0, 1].

        Returns the values and a flag telling whether any input was clamped.
        """
        u = np.asarray(u, dtype=float)
        clipped = np.clip(u, 0.0, 1.0)
        return self.eval_fn(clipped), bool(np.any(clipped != u))

    def __call__(self, u):
        return self.eval_fn(np.clip(np.asarray(u, dtype=float), 0.0, 1.0))

    def deriv(self, u):
        return self.deriv_fn(np.clip(np.asarray(u, dtype=float), 0.0, 1.0))


def _traffic(u):
    return u * (1.0 - u)


def _traffic_deriv(u):
    return 1.0 - 2.0 * u


def make_traffic_flux() -> FluxModel:
    """``J(u) = u (1 - u)``, maximal at ``m = 1/2``."""
    return FluxModel(_traffic, _traffic_deriv, "traffic", 0.5, 0.25)


def _sine(u):
    return np.sin(np.pi * u)


def _sine_deriv(u):
    return np.pi * np.cos(np.pi * u)


def make_sine_flux() -> FluxModel:
    return make_concave_flux(_sine, _sine_deriv, name="sine")


def _vectorised(fn: Callable) -> Callable:
    def wrapped(u):
        out = fn(np.asarray(u, dtype=float))
        return np.asarray(out, dtype=float)

    return wrapped


def make_concave_flux(eval: Callable, deriv: Callable, name: str = "custom",
                      samples: int = CONCAVITY_SAMPLES) -> FluxModel:
    """Validate a user flux and locate its maximiser.

    Raises
    ------
    InvalidFluxError
        If ``J(0)`` or ``J(1)`` is not zero, ``J`` is negative somewhere,
        or the sampled midpoint concavity test fails.
    """
    J = _vectorised(eval)
    dJ = _vectorised(deriv)
    j0, j1 = float(J(0.0)), float(J(1.0))
    if abs(j0) > 1e-12 or abs(j1) > 1e-12:
        raise InvalidFluxError(f"{name}: J(0)={j0:.3e}, J(1)={j1:.3e}; both must vanish")

    u = np.linspace(0.0, 1.0, samples + 1)
    ju = J(u)
    if np.any(ju[1:-1] <= 0.0):
        raise InvalidFluxError(f"{name}: J must be positive inside (0, 1)")
    gap = ju[1:-1] - 0.5 * (ju[:-2] + ju[2:])
    if np.any(gap <= 0.0):
        k = int(np.argmin(gap))
        raise InvalidFluxError(f"{name}: concavity fails near u={u[k + 1]:.4f}")
    if np.any(np.diff(dJ(u)) >= 0.0):
        raise InvalidFluxError(f"{name}: J' is not strictly decreasing")
    if not (dJ(0.0) > 0.0 > dJ(1.0)):
        raise InvalidFluxError(f"{name}: J' must change sign inside (0, 1)")

    m = float(bisect(dJ, 0.0, 1.0))
    return FluxModel(J, dJ, name, m, float(J(m)))


def read_flux_table(path) -> tuple[np.ndarray, np.ndarray]:
    """Read a two-column ``u,J`` CSV. A header row is skipped if present."""
    rows = []
    with open(path, newline="") as fh:
        for rec in csv.reader(fh):
            if not rec or rec[0].strip().startswith("#"):
                continue
            try:
                rows.append((float(rec[0]), float(rec[1])))
            except ValueError:
                if rows:
                    raise
    if not rows:
        raise InvalidFluxError(f"{path}: no (u, J) rows")
    u, j = np.array(rows).T
    return u, j


def make_tabulated_flux(u, values, name: str = "custom") -> FluxModel:
    """Concave flux interpolated from samples ``(u_k, J_k)``.

    The table must start at ``u = 0`` and end at ``u = 1`` with strictly
    increasing abscissae. A shape-preserving cubic is used; the result is
    then subjected to the same checks as any other flux.
    """
    u = np.asarray(u, dtype=float)
    values = np.asarray(values, dtype=float)
    if u.ndim != 1 or u.size < 4 or u.shape != values.shape:
        raise InvalidFluxError("flux table needs at least 4 (u, J) rows")
    if np.any(np.diff(u) <= 0.0):
        raise InvalidFluxError("flux table abscissae must be strictly increasing")
    if abs(u[0]) > 1e-12 or abs(u[-1] - 1.0) > 1e-12:
        raise InvalidFluxError("flux table must span [0, 1]")
    slopes = np.diff(values) / np.diff(u)
    if np.any(np.diff(slopes) >= 0.0):
        raise InvalidFluxError("tabulated values are not strictly concave")
    spline = PchipInterpolator(u, values)
    dspline = spline.derivative()
    return make_concave_flux(spline, dspline, name=name)


def flux_from_name(name: str, table: str | Path | None = None) -> FluxModel:
    if name == "traffic":
        return make_traffic_flux()
    if name == "sine":
        return make_sine_flux()
    if name == "custom":
        if table is None:
            raise InvalidFluxError("custom flux needs a table file")
        u, j = read_flux_table(table)
        return make_tabulated_flux(u, j, name="custom")
    raise InvalidFluxError(f"unknown flux {name!r}")


def _check_unit(u, what: str = "u"):
    u = np.asarray(u, dtype=float)
    if np.any(~np.isfinite(u)) or np.any(u < 0.0) or np.any(u > 1.0):
        raise FluxDomainError(f"{what} must lie in [0, 1]")
    return u


def branches(f: FluxModel, y):
    """Solve ``J(u) = y`` on each side of the maximiser.

    Returns ``(u1, u2)`` with ``u1 <= m <= u2``.
    """
    y = np.asarray(y, dtype=float)
    if np.any(~np.isfinite(y)) or np.any(y < -1e-15) or np.any(y > f.jmax + 1e-15):
        raise FluxDomainError(f"flow value must lie in [0, {f.jmax}]")
    y = np.clip(y, 0.0, f.jmax)
    lo = np.zeros_like(y)
    hi = np.ones_like(y)
    m = np.full_like(y, f.m)
    # increasing branch: -(J - y) is decreasing
    u1 = bisect(lambda v: y - f(v), lo, m)
    u2 = bisect(lambda v: f(v) - y, m, hi)
    u1 = np.where(y >= f.jmax, f.m, np.where(y <= 0.0, 0.0, u1))
    u2 = np.where(y >= f.jmax, f.m, np.where(y <= 0.0, 1.0, u2))
    if u1.ndim == 0:
        return float(u1), float(u2)
    return u1, u2


def conjugate(f: FluxModel, u):
    """The point ``u*`` across the maximiser with ``J(u*) = J(u)``; ``m* = m``."""
    u = _check_unit(u)
    y = f(u)
    below = u < f.m
    lo = np.where(below, f.m, 0.0)
    hi = np.where(below, 1.0, f.m)
    root_hi = bisect(lambda v: f(v) - y, lo, hi)   # decreasing side
    root_lo = bisect(lambda v: y - f(v), lo, hi)   # increasing side
    out = np.where(below, root_hi, root_lo)
    out = np.where(u == f.m, f.m, out)
    if out.ndim == 0:
        return float(out)
    return out


def burgers_to_traffic(v):
    """Map a Burgers state ``v`` in [-1, 1] to the traffic density ``(1 - v) / 2``."""
    return (1.0 - np.asarray(v, dtype=float)) / 2.0 if np.ndim(v) else (1.0 - v) / 2.0


def traffic_to_burgers(u):
    return 1.0 - 2.0 * np.asarray(u, dtype=float) if np.ndim(u) else 1.0 - 2.0 * u
