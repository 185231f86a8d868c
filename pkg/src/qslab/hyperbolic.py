"""First-order Godunov scheme for ``eps u_t + J(u)_x = 0`` on [0, 1].

Boundary data are imposed weakly: the outermost interface fluxes are
Godunov fluxes against ghost states equal to ``rho_minus(t)`` and
``rho_plus(t)``, which realises the Bardos-LeRoux-Nedelec conditions.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .flux import FluxModel
from .quasistatic import BoundaryPath

log = logging.getLogger(__name__)

DEFAULT_CFL = 0.9


class SolverError(RuntimeError):
    """A time integration could not continue."""


@dataclass(frozen=True)
class GridSpec:
    n_cells: int

    def __post_init__(self):
        if int(self.n_cells) != self.n_cells or self.n_cells < 4:
            raise ValueError("a grid needs at least 4 cells")

    @property
    def dx(self) -> float:
        return 1.0 / self.n_cells

    @property
    def centers(self) -> np.ndarray:
        return (np.arange(self.n_cells) + 0.5) / self.n_cells

    @property
    def edges(self) -> np.ndarray:
        return np.arange(self.n_cells + 1) / self.n_cells


@dataclass(frozen=True)
class CellField:
    grid: GridSpec
    values: np.ndarray
    t: float = 0.0

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=float)
        if vals.shape != (self.grid.n_cells,):
            raise ValueError(f"expected {self.grid.n_cells} cell values, got {vals.shape}")
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)

    @classmethod
    def from_function(cls, grid: GridSpec, u0: Callable, t: float = 0.0) -> "CellField":
        """Project by midpoint sampling."""
        return cls(grid, np.asarray(u0(grid.centers), dtype=float) * np.ones(grid.n_cells), t)

    @classmethod
    def constant(cls, grid: GridSpec, c: float, t: float = 0.0) -> "CellField":
        return cls(grid, np.full(grid.n_cells, float(c)), t)

    @classmethod
    def riemann(cls, grid: GridSpec, left: float, right: float, x0: float,
                t: float = 0.0) -> "CellField":
        return cls(grid, np.where(grid.centers < x0, float(left), float(right)), t)

    def is_valid(self) -> bool:
        v = self.values
        return bool(np.all(np.isfinite(v)) and v.min() >= 0.0 and v.max() <= 1.0)


@dataclass
class Trajectory:
    """Snapshots plus the per-step boundary flux record of one run.

    ``step_times[k]`` is the start time of step ``k``; ``F0``/``F1`` are the
    fluxes through ``x = 0`` and ``x = 1`` during that step. For viscous
    runs they include the diffusive contribution and ``dissipation`` holds
    ``delta * int int u_x^2`` accumulated up to each step end.
    """

    grid: GridSpec
    times: np.ndarray
    values: np.ndarray
    step_times: np.ndarray
    step_dts: np.ndarray
    F0: np.ndarray
    F1: np.ndarray
    eps: float
    cfl: float
    delta: float = 0.0
    dissipation: np.ndarray | None = None
    meta: dict = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.times)

    def snapshot(self, k: int) -> CellField:
        return CellField(self.grid, self.values[k], float(self.times[k]))

    @property
    def final(self) -> CellField:
        return self.snapshot(len(self.times) - 1)

    def window(self, t0: float, t1: float) -> np.ndarray:
        return (self.times >= t0 - 1e-12) & (self.times <= t1 + 1e-12)

    def mean_boundary_flux(self, t0: float, t1: float) -> tuple[float, float]:
        """Time averages of ``F0`` and ``F1`` over steps starting in ``[t0, t1)``."""
        sel = (self.step_times >= t0) & (self.step_times < t1)
        w = self.step_dts[sel]
        if w.sum() == 0.0:
            raise ValueError("no steps in the averaging window")
        return (float(np.dot(w, self.F0[sel]) / w.sum()),
                float(np.dot(w, self.F1[sel]) / w.sum()))


def godunov_flux(f: FluxModel, u_left, u_right):
    """Godunov interface flux for a concave ``J``.

    ``min J`` over ``[u_left, u_right]`` when ``u_left <= u_right``,
    otherwise ``max J`` over ``[u_right, u_left]``.
    """
    ul = np.asarray(u_left, dtype=float)
    ur = np.asarray(u_right, dtype=float)
    jl, jr = f(ul), f(ur)
    rising = np.minimum(jl, jr)
    falling = f(np.clip(f.m, ur, ul))
    out = np.where(ul <= ur, rising, falling)
    return float(out) if out.ndim == 0 else out


def speed_ratio(f: FluxModel, cfl: float) -> float:
    """``dt / (eps dx)``; independent of ``eps`` so that rescaled runs agree bit for bit."""
    if not 0.0 < cfl <= 1.0:
        raise SolverError(f"CFL number {cfl} outside (0, 1]")
    return cfl / f.max_speed


def interface_fluxes(f: FluxModel, u: np.ndarray, rho_minus: float, rho_plus: float) -> np.ndarray:
    """All ``n + 1`` interface fluxes including the two boundary ones."""
    ext = np.empty(u.size + 2)
    ext[0] = rho_minus
    ext[1:-1] = u
    ext[-1] = rho_plus
    return godunov_flux(f, ext[:-1], ext[1:])


def _advance(f: FluxModel, u: np.ndarray, rho_minus: float, rho_plus: float, ratio: float):
    F = interface_fluxes(f, u, rho_minus, rho_plus)
    new = u - ratio * (F[1:] - F[:-1])
    return new, F[0], F[-1]


def step(f: FluxModel, state: CellField, path: BoundaryPath, t: float, eps: float,
         cfl: float = DEFAULT_CFL, dt: float | None = None):
    """One Godunov step from ``t``.

    Returns ``(new_state, dt, F0, F1)``. ``dt`` defaults to
    ``cfl * eps * dx / max|J'|``; a shorter ``dt`` may be passed to land on a
    given time.
    """
    if eps <= 0.0:
        raise SolverError("eps must be positive")
    ratio = speed_ratio(f, cfl)
    dx = state.grid.dx
    full = eps * (ratio * dx)
    if dt is None:
        dt = full
    elif dt > full * (1.0 + 1e-12):
        raise SolverError(f"dt={dt} violates the CFL bound {full}")
    else:
        ratio = dt / (eps * dx)
    rm, rp = path(t)
    new, F0, F1 = _advance(f, state.values, rm, rp, ratio)
    if not np.all(np.isfinite(new)):
        raise SolverError(f"non-finite cell values at t={t}")
    return CellField(state.grid, new, t + dt), dt, F0, F1


def step_output_times(f: FluxModel, eps: float, n_cells: int, T: float = 1.0,
                      cfl: float = DEFAULT_CFL, t0: float = 0.0) -> np.ndarray:
    """Output times that select every time level of a run (dense snapshots)."""
    base = speed_ratio(f, cfl) * (1.0 / n_cells)
    n = max(int(np.ceil((T - t0) / (base * eps) - 1e-9)), 1)
    out = t0 + (np.arange(n + 1) * base) * eps
    out[-1] = T
    return out


def _snapshot_steps(output_times: Sequence[float], step_times: np.ndarray) -> list[int]:
    idx = np.searchsorted(step_times, output_times)
    out = []
    for tout, k in zip(output_times, idx):
        k = min(int(k), len(step_times) - 1)
        if k > 0 and abs(step_times[k - 1] - tout) <= abs(step_times[k] - tout):
            k -= 1
        out.append(k)
    return sorted(set(out))


def _check_output_times(output_times, T):
    ts = np.asarray(output_times, dtype=float)
    if T <= 0.0:
        raise SolverError("horizon T must be positive")
    if ts.size and (np.any(np.diff(ts) < 0.0) or ts[0] < 0.0 or ts[-1] > T + 1e-12):
        raise SolverError("output times must be sorted inside [0, T]")
    return ts


def march(advance: Callable, u0: np.ndarray, t0: float, T: float, dt_full: float,
          output_times: Sequence[float], scale: float = 1.0):
    """Shared time loop: ``advance(u, t, dt) -> (u_new, F0, F1, extra)``.

    Full steps have length ``dt_full * scale`` and level ``k`` sits at
    ``t0 + (k * dt_full) * scale``; passing ``dt_full = ratio * dx`` and
    ``scale = eps`` makes runs that differ only by a time rescaling see
    bit-identical boundary times. ``dt`` is ``None`` for full-length steps
    so callers can reuse their precomputed ratios exactly.

    Snapshots are taken at the step nearest each requested output time; the
    last step is shortened to end exactly at ``T``.
    """
    ts = _check_output_times(output_times, T)
    step = dt_full * scale
    n_steps = int(np.ceil((T - t0) / step - 1e-9))
    n_steps = max(n_steps, 1)
    level_times = np.empty(n_steps + 1)
    level_times[:n_steps] = t0 + (np.arange(n_steps) * dt_full) * scale
    level_times[n_steps] = T
    step_dts = np.diff(level_times)
    wanted = set(_snapshot_steps(ts, level_times)) if ts.size else set()

    snaps_t, snaps_u = [], []
    F0 = np.empty(n_steps)
    F1 = np.empty(n_steps)
    extras = np.empty(n_steps)
    u = u0
    if 0 in wanted:
        snaps_t.append(level_times[0])
        snaps_u.append(u.copy())
    for n in range(n_steps):
        t = level_times[n]
        last = n == n_steps - 1 and abs(level_times[n + 1] - t - step) > 1e-12 * step
        u, F0[n], F1[n], extras[n] = advance(u, t, level_times[n + 1] - t if last else None)
        if not np.all(np.isfinite(u)):
            raise SolverError(f"non-finite cell values at t={level_times[n + 1]}")
        if n + 1 in wanted:
            snaps_t.append(level_times[n + 1])
            snaps_u.append(u.copy())
    return (np.array(snaps_t), np.array(snaps_u).reshape(len(snaps_t), u0.size),
            level_times[:-1], step_dts, F0, F1, extras)


def run(f: FluxModel, path: BoundaryPath, u0: CellField, eps: float, cfl: float = DEFAULT_CFL,
        T: float = 1.0, output_times: Sequence[float] | None = None) -> Trajectory:
    """March the Godunov scheme from ``u0.t`` to ``T``."""
    if eps <= 0.0:
        raise SolverError("eps must be positive")
    ratio = speed_ratio(f, cfl)
    dx = u0.grid.dx
    if output_times is None:
        output_times = [T]

    def advance(u, t, dt):
        r = ratio if dt is None else dt / (eps * dx)
        rm, rp = path(t)
        new, a, b = _advance(f, u, rm, rp, r)
        return new, a, b, 0.0

    times, values, st, sdt, F0, F1, _ = march(advance, np.array(u0.values), u0.t, T, ratio * dx,
                                              output_times, scale=eps)
    log.debug("hyperbolic run eps=%g n=%d steps=%d", eps, u0.grid.n_cells, st.size)
    return Trajectory(u0.grid, times, values, st, sdt, F0, F1, eps, cfl,
                      meta={"solver": "hyperbolic", "flux": f.name,
                            "path": getattr(path, "descriptor", "")})
