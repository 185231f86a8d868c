"""Viscous approximations ``eps u_t + J(u)_x = delta u_xx``.

Two solvers live here: an IMEX time stepper (explicit Godunov advection,
implicit diffusion) and a stationary two-point solver that shoots on the
first-integral constant ``K`` in ``delta v' = J(v) - K``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import quad, solve_ivp
from scipy.linalg import solve_banded
from scipy.optimize import brentq

from .flux import FluxModel, bisect
from .hyperbolic import (DEFAULT_CFL, CellField, GridSpec, SolverError, Trajectory,
                         interface_fluxes, march, speed_ratio)
from .quasistatic import BoundaryPath


class StationarySolveError(RuntimeError):
    """The shooting root-find for ``K`` failed; carries the bracket tried."""

    def __init__(self, msg: str, bracket: tuple[float, float] | None = None,
                 travel: tuple[float, float] | None = None):
        super().__init__(msg)
        self.bracket = bracket
        self.travel = travel


@dataclass(frozen=True)
class ViscousParams:
    eps: float
    delta: float
    grid: GridSpec
    cfl: float = DEFAULT_CFL

    def __post_init__(self):
        if not self.delta > 0.0:
            raise ValueError("viscosity delta must be positive")
        if self.eps < 0.0:
            raise ValueError("eps must be non-negative")
        if not 0.0 < self.cfl <= 1.0:
            raise ValueError("CFL number must lie in (0, 1]")

    @property
    def stationary(self) -> bool:
        return self.eps == 0.0


# ---------------------------------------------------------------- time stepping

def _diffusion_bands(n: int, r: float) -> np.ndarray:
    # rows: super, main, sub; Dirichlet data sit on the cell faces
    ab = np.empty((3, n))
    ab[0, :] = -r
    ab[1, :] = 1.0 + 2.0 * r
    ab[2, :] = -r
    ab[1, 0] = ab[1, -1] = 1.0 + 3.0 * r
    ab[0, 0] = 0.0
    ab[2, -1] = 0.0
    return ab


def face_gradients(u: np.ndarray, rho_minus: float, rho_plus: float, dx: float) -> np.ndarray:
    """Gradients on all ``n + 1`` faces; boundary faces use the half-cell distance."""
    g = np.empty(u.size + 1)
    g[1:-1] = np.diff(u) / dx
    g[0] = (u[0] - rho_minus) / (0.5 * dx)
    g[-1] = (rho_plus - u[-1]) / (0.5 * dx)
    return g


def dirichlet_energy(u: np.ndarray, rho_minus: float, rho_plus: float, dx: float) -> float:
    """``int (u_x)^2 dx`` for cell data with Dirichlet boundary values."""
    g = face_gradients(u, rho_minus, rho_plus, dx)
    w = np.full(g.size, dx)
    w[0] = w[-1] = 0.5 * dx
    return float(np.dot(w, g * g))


def _imex_update(f: FluxModel, u: np.ndarray, rm: float, rp: float, eps: float, delta: float,
                 dt: float, dx: float):
    F = interface_fluxes(f, u, rm, rp)
    rhs = u - (dt / (eps * dx)) * (F[1:] - F[:-1])
    r = dt * delta / (eps * dx * dx)
    rhs[0] += 2.0 * r * rm
    rhs[-1] += 2.0 * r * rp
    try:
        new = solve_banded((1, 1), _diffusion_bands(u.size, r), rhs, check_finite=True)
    except (np.linalg.LinAlgError, ValueError) as exc:
        raise SolverError(f"tridiagonal solve failed: {exc}") from exc
    g = face_gradients(new, rm, rp, dx)
    F0 = F[0] - delta * g[0]
    F1 = F[-1] - delta * g[-1]
    return new, F0, F1


def viscous_step(f: FluxModel, state: CellField, path: BoundaryPath, t: float,
                 params: ViscousParams, dt: float | None = None) -> CellField:
    """One IMEX step; boundary data are taken at the start of the step."""
    if params.stationary:
        raise SolverError("eps = 0 selects the stationary problem; use stationary_profile")
    dx = state.grid.dx
    full = params.eps * (speed_ratio(f, params.cfl) * dx)
    dt = full if dt is None else dt
    if dt > full * (1.0 + 1e-12):
        raise SolverError(f"dt={dt} violates the advective CFL bound {full}")
    rm, rp = path(t)
    new, _, _ = _imex_update(f, state.values, rm, rp, params.eps, params.delta, dt, dx)
    if not np.all(np.isfinite(new)):
        raise SolverError(f"non-finite cell values at t={t}")
    return CellField(state.grid, new, t + dt)


def blend_to_boundary(u0: CellField, rho_minus: float, rho_plus: float) -> CellField:
    """Make initial data compatible by blending the two outermost cells linearly to the boundary values."""
    u = np.array(u0.values)
    dx = u0.grid.dx
    for k in (0, 1):
        w = (k + 0.5) * dx / (2.0 * dx)
        u[k] = rho_minus + w * (u[k] - rho_minus)
        u[-1 - k] = rho_plus + w * (u[-1 - k] - rho_plus)
    return CellField(u0.grid, u, u0.t)


def run_viscous(f: FluxModel, path: BoundaryPath, u0: CellField, params: ViscousParams,
                T: float = 1.0, output_times=None, blend: bool = True) -> Trajectory:
    if params.stationary:
        raise SolverError("eps = 0 selects the stationary problem")
    grid = u0.grid
    if grid != params.grid:
        raise SolverError("initial field and params use different grids")
    if blend:
        u0 = blend_to_boundary(u0, *path(u0.t))
    dx = grid.dx
    eps, delta = params.eps, params.delta
    base = speed_ratio(f, params.cfl) * dx
    dt_full = base * eps
    if output_times is None:
        output_times = [T]

    def advance(u, t, dt):
        dt = dt_full if dt is None else dt
        rm, rp = path(t)
        new, F0, F1 = _imex_update(f, u, rm, rp, eps, delta, dt, dx)
        return new, F0, F1, dt * delta * dirichlet_energy(new, rm, rp, dx)

    times, values, st, sdt, F0, F1, diss = march(advance, np.array(u0.values), u0.t, T, base,
                                                 output_times, scale=eps)
    return Trajectory(grid, times, values, st, sdt, F0, F1, eps, params.cfl, delta=delta,
                      dissipation=np.cumsum(diss),
                      meta={"solver": "viscous", "flux": f.name,
                            "path": getattr(path, "descriptor", "")})


def energy_functional(traj: Trajectory, eps: float | None = None, delta: float | None = None):
    """``eps int u(t)^2 dx + delta int_0^t int (u_x)^2 dx ds`` at the end and at every snapshot.

    Returns ``(value_at_T, history)`` where ``history`` is an array of
    ``(t, energy)`` rows.
    """
    eps = traj.eps if eps is None else eps
    if traj.dissipation is None:
        raise ValueError("trajectory has no dissipation record; run it with run_viscous")
    scale = 1.0 if delta is None or traj.delta == 0.0 else delta / traj.delta
    ends = traj.step_times + traj.step_dts
    dx = traj.grid.dx
    hist = np.empty((len(traj.times), 2))
    for k, tk in enumerate(traj.times):
        n = int(np.searchsorted(ends, tk + 1e-12 * max(1.0, abs(tk)), side="right"))
        acc = traj.dissipation[n - 1] if n > 0 else 0.0
        hist[k] = tk, eps * dx * float(np.sum(traj.values[k] ** 2)) + scale * acc
    return float(hist[-1, 1]), hist


# ---------------------------------------------------------------- stationary problem

def solve_C(delta: float, rho_plus: float) -> float:
    """Positive root of ``C tanh(C/2) = (2 rho_plus - 1) / delta`` by bisection."""
    if not delta > 0.0:
        raise ValueError("delta must be positive")
    if not rho_plus > 0.5:
        raise ValueError("need rho_plus > 1/2 for a positive root")
    rhs = (2.0 * rho_plus - 1.0) / delta
    hi = 2.0 + rhs / math.tanh(1.0)
    return float(bisect(lambda c: rhs - c * np.tanh(0.5 * c), 0.0, hi, tol=1e-15 * max(1.0, hi),
                        maxiter=400))


def critical_tanh_profile(delta: float, rho_plus: float, x):
    """Closed-form viscous profile for ``J = u(1-u)`` on the critical line.

    ``v = 1/2 + delta C tanh(C (x - 1/2))`` hits ``rho_plus`` at ``x = 1``
    only when ``C tanh(C/2) = (rho_plus - 1/2) / delta``, i.e. the root of
    :func:`solve_C` taken at viscosity ``2 delta``.
    """
    C = solve_C(2.0 * delta, rho_plus)
    return 0.5 + delta * C * np.tanh(C * (np.asarray(x, dtype=float) - 0.5))


def critical_tanh_dissipation(delta: float, rho_plus: float) -> float:
    """``delta int_0^1 (v')^2 dx`` for :func:`critical_tanh_profile`, in closed form."""
    C = solve_C(2.0 * delta, rho_plus)
    th = math.tanh(0.5 * C)
    return 2.0 * delta ** 3 * C ** 3 * (th - th ** 3 / 3.0)


_SMALL_STEP = 1e-4


class StationaryBVP:
    """Solution of ``delta v' = J(v) - K``, ``v(0) = rho_minus``, ``v(1) = rho_plus``.

    ``K`` is written as ``J_ref - sign * gap`` where ``J_ref`` is the extreme
    of ``J`` between the boundary values that the profile creeps along, so
    that exponentially small gaps stay representable.
    """

    def __init__(self, f: FluxModel, rho_minus: float, rho_plus: float, delta: float):
        if not delta > 0.0:
            raise ValueError("delta must be positive")
        for v in (rho_minus, rho_plus):
            if not 0.0 <= v <= 1.0:
                raise ValueError("boundary values must lie in [0, 1]")
        self.f = f
        self.rho_minus = float(rho_minus)
        self.rho_plus = float(rho_plus)
        self.delta = float(delta)
        self.lo = min(self.rho_minus, self.rho_plus)
        self.hi = max(self.rho_minus, self.rho_plus)
        # sign = +1: increasing profile, J > K along it
        self.sign = 1.0 if self.rho_minus < self.rho_plus else -1.0
        if self.sign > 0:
            self.j_ref = float(min(f(self.lo), f(self.hi)))
        else:
            self.j_ref = float(f(np.clip(f.m, self.lo, self.hi)))
        self.saturated = False
        if self.lo == self.hi:
            self.gap = math.inf
            self.K = float(f(self.lo))
        else:
            self.gap = self._solve_gap()
            self.K = self.j_ref - self.sign * self.gap
        self._branches = None

    # h(w) = |J(w) - K| along the profile
    def _h(self, w):
        return self.sign * (self.f(w) - self.j_ref) + self.gap

    def _h_near(self, e: float, s: float, y, gap: float):
        """``h(e + s y)`` with the flux difference taken accurately for small ``y``."""
        y = np.asarray(y, dtype=float)
        w = e + s * y
        direct = self.f(w) - self.f(e)
        small = self.f.deriv(e + 0.5 * s * y) * (s * y)
        diff = np.where(y < _SMALL_STEP, small, direct)
        h_e = self.sign * (self.f(e) - self.j_ref) + gap
        return h_e + self.sign * diff

    def _piece(self, e: float, s: float, length: float, gap: float) -> float:
        """``int_0^length dy / h(e + s y)``."""
        if length <= 0.0:
            return 0.0
        h_e = float(self.sign * (self.f(e) - self.j_ref) + gap)
        lam = float(self.sign * s * self.f.deriv(e))
        opts = dict(epsabs=0.0, epsrel=1e-13, limit=400)
        if lam > 1e-8 and h_e < lam * length:
            scale = h_e / lam
            tmax = math.log1p(length / scale)

            def g(tau):
                y = scale * math.expm1(tau)
                return scale * math.exp(tau) / float(self._h_near(e, s, y, gap))

            return quad(g, 0.0, tmax, **opts)[0]
        return quad(lambda y: 1.0 / float(self._h_near(e, s, y, gap)), 0.0, length, **opts)[0]

    def travel(self, a: float, b: float, gap: float | None = None) -> float:
        """Distance in ``x`` the profile needs to go from value ``a`` to value ``b``."""
        gap = self.gap if gap is None else gap
        a, b = min(a, b), max(a, b)
        if b <= a:
            return 0.0
        cut = self.f.m if a < self.f.m < b else 0.5 * (a + b)
        total = 0.0
        for p, q in ((a, cut), (cut, b)):
            mid = 0.5 * (p + q)
            total += self._piece(p, 1.0, mid - p, gap) + self._piece(q, -1.0, q - mid, gap)
        return self.delta * total

    def _solve_gap(self) -> float:
        span = self.hi - self.lo
        g_hi = 2.0 * self.delta * span
        tr = lambda g: self.travel(self.lo, self.hi, g)   # noqa: E731
        if tr(g_hi) >= 1.0:
            raise StationarySolveError("upper bracket failed", (0.0, g_hi), (None, tr(g_hi)))
        g_lo = g_hi
        while True:
            g_lo *= 1e-4
            t_lo = tr(g_lo)
            if t_lo > 1.0:
                break
            if g_lo < 1e-280:
                # the gap is below double resolution of K
                self.saturated = True
                return 0.0
        root = brentq(lambda s: math.log(tr(math.exp(s))), math.log(g_lo), math.log(g_hi),
                      xtol=1e-14, rtol=4 * np.finfo(float).eps, maxiter=200)
        return math.exp(root)

    def _fast_point(self):
        f = self.f
        if self.sign > 0:
            v = float(np.clip(f.m, self.lo, self.hi))
        else:
            v = self.rho_minus if f(self.rho_minus) <= f(self.rho_plus) else self.rho_plus
        if v == self.rho_minus:
            return 0.0, v
        if v == self.rho_plus:
            return 1.0, v
        # measure from the boundary whose end of the profile moves faster
        if self._h(self.rho_minus) >= self._h(self.rho_plus):
            return self.travel(self.rho_minus, v), v
        return 1.0 - self.travel(v, self.rho_plus), v

    def _rhs(self, x, v):
        return self.sign * self._h(np.clip(v, self.lo, self.hi)) / self.delta

    def _integrate(self):
        x_s, v_s = self._fast_point()
        opts = dict(method="DOP853", rtol=1e-12, atol=1e-14, dense_output=True)
        left = solve_ivp(self._rhs, (x_s, 0.0), [v_s], **opts) if x_s > 0.0 else None
        right = solve_ivp(self._rhs, (x_s, 1.0), [v_s], **opts) if x_s < 1.0 else None
        for sol in (left, right):
            if sol is not None and not sol.success:
                raise StationarySolveError(f"profile integration failed: {sol.message}")
        self._branches = (x_s, left, right)

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        if self.lo == self.hi:
            return np.full_like(x, self.lo)
        if self._branches is None:
            self._integrate()
        x_s, left, right = self._branches
        out = np.empty_like(x)
        lm = (x < x_s) if right is not None else np.ones(x.shape, bool)
        if left is None:
            lm[:] = False
        if np.any(lm):
            out[lm] = left.sol(x[lm])[0]
        if np.any(~lm):
            out[~lm] = right.sol(x[~lm])[0]
        return np.clip(out, self.lo, self.hi)

    def endpoint_mismatch(self) -> float:
        v = self(np.array([0.0, 1.0]))
        return float(max(abs(v[0] - self.rho_minus), abs(v[1] - self.rho_plus)))


def stationary_profile(f: FluxModel, rho_minus: float, rho_plus: float, delta: float,
                       grid: GridSpec) -> CellField:
    """Stationary viscous profile sampled at the cell centres of ``grid``."""
    bvp = StationaryBVP(f, rho_minus, rho_plus, delta)
    return CellField(grid, bvp(grid.centers), t=0.0)


def stationary_residuals(f: FluxModel, v: np.ndarray, delta: float, dx: float):
    """Centred-stencil residual of ``delta v'' - J(v)'`` and ``K = J(v) - delta v'`` at interior samples."""
    jv = f(v)
    res = delta * (v[2:] - 2.0 * v[1:-1] + v[:-2]) / dx ** 2 - (jv[2:] - jv[:-2]) / (2.0 * dx)
    K = jv[1:-1] - delta * (v[2:] - v[:-2]) / (2.0 * dx)
    return res, K
