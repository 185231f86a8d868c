"""Diagnostics on numerical output.

Entropy inequalities are tested in distributional form against a mesh of
space-time hat functions; boundary conditions through the explicit
Bardos-LeRoux-Nedelec inequalities on outermost-cell traces; concentration
through windowed histograms (empirical Young measures); and weak-star
convergence through a fixed dictionary of test functions.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence

import numpy as np
from numpy.polynomial import legendre
from scipy.integrate import quad
from scipy.interpolate import CubicHermiteSpline

from . import defaults
from .flux import FluxModel
from .hyperbolic import GridSpec, Trajectory
from .quasistatic import (BoundaryPath, exact_profile, left_trace_admissible,
                          right_trace_admissible)


# ---------------------------------------------------------------- entropy pairs

@dataclass(frozen=True)
class EntropyPair:
    """Convex entropy ``S`` with flux ``Q``, ``Q' = J' S'``.

    ``w`` records the threshold for one-parameter families (Kruzhkov and
    boundary entropies).
    """

    S: Callable = field(repr=False)
    Q: Callable = field(repr=False)
    name: str
    w: float | None = None
    dS: Callable | None = field(default=None, repr=False)
    kinks: tuple = ()

    @classmethod
    def from_entropy(cls, f: FluxModel, S: Callable, dS: Callable, name: str,
                     kinks: Sequence[float] = (), w: float | None = None,
                     n_nodes: int = 2049) -> "EntropyPair":
        """Build ``Q(u) = int_0^u J' S'`` by adaptive quadrature on a node table.

        Nodes include every kink of ``S'`` so the Hermite interpolant of ``Q``
        (whose derivative is known exactly) stays accurate between them.
        """
        nodes = np.union1d(np.linspace(0.0, 1.0, n_nodes),
                           [k for k in kinks if 0.0 < k < 1.0])
        qprime = lambda u: f.deriv(u) * dS(u)   # noqa: E731
        pieces = np.array([quad(qprime, a, b, epsabs=1e-15, epsrel=1e-13)[0]
                           for a, b in zip(nodes[:-1], nodes[1:])])
        qvals = np.concatenate([[0.0], np.cumsum(pieces)])
        # one-sided derivative from the right at each node
        d = qprime(np.minimum(nodes + 1e-13, 1.0))
        d[-1] = qprime(1.0)
        spline = CubicHermiteSpline(nodes, qvals, d)

        def Q(u):
            u = np.asarray(u, dtype=float)
            return spline(np.clip(u, 0.0, 1.0))

        return cls(S, Q, name, w, dS, tuple(kinks))


def quadratic_pair(f: FluxModel) -> EntropyPair:
    return EntropyPair.from_entropy(f, lambda u: np.asarray(u, dtype=float) ** 2,
                                    lambda u: 2.0 * np.asarray(u, dtype=float), "quadratic")


def kruzhkov_pair(f: FluxModel, w: float) -> EntropyPair:
    """``S = |u - w|``, ``Q = sign(u - w) (J(u) - J(w))``."""
    jw = float(f(w))

    def S(u):
        return np.abs(np.asarray(u, dtype=float) - w)

    def Q(u):
        u = np.asarray(u, dtype=float)
        return np.sign(u - w) * (f(u) - jw)

    def dS(u):
        return np.sign(np.asarray(u, dtype=float) - w)

    return EntropyPair(S, Q, f"kruzhkov({w:g})", w, dS, (w,))


def _smooth_kink(y):
    """Convex C2 ``s`` with ``s(y) = -y`` for ``y <= -1`` and ``s(y) = 0`` for ``y >= 1``."""
    y = np.asarray(y, dtype=float)
    mid = -0.5 * y + 0.375 * y ** 2 - y ** 4 / 16.0 + 3.0 / 16.0
    return np.where(y <= -1.0, -y, np.where(y >= 1.0, 0.0, mid))


def _smooth_kink_deriv(y):
    y = np.asarray(y, dtype=float)
    mid = -0.5 + 0.75 * y - 0.25 * y ** 3
    return np.where(y <= -1.0, -1.0, np.where(y >= 1.0, 0.0, mid))


@dataclass(frozen=True)
class BoundaryEntropy:
    """Kinked boundary pair ``S(u) = (w^m - u)^+``, ``Q(u) = J(w^m) - J(u)`` below ``w^m``.

    ``w^m`` is ``min(w, m)``. :meth:`smoothed` gives the convex C2
    approximations ``a s((u - w^m) / a)``.
    """

    pair: EntropyPair
    flux: FluxModel
    w: float

    @property
    def corner(self) -> float:
        return min(self.w, self.flux.m)

    def smoothed(self, a: float) -> EntropyPair:
        if not a > 0.0:
            raise ValueError("smoothing scale must be positive")
        c = self.corner

        def S(u):
            return a * _smooth_kink((np.asarray(u, dtype=float) - c) / a)

        def dS(u):
            return _smooth_kink_deriv((np.asarray(u, dtype=float) - c) / a)

        return EntropyPair.from_entropy(self.flux, S, dS, f"boundary_smooth({self.w:g},{a:g})",
                                        kinks=(c - a, c + a), w=self.w)


def boundary_entropy_pair(f: FluxModel, w: float) -> BoundaryEntropy:
    c = min(w, f.m)
    jc = float(f(c))

    def S(u):
        u = np.asarray(u, dtype=float)
        return np.where(u < c, c - u, 0.0)

    def Q(u):
        u = np.asarray(u, dtype=float)
        return np.where(u < c, jc - f(u), 0.0)

    def dS(u):
        return np.where(np.asarray(u, dtype=float) < c, -1.0, 0.0)

    return BoundaryEntropy(EntropyPair(S, Q, f"boundary({w:g})", w, dS, (c,)), f, w)


def pair_consistency_error(f: FluxModel, pair: EntropyPair) -> float:
    """``|Q(1) - Q(0) - int_0^1 J' S'|`` with the integral done independently by quadrature."""
    if pair.dS is None:
        raise ValueError("pair has no entropy derivative")
    pts = [k for k in pair.kinks if 0.0 < k < 1.0]
    ref = quad(lambda u: float(f.deriv(u) * pair.dS(u)), 0.0, 1.0, points=pts or None,
               epsabs=1e-15, epsrel=1e-13, limit=200)[0]
    return abs(float(pair.Q(1.0) - pair.Q(0.0)) - ref)


def kruzhkov_family(f: FluxModel, thresholds: Iterable[float] | None = None) -> list[EntropyPair]:
    if thresholds is None:
        thresholds = defaults.KRUZHKOV_THRESHOLDS
    return [kruzhkov_pair(f, w) for w in thresholds]


# ---------------------------------------------------------------- entropy residual

@dataclass(frozen=True)
class EntropyResidual:
    """Residual density ``<eps S_t + Q_x, phi> / <1, phi>`` for every test hat."""

    values: np.ndarray
    t_centers: np.ndarray
    x_centers: np.ndarray
    pair_name: str

    @property
    def max_positive(self) -> float:
        return float(max(0.0, self.values.max()))

    @property
    def min_value(self) -> float:
        return float(self.values.min())


def _hat_nodes(centers: np.ndarray, halfwidth: float, coords: np.ndarray) -> np.ndarray:
    return np.clip(1.0 - np.abs(coords[None, :] - centers[:, None]) / halfwidth, 0.0, None)


def _space_weights(grid: GridSpec, centers: np.ndarray, halfwidth: float):
    """Exact cell integrals of each hat and of its derivative."""
    edges = grid.edges
    # antiderivative of the hat centred at c is piecewise quadratic
    def H(x):
        s = (x[None, :] - centers[:, None]) / halfwidth
        s = np.clip(s, -1.0, 1.0)
        return halfwidth * np.where(s < 0.0, 0.5 * (1.0 + s) ** 2, 1.0 - 0.5 * (1.0 - s) ** 2)

    Hx = H(edges)
    mass = np.diff(Hx, axis=1)
    phi_at_edges = _hat_nodes(centers, halfwidth, edges)
    dmass = np.diff(phi_at_edges, axis=1)
    return mass, dmass


def _time_weights(times: np.ndarray, node_idx: np.ndarray, span: int):
    """Integrals over ``t`` of hat / hat' times the piecewise-linear interpolant basis.

    Hats have nodes on snapshot times: hat ``j`` rises on
    ``[t[i-span], t[i]]`` and falls on ``[t[i], t[i+span]]``.
    """
    n = times.size
    mass = np.zeros((node_idx.size, n))
    dmass = np.zeros((node_idx.size, n))
    dt = np.diff(times)
    for j, i in enumerate(node_idx):
        a, b, c = i - span, i, i + span
        h = np.zeros(n)
        h[a:b + 1] = (times[a:b + 1] - times[a]) / (times[b] - times[a])
        h[b:c + 1] = (times[c] - times[b:c + 1]) / (times[c] - times[b])
        slope = np.zeros(n - 1)
        slope[a:b] = 1.0 / (times[b] - times[a])
        slope[b:c] = -1.0 / (times[c] - times[b])
        # exact integrals of products of linear elements on each interval
        for k in range(a, c):
            d = dt[k]
            mass[j, k] += d * (2.0 * h[k] + h[k + 1]) / 6.0
            mass[j, k + 1] += d * (h[k] + 2.0 * h[k + 1]) / 6.0
            dmass[j, k] += 0.5 * d * slope[k]
            dmass[j, k + 1] += 0.5 * d * slope[k]
    return mass, dmass


def entropy_residual(traj: Trajectory, pair: EntropyPair, eps: float | None = None,
                     x_halfwidth: float | None = None, n_time_tests: int | None = None,
                     t_window: tuple[float, float] | None = None) -> EntropyResidual:
    """Distributional residual of ``eps S(u)_t + Q(u)_x`` on interior hats.

    Snapshot data are treated as piecewise constant in ``x`` and piecewise
    linear in ``t``; all integrals against the hats are then exact. An
    entropy solution has non-positive residual everywhere.
    """
    eps = traj.eps if eps is None else eps
    hx = defaults.RESIDUAL_X_HALFWIDTH if x_halfwidth is None else x_halfwidth
    n_tt = defaults.RESIDUAL_TIME_TESTS if n_time_tests is None else n_time_tests
    times = traj.times
    values = traj.values
    if t_window is not None:
        sel = traj.window(*t_window)
        times, values = times[sel], values[sel]
    if times.size < 3:
        raise ValueError("entropy residual needs at least 3 snapshots")

    n_half = int(round(1.0 / hx))
    x_centers = np.arange(2, n_half - 1) * hx
    if x_centers.size == 0:
        raise ValueError("spatial hat width too large for the unit interval")
    xm, xd = _space_weights(traj.grid, x_centers, hx)

    span = max(1, (times.size - 1) // (n_tt + 1))
    node_idx = np.arange(span, times.size - span, span)
    tm, td = _time_weights(times, node_idx, span)

    S = pair.S(values)
    Q = pair.Q(values)
    # <eps S_t + Q_x, phi> = -int int (eps S phi_t + Q phi_x)
    num = -(eps * td @ S @ xm.T + tm @ Q @ xd.T)
    vol = tm.sum(axis=1)[:, None] * xm.sum(axis=1)[None, :]
    return EntropyResidual(num / vol, times[node_idx], x_centers, pair.name)


def entropy_tolerance(dx: float, constant: float | None = None) -> float:
    """``C dx`` plus the roundoff floor."""
    c = defaults.ENTROPY_RESIDUAL_C if constant is None else constant
    return c * dx + defaults.ROUNDOFF_FLOOR


def stationary_shock_fixture(f: FluxModel, n_cells: int = 400, eps: float = 0.1,
                             left: float = 0.3, position: float = 0.4) -> tuple[Trajectory, BoundaryPath]:
    """A steady upward shock ``left | left*`` whose jump sits at a cell centre.

    The initial cell average across the jump is the mean of the two states;
    the scheme keeps that single intermediate cell, which is the worst case
    for the residual of a steady discrete shock.
    """
    from .flux import conjugate
    from .hyperbolic import CellField, run, step_output_times
    from .quasistatic import constant_path
    right = conjugate(f, left)
    grid = GridSpec(n_cells)
    k = int(position * n_cells)
    u0 = np.where(np.arange(n_cells) < k, left, right).astype(float)
    u0[k] = 0.5 * (left + right)
    path = constant_path(left, right)
    traj = run(f, path, CellField(grid, u0), eps, T=1.0,
               output_times=step_output_times(f, eps, n_cells))
    return traj, path


def calibrate_entropy_constant(f: FluxModel, n_cells: int = 400) -> float:
    """``max positive residual / dx`` over the Kruzhkov family on the fixture."""
    traj, _ = stationary_shock_fixture(f, n_cells)
    worst = max(entropy_residual(traj, p).max_positive for p in kruzhkov_family(f))
    return worst / traj.grid.dx


# ---------------------------------------------------------------- boundary conditions

@dataclass(frozen=True)
class BLNVerdict:
    passed: bool
    side: str
    trace: float
    datum: float
    worst_k: float
    violation: float


def bln_check(f: FluxModel, u_b: float, rho_b: float, side: str, tol: float = 1e-12,
              n_samples: int = 200) -> BLNVerdict:
    """Check ``sign(u_b - rho_b) [J(u_b) - J(k)]`` (<= 0 on the left, >= 0 on the right)
    for ``k`` sampled on the interval between ``u_b`` and ``rho_b``."""
    if side not in ("left", "right"):
        raise ValueError("side must be 'left' or 'right'")
    k = np.linspace(min(u_b, rho_b), max(u_b, rho_b), n_samples)
    expr = np.sign(u_b - rho_b) * (f(u_b) - f(k))
    viol = expr if side == "left" else -expr
    i = int(np.argmax(viol))
    worst = float(max(viol[i], 0.0))
    return BLNVerdict(worst <= tol, side, float(u_b), float(rho_b), float(k[i]), worst)


@dataclass(frozen=True)
class BLNSeries:
    times: np.ndarray
    left: list
    right: list
    checked: np.ndarray

    @property
    def n_checked(self) -> int:
        return int(self.checked.sum())

    @property
    def n_passed(self) -> int:
        return int(sum(1 for ok, l, r in zip(self.checked, self.left, self.right)
                       if ok and l.passed and r.passed))

    @property
    def all_passed(self) -> bool:
        return self.n_passed == self.n_checked


def bln_series(f: FluxModel, traj: Trajectory, path: BoundaryPath, transient: float | None = None,
               tol: float | None = None) -> BLNSeries:
    """BLN verdicts at every snapshot, using outermost-cell averages as traces.

    Snapshots earlier than ``transient`` (default ``2 eps``) are recorded
    but not counted.
    """
    transient = 2.0 * traj.eps if transient is None else transient
    tol = defaults.BLN_TOL_PER_DX * traj.grid.dx if tol is None else tol
    left, right = [], []
    for t, u in zip(traj.times, traj.values):
        rm, rp = path(t)
        left.append(bln_check(f, u[0], rm, "left", tol))
        right.append(bln_check(f, u[-1], rp, "right", tol))
    checked = traj.times >= traj.times[0] + transient - 1e-12
    return BLNSeries(traj.times.copy(), left, right, checked)


# ---------------------------------------------------------------- Young measures

@dataclass(frozen=True)
class Window:
    t0: float
    t1: float
    x0: float
    x1: float


@dataclass(frozen=True)
class YoungMeasureEstimate:
    window: Window
    hist: np.ndarray
    edges: np.ndarray
    atoms: tuple
    f: float
    residual: float
    flux_mean: float
    n_samples: int


def window_samples(trajs: Sequence[Trajectory], window: Window) -> np.ndarray:
    out = []
    for tr in trajs:
        tsel = tr.window(window.t0, window.t1)
        xc = tr.grid.centers
        xsel = (xc >= window.x0) & (xc <= window.x1)
        out.append(tr.values[np.ix_(tsel, xsel)].ravel())
    return np.concatenate(out) if out else np.empty(0)


def young_measure_from_samples(samples: np.ndarray, window: Window, flux: FluxModel | None = None,
                               atoms: Sequence[float] | None = None, bins: int | None = None,
                               atom_tol: float | None = None,
                               min_mode_mass: float | None = None) -> YoungMeasureEstimate:
    bins = defaults.YOUNG_BINS if bins is None else bins
    atom_tol = 1.0 / bins if atom_tol is None else atom_tol
    min_mode_mass = defaults.YOUNG_MIN_MODE_MASS if min_mode_mass is None else min_mode_mass
    s = np.sort(np.asarray(samples, dtype=float).ravel())
    if s.size < defaults.YOUNG_MIN_SAMPLES:
        raise ValueError(f"window holds {s.size} samples; need {defaults.YOUNG_MIN_SAMPLES}")
    edges = np.linspace(0.0, 1.0, bins + 1)
    counts, _ = np.histogram(np.clip(s, 0.0, 1.0), edges)
    hist = counts / s.size
    m = 0.5 if flux is None else flux.m

    if atoms is None:
        atoms = _modes(s, hist, edges, min_mode_mass, atom_tol)
    atoms = tuple(sorted(float(a) for a in atoms))
    near = [np.abs(s - a) <= atom_tol for a in atoms]
    on_any = np.logical_or.reduce(near)
    residual = float(1.0 - on_any.mean())
    if len(atoms) == 1:
        f_up = 1.0 if atoms[0] > m else 0.0
    else:
        lo, hi = near[0].sum(), near[-1].sum()
        f_up = float(hi / (lo + hi)) if lo + hi else 0.0
    jmean = float(np.mean(flux(s))) if flux is not None else float("nan")
    return YoungMeasureEstimate(window, hist, edges, atoms, f_up, residual, jmean, int(s.size))


def _modes(s: np.ndarray, hist: np.ndarray, edges: np.ndarray, min_mass: float,
           atom_tol: float) -> tuple:
    if s[0] == s[-1]:
        return (float(s[0]),)
    order = np.argsort(-hist, kind="stable")
    first = order[0]
    picks = [first]
    for k in order[1:]:
        if hist[k] < min_mass:
            break
        if abs(int(k) - int(first)) > 1:
            picks.append(k)
            break
    atoms = []
    for k in picks:
        centre = 0.5 * (edges[k] + edges[k + 1])
        near = s[np.abs(s - centre) <= 1.5 * (edges[1] - edges[0])]
        atoms.append(float(near.mean()) if near.size else centre)
    return tuple(atoms)


def young_measure(trajs: Trajectory | Sequence[Trajectory], window: Window,
                  flux: FluxModel | None = None, path: BoundaryPath | None = None,
                  **kwargs) -> YoungMeasureEstimate:
    """Empirical Young measure of the family over ``window``.

    With a boundary path, atoms are pinned to the exact quasi-static values
    at the window's mid time; otherwise they are the two dominant
    histogram modes.
    """
    if isinstance(trajs, Trajectory):
        trajs = [trajs]
    samples = window_samples(trajs, window)
    atoms = kwargs.pop("atoms", None)
    if atoms is None and path is not None and flux is not None:
        prof = exact_profile(flux, path, 0.5 * (window.t0 + window.t1))
        atoms = (prof.z1, prof.z2) if prof.is_critical else (prof.value,)
    return young_measure_from_samples(samples, window, flux=flux, atoms=atoms, **kwargs)


def strip_windows(t0: float, t1: float, width: float) -> list[Window]:
    n = int(round(1.0 / width))
    return [Window(t0, t1, k * width, (k + 1) * width) for k in range(n)]


# ---------------------------------------------------------------- weak-star errors

@dataclass(frozen=True)
class DictionaryEntry:
    name: str
    fn: Callable


def weak_star_dictionary(t0: float, t1: float, version: str | None = None) -> list[DictionaryEntry]:
    """Fixed, versioned dictionary on ``[t0, t1] x [0, 1]``.

    ``v1``: 4 x 5 tensor hats plus Legendre products of degree <= 2 in each
    variable (29 functions).
    """
    version = defaults.DICTIONARY_VERSION if version is None else version
    if version != "v1":
        raise ValueError(f"unknown test-function dictionary {version!r}")
    out = []
    nt, nx = 4, 5
    ht = (t1 - t0) / (nt + 1)
    hxw = 1.0 / (nx + 1)
    for i in range(1, nt + 1):
        for j in range(1, nx + 1):
            tc, xc = t0 + i * ht, j * hxw

            def hat(t, x, tc=tc, xc=xc):
                return (np.clip(1.0 - np.abs(t - tc) / ht, 0.0, None)
                        * np.clip(1.0 - np.abs(x - xc) / hxw, 0.0, None))

            out.append(DictionaryEntry(f"hat_t{i}_x{j}", hat))
    for a in range(3):
        for b in range(3):
            def poly(t, x, a=a, b=b):
                tau = 2.0 * (t - t0) / (t1 - t0) - 1.0
                xi = 2.0 * x - 1.0
                return legendre.legval(tau, np.eye(3)[a]) * legendre.legval(xi, np.eye(3)[b])

            out.append(DictionaryEntry(f"legendre_{a}{b}", poly))
    return out


def space_time_field(times, values) -> Trajectory:
    """Wrap a bare ``(n_t, n_x)`` array as a trajectory for the diagnostics."""
    values = np.asarray(values, dtype=float)
    empty = np.empty(0)
    return Trajectory(GridSpec(values.shape[1]), np.asarray(times, dtype=float), values,
                      empty, empty, empty, empty, eps=1.0, cfl=1.0)


@dataclass(frozen=True)
class WeakStarResult:
    error: float
    l1: float
    worst: str


def weak_star_error(traj: Trajectory, reference, dictionary: list[DictionaryEntry] | None = None,
                    t_window: tuple[float, float] | None = None) -> WeakStarResult:
    """``max |int int (u - u_ref) phi|`` over the dictionary, plus the plain L1 distance.

    ``reference`` is either a callable ``(t, x) -> value`` or an array with
    the trajectory's shape. Time integrals use the trapezoidal rule on the
    snapshot times, space integrals the cell midpoints.
    """
    times, values = traj.times, traj.values
    if t_window is not None:
        sel = traj.window(*t_window)
        times, values = times[sel], values[sel]
        if not callable(reference):
            reference = np.asarray(reference)[sel]
    x = traj.grid.centers
    T, X = np.meshgrid(times, x, indexing="ij")
    ref = reference(T, X) if callable(reference) else np.asarray(reference, dtype=float)
    diff = values - ref
    if dictionary is None:
        dictionary = weak_star_dictionary(times[0], times[-1])
    dx = traj.grid.dx

    def integrate(a):
        return float(np.trapezoid(a.sum(axis=1) * dx, times))

    best, worst = 0.0, ""
    for tf in dictionary:
        val = abs(integrate(diff * tf.fn(T, X)))
        if val > best:
            best, worst = val, tf.name
    return WeakStarResult(best, integrate(np.abs(diff)), worst)


# ---------------------------------------------------------------- report

@dataclass
class DiagnosticsReport:
    """Nested key/value sections plus CSV appendices; rendering is deterministic."""

    sections: dict = field(default_factory=dict)
    appendices: dict = field(default_factory=dict)

    def set(self, section: str, key: str, value) -> None:
        self.sections.setdefault(section, {})[key] = value

    def to_text(self) -> str:
        lines = []
        for name in sorted(self.sections):
            lines.append(f"[{name}]")
            for key in sorted(self.sections[name]):
                lines.append(f"{key} = {_fmt(self.sections[name][key])}")
            lines.append("")
        return "\n".join(lines)

    def write(self, directory) -> None:
        from pathlib import Path
        d = Path(directory)
        d.mkdir(parents=True, exist_ok=True)
        (d / "report.txt").write_text(self.to_text())
        for name in sorted(self.appendices):
            header, rows = self.appendices[name]
            buf = io.StringIO()
            w = csv.writer(buf, lineterminator="\n")
            w.writerow(header)
            for r in rows:
                w.writerow([_fmt(v) for v in r])
            (d / f"{name}.csv").write_text(buf.getvalue())


def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (list, tuple)):
        return " ".join(_fmt(x) for x in v)
    return str(v)


def run_diagnostics(f: FluxModel, traj: Trajectory, path: BoundaryPath,
                    entropies: str = "kruzhkov", entropy_constant: float | None = None,
                    bln_tol: float | None = None) -> tuple[DiagnosticsReport, bool]:
    """Entropy and boundary checks on one trajectory.

    Returns the report and whether every check passed.
    """
    rep = DiagnosticsReport()
    dx = traj.grid.dx
    tol = entropy_tolerance(dx, entropy_constant)
    if entropies == "kruzhkov":
        pairs = kruzhkov_family(f)
    elif entropies == "quadratic":
        pairs = [quadratic_pair(f)]
    else:
        raise ValueError(f"unknown entropy family {entropies!r}")
    ok = True
    rows = []
    for pair in pairs:
        res = entropy_residual(traj, pair)
        rows.append((pair.name, res.max_positive, res.min_value, res.max_positive <= tol))
        ok &= res.max_positive <= tol
    rep.appendices["entropy_residuals"] = (["pair", "max_positive", "min", "pass"], rows)
    rep.set("entropy", "family", entropies)
    rep.set("entropy", "tolerance", tol)
    rep.set("entropy", "max_positive", max(r[1] for r in rows))
    rep.set("entropy", "pass", all(r[3] for r in rows))

    series = bln_series(f, traj, path, tol=bln_tol)
    vrows = []
    printed_disagree = 0
    for t, l, r, c in zip(series.times, series.left, series.right, series.checked):
        rm, rp = path(t)
        as_printed = left_trace_admissible(f, l.trace, rm, rp, "as_printed", tol=series_tol(dx))
        corrected = left_trace_admissible(f, l.trace, rm, rp, "corrected", tol=series_tol(dx))
        printed_disagree += int(as_printed != corrected)
        vrows.append((t, l.trace, rm, l.passed, l.violation, r.trace, rp, r.passed, r.violation,
                      bool(c), corrected, as_printed,
                      right_trace_admissible(f, r.trace, rp, tol=series_tol(dx))))
    rep.appendices["bln_verdicts"] = (
        ["t", "left_trace", "rho_minus", "left_pass", "left_violation", "right_trace", "rho_plus",
         "right_pass", "right_violation", "counted", "left_two_value_corrected",
         "left_two_value_as_printed", "right_two_value"], vrows)
    rep.set("bln", "checked", series.n_checked)
    rep.set("bln", "passed", series.n_passed)
    rep.set("bln", "pass", series.all_passed)
    rep.set("bln", "two_value_variant_disagreements", printed_disagree)
    ok &= series.all_passed

    rep.set("run", "eps", traj.eps)
    rep.set("run", "delta", traj.delta)
    rep.set("run", "n_cells", traj.grid.n_cells)
    rep.set("run", "snapshots", len(traj))
    rep.set("run", "flux", f.name)
    rep.set("run", "path", getattr(path, "descriptor", ""))
    if traj.F0.size:
        t_end = float(traj.times[-1])
        F0, F1 = traj.mean_boundary_flux(0.5 * t_end, t_end)
        rep.set("current", "mean_F0_second_half", F0)
        rep.set("current", "mean_F1_second_half", F1)
    rep.set("summary", "pass", bool(ok))
    return rep, bool(ok)


def series_tol(dx: float) -> float:
    return defaults.TRACE_VALUE_TOL_PER_DX * dx
