"""Experiment configs, parameter sweeps, rate fits and the command line.

A config is a small INI file::

    [flux]
    name = traffic            ; or sine, or custom with table = path.csv
    [boundary]
    preset = constant 0.3 0.2
    [initial]
    datum = constant 0.55     ; riemann a b X | from-file path.csv
    [solver]
    kind = hyperbolic         ; viscous | stationary | quasistatic-exact
    eps = 0.2 0.1 0.05 0.025
    delta = 0.1
    n_cells = 400
    T = 1.0
    output_times = linspace 0 1 201
    [output]
    dir = runs/demo
    [tolerances]
    entropy_c = 16.0
    [diagnostics]
    entropy = none            ; kruzhkov | quadratic (forces dense snapshots)
    dictionary = v1

Every parameter point writes into its own directory; the top-level
``sweep.csv`` depends only on the config, and wall times go to
``timing.csv``.
"""

from __future__ import annotations

import argparse
import configparser
import csv
import io
import logging
import math
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Sequence

import numpy as np

from . import defaults
from .analysis import (DiagnosticsReport, Window, bln_series, run_diagnostics, weak_star_dictionary,
                       weak_star_error, young_measure)
from .flux import FluxDomainError, FluxModel, InvalidFluxError, flux_from_name
from .hyperbolic import CellField, GridSpec, SolverError, Trajectory, run, step_output_times
from .quasistatic import (BoundaryPath, PresetError, Region, classify, exact_value,
                          make_boundary_path, variational_current)
from .viscous import (StationaryBVP, StationarySolveError, ViscousParams, energy_functional,
                      run_viscous)

log = logging.getLogger(__name__)

WORKERS_ENV = "QSLAB_WORKERS"
SOLVERS = ("hyperbolic", "viscous", "stationary", "quasistatic-exact")
TOLERANCE_KEYS = ("entropy_c", "bln_tol_per_dx")
SWEEP_COLUMNS = ("eps", "delta", "n_cells", "status", "region", "l1_error", "weak_star_error",
                 "current_error", "energy", "bln_passed", "bln_checked", "young_atoms",
                 "young_residual", "young_flux_mean", "message")


class ConfigError(ValueError):
    """A config file or command-line setting is missing or malformed."""


# ---------------------------------------------------------------- config

def _floats(text: str, what: str) -> tuple[float, ...]:
    try:
        vals = tuple(float(w) for w in text.replace(",", " ").split())
    except ValueError as exc:
        raise ConfigError(f"{what}: expected numbers, got {text!r}") from exc
    if not vals:
        raise ConfigError(f"{what}: list is empty")
    return vals


def parse_output_times(text: str, T: float) -> tuple[float, ...] | str:
    """``linspace a b n``, ``dense`` (every time level) or an explicit list."""
    words = text.split()
    if words == ["dense"]:
        return "dense"
    if words and words[0] == "linspace":
        if len(words) != 4:
            raise ConfigError("output_times: linspace needs a b n")
        a, b = float(words[1]), float(words[2])
        n = int(words[3])
        if n < 1:
            raise ConfigError("output_times: need at least one time")
        return tuple(float(v) for v in np.linspace(a, b, n))
    vals = _floats(text, "output_times")
    if any(v < 0.0 or v > T for v in vals) or list(vals) != sorted(vals):
        raise ConfigError("output_times must be sorted inside [0, T]")
    return vals


@dataclass(frozen=True)
class ExperimentConfig:
    flux: str = "traffic"
    flux_table: str | None = None
    boundary: str = "constant 0.3 0.2"
    initial: str = "constant 0.55"
    solver: str = "hyperbolic"
    eps: tuple = defaults.EPS_LIST
    delta: tuple = (defaults.DELTA_LIST[0],)
    n_cells: tuple = (defaults.N_CELLS,)
    T: float = defaults.T
    output_times: tuple | str = tuple(float(v) for v in np.linspace(0.0, defaults.T, 201))
    cfl: float = defaults.CFL
    output_dir: str | None = None
    tolerances: dict = field(default_factory=dict)
    entropy: str = "none"
    dictionary: str = defaults.DICTIONARY_VERSION

    def __post_init__(self):
        if self.solver not in SOLVERS:
            raise ConfigError(f"unknown solver {self.solver!r}; choose from {', '.join(SOLVERS)}")
        if not self.T > 0.0:
            raise ConfigError("T must be positive")
        for name in ("eps", "delta", "n_cells"):
            if not getattr(self, name):
                raise ConfigError(f"{name} list is empty")
        if self.solver in ("hyperbolic", "viscous") and min(self.eps) <= 0.0:
            raise ConfigError("eps values must be positive")
        if self.solver in ("viscous", "stationary") and min(self.delta) <= 0.0:
            raise ConfigError("delta values must be positive")
        if any(int(n) != n or n < 4 for n in self.n_cells):
            raise ConfigError("n_cells values must be integers >= 4")
        if not 0.0 < self.cfl <= 1.0:
            raise ConfigError("cfl must lie in (0, 1]")
        if self.entropy not in ("none", "kruzhkov", "quadratic"):
            raise ConfigError(f"unknown entropy family {self.entropy!r}")
        bad = set(self.tolerances) - set(TOLERANCE_KEYS)
        if bad:
            raise ConfigError(f"unknown tolerance keys: {', '.join(sorted(bad))}")
        # presets must resolve
        self.make_path(self.make_flux())
        if self.solver in ("hyperbolic", "viscous"):
            _parse_initial(self.initial)

    def make_flux(self) -> FluxModel:
        try:
            return flux_from_name(self.flux, self.flux_table)
        except (InvalidFluxError, OSError) as exc:
            raise ConfigError(f"flux: {exc}") from exc

    def make_path(self, f: FluxModel) -> BoundaryPath:
        try:
            return make_boundary_path(self.boundary, f)
        except (PresetError, FluxDomainError) as exc:
            raise ConfigError(f"boundary: {exc}") from exc

    def points(self) -> list[tuple[float, float, int]]:
        """Parameter points ``(eps, delta, n_cells)``; unused axes are 0."""
        ns = sorted({int(n) for n in self.n_cells})
        if self.solver == "hyperbolic":
            return [(e, 0.0, n) for e in sorted(set(self.eps), reverse=True) for n in ns]
        if self.solver == "viscous":
            return [(e, d, n) for e in sorted(set(self.eps), reverse=True)
                    for d in sorted(set(self.delta), reverse=True) for n in ns]
        if self.solver == "stationary":
            return [(0.0, d, n) for d in sorted(set(self.delta), reverse=True) for n in ns]
        return [(0.0, 0.0, ns[0])]

    @classmethod
    def from_text(cls, text: str, base: Path | None = None) -> "ExperimentConfig":
        cp = configparser.ConfigParser(inline_comment_prefixes=(";", "#"))
        try:
            cp.read_string(text)
        except configparser.Error as exc:
            raise ConfigError(f"config syntax: {exc}") from exc

        def get(sec, key, default=None):
            return cp.get(sec, key, fallback=default) if cp.has_section(sec) else default

        T = float(get("solver", "T", defaults.T))
        table = get("flux", "table")
        if table and base is not None and not Path(table).is_absolute():
            table = str(base / table)
        initial = get("initial", "datum", "constant 0.55")
        if initial.startswith("from-file") and base is not None:
            words = initial.split(maxsplit=1)
            if len(words) == 2 and not Path(words[1]).is_absolute():
                initial = f"from-file {base / words[1]}"
        tol = {}
        if cp.has_section("tolerances"):
            for key, val in cp.items("tolerances"):
                tol[key] = _floats(val, f"tolerances.{key}")[0]
        kw = dict(
            flux=get("flux", "name", "traffic"), flux_table=table,
            boundary=get("boundary", "preset", "constant 0.3 0.2"), initial=initial,
            solver=get("solver", "kind", "hyperbolic"), T=T,
            output_times=parse_output_times(get("solver", "output_times", "linspace 0 1 201"), T),
            cfl=float(get("solver", "cfl", defaults.CFL)),
            output_dir=get("output", "dir"), tolerances=tol,
            entropy=get("diagnostics", "entropy", "none"),
            dictionary=get("diagnostics", "dictionary", defaults.DICTIONARY_VERSION))
        for key, default in (("eps", defaults.EPS_LIST), ("delta", (defaults.DELTA_LIST[0],)),
                             ("n_cells", (defaults.N_CELLS,))):
            raw = get("solver", key)
            vals = default if raw is None else _floats(raw, f"solver.{key}")
            kw[key] = tuple(int(v) for v in vals) if key == "n_cells" else tuple(vals)
        return cls(**kw)

    @classmethod
    def from_file(cls, path) -> "ExperimentConfig":
        p = Path(path)
        try:
            text = p.read_text()
        except OSError as exc:
            raise ConfigError(f"cannot read config {p}: {exc}") from exc
        cfg = cls.from_text(text, base=p.parent)
        if cfg.output_dir is not None and not Path(cfg.output_dir).is_absolute():
            cfg = replace(cfg, output_dir=str(p.parent / cfg.output_dir))
        return cfg


def _parse_initial(text: str):
    words = text.split()
    try:
        if words[0] == "constant" and len(words) == 2:
            return ("constant", float(words[1]))
        if words[0] == "riemann" and len(words) == 4:
            return ("riemann", float(words[1]), float(words[2]), float(words[3]))
        if words[0] == "from-file" and len(words) == 2:
            return ("from-file", words[1])
    except (ValueError, IndexError) as exc:
        raise ConfigError(f"initial: cannot parse {text!r}") from exc
    raise ConfigError(f"initial: cannot parse {text!r}")


def make_initial(text: str, grid: GridSpec) -> CellField:
    """Constant, Riemann, or a ``x,u`` CSV interpolated to the cell centres."""
    spec = _parse_initial(text)
    if spec[0] == "constant":
        u0 = CellField.constant(grid, spec[1])
    elif spec[0] == "riemann":
        u0 = CellField.riemann(grid, spec[1], spec[2], spec[3])
    else:
        try:
            data = np.loadtxt(spec[1], delimiter=",", skiprows=1, ndmin=2)
        except OSError as exc:
            raise ConfigError(f"initial: {exc}") from exc
        u0 = CellField(grid, np.interp(grid.centers, data[:, 0], data[:, 1]))
    if not u0.is_valid():
        raise ConfigError("initial values must lie in [0, 1]")
    return u0


# ---------------------------------------------------------------- results

@dataclass
class SweepResult:
    """One row per parameter point, keyed by ``(eps, delta, n_cells)``."""

    rows: dict = field(default_factory=dict)
    wall_times: dict = field(default_factory=dict)

    def column(self, name: str) -> list:
        return [self.rows[k][name] for k in sorted(self.rows, reverse=True)]

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(SWEEP_COLUMNS)
        for key in sorted(self.rows, key=lambda k: (-k[0], -k[1], k[2])):
            w.writerow([_fmt(self.rows[key][c]) for c in SWEEP_COLUMNS])
        return buf.getvalue()

    def timing_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(("eps", "delta", "n_cells", "wall_time"))
        for key in sorted(self.wall_times, key=lambda k: (-k[0], -k[1], k[2])):
            w.writerow([_fmt(key[0]), _fmt(key[1]), key[2], _fmt(self.wall_times[key])])
        return buf.getvalue()

    @property
    def n_failed(self) -> int:
        return sum(r["status"] != "ok" for r in self.rows.values())


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, (tuple, list)):
        return " ".join(_fmt(x) for x in v)
    return str(v)


def _write_array_csv(path: Path, header: Sequence[str], cols: Sequence[np.ndarray]) -> None:
    data = np.column_stack([np.asarray(c, dtype=float).ravel() for c in cols])
    with open(path, "w") as fh:
        fh.write(",".join(header) + "\n")
        np.savetxt(fh, data, delimiter=",", fmt="%.17g")


def write_trajectory(traj: Trajectory, directory, f: FluxModel, path: BoundaryPath,
                     output_times: Sequence[float] | None = None) -> None:
    """Snapshots ``t,x,u``, fluxes ``t,F0,F1``, energy ``t,energy`` and ``meta.ini``.

    With ``output_times`` only the snapshots nearest those times are written.
    """
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    idx = np.arange(len(traj.times))
    if output_times is not None and len(output_times):
        idx = np.unique([int(np.argmin(np.abs(traj.times - t))) for t in output_times])
    x = traj.grid.centers
    tt = np.repeat(traj.times[idx], x.size)
    xx = np.tile(x, idx.size)
    _write_array_csv(d / "snapshots.csv", ("t", "x", "u"), (tt, xx, traj.values[idx]))
    _write_array_csv(d / "fluxes.csv", ("t", "F0", "F1", "dt"),
                     (traj.step_times, traj.F0, traj.F1, traj.step_dts))
    if traj.dissipation is not None:
        _, hist = energy_functional(traj)
        _write_array_csv(d / "energy.csv", ("t", "energy"), (hist[:, 0], hist[:, 1]))
        _write_array_csv(d / "dissipation.csv", ("t", "dissipation"),
                         (traj.step_times + traj.step_dts, traj.dissipation))
    cp = configparser.ConfigParser()
    cp["run"] = {"flux": f.name, "boundary": getattr(path, "descriptor", ""),
                 "eps": repr(float(traj.eps)), "delta": repr(float(traj.delta)),
                 "n_cells": str(traj.grid.n_cells), "cfl": repr(float(traj.cfl)),
                 "solver": traj.meta.get("solver", "")}
    with open(d / "meta.ini", "w") as fh:
        cp.write(fh)


def read_trajectory(directory, flux_table: str | None = None):
    """Inverse of :func:`write_trajectory`; returns ``(trajectory, flux, path)``."""
    d = Path(directory)
    cp = configparser.ConfigParser()
    if not cp.read(d / "meta.ini"):
        raise ConfigError(f"{d} holds no meta.ini")
    meta = cp["run"]
    f = flux_from_name(meta["flux"], flux_table)
    path = make_boundary_path(meta["boundary"], f)
    n = int(meta["n_cells"])
    try:
        snaps = np.loadtxt(d / "snapshots.csv", delimiter=",", skiprows=1, ndmin=2)
        fl = np.loadtxt(d / "fluxes.csv", delimiter=",", skiprows=1, ndmin=2)
    except OSError as exc:
        raise ConfigError(f"cannot read trajectory: {exc}") from exc
    if snaps.shape[0] % n:
        raise ConfigError("snapshot rows do not match n_cells")
    values = snaps[:, 2].reshape(-1, n)
    times = snaps[::n, 0]
    diss = None
    if (d / "dissipation.csv").exists():
        diss = np.loadtxt(d / "dissipation.csv", delimiter=",", skiprows=1, ndmin=2)[:, 1]
    traj = Trajectory(GridSpec(n), times, values, fl[:, 0], fl[:, 3], fl[:, 1], fl[:, 2],
                      float(meta["eps"]), float(meta["cfl"]), delta=float(meta["delta"]),
                      dissipation=diss, meta={"solver": meta.get("solver", "")})
    return traj, f, path


# ---------------------------------------------------------------- sweep

def fit_rate(errors: Sequence[tuple[float, float]]) -> float:
    """Least-squares slope of ``log e`` against ``log h``."""
    pts = list(errors)
    if len(pts) < 3:
        raise ValueError("a rate fit needs at least 3 points")
    h = np.array([p[0] for p in pts], dtype=float)
    e = np.array([p[1] for p in pts], dtype=float)
    if np.any(~np.isfinite(h)) or np.any(~np.isfinite(e)) or np.any(h <= 0.0) or np.any(e <= 0.0):
        raise ValueError("rate fits need positive, finite h and e")
    if np.ptp(np.log(h)) == 0.0:
        raise ValueError("rate fits need at least two distinct h")
    slope, _ = np.polyfit(np.log(h), np.log(e), 1)
    return float(slope)


def _empty_row(eps, delta, n) -> dict:
    row = {c: None for c in SWEEP_COLUMNS}
    row.update(eps=float(eps), delta=float(delta), n_cells=int(n), status="ok", message="")
    return row


def _window_metrics(f, traj, path, row, cfg: ExperimentConfig, t0: float) -> None:
    """Fill the comparison columns over ``[t0, T]``."""
    T = cfg.T
    sel = traj.window(t0, T)
    times = traj.times[sel]
    rm, rp = path(times)
    regions = np.atleast_1d(classify(f, rm, rp))
    critical = np.any(regions == Region.CRITICAL.value)
    row["region"] = "+".join(sorted(set(str(r) for r in regions)))
    st = traj.step_times
    steps = (st >= t0) & (st < T)
    if np.any(steps):
        w = traj.step_dts[steps]
        jref = np.atleast_1d(variational_current(f, *path(st[steps])))
        row["current_error"] = float(abs(np.dot(w, traj.F0[steps] - jref)) / w.sum())
    if critical:
        ym = young_measure(traj, Window(t0, T, 0.0, 1.0), flux=f, path=path)
        row["young_atoms"] = tuple(float(a) for a in ym.atoms)
        row["young_residual"] = ym.residual
        row["young_flux_mean"] = ym.flux_mean
        return
    if times.size < 2:
        return
    ex = exact_value(f, path, traj.times)
    ref = np.broadcast_to(ex[:, None], traj.values.shape)
    res = weak_star_error(traj, ref, weak_star_dictionary(times[0], times[-1], cfg.dictionary),
                          t_window=(t0, T))
    row["l1_error"] = res.l1
    row["weak_star_error"] = res.error


def run_point(cfg: ExperimentConfig, point: tuple[float, float, int]) -> tuple[dict, float]:
    """Run one parameter point; failures are captured in the row."""
    eps, delta, n = point
    row = _empty_row(eps, delta, n)
    start = time.perf_counter()
    try:
        _run_point(cfg, point, row)
    except Exception as exc:  # noqa: BLE001 - one bad point must not stop the sweep
        row["status"] = "failed"
        row["message"] = f"{type(exc).__name__}: {exc}"
        log.warning("point %s failed: %s", point, exc)
    return row, time.perf_counter() - start


def point_dirname(point) -> str:
    eps, delta, n = point
    return f"eps{eps!r}_delta{delta!r}_n{n}"


def _run_point(cfg: ExperimentConfig, point, row: dict) -> None:
    eps, delta, n = point
    f = cfg.make_flux()
    path = cfg.make_path(f)
    grid = GridSpec(n)
    out = Path(cfg.output_dir) / point_dirname(point) if cfg.output_dir else None
    tol = cfg.tolerances

    if cfg.solver == "quasistatic-exact":
        ts = _plain_times(cfg)
        rm, rp = path(ts)
        cur = np.atleast_1d(variational_current(f, rm, rp))
        val = exact_value(f, path, ts)
        jfun = np.array([f(np.clip(f.m, b, a)) if a >= b else min(f(a), f(b))
                         for a, b in zip(np.atleast_1d(rm), np.atleast_1d(rp))])
        row["current_error"] = float(np.max(np.abs(cur - jfun)))
        row["region"] = "+".join(sorted(set(str(r) for r in np.atleast_1d(classify(f, rm, rp)))))
        if out is not None:
            out.mkdir(parents=True, exist_ok=True)
            _write_array_csv(out / "quasistatic.csv", ("t", "rho_minus", "rho_plus", "value", "current"),
                             (ts, rm, rp, val, cur))
        return

    if cfg.solver == "stationary":
        rm, rp = (float(v) for v in path(0.0))
        bvp = StationaryBVP(f, rm, rp, delta)
        v = bvp(grid.centers)
        jref = float(variational_current(f, rm, rp))
        row["current_error"] = abs(bvp.K - jref)
        row["region"] = str(classify(f, rm, rp).value)
        xs = np.linspace(0.0, 1.0, 4 * n + 1)
        vs = bvp(xs)
        row["energy"] = delta * float(np.trapezoid(np.gradient(vs, xs) ** 2, xs))
        ex = float(exact_value(f, path, 0.0)[0])
        if not math.isnan(ex):
            row["l1_error"] = float(np.mean(np.abs(v - ex)))
        if out is not None:
            out.mkdir(parents=True, exist_ok=True)
            _write_array_csv(out / "stationary.csv", ("x", "v"), (grid.centers, v))
        return

    u0 = make_initial(cfg.initial, grid)
    plain = _plain_times(cfg)
    times = (step_output_times(f, eps, n, cfg.T, cfg.cfl)
             if cfg.entropy != "none" or cfg.output_times == "dense" else plain)
    if cfg.solver == "hyperbolic":
        traj = run(f, path, u0, eps, cfg.cfl, cfg.T, times)
    else:
        traj = run_viscous(f, path, u0, ViscousParams(eps, delta, grid, cfg.cfl), cfg.T, times)
        row["energy"] = energy_functional(traj)[0]

    _window_metrics(f, traj, path, row, cfg, 0.5 * cfg.T)
    series = bln_series(f, traj, path, tol=_bln_tol(tol, grid.dx))
    row["bln_passed"], row["bln_checked"] = series.n_passed, series.n_checked
    if out is not None:
        write_trajectory(traj, out, f, path, None if cfg.output_times == "dense" else plain)
    if cfg.entropy != "none":
        rep, ok = run_diagnostics(f, traj, path, cfg.entropy, tol.get("entropy_c"),
                                  _bln_tol(tol, grid.dx))
        if out is not None:
            rep.write(out)
        if not ok:
            row["message"] = "diagnostics reported failures"


def _bln_tol(tol: dict, dx: float):
    c = tol.get("bln_tol_per_dx")
    return None if c is None else c * dx


def _plain_times(cfg: ExperimentConfig) -> np.ndarray:
    if cfg.output_times == "dense":
        return np.linspace(0.0, cfg.T, 201)
    return np.asarray(cfg.output_times, dtype=float)


def _workers(requested: int | None) -> int:
    if requested is not None:
        return max(1, int(requested))
    raw = os.environ.get(WORKERS_ENV, "1")
    try:
        return max(1, int(raw))
    except ValueError:
        raise ConfigError(f"{WORKERS_ENV} must be an integer, got {raw!r}") from None


def run_experiment(cfg: ExperimentConfig, workers: int | None = None) -> SweepResult:
    """Run every parameter point and collect one row each.

    Points run in a process pool when more than one worker is configured
    (argument, else the ``QSLAB_WORKERS`` environment variable).
    """
    points = cfg.points()
    nw = _workers(workers)
    result = SweepResult()
    if nw == 1 or len(points) == 1:
        outcomes = [run_point(cfg, p) for p in points]
    else:
        with ProcessPoolExecutor(max_workers=min(nw, len(points))) as pool:
            outcomes = list(pool.map(run_point, [cfg] * len(points), points))
    for p, (row, wall) in zip(points, outcomes):
        key = (row["eps"], row["delta"], row["n_cells"])
        result.rows[key] = row
        result.wall_times[key] = wall
    if cfg.output_dir:
        d = Path(cfg.output_dir)
        d.mkdir(parents=True, exist_ok=True)
        (d / "sweep.csv").write_text(result.to_csv())
        (d / "timing.csv").write_text(result.timing_csv())
    return result


# ---------------------------------------------------------------- command line

def _add_flux_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--flux", default="traffic", choices=("traffic", "sine", "custom"))
    p.add_argument("--flux-table", help="u,J CSV for --flux custom")


def _path_from_args(args, f: FluxModel) -> BoundaryPath:
    if args.boundary:
        return make_boundary_path(args.boundary, f)
    if args.minus is None or args.plus is None:
        raise ConfigError("give --boundary or both --minus and --plus")
    return make_boundary_path(f"constant {args.minus!r} {args.plus!r}", f)


def _cmd_quasistatic(args) -> int:
    f = flux_from_name(args.flux, args.flux_table)
    path = _path_from_args(args, f)
    if not args.t1 >= args.t0 or args.n < 1:
        raise ConfigError("need t1 >= t0 and n >= 1")
    ts = np.linspace(args.t0, args.t1, args.n)
    rm, rp = path(ts)
    rm, rp = np.atleast_1d(rm), np.atleast_1d(rp)
    regions = np.atleast_1d(classify(f, rm, rp))
    val = exact_value(f, path, ts)
    cur = np.atleast_1d(variational_current(f, rm, rp))
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(("t", "rho_minus", "rho_plus", "region", "value", "current"))
    for row in zip(ts, rm, rp, regions, val, cur):
        w.writerow([_fmt(row[0]), _fmt(row[1]), _fmt(row[2]), str(row[3]),
                    "" if math.isnan(row[4]) else _fmt(row[4]), _fmt(row[5])])
    _emit(buf.getvalue(), args.out)
    return 0


def _emit(text: str, out: str | None) -> None:
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def _cmd_solve(args) -> int:
    f = flux_from_name(args.flux, args.flux_table)
    path = _path_from_args(args, f)
    grid = GridSpec(args.n_cells)
    u0 = make_initial(args.initial, grid)
    times = (step_output_times(f, args.eps, args.n_cells, args.T, args.cfl) if args.dense
             else np.linspace(0.0, args.T, args.outputs))
    if args.solver == "hyperbolic":
        traj = run(f, path, u0, args.eps, args.cfl, args.T, times)
    else:
        if args.delta is None:
            raise ConfigError("--solver viscous needs --delta")
        traj = run_viscous(f, path, u0, ViscousParams(args.eps, args.delta, grid, args.cfl),
                           args.T, times)
    write_trajectory(traj, args.out, f, path)
    print(f"wrote {len(traj.times)} snapshots to {args.out}")
    return 0


def _cmd_stationary(args) -> int:
    f = flux_from_name(args.flux, args.flux_table)
    bvp = StationaryBVP(f, args.minus, args.plus, args.delta)
    x = GridSpec(args.n_cells).centers
    buf = io.StringIO()
    buf.write("x,v\n")
    np.savetxt(buf, np.column_stack([x, bvp(x)]), delimiter=",", fmt="%.17g")
    _emit(buf.getvalue(), args.out)
    if bvp.saturated:
        log.warning("layer gap below double precision; profile is the sharp limit")
    return 0


def _cmd_sweep(args) -> int:
    cfg = ExperimentConfig.from_file(args.config)
    if args.out:
        cfg = replace(cfg, output_dir=args.out)
    res = run_experiment(cfg, args.workers)
    if not cfg.output_dir:
        sys.stdout.write(res.to_csv())
    return 1 if res.n_failed else 0


def _cmd_verify(args) -> int:
    traj, f, path = read_trajectory(args.traj, args.flux_table)
    if len(traj.times) < 3:
        raise ConfigError("verify needs at least 3 stored snapshots")
    rep, ok = run_diagnostics(f, traj, path, args.entropy, args.entropy_c)
    rep.write(args.out or args.traj)
    print(f"entropy max positive {rep.sections['entropy']['max_positive']!r} "
          f"(tol {rep.sections['entropy']['tolerance']!r}); "
          f"BLN {rep.sections['bln']['passed']}/{rep.sections['bln']['checked']}")
    print("PASS" if ok else "FAIL")
    return 0 if ok else 1


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="qslab", description=__doc__.splitlines()[0])
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    q = sub.add_parser("quasistatic", help="exact profile values and currents over a time grid")
    _add_flux_args(q)
    q.add_argument("--boundary", help="boundary preset, e.g. 'ramp 0.3 0.2 0.6 0.8 0 1'")
    q.add_argument("--minus", type=float)
    q.add_argument("--plus", type=float)
    q.add_argument("--t0", type=float, default=0.0)
    q.add_argument("--t1", type=float, default=1.0)
    q.add_argument("--n", type=int, default=11)
    q.add_argument("--out")
    q.set_defaults(func=_cmd_quasistatic)

    s = sub.add_parser("solve", help="one hyperbolic or viscous run")
    _add_flux_args(s)
    s.add_argument("--boundary")
    s.add_argument("--minus", type=float)
    s.add_argument("--plus", type=float)
    s.add_argument("--initial", default="constant 0.55")
    s.add_argument("--solver", choices=("hyperbolic", "viscous"), default="hyperbolic")
    s.add_argument("--eps", type=float, default=0.1)
    s.add_argument("--delta", type=float)
    s.add_argument("--n-cells", type=int, default=defaults.N_CELLS)
    s.add_argument("--T", type=float, default=defaults.T)
    s.add_argument("--cfl", type=float, default=defaults.CFL)
    s.add_argument("--outputs", type=int, default=201, help="number of evenly spaced snapshots")
    s.add_argument("--dense", action="store_true", help="store every time level")
    s.add_argument("--out", required=True)
    s.set_defaults(func=_cmd_solve)

    st = sub.add_parser("stationary", help="stationary viscous profile")
    _add_flux_args(st)
    st.add_argument("--minus", type=float, required=True)
    st.add_argument("--plus", type=float, required=True)
    st.add_argument("--delta", type=float, required=True)
    st.add_argument("--n-cells", type=int, default=defaults.N_CELLS)
    st.add_argument("--out")
    st.set_defaults(func=_cmd_stationary)

    sw = sub.add_parser("sweep", help="run a parameter sweep from a config file")
    sw.add_argument("--config", required=True)
    sw.add_argument("--out")
    sw.add_argument("--workers", type=int)
    sw.set_defaults(func=_cmd_sweep)

    v = sub.add_parser("verify", help="entropy and boundary checks on a stored run")
    v.add_argument("--traj", required=True)
    v.add_argument("--entropy", choices=("kruzhkov", "quadratic"), default="kruzhkov")
    v.add_argument("--entropy-c", type=float)
    v.add_argument("--flux-table")
    v.add_argument("--out")
    v.set_defaults(func=_cmd_verify)
    return ap


def cli(argv: Sequence[str] | None = None) -> int:
    """Entry point; returns 0 on success, 1 on failed checks, 2 on config errors."""
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 0 if exc.code == 0 else 2
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (ConfigError, PresetError, InvalidFluxError, FluxDomainError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (SolverError, StationarySolveError) as exc:
        print(f"run failed: {exc}", file=sys.stderr)
        return 1


def main() -> None:
    sys.exit(cli())


if __name__ == "__main__":
    main()
