"""Acceptance suite: one test per criterion, one PASS/FAIL line each.

Every hyperbolic run is made once with a snapshot at every time level and
reduced to the numbers the criteria need; the reductions are cached at
module level. Lines are echoed to stdout and repeated in the terminal
summary.
"""

from __future__ import annotations

import functools
import time

import numpy as np
import pytest

from qslab import defaults
from qslab.analysis import (Window, bln_series, calibrate_entropy_constant, entropy_residual,
                            entropy_tolerance, kruzhkov_family, young_measure)
from qslab.flux import make_traffic_flux
from qslab.harness import fit_rate
from qslab.hyperbolic import CellField, GridSpec, godunov_flux, run, step_output_times
from qslab.quasistatic import constant_path, exact_value, staged_path, variational_current
from qslab.viscous import (ViscousParams, critical_tanh_profile, energy_functional, run_viscous,
                           solve_C, stationary_profile)

F = make_traffic_flux()
N = defaults.N_CELLS
DX = 1.0 / N
T = defaults.T
EPS = tuple(defaults.EPS_LIST)
FLOOR = defaults.ROUNDOFF_FLOOR
RESULTS: dict[int, str] = {}

INITIAL = {
    "c055": lambda g: CellField.constant(g, 0.55),
    "c01": lambda g: CellField.constant(g, 0.1),
    "c09": lambda g: CellField.constant(g, 0.9),
    "riemann": lambda g: CellField.riemann(g, 0.1, 0.9, 0.5),
    "shock04": lambda g: CellField.riemann(g, 0.3, 0.7, 0.4),
}
PATHS = {
    "case1": lambda: constant_path(0.3, 0.2),
    "case2": lambda: constant_path(0.6, 0.8),
    "case3": lambda: constant_path(0.8, 0.3),
    "staged": lambda: staged_path(0.3, 0.2, 0.6, 0.8),
    "critical": lambda: constant_path(0.3, 0.7),
}
# (path, initial) runs used by criteria 2-6; the off-critical ones feed criterion 10
OFF_CRITICAL = [("case1", "c055"), ("case1", "c01"), ("case1", "c09"), ("case1", "riemann"),
                ("case2", "c055"), ("case3", "c055"), ("staged", "c055")]
ALL_RUNS = OFF_CRITICAL + [("critical", "shock04")]


def record(n: int, ok: bool, detail: str) -> None:
    line = f"criterion {n:2d}: {'PASS' if ok else 'FAIL'}  {detail}"
    RESULTS[n] = line
    print(line)


def _trapz_l1(times, values, ref):
    """``int int |u - ref| dx dt`` with trapezoid in time and midpoints in space."""
    return float(np.trapezoid(np.abs(values - ref).sum(axis=1) * DX, times))


def _ledger(tr, u_start):
    vals = np.vstack([u_start, tr.values[1:]])
    lhs = np.diff(tr.eps * tr.grid.dx * vals.sum(axis=1))
    rhs = tr.step_dts * (tr.F0 - tr.F1)
    scale = tr.eps * tr.grid.dx * np.maximum(np.abs(vals[:-1]).sum(axis=1), 1.0)
    return float(np.max(np.abs(lhs - rhs) / scale))


@functools.lru_cache(maxsize=None)
def summary(path_name: str, init: str, eps: float) -> dict:
    """Run once with dense snapshots and keep only the reductions."""
    g = GridSpec(N)
    path = PATHS[path_name]()
    u0 = INITIAL[init](g)
    start = time.perf_counter()
    tr = run(F, path, u0, eps, T=T, output_times=step_output_times(F, eps, N, T))
    wall = time.perf_counter() - start
    out = {"wall": wall}
    times = tr.times
    win = tr.window(0.5 * T, T)
    ex = exact_value(F, path, times)
    if not np.any(np.isnan(ex)):
        out["l1_window"] = _trapz_l1(times[win], tr.values[win], ex[win, None])
        out["value_l1_dt"] = float(np.trapezoid(np.abs(tr.values.mean(axis=1) - ex), times))
    # sparse copy of the window for cross-run comparisons
    grid_t = np.linspace(0.5 * T, T, 101)
    idx = np.searchsorted(times, grid_t - 1e-12)
    out["window_times"] = times[idx]
    out["window_values"] = tr.values[idx].copy()
    out["entropy_worst"] = max(entropy_residual(tr, p).max_positive for p in kruzhkov_family(F))
    series = bln_series(F, tr, path)
    out["bln"] = (series.n_passed, series.n_checked)
    bad = [t for t, ok, l, r in zip(series.times, series.checked, series.left, series.right)
           if ok and not (l.passed and r.passed)]
    out["bln_first_fail"] = bad[0] if bad else None
    out["ledger"] = _ledger(tr, u0.values)
    rm, rp = path(times)
    lo = min(u0.values.min(), np.min(rm), np.min(rp))
    hi = max(u0.values.max(), np.max(rm), np.max(rp))
    out["max_principle"] = bool(tr.values.min() >= lo and tr.values.max() <= hi)
    if path_name == "critical":
        w = Window(0.5 * T, T, 0.0, 1.0)
        out["young_modes"] = young_measure(tr, w, flux=F)
        out["young_pinned"] = young_measure(tr, w, flux=F, path=path)
        out["flux_mean"] = tr.mean_boundary_flux(0.5 * T, T)[0]
    return out


def _decreasing(vals) -> bool:
    """Strict decrease, except that successive values both at roundoff count as converged."""
    return all(a > b or (a <= FLOOR and b <= FLOOR) for a, b in zip(vals, vals[1:]))


def _limit_check(path_name: str, init: str = "c055", bound: float = 0.05):
    l1 = [summary(path_name, init, e)["l1_window"] for e in EPS]
    wall = max(summary(path_name, init, e)["wall"] for e in EPS)
    ok = _decreasing(l1) and l1[-1] <= bound and wall < 60.0
    return ok, l1, wall


def _fmt(vals) -> str:
    return "[" + ", ".join(f"{v:.3g}" for v in vals) + "]"


# ---------------------------------------------------------------- criteria

def test_criterion_01_exact_current_oracle():
    grid = np.linspace(0.0, 1.0, 200)
    RM, RP = np.meshgrid(grid, grid, indexing="ij")
    start = time.perf_counter()
    cur = np.asarray(variational_current(F, RM.ravel(), RP.ravel()))
    wall = time.perf_counter() - start
    brute = np.empty(cur.size)
    s = np.linspace(0.0, 1.0, 10_000)
    rm, rp = RM.ravel(), RP.ravel()
    for k0 in range(0, cur.size, 400):
        a, b = rm[k0:k0 + 400, None], rp[k0:k0 + 400, None]
        vals = F(np.minimum(a, b) + s[None, :] * np.abs(a - b))
        brute[k0:k0 + 400] = np.where(a[:, 0] >= b[:, 0], vals.max(axis=1), vals.min(axis=1))
    god = np.asarray(godunov_flux(F, rm, rp))
    e_brute = float(np.max(np.abs(cur - brute)))
    e_god = float(np.max(np.abs(cur - god)))
    ok = e_brute <= 1e-8 and e_god <= 1e-12 and wall < 5.0
    record(1, ok, f"brute {e_brute:.2e} <= 1e-8, godunov {e_god:.2e} <= 1e-12, {wall:.3f}s < 5s")
    assert ok


def test_criterion_02_off_critical_limit():
    ok, l1, wall = _limit_check("case1")
    record(2, ok, f"L1 over [T/2,T] {_fmt(l1)} decreasing, last <= 0.05, slowest {wall:.1f}s")
    assert ok


def test_criterion_03_initial_independence():
    details, ok = [], True
    for init in ("c01", "c09", "riemann"):
        ok_i, l1, _ = _limit_check("case1", init)
        diffs = []
        for e in EPS:
            a, b = summary("case1", init, e), summary("case1", "c055", e)
            diffs.append(_trapz_l1(a["window_times"], a["window_values"], b["window_values"]))
        # the bound applies where criterion 2 sets its own tolerance, the smallest eps
        ok_i = ok_i and diffs[-1] <= 2 * DX
        ok &= ok_i
        details.append(f"{init}: L1 {_fmt(l1)} diff {_fmt(diffs)}")
    record(3, ok, "; ".join(details) + f"; diff at eps {EPS[-1]} <= {2 * DX:g}")
    assert ok


def test_criterion_04_all_cases():
    ok2, l2, _ = _limit_check("case2")
    ok3, l3, _ = _limit_check("case3")
    ok = ok2 and ok3
    record(4, ok, f"(0.6,0.8)->0.8 L1 {_fmt(l2)}; (0.8,0.3)->0.5 L1 {_fmt(l3)}")
    assert ok


def test_criterion_05_time_dependent_boundary():
    vals = [summary("staged", "c055", e)["value_l1_dt"] for e in EPS]
    ok = _decreasing(vals) and vals[-1] <= 0.08
    record(5, ok, f"L1(dt) of mean value vs exact {_fmt(vals)} decreasing, last <= 0.08")
    assert ok


def test_criterion_06_critical_young_measure():
    ok, parts = True, []
    for e in EPS:
        s = summary("critical", "shock04", e)
        for label in ("young_modes", "young_pinned"):
            ym = s[label]
            atoms_ok = (len(ym.atoms) == 2
                        and abs(ym.atoms[0] - 0.3) <= 0.02 and abs(ym.atoms[1] - 0.7) <= 0.02)
            ok &= atoms_ok and ym.residual <= 0.05
        ok &= abs(s["flux_mean"] - 0.21) <= 0.01
        m = s["young_modes"]
        parts.append(f"eps {e}: atoms {_fmt(m.atoms)} res {m.residual:.2g} flux {s['flux_mean']:.4f}")
    record(6, ok, "; ".join(parts))
    assert ok


def test_criterion_07_viscous_tanh():
    start = time.perf_counter()
    g = GridSpec(800)
    v = stationary_profile(F, 0.3, 0.7, 0.05, g).values
    wall = time.perf_counter() - start
    err = float(np.max(np.abs(v - critical_tanh_profile(0.05, 0.7, g.centers))))
    res = 0.0
    for d in (0.05, 0.1):
        C = solve_C(d, 0.7)
        res = max(res, abs(C * np.tanh(0.5 * C) - (2 * 0.7 - 1) / d))
    ok = err <= 1e-6 and res <= 1e-12 and wall < 1.0
    record(7, ok, f"Linf {err:.2e} <= 1e-6, solve_C residual {res:.1e} <= 1e-12, {wall:.3f}s < 1s")
    assert ok


def test_criterion_08_energy_bound():
    g = GridSpec(N)
    vals = []
    for d in (0.1, 0.05, 0.025, 0.0125):
        tr = run_viscous(F, constant_path(0.3, 0.2), CellField.constant(g, 0.55),
                         ViscousParams(0.1, d, g), T, np.linspace(0.0, T, 11))
        vals.append(energy_functional(tr)[0])
    ratio = max(vals) / min(vals)
    ok = ratio <= 2.0
    record(8, ok, f"energy {_fmt(vals)} ratio {ratio:.3f} <= 2")
    assert ok


def test_criterion_09_entropy_admissibility():
    c = calibrate_entropy_constant(F, N)
    frozen = defaults.ENTROPY_RESIDUAL_C
    tol = entropy_tolerance(DX, frozen)
    worst = {f"{p}/{i}/{e}": summary(p, i, e)["entropy_worst"] for p, i in ALL_RUNS for e in EPS}
    key = max(worst, key=worst.get)
    ok = abs(c - frozen) <= 1e-6 and worst[key] <= tol
    record(9, ok, f"calibrated C {c:.6f} (frozen {frozen:g}); worst {worst[key]:.3e} at {key} "
                  f"<= {tol:.3e} over {len(worst)} runs x {len(kruzhkov_family(F))} thresholds")
    assert ok


def test_criterion_10_bln_traces():
    failing = []
    for p, i in OFF_CRITICAL:
        for e in EPS:
            s = summary(p, i, e)
            passed, checked = s["bln"]
            if passed != checked:
                failing.append(f"{p}/{i}/eps {e}: {checked - passed}/{checked} fail "
                               f"from t={s['bln_first_fail']:.3f}")
    ok = not failing
    record(10, ok, "all off-critical runs pass" if ok else "; ".join(failing))
    assert ok, "\n".join(failing)


def test_criterion_11_scheme_sanity():
    runs = [summary(p, i, e) for p, i in ALL_RUNS for e in EPS]
    ledger = max(s["ledger"] for s in runs)
    maxp = all(s["max_principle"] for s in runs)
    mono = all(np.all(summary("case1", "c01", e)["window_values"]
                      <= summary("case1", "c055", e)["window_values"])
               and np.all(summary("case1", "c055", e)["window_values"]
                          <= summary("case1", "c09", e)["window_values"]) for e in EPS)

    path = constant_path(0.35, 0.35)

    def solve(n):
        g = GridSpec(n)
        u0 = CellField.from_function(g, lambda x: 0.35 + 0.05 * np.sin(np.pi * x))
        return run(F, path, u0, 1.0, T=0.5).final.values

    ref = solve(3200)
    errs = [(1.0 / n, float(np.mean(np.abs(solve(n) - ref.reshape(n, -1).mean(axis=1)))))
            for n in (100, 200, 400)]
    rate = fit_rate(errs)
    ok = ledger <= 1e-12 and maxp and mono and rate >= 0.8
    record(11, ok, f"ledger {ledger:.1e} <= 1e-12, maximum principle {maxp}, "
                   f"monotone {mono}, smooth rate {rate:.2f} >= 0.8")
    assert ok
