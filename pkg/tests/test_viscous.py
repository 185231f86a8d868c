from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.optimize import brentq

from qslab.flux import make_traffic_flux
from qslab.hyperbolic import CellField, GridSpec, run
from qslab.quasistatic import constant_path, variational_current
from qslab.viscous import (StationaryBVP, ViscousParams, blend_to_boundary,
                           critical_tanh_dissipation, critical_tanh_profile, dirichlet_energy,
                           energy_functional, face_gradients, run_viscous, solve_C,
                           stationary_profile, stationary_residuals, viscous_step)


def _root_oracle(delta, rho_plus):
    rhs = (2 * rho_plus - 1) / delta
    return brentq(lambda c: c * math.tanh(c / 2) - rhs, 1e-12, 10 * rhs + 10, xtol=1e-15, rtol=1e-15)


@pytest.mark.parametrize("delta,rho_plus", [(0.1, 0.7), (0.05, 0.7), (0.01, 0.7), (0.3, 0.55)])
def test_solve_C(delta, rho_plus):
    C = solve_C(delta, rho_plus)
    assert abs(C * math.tanh(C / 2) - (2 * rho_plus - 1) / delta) <= 1e-12 * max(1.0, C)
    assert C == pytest.approx(_root_oracle(delta, rho_plus), rel=1e-13)


def test_solve_C_examples():
    assert solve_C(0.1, 0.7) == pytest.approx(4.12, abs=0.02)
    assert solve_C(0.01, 0.7) == pytest.approx(40.0, rel=0.01)
    small = [solve_C(0.1, 0.5 + t * 0.05) for t in (1e-2, 1e-4, 1e-6)]
    assert small[0] > small[1] > small[2] > 0.0 and small[2] < 1e-2
    with pytest.raises(ValueError):
        solve_C(0.1, 0.5)
    with pytest.raises(ValueError):
        solve_C(0.0, 0.7)


def test_tanh_profile_solves_bvp():
    for delta in (0.2, 0.1, 0.05):
        v0, v1 = critical_tanh_profile(delta, 0.7, [0.0, 1.0])
        assert v0 == pytest.approx(0.3, abs=1e-12) and v1 == pytest.approx(0.7, abs=1e-12)
        # delta v'' = (1 - 2v) v' checked by central differences
        x = np.linspace(0.05, 0.95, 19)
        h = 1e-4
        v = critical_tanh_profile(delta, 0.7, x)
        vp = (critical_tanh_profile(delta, 0.7, x + h) - critical_tanh_profile(delta, 0.7, x - h)) / (2 * h)
        vpp = (critical_tanh_profile(delta, 0.7, x + h) - 2 * v
               + critical_tanh_profile(delta, 0.7, x - h)) / h ** 2
        assert np.max(np.abs(delta * vpp - (1 - 2 * v) * vp)) < 1e-5


@pytest.mark.parametrize("delta", [0.1, 0.05])
def test_stationary_matches_tanh(traffic, delta):
    g = GridSpec(800)
    v = stationary_profile(traffic, 0.3, 0.7, delta, g).values
    assert np.max(np.abs(v - critical_tanh_profile(delta, 0.7, g.centers))) <= 1e-6


def test_constant_profile(traffic):
    b = StationaryBVP(traffic, 0.4, 0.4, 0.1)
    assert b.K == traffic(0.4)
    assert np.all(b(np.linspace(0, 1, 5)) == 0.4)


@pytest.mark.parametrize("pair", [(0.3, 0.2), (0.6, 0.8), (0.8, 0.3), (0.2, 0.6), (0.3, 0.7), (0.7, 0.3)])
def test_endpoints_and_first_integral(traffic, pair):
    b = StationaryBVP(traffic, *pair, 0.1)
    assert b.endpoint_mismatch() < 1e-8
    n = 400
    x = (np.arange(n) + 0.5) / n
    v = b(x)
    res, K = stationary_residuals(traffic, v, 0.1, 1.0 / n)
    dx2 = (1.0 / n) ** 2
    assert np.max(np.abs(res)) <= 10 * dx2
    assert np.max(np.abs(K - b.K)) <= 10 * dx2


def test_zero_viscosity_limit(traffic):
    x = GridSpec(400).centers
    inner = (x >= 0.1) & (x <= 0.9)
    errs = [np.max(np.abs(StationaryBVP(traffic, 0.3, 0.2, d)(x)[inner] - 0.3))
            for d in (0.1, 0.05, 0.025)]
    assert errs[0] > errs[1] > errs[2]
    for pair in ((0.3, 0.2), (0.6, 0.8), (0.8, 0.3), (0.2, 0.6)):
        b = StationaryBVP(traffic, *pair, 0.01)
        assert abs(b.K - variational_current(traffic, *pair)) <= 0.01


@given(st.floats(0.0, 1.0), st.floats(0.0, 1.0), st.sampled_from([0.2, 0.05, 0.01]))
@settings(max_examples=40, deadline=None)
def test_bvp_properties(rm, rp, delta):
    f = make_traffic_flux()
    b = StationaryBVP(f, rm, rp, delta)
    v = b(np.linspace(0.0, 1.0, 201))
    assert b.endpoint_mismatch() < 1e-7
    assert np.all(np.diff(v) * np.sign(rp - rm) >= -1e-12)        # monotone
    assert np.all((v >= min(rm, rp)) & (v <= max(rm, rp)))


def test_viscous_constant_invariant(traffic):
    g = GridSpec(40)
    u = CellField.constant(g, 0.35)
    new = viscous_step(traffic, u, constant_path(0.35, 0.35), 0.0, ViscousParams(0.5, 0.1, g))
    assert np.max(np.abs(new.values - 0.35)) <= 1e-15
    tr = run_viscous(traffic, constant_path(0.35, 0.35), u, ViscousParams(0.5, 0.1, g), T=0.3)
    e, hist = energy_functional(tr)
    assert e == pytest.approx(0.5 * 0.35 ** 2, rel=1e-13)


def test_large_viscosity_linear(traffic):
    g = GridSpec(100)
    p = ViscousParams(1.0, 10.0, g)
    tr = run_viscous(traffic, constant_path(0.2, 0.6), CellField.constant(g, 0.5), p, T=2.0)
    lin = 0.2 + 0.4 * g.centers
    assert np.max(np.abs(tr.final.values - lin)) <= 0.01


def test_small_viscosity_near_hyperbolic(traffic):
    g = GridSpec(400)
    path = constant_path(0.3, 0.2)
    u0 = CellField.constant(g, 0.55)
    hyp = run(traffic, path, u0, 1.0, T=3.0).final.values
    vis = run_viscous(traffic, path, u0, ViscousParams(1.0, 1e-3, g), T=3.0).final.values
    assert np.mean(np.abs(hyp - vis)) <= 0.02


@pytest.mark.parametrize("delta", [1e-4, 1e-2, 1.0, 10.0])
def test_imex_stable(traffic, delta):
    g = GridSpec(100)
    u0 = CellField.from_function(g, lambda x: 0.5 + 0.45 * np.sign(np.sin(9 * x)))
    tr = run_viscous(traffic, constant_path(0.9, 0.05), u0, ViscousParams(0.5, delta, g), T=1.0,
                     output_times=np.linspace(0, 1, 11))
    assert np.all(np.isfinite(tr.values))
    assert tr.values.min() >= -0.1 and tr.values.max() <= 1.1


def test_viscous_conservation(traffic):
    g = GridSpec(50)
    from qslab.hyperbolic import step_output_times
    eps, delta = 0.3, 0.05
    u0 = CellField.from_function(g, lambda x: 0.5 + 0.3 * np.cos(5 * x))
    path = constant_path(0.2, 0.7)
    tr = run_viscous(traffic, path, u0, ViscousParams(eps, delta, g), T=0.5,
                     output_times=step_output_times(traffic, eps, 50, T=0.5))
    start = blend_to_boundary(u0, 0.2, 0.7).values
    vals = np.vstack([start, tr.values[1:]])
    lhs = np.diff(eps * g.dx * vals.sum(axis=1))
    rhs = tr.step_dts * (tr.F0 - tr.F1)
    assert np.max(np.abs(lhs - rhs)) <= 1e-12 * eps * g.dx * vals.sum(axis=1).max()


def test_blend():
    g = GridSpec(10)
    b = blend_to_boundary(CellField.constant(g, 0.5), 0.1, 0.9).values
    assert b[0] == pytest.approx(0.1 + 0.25 * 0.4) and b[1] == pytest.approx(0.1 + 0.75 * 0.4)
    assert b[-1] == pytest.approx(0.9 - 0.25 * 0.4) and np.all(b[2:-2] == 0.5)


def test_face_gradients_linear():
    n = 20
    x = (np.arange(n) + 0.5) / n
    g = face_gradients(0.2 + 0.4 * x, 0.2, 0.6, 1.0 / n)
    assert np.allclose(g, 0.4, atol=1e-12)
    assert dirichlet_energy(0.2 + 0.4 * x, 0.2, 0.6, 1.0 / n) == pytest.approx(0.16, rel=1e-12)


def test_tanh_dissipation_closed_form():
    for delta in (0.1, 0.05):
        x = np.linspace(0.0, 1.0, 200_001)
        v = critical_tanh_profile(delta, 0.7, x)
        quad = delta * np.trapezoid(np.gradient(v, x) ** 2, x)
        assert quad == pytest.approx(critical_tanh_dissipation(delta, 0.7), abs=1e-4)


def test_energy_bounded_in_delta(traffic):
    g = GridSpec(200)
    vals = []
    for d in (0.1, 0.05, 0.025, 0.0125):
        tr = run_viscous(traffic, constant_path(0.3, 0.2), CellField.constant(g, 0.3),
                         ViscousParams(0.1, d, g), T=1.0)
        vals.append(energy_functional(tr)[0])
    assert max(vals) / min(vals) <= 2.0


def test_params_validation():
    g = GridSpec(10)
    with pytest.raises(ValueError):
        ViscousParams(0.1, 0.0, g)
    with pytest.raises(ValueError):
        ViscousParams(-0.1, 0.1, g)
    assert ViscousParams(0.0, 0.1, g).stationary
