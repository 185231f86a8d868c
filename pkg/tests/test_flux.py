from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qslab.flux import (FluxDomainError, InvalidFluxError, branches, burgers_to_traffic,
                        conjugate, flux_from_name, make_concave_flux, make_tabulated_flux,
                        make_traffic_flux, read_flux_table, traffic_to_burgers)

unit = st.floats(0.0, 1.0, allow_nan=False)


def test_traffic_values(traffic):
    assert traffic(0.5) == 0.25
    assert traffic(0.0) == 0.0 and traffic(1.0) == 0.0
    assert traffic.m == 0.5 and traffic.jmax == 0.25
    assert conjugate(traffic, 0.3) == pytest.approx(0.7, abs=1e-12)


def test_invariants(any_flux):
    f = any_flux
    u = np.linspace(0.0, 1.0, 2001)
    assert f(0.0) == 0.0 and abs(f(1.0)) < 1e-15
    assert np.all(f(u) >= 0.0)
    assert np.all(f(u) <= f.jmax)
    assert abs(f.deriv(f.m)) < 1e-10
    assert np.all(np.diff(f.deriv(u)) < 0.0)
    a, b = u[:-2], u[2:]
    assert np.all(f(0.5 * (a + b)) > 0.5 * (f(a) + f(b)))


def test_sine_flux(sine):
    assert sine.m == pytest.approx(0.5, abs=1e-12)
    assert sine.jmax == pytest.approx(1.0, abs=1e-15)


def test_generic_traffic_matches_builtin(traffic):
    g = make_concave_flux(lambda u: u * (1 - u), lambda u: 1 - 2 * u)
    u = np.linspace(0.0, 1.0, 1001)
    assert np.max(np.abs(g(u) - traffic(u))) <= 1e-14
    assert g.m == pytest.approx(0.5, abs=1e-12)


def test_cubic_passes_sampling():
    # u(1-u)(2-u) has J'' = 6u - 6 <= 0, so the sampled check accepts it
    f = make_concave_flux(lambda u: u * (1 - u) * (2 - u), lambda u: 3 * u * u - 6 * u + 2)
    assert f.m == pytest.approx(1.0 - 1.0 / np.sqrt(3.0), abs=1e-12)


def test_rejects_nonconcave():
    # positive with the right roots, but J'' > 0 at u = 1/2
    with pytest.raises(InvalidFluxError, match="concav"):
        make_concave_flux(lambda u: np.sin(np.pi * u) + 0.3 * np.sin(3 * np.pi * u),
                          lambda u: np.pi * np.cos(np.pi * u) + 0.9 * np.pi * np.cos(3 * np.pi * u))


def test_rejects_bad_roots():
    with pytest.raises(InvalidFluxError):
        make_concave_flux(lambda u: u * (1 - u) + 0.01, lambda u: 1 - 2 * u)


def test_rejects_convex():
    with pytest.raises(InvalidFluxError):
        make_concave_flux(lambda u: -u * (1 - u), lambda u: 2 * u - 1)


def test_clamping_flag(traffic):
    vals, clamped = traffic.checked([-0.1, 0.5])
    assert clamped and vals[0] == 0.0
    _, clamped = traffic.checked([0.2, 0.5])
    assert not clamped


def test_branches_closed_form(traffic):
    u1, u2 = branches(traffic, 0.21)
    assert u1 == pytest.approx((1 - np.sqrt(1 - 0.84)) / 2, abs=1e-11)
    assert u2 == pytest.approx((1 + np.sqrt(1 - 0.84)) / 2, abs=1e-11)
    assert branches(traffic, 0.25) == (0.5, 0.5)
    assert branches(traffic, 0.0) == (0.0, 1.0)
    with pytest.raises(FluxDomainError):
        branches(traffic, 0.3)
    with pytest.raises(FluxDomainError):
        branches(traffic, -0.1)


def test_branch_consistency_grid(any_flux):
    f = any_flux
    y = np.linspace(0.0, f.jmax, 500)
    u1, u2 = branches(f, y)
    assert np.max(np.abs(f(u1) - y)) <= 1e-10
    assert np.max(np.abs(f(u2) - y)) <= 1e-10
    assert np.all(u1 <= f.m) and np.all(u2 >= f.m)


def test_conjugate_involution_grid(any_flux):
    u = np.linspace(0.0, 1.0, 1000)
    back = conjugate(any_flux, conjugate(any_flux, u))
    assert np.max(np.abs(back - u)) <= 1e-10
    assert conjugate(any_flux, any_flux.m) == any_flux.m


def test_conjugate_matches_branches(any_flux):
    f = any_flux
    u = np.linspace(0.0, 1.0, 301)
    u1, u2 = branches(f, f(u))
    expect = np.where(u < f.m, u2, u1)
    assert np.max(np.abs(conjugate(f, u) - expect)) <= 1e-10


@given(unit)
@settings(max_examples=200, deadline=None)
def test_conjugate_same_flux_other_side(u):
    f = make_traffic_flux()
    c = conjugate(f, u)
    assert abs(f(c) - f(u)) <= 1e-11
    assert c == pytest.approx(1.0 - u, abs=1e-11)


def test_conjugate_domain(traffic):
    with pytest.raises(FluxDomainError):
        conjugate(traffic, 1.2)


def test_burgers_map():
    assert burgers_to_traffic(1.0) == 0.0
    assert burgers_to_traffic(0.0) == 0.5
    v = np.linspace(-1.0, 1.0, 101)
    assert np.max(np.abs(traffic_to_burgers(burgers_to_traffic(v)) - v)) <= 1e-15


def test_table_flux(tmp_path):
    u = np.linspace(0.0, 1.0, 41)
    p = tmp_path / "flux.csv"
    p.write_text("u,J\n" + "".join(f"{float(a)!r},{float(a * (1 - a))!r}\n" for a in u))
    f = flux_from_name("custom", p)
    x = np.linspace(0.0, 1.0, 333)
    assert np.max(np.abs(f(x) - x * (1 - x))) < 1e-4
    assert f.m == pytest.approx(0.5, abs=1e-6)
    uu, jj = read_flux_table(p)
    assert uu.size == 41 and jj[0] == 0.0


def test_empty_table(tmp_path):
    p = tmp_path / "empty.csv"
    p.write_text("u,J\n")
    with pytest.raises(InvalidFluxError):
        read_flux_table(p)


def test_table_rejects_nonconcave():
    u = np.linspace(0.0, 1.0, 11)
    with pytest.raises(InvalidFluxError):
        make_tabulated_flux(u, np.sin(np.pi * u) ** 2)


def test_unknown_name():
    with pytest.raises(InvalidFluxError):
        flux_from_name("greenshields")
    with pytest.raises(InvalidFluxError):
        flux_from_name("custom")
