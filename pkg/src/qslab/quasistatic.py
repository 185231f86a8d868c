"""Exact entropy solution of the quasi-static law ``d/dx J(u) = 0``.

Boundary data enter only through the pair ``(rho_minus(t), rho_plus(t))``.
Off the critical segment the solution is a single constant; on it the
solution jumps once, upward, from ``rho_minus`` to ``rho_plus = rho_minus*``
at a position that the equation does not determine.
"""

from __future__ import annotations

import enum
import math
import shlex
from dataclasses import dataclass

import numpy as np

from .flux import FluxDomainError, FluxModel, conjugate

CRITICAL_TOL = 1e-9


class Region(str, enum.Enum):
    CASE1 = "case1"        # rho_- < m, rho_+ < rho_-*      -> rho_-
    CASE2 = "case2"        # rho_+ > m, rho_- > rho_+*      -> rho_+
    CASE3 = "case3"        # rho_- >= m, rho_+ <= m         -> m
    CRITICAL = "critical"  # rho_+ = rho_-*, rho_- < m      -> one free shock


class ProfileKind(str, enum.Enum):
    CONSTANT_LOW = "constant_low"
    CONSTANT_HIGH = "constant_high"
    CONSTANT_MAX = "constant_max"
    CRITICAL_SHOCK_FAMILY = "critical_shock_family"


class PresetError(ValueError):
    """A boundary preset could not be parsed or leaves [0, 1]."""


# ---------------------------------------------------------------- paths

def smoothstep(s):
    s = np.clip(s, 0.0, 1.0)
    return s * s * (3.0 - 2.0 * s)


def smoothstep_deriv(s):
    inside = (s > 0.0) & (s < 1.0)
    return np.where(inside, 6.0 * s * (1.0 - s), 0.0)


@dataclass(frozen=True)
class ConstantSide:
    a: float

    def value(self, t):
        return np.full_like(np.asarray(t, dtype=float), self.a)

    def deriv(self, t):
        return np.zeros_like(np.asarray(t, dtype=float))

    def describe(self) -> str:
        return f"constant {self.a!r}"


@dataclass(frozen=True)
class RampSide:
    """Smoothstep transition from ``a0`` at ``t0`` to ``a1`` at ``t1``; C1 everywhere."""

    a0: float
    a1: float
    t0: float
    t1: float

    def _s(self, t):
        return (np.asarray(t, dtype=float) - self.t0) / (self.t1 - self.t0)

    def value(self, t):
        return self.a0 + (self.a1 - self.a0) * smoothstep(self._s(t))

    def deriv(self, t):
        return (self.a1 - self.a0) * smoothstep_deriv(self._s(t)) / (self.t1 - self.t0)

    def describe(self) -> str:
        return f"ramp {self.a0!r} {self.a1!r} {self.t0!r} {self.t1!r}"


@dataclass(frozen=True)
class SineSide:
    a: float
    amp: float
    omega: float
    phase: float

    def value(self, t):
        return self.a + self.amp * np.sin(self.omega * np.asarray(t, dtype=float) + self.phase)

    def deriv(self, t):
        return self.amp * self.omega * np.cos(self.omega * np.asarray(t, dtype=float) + self.phase)

    def describe(self) -> str:
        return f"sine {self.a!r} {self.amp!r} {self.omega!r} {self.phase!r}"


@dataclass(frozen=True)
class ConjugateSide:
    """``t -> conjugate(base(t))``; puts the pair on the critical segment."""

    base: object
    flux: FluxModel

    def value(self, t):
        return conjugate(self.flux, self.base.value(t))

    def deriv(self, t):
        # differentiate J(u*) = J(u)
        u = self.base.value(t)
        us = conjugate(self.flux, u)
        du = self.base.deriv(t)
        num = self.flux.deriv(u) * du
        den = self.flux.deriv(us)
        with np.errstate(divide="ignore", invalid="ignore"):
            return np.where(np.abs(den) > 0.0, num / np.where(den == 0.0, 1.0, den), 0.0)

    def describe(self) -> str:
        return f"conjugate-of {self.base.describe()}"


@dataclass(frozen=True)
class TimeScaledSide:
    base: object
    factor: float

    def value(self, t):
        return self.base.value(self.factor * np.asarray(t, dtype=float))

    def deriv(self, t):
        return self.factor * self.base.deriv(self.factor * np.asarray(t, dtype=float))

    def describe(self) -> str:
        return f"scaled {self.factor!r} ({self.base.describe()})"


@dataclass(frozen=True)
class BoundaryPath:
    """Boundary trajectory ``t -> (rho_minus(t), rho_plus(t))``, evaluated lazily."""

    minus: object
    plus: object
    descriptor: str = ""

    def rho_minus(self, t):
        return _scalar_or_array(self.minus.value(t))

    def rho_plus(self, t):
        return _scalar_or_array(self.plus.value(t))

    def __call__(self, t):
        return self.rho_minus(t), self.rho_plus(t)

    def derivatives(self, t):
        return _scalar_or_array(self.minus.deriv(t)), _scalar_or_array(self.plus.deriv(t))

    def time_scaled(self, factor: float) -> "BoundaryPath":
        """The path ``t -> rho(factor * t)``."""
        return BoundaryPath(TimeScaledSide(self.minus, factor), TimeScaledSide(self.plus, factor),
                            f"scaled {factor!r} ({self.descriptor})")


def _scalar_or_array(x):
    x = np.asarray(x, dtype=float)
    return float(x) if x.ndim == 0 else x


def _check_range(*values):
    for v in values:
        if not (0.0 <= v <= 1.0) or not math.isfinite(v):
            raise PresetError(f"boundary value {v!r} outside [0, 1]")


def _side(kind: str, args: list[float]):
    if kind == "constant" and len(args) == 1:
        _check_range(*args)
        return ConstantSide(*args)
    if kind == "ramp" and len(args) == 4:
        a0, a1, t0, t1 = args
        _check_range(a0, a1)
        if not t1 > t0:
            raise PresetError("ramp needs t1 > t0")
        return RampSide(a0, a1, t0, t1)
    if kind == "sine" and len(args) == 4:
        a, amp, omega, phase = args
        _check_range(a - abs(amp), a + abs(amp))
        return SineSide(a, amp, omega, phase)
    raise PresetError(f"bad one-sided preset {kind!r} with {len(args)} arguments")


def constant_path(a: float, b: float) -> BoundaryPath:
    return BoundaryPath(_side("constant", [a]), _side("constant", [b]), f"constant {a!r} {b!r}")


def ramp_path(a0, b0, a1, b1, t0=0.0, t1=1.0, s0=None, s1=None) -> BoundaryPath:
    """Smoothstep ramps; the plus side uses ``[s0, s1]`` when given, else ``[t0, t1]``."""
    desc = f"ramp {a0!r} {b0!r} {a1!r} {b1!r} {t0!r} {t1!r}"
    if s0 is None and s1 is None:
        s0, s1 = t0, t1
    else:
        desc += f" {s0!r} {s1!r}"
    return BoundaryPath(_side("ramp", [a0, a1, t0, t1]), _side("ramp", [b0, b1, s0, s1]), desc)


def staged_path(a0, b0, a1, b1, t_switch=0.5, T=1.0) -> BoundaryPath:
    """Move ``rho_minus`` on ``[0, t_switch]``, then ``rho_plus`` on ``[t_switch, T]``.

    Going from case 1 to case 2 this way passes through case 3 and never
    touches the critical segment; the path is C1 because each smoothstep
    has zero slope at its ends.
    """
    return ramp_path(a0, b0, a1, b1, 0.0, t_switch, t_switch, T)


def sine_path(minus: tuple, plus: tuple) -> BoundaryPath:
    desc = "sine " + " ".join(repr(float(v)) for v in (*minus, *plus))
    return BoundaryPath(_side("sine", list(minus)), _side("sine", list(plus)), desc)


def critical_path(flux: FluxModel, minus) -> BoundaryPath:
    """Pair ``(rho_minus(t), rho_minus(t)*)``; ``minus`` is a one-sided preset or a number."""
    if isinstance(minus, (int, float)):
        minus = _side("constant", [float(minus)])
    elif isinstance(minus, str):
        words = minus.split()
        minus = _side(words[0], [float(w) for w in words[1:]])
    return BoundaryPath(minus, ConjugateSide(minus, flux), f"critical-of-minus {minus.describe()}")


def make_boundary_path(preset: str, flux: FluxModel | None = None) -> BoundaryPath:
    """Build a path from its text form.

    Grammar::

        constant a b
        ramp a0 b0 a1 b1 t0 t1 [s0 s1]
        sine a amp omega phase  a amp omega phase
        critical-of-minus <constant a | ramp a0 a1 t0 t1 | sine a amp omega phase>
    """
    words = shlex.split(preset)
    if not words:
        raise PresetError("empty boundary preset")
    kind, rest = words[0], words[1:]
    try:
        if kind == "critical-of-minus":
            if flux is None:
                raise PresetError("critical-of-minus needs a flux")
            if not rest:
                raise PresetError("critical-of-minus needs a one-sided preset")
            return critical_path(flux, _side(rest[0], [float(w) for w in rest[1:]]))
        args = [float(w) for w in rest]
    except ValueError as exc:
        if isinstance(exc, PresetError):
            raise
        raise PresetError(f"non-numeric argument in {preset!r}") from exc
    if kind == "constant" and len(args) == 2:
        return constant_path(*args)
    if kind == "ramp" and len(args) in (6, 8):
        return ramp_path(*args)
    if kind == "sine" and len(args) == 8:
        return sine_path(tuple(args[:4]), tuple(args[4:]))
    raise PresetError(f"cannot parse boundary preset {preset!r}")


# ---------------------------------------------------------------- exact solution

def _check_pair(rho_minus, rho_plus):
    rm = np.asarray(rho_minus, dtype=float)
    rp = np.asarray(rho_plus, dtype=float)
    for v, name in ((rm, "rho_minus"), (rp, "rho_plus")):
        if np.any(~np.isfinite(v)) or np.any(v < 0.0) or np.any(v > 1.0):
            raise FluxDomainError(f"{name} must lie in [0, 1]")
    return rm, rp


def classify(f: FluxModel, rho_minus, rho_plus, tol: float = CRITICAL_TOL):
    """Region of the boundary pair (elementwise for arrays).

    The comparisons against conjugates are done through ``J`` itself:
    for ``rho_minus < m``, ``rho_plus < rho_minus*`` iff ``rho_plus <= m``
    or ``J(rho_plus) > J(rho_minus)``.
    """
    rm, rp = _check_pair(rho_minus, rho_plus)
    jm, jp = f(rm), f(rp)
    m = f.m
    critical = (rm < m - tol) & (rp > m) & (np.abs(jp - jm) <= tol)
    case1 = (rm < m) & ((rp <= m) | (jp > jm))
    case3 = (rm >= m) & (rp <= m)
    tags = np.select([critical, case1, case3],
                     [Region.CRITICAL.value, Region.CASE1.value, Region.CASE3.value],
                     default=Region.CASE2.value)
    if tags.ndim == 0:
        return Region(str(tags))
    return tags


def variational_current(f: FluxModel, rho_minus, rho_plus):
    """``sup J`` over ``[rho_+, rho_-]`` if ``rho_- >= rho_+``, else ``inf J`` over ``[rho_-, rho_+]``."""
    rm, rp = _check_pair(rho_minus, rho_plus)
    down = f(np.clip(f.m, rp, rm))
    up = np.minimum(f(rm), f(rp))
    out = np.where(rm >= rp, down, up)
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class QuasiStaticProfile:
    """Exact quasi-static state at one time.

    ``z1 <= m <= z2`` always share the flux value ``current``. Constant
    profiles take the value ``value``; the critical family jumps from
    ``z1`` to ``z2`` at ``shock_position``, which stays ``None`` until a
    caller picks one.
    """

    kind: ProfileKind
    z1: float
    z2: float
    current: float
    shock_position: float | None = None

    @property
    def value(self) -> float | None:
        if self.kind is ProfileKind.CONSTANT_LOW:
            return self.z1
        if self.kind in (ProfileKind.CONSTANT_HIGH, ProfileKind.CONSTANT_MAX):
            return self.z2
        return None

    @property
    def is_critical(self) -> bool:
        return self.kind is ProfileKind.CRITICAL_SHOCK_FAMILY

    def with_shock(self, position: float) -> "QuasiStaticProfile":
        if not self.is_critical:
            raise ValueError("only the critical family has a free shock")
        if not 0.0 <= position <= 1.0:
            raise ValueError("shock position must lie in [0, 1]")
        return QuasiStaticProfile(self.kind, self.z1, self.z2, self.current, position)

    def evaluate(self, x):
        x = np.asarray(x, dtype=float)
        if not self.is_critical:
            return np.full_like(x, self.value)
        if self.shock_position is None:
            raise ValueError("critical profile needs a shock position; use with_shock()")
        return np.where(x < self.shock_position, self.z1, self.z2)


def exact_profile(f: FluxModel, path: BoundaryPath, t: float,
                  tol: float = CRITICAL_TOL) -> QuasiStaticProfile:
    rm, rp = path(t)
    return profile_for_pair(f, rm, rp, tol)


def profile_for_pair(f: FluxModel, rho_minus: float, rho_plus: float,
                     tol: float = CRITICAL_TOL) -> QuasiStaticProfile:
    region = classify(f, rho_minus, rho_plus, tol)
    if region is Region.CASE1:
        z1 = float(rho_minus)
        return QuasiStaticProfile(ProfileKind.CONSTANT_LOW, z1, conjugate(f, z1), float(f(z1)))
    if region is Region.CASE2:
        z2 = float(rho_plus)
        return QuasiStaticProfile(ProfileKind.CONSTANT_HIGH, conjugate(f, z2), z2, float(f(z2)))
    if region is Region.CASE3:
        return QuasiStaticProfile(ProfileKind.CONSTANT_MAX, f.m, f.m, f.jmax)
    z1, z2 = float(rho_minus), float(rho_plus)
    return QuasiStaticProfile(ProfileKind.CRITICAL_SHOCK_FAMILY, z1, z2, float(f(z1)))


def exact_value(f: FluxModel, path: BoundaryPath, t) -> np.ndarray:
    """Constant quasi-static value at each time; NaN where the pair is critical."""
    t = np.atleast_1d(np.asarray(t, dtype=float))
    out = np.empty_like(t)
    for k, tk in enumerate(t):
        v = exact_profile(f, path, tk).value
        out[k] = np.nan if v is None else v
    return out


def left_trace_admissible(f: FluxModel, u: float, rho_minus: float, rho_plus: float,
                          variant: str = "corrected", tol: float = 1e-12) -> bool:
    """Explicit form of the left boundary condition for a two-valued trace.

    For ``rho_minus < m`` the ``"corrected"`` variant admits
    ``u = rho_minus`` or ``u >= rho_minus*``; ``"as_printed"`` uses
    ``rho_plus*`` in place of ``rho_minus*``. For ``rho_minus >= m`` both
    require ``u >= m``.
    """
    if rho_minus >= f.m:
        return u >= f.m - tol
    if variant == "corrected":
        edge = conjugate(f, rho_minus)
    elif variant == "as_printed":
        edge = conjugate(f, rho_plus)
    else:
        raise ValueError(f"unknown variant {variant!r}")
    return abs(u - rho_minus) <= tol or u >= edge - tol


def right_trace_admissible(f: FluxModel, u: float, rho_plus: float, tol: float = 1e-12) -> bool:
    if rho_plus <= f.m:
        return u <= f.m + tol
    return abs(u - rho_plus) <= tol or u <= conjugate(f, rho_plus) + tol
