"""Closed-form bound-state equations for one, two and three centers.

Every convention enters through the rotation angle Theta of its connection
matrix (Theta = g for the squeezed rectangle, 2 arctan(g/2) for the Cayley
form). With s = sin Theta, c = cos Theta the equations are written with
denominators cleared, so they stay finite where tan Theta or the reduced
variable X = E tan(Theta)/kappa blow up (g = pi/2 resp. g = 2). The
textbook X-space forms are exposed separately for inspection and tests.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from types import SimpleNamespace
from typing import Callable, Optional

import mpmath
import numpy as np

from .core import (BoundStateProblem, Convention, DeltaConvention, EnergySpectrum, Root,
                   SingularityError, ValidationError, _check_gap, kappa_of)
from .rootfind import SolverOptions, solve_all

_NP = SimpleNamespace(exp=np.exp, sqrt=np.sqrt, mpf=float)
_MP = SimpleNamespace(exp=mpmath.exp, sqrt=mpmath.sqrt, mpf=mpmath.mpf)


class PresetKind(enum.Enum):
    SINGLE = "single"
    DOUBLE_SYMMETRIC = "double"
    DIPOLE = "dipole"
    TRIPLE_SAME = "triple_same"
    TRIPLE_ALTERNATING = "triple_alt"

    @classmethod
    def parse(cls, value) -> "PresetKind":
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).lower())
        except ValueError:
            names = ", ".join(k.value for k in cls)
            raise ValidationError(f"unknown preset {value!r}; expected one of {names}") from None

    @property
    def n_centers(self) -> int:
        return {"single": 1, "double": 2, "dipole": 2}.get(self.value, 3)


def preset_problem(kind, g: float, R: Optional[float] = None, R1: Optional[float] = None,
                   R2: Optional[float] = None, m: float = 1.0) -> BoundStateProblem:
    """Problem for a preset; ``g > 0`` is attractive (stored strength ``-g``)."""
    kind = PresetKind.parse(kind)
    if kind is PresetKind.SINGLE:
        return BoundStateProblem.from_lists([0.0], [-g], m)
    if kind in (PresetKind.DOUBLE_SYMMETRIC, PresetKind.DIPOLE):
        if R is None or not R > 0:
            raise ValidationError(f"preset {kind.value} needs R > 0")
        signs = [-1.0, -1.0] if kind is PresetKind.DOUBLE_SYMMETRIC else [-1.0, 1.0]
        return BoundStateProblem.from_lists([-R, R], [s * g for s in signs], m)
    R1 = R if R1 is None else R1
    R2 = R if R2 is None else R2
    if R1 is None or R2 is None or not (R1 > 0 and R2 > 0):
        raise ValidationError(f"preset {kind.value} needs R1, R2 > 0")
    signs = [-1.0, -1.0, -1.0] if kind is PresetKind.TRIPLE_SAME else [-1.0, 1.0, -1.0]
    return BoundStateProblem.from_lists([-R1, 0.0, R2], [s * g for s in signs], m)


def _convention(convention) -> Convention:
    return DeltaConvention.parse(convention) if isinstance(convention, str) else convention


def _sin_cos(g, convention, xp=_NP):
    """(sin Theta, cos Theta); the Cayley pair is rational in g."""
    convention = _convention(convention)
    if convention is DeltaConvention.CAYLEY:
        g = xp.mpf(g)
        d = 4 + g * g
        return 4 * g / d, (4 - g * g) / d
    if convention is DeltaConvention.SQUEEZE:
        if xp is _MP:
            return mpmath.sin(mpmath.mpf(g)), mpmath.cos(mpmath.mpf(g))
        return math.sin(g), math.cos(g)
    theta = convention(float(g))
    return (mpmath.sin(theta), mpmath.cos(theta)) if xp is _MP else (math.sin(theta), math.cos(theta))


def _tan_sq(g, convention) -> float:
    convention = _convention(convention)
    if convention is DeltaConvention.CAYLEY:
        d = 1.0 - g * g / 4.0
        if d == 0.0:
            raise SingularityError("X-space coefficients are singular at g = +-2")
        return g * g / (d * d)
    s, c = _sin_cos(g, convention)
    if c == 0.0:
        raise SingularityError("tan Theta is infinite")
    return (s / c) ** 2


def _kappa(E, m, xp):
    return xp.sqrt((m - E) * (m + E))


# Single center -------------------------------------------------------------

def single_energy(g: float, m: float = 1.0, convention=DeltaConvention.CAYLEY) -> Optional[float]:
    """Level of one attractive center, or ``None`` when it is not inside the gap."""
    convention = _convention(convention)
    s, c = _sin_cos(g, convention)
    if s == 0:
        return None
    if convention is DeltaConvention.CAYLEY:
        E = m * (4.0 - g * g) / (4.0 + g * g) * math.copysign(1.0, g)
    else:
        E = m * c * math.copysign(1.0, s)
    return E if abs(E) < m else None


def merged_limit_energy(n_centers: int, g: float, m: float = 1.0,
                        convention=DeltaConvention.CAYLEY) -> Optional[float]:
    """Level of ``n`` identical centers merged at one point.

    Squeezed rectangles add their strengths; the Cayley form does not.
    """
    convention = _convention(convention)
    if n_centers not in (1, 2, 3):
        raise ValueError(f"merged limit known for 1, 2 or 3 centers, not {n_centers}")
    if g == 0:
        return None
    if convention is DeltaConvention.SQUEEZE:
        return single_energy(n_centers * g, m, convention)
    if n_centers == 1:
        return single_energy(g, m, convention)
    if n_centers == 2:
        sign = np.sign(4.0 - g * g)
        E = m * (g**4 - 24 * g * g + 16) / (g * g + 4) ** 2 * sign
        return float(E) if sign != 0 and abs(E) < m else None
    theta = 2.0 * math.atan(g / 2.0)
    sn = math.sin(3 * theta)
    E = m * math.cos(3 * theta) * math.copysign(1.0, sn)
    return E if sn != 0 and abs(E) < m else None


# Double symmetric ------------------------------------------------------------

def _double_h(E, g, R, m, convention, branch, xp=_NP):
    s, c = _sin_cos(g, convention, xp)
    k = _kappa(E, m, xp)
    return k * c - s * (E + branch * m * xp.exp(-2 * R * k))


def double_symmetric_residual(E: float, g: float, R: float, m: float = 1.0,
                              convention=DeltaConvention.CAYLEY, branch: int = +1) -> float:
    """Level condition of two equal centers at -R, R; ``branch`` is +1 or -1.

    Cayley: (1 - g^2/4) kappa - g (E +- m e^{-2 R kappa}).
    Squeeze: cos g kappa - sin g (E +- m e^{-2 R kappa}), i.e. the tan g form
    multiplied through by cos g.
    """
    _check_gap(E, m)
    if branch not in (1, -1):
        raise ValueError("branch must be +1 or -1")
    convention = _convention(convention)
    if convention is DeltaConvention.CAYLEY:
        k = kappa_of(E, m)
        return (1 - g * g / 4) * k - g * (E + branch * m * math.exp(-2 * R * k))
    return float(_double_h(E, g, R, m, convention, branch))


def double_symmetric_quadratic(E: float, g: float, R: float, m: float = 1.0,
                               convention=DeltaConvention.CAYLEY) -> float:
    """(1 - e^{-4z}) X^2 - 2X + 1 - e^{-4z} tan^2(Theta), z = R kappa."""
    k = kappa_of(E, m)
    t2 = _tan_sq(g, convention)
    X = E / k * math.copysign(math.sqrt(t2), _sin_cos(g, convention)[0] * _sin_cos(g, convention)[1])
    q = math.exp(-4 * R * k)
    return (1 - q) * X * X - 2 * X + 1 - q * t2


# Dipole --------------------------------------------------------------------

def _dipole_h(E, g, R, m, convention, xp=_NP):
    s, c = _sin_cos(g, convention, xp)
    k = _kappa(E, m, xp)
    return E * E - m * m * (c * c + xp.exp(-4 * R * k) * s * s)


def dipole_residual(E: float, g: float, R: float, m: float = 1.0,
                    convention=DeltaConvention.CAYLEY) -> float:
    _check_gap(E, m)
    return float(_dipole_h(E, g, R, m, convention))


def dipole_energies(g: float, R: float, m: float = 1.0, convention=DeltaConvention.CAYLEY,
                    opts: Optional[SolverOptions] = None) -> EnergySpectrum:
    """Solve E = m sqrt(c^2 + e^{-4 R kappa(E)} s^2) and mirror it to -E.

    Damped fixed-point iteration (factor 0.5, up to 200 steps, |dE| < 1e-13 m)
    with a bisection fallback on the residual.
    """
    opts = opts or SolverOptions()
    s, c = _sin_cos(g, convention)
    top = m * (1 - opts.edge_margin)

    def rhs(E):
        k = math.sqrt(max((m - E) * (m + E), 0.0))
        return m * math.sqrt(c * c + math.exp(-4 * R * k) * s * s)

    E = m * max(abs(c), math.exp(-2 * R * m) * abs(s))
    ok = False
    for _ in range(200):
        new = 0.5 * E + 0.5 * rhs(E)
        if abs(new - E) < 1e-13 * m:
            E, ok = new, True
            break
        E = new
    resid = lambda x: x * x - rhs(x) ** 2
    if not (ok and 0 <= E < top):
        lo, hi = 0.0, top
        if resid(lo) * resid(hi) >= 0:
            return EnergySpectrum(())
        from .rootfind import bisect
        E = bisect(resid, lo, hi, resid(lo), 1e-15 * m)
    if not E < top:
        return EnergySpectrum(())
    roots = [Root(-E, dipole_residual(-E, g, R, m, convention), "simple", "closedform", "minus"),
             Root(E, dipole_residual(E, g, R, m, convention), "simple", "closedform", "plus")]
    return EnergySpectrum.build(roots, merge_tol=10 * opts.tol_energy * m)


# Triple, same polarity ---------------------------------------------------------

@dataclass(frozen=True)
class CubicCoefficients:
    """G3 X^3 + G2 X^2 + G1 X + G0 in X = E tan(Theta)/kappa.

    ``t1, t2, F0, F1`` are the tanh-form companions used by the squeeze
    transfer derivation: X^3 t1 t2 - X^2 (t1 + t2 + t1 t2) + X F1 + F0.
    """

    G0: float
    G1: float
    G2: float
    G3: float
    t1: float = float("nan")
    t2: float = float("nan")
    F0: float = float("nan")
    F1: float = float("nan")

    def cubic(self, X: float) -> float:
        return ((self.G3 * X + self.G2) * X + self.G1) * X + self.G0

    def tanh_cubic(self, X: float) -> float:
        t1, t2 = self.t1, self.t2
        return X**3 * t1 * t2 - X * X * (t1 + t2 + t1 * t2) + X * self.F1 + self.F0


def triple_same_coeffs(E: float, g: float, R1: float, R2: float, m: float = 1.0,
                       convention=DeltaConvention.CAYLEY) -> CubicCoefficients:
    k = kappa_of(E, m)
    t2g = _tan_sq(g, convention)
    e1, e2 = math.exp(-2 * R1 * k), math.exp(-2 * R2 * k)
    G0 = -1 + t2g * (e1 + e2 + e1 * e2)
    G1 = 3 - t2g * (e1 + e2 - e1 * e2)
    G2 = (1 + e1) * (1 + e2) - 4
    G3 = (1 - e1) * (1 - e2)
    t1, t2 = math.tanh(R1 * k), math.tanh(R2 * k)
    sec2 = 1 + t2g
    F0 = t2g - 0.25 * sec2 * (1 + t1) * (1 + t2)
    F1 = 0.25 * ((3 - t2g) * (1 + t1 + t2) + 3 * sec2 * t1 * t2)
    return CubicCoefficients(G0, G1, G2, G3, t1, t2, F0, F1)


def _triple_same_h(E, g, R1, R2, m, convention, xp=_NP):
    s, c = _sin_cos(g, convention, xp)
    k = _kappa(E, m, xp)
    e1, e2 = xp.exp(-2 * R1 * k), xp.exp(-2 * R2 * k)
    S = e1 + e2 + e1 * e2
    Sp = e1 + e2 - e1 * e2
    u, w = E * s, k * c
    G3 = (1 - e1) * (1 - e2)
    G2 = (1 + e1) * (1 + e2) - 4
    return G3 * u**3 + G2 * u * u * w + (3 * c * c - Sp * s * s) * u * k * k + (S * s * s - c * c) * k**3 * c


def triple_same_residual(E: float, g: float, R1: float, R2: float, m: float = 1.0,
                         convention=DeltaConvention.CAYLEY) -> float:
    """The cubic multiplied by (kappa cos Theta)^3."""
    _check_gap(E, m)
    return float(_triple_same_h(E, g, R1, R2, m, convention))


# Triple, alternating ----------------------------------------------------------

def _alt_factor1_h(E, g, m, convention, xp=_NP):
    s, c = _sin_cos(g, convention, xp)
    return E * s - _kappa(E, m, xp) * c


def _alt_factor2_h(E, g, R1, R2, m, convention, xp=_NP):
    s, c = _sin_cos(g, convention, xp)
    k = _kappa(E, m, xp)
    e1, e2 = xp.exp(-2 * R1 * k), xp.exp(-2 * R2 * k)
    return E * E * s * s * (1 - e1) * (1 - e2) - k * k * (c * c + s * s * (e1 + e2 - e1 * e2))


def triple_alternating_residuals(E: float, g: float, R1: float, R2: float, m: float = 1.0,
                                 convention=DeltaConvention.CAYLEY) -> dict[str, float]:
    """X-space factors of the alternating triple.

    factor1 = X - 1 (the decoupled single-center level).
    Cayley: factor2 = X^2 - D,
        D = [(g^2-4)^2 + 16 g^2 (e1 + e2 - e1 e2)] / [(g^2-4)^2 (1-e1)(1-e2)].
    Squeeze: factor2 = X^2 t1 t2 - D,
        D = cos^-2(g) (1+t1)(1+t2)/4 - tan^2(g) t1 t2,
    with e_j = exp(-2 z_j), t_j = tanh(z_j), z_j = R_j kappa.
    """
    convention = _convention(convention)
    k = kappa_of(E, m)
    t2g = _tan_sq(g, convention)
    s, c = _sin_cos(g, convention)
    X = E / k * math.sqrt(t2g) * math.copysign(1.0, s * c)
    if convention is DeltaConvention.CAYLEY:
        e1, e2 = math.exp(-2 * R1 * k), math.exp(-2 * R2 * k)
        a = (g * g - 4) ** 2
        D = (a + 16 * g * g * (e1 + e2 - e1 * e2)) / (a * (1 - e1) * (1 - e2))
        f2 = X * X - D
    else:
        t1, t2 = math.tanh(R1 * k), math.tanh(R2 * k)
        D = 0.25 * (1 + t2g) * (1 + t1) * (1 + t2) - t2g * t1 * t2
        f2 = X * X * t1 * t2 - D
    return {"factor1": X - 1.0, "factor2": f2}


# Spectra --------------------------------------------------------------------

def _residuals(kind: PresetKind, g, R1, R2, m, convention):
    """[(branch tag, residual(E, xp))] for the preset."""
    if kind is PresetKind.DOUBLE_SYMMETRIC:
        return [(tag, lambda E, xp, b=b: _double_h(E, g, R1, m, convention, b, xp))
                for tag, b in (("plus", 1), ("minus", -1))]
    if kind is PresetKind.DIPOLE:
        return [("pair", lambda E, xp: _dipole_h(E, g, R1, m, convention, xp))]
    if kind is PresetKind.TRIPLE_SAME:
        return [("cubic", lambda E, xp: _triple_same_h(E, g, R1, R2, m, convention, xp))]
    if kind is PresetKind.TRIPLE_ALTERNATING:
        return [("decoupled", lambda E, xp: _alt_factor1_h(E, g, m, convention, xp)),
                ("pair", lambda E, xp: _alt_factor2_h(E, g, R1, R2, m, convention, xp))]
    raise ValueError(kind)


def closedform_spectrum(kind, g: float, R: Optional[float] = None, R1: Optional[float] = None,
                        R2: Optional[float] = None, m: float = 1.0,
                        convention=DeltaConvention.CAYLEY,
                        opts: Optional[SolverOptions] = None) -> EnergySpectrum:
    """Roots of the closed-form level conditions, tagged by branch."""
    kind = PresetKind.parse(kind)
    convention = _convention(convention)
    opts = opts or SolverOptions()
    tag = "closedform"
    if kind is PresetKind.SINGLE:
        E = single_energy(g, m, convention)
        top = m * (1 - opts.edge_margin)
        if E is None or abs(E) > top:
            return EnergySpectrum(())
        return EnergySpectrum((Root(E, 0.0, "simple", tag, "single"),))
    R1 = R if R1 is None else R1
    R2 = R1 if R2 is None else R2
    preset_problem(kind, g, R=R1, R1=R1, R2=R2, m=m)  # validates parameters
    if kind is PresetKind.DIPOLE:
        return dipole_energies(g, R1, m, convention, opts)
    interval = (-m * (1 - opts.edge_margin), m * (1 - opts.edge_margin))
    roots = []
    with mpmath.workdps(opts.precise_dps):
        for branch, fn in _residuals(kind, g, R1, R2, m, convention):
            found = solve_all(lambda E, fn=fn: fn(np.asarray(E, dtype=float), _NP), interval, opts,
                              precise=lambda E, fn=fn: fn(mpmath.mpf(E), _MP), energy_unit=m)
            roots.extend(Root(r.energy, r.residual, r.multiplicity, tag, branch) for r in found)
    return EnergySpectrum.build(roots, merge_tol=10 * opts.tol_energy * m)


def branch_function(kind, branch: str, g: float, R1: float, R2: Optional[float] = None,
                    m: float = 1.0, convention=DeltaConvention.CAYLEY) -> Callable[[float], float]:
    """Scalar residual of one branch, for external root polishing and tests."""
    kind = PresetKind.parse(kind)
    for tag, fn in _residuals(kind, g, R1, R1 if R2 is None else R2, m, _convention(convention)):
        if tag == branch:
            return lambda E, fn=fn: float(fn(np.float64(E), _NP))
    raise ValueError(f"preset {kind.value} has no branch {branch!r}")
