"""Transfer-matrix engine.

Spinor boundary values are carried left to right by 2x2 real matrices: a
rotation at every delta center and a hyperbolic propagator across each free
gap. Decay on both sides turns into the scalar condition

    lambda12 / rho^2 + (lambda11 + lambda22) / rho + lambda21 = 0.

Products are renormalized after each factor (max-abs entry scaled to 1,
log of the scale accumulated) so that wide separations do not overflow.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import mpmath
import numpy as np

from .core import (BoundStateProblem, Convention, DeltaConvention, EnergySpectrum, Root,
                   ValidationError, _check_gap, theta_of)
from .greens import Matrix2
from .rootfind import SolverOptions, solve_all


@dataclass(frozen=True)
class ConnectionMatrix:
    matrix: Matrix2
    convention: object
    theta: float


@dataclass(frozen=True, eq=False)
class ScaledTransfer:
    """True transfer matrix equals ``matrix * exp(log_scale)``."""

    matrix: np.ndarray
    log_scale: float

    def unscaled(self) -> np.ndarray:
        return self.matrix * math.exp(self.log_scale)

    @property
    def det_unscaled(self) -> float:
        a = self.matrix
        return float((a[0, 0] * a[1, 1] - a[0, 1] * a[1, 0]) * math.exp(2.0 * self.log_scale))


@dataclass(frozen=True)
class RectangularSegment:
    """Constant potential ``V`` over a width ``l``."""

    V: float
    l: float

    def __post_init__(self):
        if not self.l > 0:
            raise ValidationError("segment width must be positive")

    def gamma(self, E: float, m: float) -> complex:
        """sqrt((V-E)^2 - m^2), principal branch (imaginary inside the gap)."""
        return complex(np.sqrt(complex((self.V - E) ** 2 - m * m)))

    def eta(self, E: float, m: float) -> complex:
        """Branch-consistent eta = i(m - E + V)/gamma; equals rho at V = 0."""
        gam = self.gamma(E, m)
        if gam == 0:
            raise ZeroDivisionError("eta undefined where gamma = 0")
        return 1j * (m - E + self.V) / gam


def _rotation(theta: float) -> np.ndarray:
    c, s = math.cos(theta), math.sin(theta)
    return np.array([[c, -s], [s, c]])


def delta_connection(g: float, convention: Convention = DeltaConvention.SQUEEZE) -> ConnectionMatrix:
    """Connection matrix of an attractive center ``-g * delta``."""
    if isinstance(convention, str):
        convention = DeltaConvention.parse(convention)
    theta = float(theta_of(float(g), convention))
    return ConnectionMatrix(Matrix2.of(_rotation(theta)), convention, theta)


def free_gap_matrix(L: float, E: float, m: float) -> Matrix2:
    if L < 0:
        raise ValidationError("gap length must be non-negative")
    _check_gap(E, m)
    kappa = math.sqrt((m - E) * (m + E))
    rho = math.sqrt((m - E) / (m + E))
    w = L * kappa
    ch, sh = math.cosh(w), math.sinh(w)
    return Matrix2(ch, rho * sh, sh / rho, ch)


def _segment_entries(V, l, E, m):
    """Vectorized real segment matrix; returns (a11, a12, a21, a22)."""
    a = m - E + V
    b = m + E - V
    ab = a * b
    w = np.sqrt(np.abs(ab))
    wl = w * l
    trig = ab < 0
    safe = np.where(w > 0, w, 1.0)
    cos_part = np.where(trig, np.cos(wl), np.cosh(wl))
    sinc = np.where(w > 0, np.where(trig, np.sin(wl), np.sinh(wl)) / safe, l)
    return cos_part, a * sinc, b * sinc, cos_part


def segment_matrix(seg: RectangularSegment, E: float, m: float) -> Matrix2:
    """Transfer across a rectangular segment in real arithmetic.

    ``(V-E)^2 > m^2`` gives the oscillating branch, ``< m^2`` the
    hyperbolic one, equality the linear limit.
    """
    return Matrix2(*(float(x) for x in _segment_entries(seg.V, seg.l, float(E), m)))


def is_valid_connection(mtx) -> bool:
    """Real 2x2 with unit determinant (within 1e-12)."""
    a = mtx.as_array() if isinstance(mtx, Matrix2) else np.asarray(mtx)
    if a.shape != (2, 2) or np.iscomplexobj(a) and np.any(np.imag(a) != 0):
        return False
    a = np.real(a).astype(float)
    if not np.all(np.isfinite(a)):
        return False
    return abs(a[0, 0] * a[1, 1] - a[0, 1] * a[1, 0] - 1.0) <= 1e-12


# Vectorized product -------------------------------------------------------

def _factors(problem: BoundStateProblem, convention: Convention, width: Optional[float]):
    """Sequence of ('rot', theta) / ('gap', L) / ('seg', V, l) steps, left to right."""
    if isinstance(convention, str):
        convention = DeltaConvention.parse(convention)
    r, g = problem.positions, problem.strengths
    steps = []
    for i in range(problem.n_centers):
        if i:
            L = r[i] - r[i - 1] - (width or 0.0)
            steps.append(("gap", L))
        if width is None:
            steps.append(("rot", float(theta_of(-g[i], convention))))
        else:
            steps.append(("seg", g[i] / width, width))
    return steps


def _product(steps, E: np.ndarray, m: float):
    E = np.asarray(E, dtype=float)
    kappa = np.sqrt((m - E) * (m + E))
    rho = np.sqrt((m - E) / (m + E))
    one = np.ones_like(E)
    M = [one.copy(), 0 * one, 0 * one, one.copy()]
    log_scale = np.zeros_like(E)
    for step in steps:
        if step[0] == "rot":
            c, s = math.cos(step[1]), math.sin(step[1])
            F = (c, -s, s, c)
        elif step[0] == "gap":
            w = step[1] * kappa
            ch, sh = np.cosh(w), np.sinh(w)
            F = (ch, rho * sh, sh / rho, ch)
        else:
            F = _segment_entries(step[1], step[2], E, m)
        a11, a12, a21, a22 = M
        M = [F[0] * a11 + F[1] * a21, F[0] * a12 + F[1] * a22,
             F[2] * a11 + F[3] * a21, F[2] * a12 + F[3] * a22]
        big = np.maximum.reduce([np.abs(x) for x in M])
        M = [x / big for x in M]
        log_scale = log_scale + np.log(big)
    return M, log_scale, rho


def _residual_vec(steps, E, m):
    (a11, a12, a21, a22), _, rho = _product(steps, E, m)
    return a12 / rho**2 + (a11 + a22) / rho + a21


def _residual_mp(steps, E: float, m: float, dps: int):
    with mpmath.workdps(dps):
        E = mpmath.mpf(E)
        m = mpmath.mpf(m)
        kappa = mpmath.sqrt((m - E) * (m + E))
        rho = mpmath.sqrt((m - E) / (m + E))
        M = mpmath.eye(2)
        for step in steps:
            if step[0] == "rot":
                th = mpmath.mpf(step[1])
                c, s = mpmath.cos(th), mpmath.sin(th)
                F = mpmath.matrix([[c, -s], [s, c]])
            elif step[0] == "gap":
                w = mpmath.mpf(step[1]) * kappa
                F = mpmath.matrix([[mpmath.cosh(w), rho * mpmath.sinh(w)],
                                   [mpmath.sinh(w) / rho, mpmath.cosh(w)]])
            else:
                V, l = mpmath.mpf(step[1]), mpmath.mpf(step[2])
                a, b = m - E + V, m + E - V
                ab = a * b
                w = mpmath.sqrt(abs(ab))
                if ab < 0:
                    cp, sn = mpmath.cos(w * l), mpmath.sin(w * l) / w
                elif ab > 0:
                    cp, sn = mpmath.cosh(w * l), mpmath.sinh(w * l) / w
                else:
                    cp, sn = mpmath.mpf(1), l
                F = mpmath.matrix([[cp, a * sn], [b * sn, cp]])
            M = F * M
        return M[0, 1] / rho**2 + (M[0, 0] + M[1, 1]) / rho + M[1, 0]


def total_transfer(problem: BoundStateProblem, E: float,
                   convention: Convention = DeltaConvention.SQUEEZE) -> ScaledTransfer:
    _check_gap(E, problem.mass)
    M, log_scale, _ = _product(_factors(problem, convention, None), np.array([float(E)]), problem.mass)
    return ScaledTransfer(np.array([[M[0][0], M[1][0]], [M[2][0], M[3][0]]]), float(log_scale[0]))


def bound_state_residual(problem: BoundStateProblem, E: float,
                         convention: Convention = DeltaConvention.SQUEEZE) -> float:
    """Decay condition evaluated on the scaled product."""
    _check_gap(E, problem.mass)
    return float(_residual_vec(_factors(problem, convention, None), np.array([float(E)]), problem.mass)[0])


def _spectrum(problem, steps, opts, tag, min_count):
    m = problem.mass
    found = solve_all(lambda E: _residual_vec(steps, E, m), problem.search_interval(opts.edge_margin),
                      opts, precise=lambda E: _residual_mp(steps, E, m, opts.precise_dps),
                      energy_unit=m, min_count=min_count)
    roots = [Root(r.energy, r.residual, r.multiplicity, tag) for r in found]
    return EnergySpectrum.build(roots, merge_tol=10 * opts.tol_energy * m)


def transfer_spectrum(problem: BoundStateProblem, opts: Optional[SolverOptions] = None,
                      convention: Convention = DeltaConvention.SQUEEZE,
                      min_count: Optional[int] = None) -> EnergySpectrum:
    opts = opts or SolverOptions()
    if isinstance(convention, str):
        convention = DeltaConvention.parse(convention)
    tag = "transfer/" + (convention.value if isinstance(convention, DeltaConvention) else "custom")
    return _spectrum(problem, _factors(problem, convention, None), opts, tag, min_count)


# Finite-width stand-ins for the delta centers ------------------------------

def _check_width(problem: BoundStateProblem, width: float):
    if not width > 0:
        raise ValidationError("width must be positive")
    if problem.n_centers > 1 and width >= np.min(np.diff(problem.positions)):
        raise ValidationError("segments of this width would overlap")


def stack_residual(problem: BoundStateProblem, width: float, E: float) -> float:
    """Decay condition with every center replaced by a well of area ``strength``."""
    _check_width(problem, width)
    _check_gap(E, problem.mass)
    steps = _factors(problem, None, width)
    return float(_residual_vec(steps, np.array([float(E)]), problem.mass)[0])


def stack_spectrum(problem: BoundStateProblem, width: float,
                   opts: Optional[SolverOptions] = None) -> EnergySpectrum:
    """Spectrum of the rectangular-well regularization (potential strength/width)."""
    _check_width(problem, width)
    opts = opts or SolverOptions()
    return _spectrum(problem, _factors(problem, None, width), opts, "stack", None)
