"""Domain types and scalar helpers shared by the spectral engines.

Units: energies carry units of the mass ``m``, positions carry units of
``1/m``. Strengths are dimensionless.

Sign convention: a :class:`DeltaCenter` stores the strength ``g_i`` of the
potential term ``g_i * delta(x - r_i)`` verbatim. The attractive presets
translate a user-facing coupling ``g > 0`` into the stored strength ``-g``.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence, Union

import numpy as np

EDGE_EPS = 1e-9


class DiracDeltaError(Exception):
    """Base class for all errors raised by this package."""


class DomainError(DiracDeltaError, ValueError):
    """Energy outside the open gap (-m, m) or otherwise out of domain."""


class SingularityError(DiracDeltaError, ValueError):
    """A closed-form expression hits a removable-only-analytically pole."""


class ValidationError(DiracDeltaError, ValueError):
    """Malformed problem definition."""


class SolverBudgetExceeded(DiracDeltaError, RuntimeError):
    """Root search could not reach a consistent root count."""


def _check_mass(m: float) -> float:
    m = float(m)
    if not (m > 0 and math.isfinite(m)):
        raise ValidationError(f"mass must be positive and finite, got {m!r}")
    return m


def _check_gap(E, m: float):
    if np.any(np.abs(E) >= m) or np.any(~np.isfinite(E)):
        raise DomainError(f"energy must lie strictly inside (-m, m) with m={m}; got {E!r}")


@dataclass(frozen=True)
class DeltaCenter:
    position: float
    strength: float

    def __post_init__(self):
        object.__setattr__(self, "position", float(self.position))
        object.__setattr__(self, "strength", float(self.strength))
        if not (math.isfinite(self.position) and math.isfinite(self.strength)):
            raise ValidationError(f"non-finite delta center {self!r}")


@dataclass(frozen=True)
class BoundStateProblem:
    """Mass plus ordered delta centers. Zero-strength centers are dropped."""

    mass: float
    centers: tuple[DeltaCenter, ...]

    def __post_init__(self):
        object.__setattr__(self, "mass", _check_mass(self.mass))
        centers = tuple(
            c if isinstance(c, DeltaCenter) else DeltaCenter(*c) for c in self.centers
        )
        centers = tuple(c for c in centers if c.strength != 0.0)
        if not centers:
            raise ValidationError("problem needs at least one center with nonzero strength")
        pos = [c.position for c in centers]
        if any(b <= a for a, b in zip(pos, pos[1:])):
            raise ValidationError(f"center positions must be strictly increasing, got {pos}")
        object.__setattr__(self, "centers", centers)

    @classmethod
    def from_lists(cls, positions: Sequence[float], strengths: Sequence[float], mass: float = 1.0):
        if len(positions) != len(strengths):
            raise ValidationError("positions and strengths differ in length")
        return cls(mass, tuple(DeltaCenter(p, s) for p, s in zip(positions, strengths)))

    @property
    def n_centers(self) -> int:
        return len(self.centers)

    @property
    def positions(self) -> np.ndarray:
        return np.array([c.position for c in self.centers])

    @property
    def strengths(self) -> np.ndarray:
        return np.array([c.strength for c in self.centers])

    def search_interval(self, edge_margin: float = EDGE_EPS) -> tuple[float, float]:
        m = self.mass
        return (-m * (1.0 - edge_margin), m * (1.0 - edge_margin))


@dataclass(frozen=True)
class GapVariables:
    energy: float
    rho: float
    kappa: float

    @classmethod
    def at(cls, E: float, m: float) -> "GapVariables":
        return cls(float(E), rho_of(E, m), kappa_of(E, m))


class DeltaConvention(enum.Enum):
    """How a point interaction is realised as a 2x2 connection matrix.

    Both members are rotations by an angle ``theta(g)`` of the attractive
    coupling ``g``. ``CAYLEY`` is the one the Green's-function determinant
    reproduces.
    """

    SQUEEZE = "squeeze"
    CAYLEY = "cayley"

    def theta(self, g):
        if self is DeltaConvention.SQUEEZE:
            return g
        return 2.0 * np.arctan(np.divide(g, 2.0))

    @classmethod
    def parse(cls, value: Union[str, "DeltaConvention"]) -> "DeltaConvention":
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).lower())
        except ValueError:
            raise ValidationError(f"unknown convention {value!r}; use 'squeeze' or 'cayley'") from None


ThetaMap = Callable[[float], float]
Convention = Union[DeltaConvention, ThetaMap]


def theta_of(g: float, convention: Convention) -> float:
    """Rotation angle for attractive coupling ``g``; accepts custom maps."""
    if isinstance(convention, DeltaConvention):
        return convention.theta(g)
    return convention(g)


@dataclass(frozen=True)
class Root:
    energy: float
    residual: float
    multiplicity: str = "simple"  # "simple" | "touching"
    method: str = ""
    branch: str = ""


@dataclass(frozen=True)
class EnergySpectrum:
    roots: tuple[Root, ...] = field(default_factory=tuple)

    @classmethod
    def build(cls, roots: Iterable[Root], merge_tol: float = 0.0) -> "EnergySpectrum":
        ordered = sorted(roots, key=lambda r: r.energy)
        out: list[Root] = []
        for r in ordered:
            if out and r.energy - out[-1].energy <= merge_tol:
                prev = out[-1]
                out[-1] = Root(prev.energy, prev.residual, "touching", prev.method,
                               prev.branch if prev.branch == r.branch else f"{prev.branch}+{r.branch}".strip("+"))
                continue
            out.append(r)
        return cls(tuple(out))

    @property
    def energies(self) -> np.ndarray:
        return np.array([r.energy for r in self.roots])

    def __len__(self) -> int:
        return len(self.roots)

    def __iter__(self):
        return iter(self.roots)


def rho_of(E, m: float):
    """sqrt((m - E)/(m + E)); the ratio of spinor components of decaying waves."""
    _check_gap(E, m)
    return np.sqrt((m - E) / (m + E)) if isinstance(E, np.ndarray) else math.sqrt((m - E) / (m + E))


def kappa_of(E, m: float):
    """Decay rate sqrt(m^2 - E^2) outside the centers."""
    _check_gap(E, m)
    if isinstance(E, np.ndarray):
        return np.sqrt((m - E) * (m + E))
    return math.sqrt((m - E) * (m + E))


def x_variable(E: float, m: float, g: float) -> float:
    """X = E/kappa * g/(1 - g^2/4), the reduced variable of the Cayley equations."""
    denom = 1.0 - g * g / 4.0
    if denom == 0.0:
        raise SingularityError("X is singular at g = +-2")
    return E / kappa_of(E, m) * g / denom


def rho_power_identities(E: float, m: float) -> dict[str, float]:
    """Return 1/rho - rho, 1/rho^2 + rho^2 and rho^3 - 1/rho^3.

    Each is cross-checked against its expression through E/kappa; an
    ArithmeticError signals a disagreement beyond 1e-12 relative.
    """
    rho = rho_of(E, m)
    t = E / kappa_of(E, m)
    p1 = 1.0 / rho - rho
    p2 = 1.0 / rho**2 + rho**2
    p3 = rho**3 - 1.0 / rho**3
    expected = (2.0 * t, 2.0 * (1.0 + 2.0 * t * t), -2.0 * (3.0 * t + 4.0 * t**3))
    for got, want in zip((p1, p2, p3), expected):
        if not math.isclose(got, want, rel_tol=1e-12, abs_tol=1e-12):
            raise ArithmeticError(f"rho identity violated at E={E}: {got} != {want}")
    return {"p1": p1, "p2": p2, "p3": p3}
