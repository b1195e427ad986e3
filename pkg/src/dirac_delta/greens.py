"""Green's-function engine: the 2N x 2N matrix Delta(E) and its zeros.

Delta has blocks ``delta_ij / g_j * I + G0(r_i - r_j, E)``. In the Majorana
representation G0 is real, and ``G0(dx)^T = G0(-dx)`` makes Delta real
symmetric, so its spectrum is real. Bound states are the zeros of
``det Delta``. The spectral search follows the sorted eigenvalues of Delta,
which cross zero one at a time even when several roots of ``det Delta``
crowd into a single grid cell.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.linalg import LinAlgWarning, lu_factor

from .core import BoundStateProblem, EnergySpectrum, Root, _check_gap
from .rootfind import SolverOptions, solve_all


@dataclass(frozen=True)
class Matrix2:
    a11: float
    a12: float
    a21: float
    a22: float

    def __post_init__(self):
        if not np.all(np.isfinite(self.as_array())):
            raise ValueError("Matrix2 entries must be finite")

    def as_array(self) -> np.ndarray:
        return np.array([[self.a11, self.a12], [self.a21, self.a22]], dtype=float)

    @classmethod
    def of(cls, a) -> "Matrix2":
        a = np.asarray(a, dtype=float)
        return cls(float(a[0, 0]), float(a[0, 1]), float(a[1, 0]), float(a[1, 1]))

    @property
    def det(self) -> float:
        return self.a11 * self.a22 - self.a12 * self.a21


@dataclass(frozen=True, eq=False)
class DeltaMatrix:
    n_centers: int
    entries: np.ndarray

    def block(self, i: int, j: int) -> np.ndarray:
        return self.entries[2 * i:2 * i + 2, 2 * j:2 * j + 2]


def _g0_batch(dx: np.ndarray, E: np.ndarray, m: float) -> np.ndarray:
    """G0 for broadcastable ``dx`` and ``E``; trailing shape (2, 2)."""
    kappa = np.sqrt((m - E) * (m + E))
    dx, E, kappa = np.broadcast_arrays(dx, E, kappa)
    s = np.sign(dx)
    decay = 0.5 * np.exp(-np.abs(dx) * kappa)
    out = np.empty(dx.shape + (2, 2))
    out[..., 0, 0] = (E - m) / kappa * decay
    out[..., 0, 1] = -s * decay
    out[..., 1, 0] = s * decay
    out[..., 1, 1] = (E + m) / kappa * decay
    return out


def free_greens(dx: float, E: float, m: float) -> Matrix2:
    """Free Green's function between points separated by ``dx``; sign(0) = 0."""
    _check_gap(E, m)
    return Matrix2.of(_g0_batch(np.float64(dx), np.float64(E), m))


def _assemble_batch(problem: BoundStateProblem, E: np.ndarray) -> np.ndarray:
    r, g, m = problem.positions, problem.strengths, problem.mass
    n = problem.n_centers
    dx = r[:, None] - r[None, :]
    blocks = _g0_batch(dx[None, :, :], E[:, None, None], m)  # (nE, N, N, 2, 2)
    idx = np.arange(n)
    blocks[:, idx, idx, 0, 0] += 1.0 / g
    blocks[:, idx, idx, 1, 1] += 1.0 / g
    return blocks.transpose(0, 1, 3, 2, 4).reshape(len(E), 2 * n, 2 * n)


def assemble_delta_matrix(problem: BoundStateProblem, E: float) -> DeltaMatrix:
    _check_gap(E, problem.mass)
    return DeltaMatrix(problem.n_centers, _assemble_batch(problem, np.array([float(E)]))[0])


def _lu_det(a: np.ndarray) -> float:
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", LinAlgWarning)  # exactly singular is a valid answer here
        lu, piv = lu_factor(a, check_finite=True)
    parity = np.count_nonzero(piv != np.arange(len(piv))) % 2
    d = float(np.prod(np.diag(lu)))
    return -d if parity else d


def delta_determinant(problem: BoundStateProblem, E: float) -> float:
    """det Delta(E) by LU with partial pivoting, sign fixed by pivot parity."""
    return _lu_det(assemble_delta_matrix(problem, E).entries)


def greens_spectrum(problem: BoundStateProblem, opts: Optional[SolverOptions] = None,
                    min_count: Optional[int] = None) -> EnergySpectrum:
    opts = opts or SolverOptions()
    m = problem.mass

    def branches(E: np.ndarray) -> np.ndarray:
        return np.linalg.eigvalsh(_assemble_batch(problem, np.asarray(E, dtype=float)))

    found = solve_all(branches, problem.search_interval(opts.edge_margin), opts,
                      energy_unit=m, min_count=min_count)
    roots = [Root(float(r.energy), delta_determinant(problem, r.energy), r.multiplicity, "greens")
             for r in found]
    return EnergySpectrum.build(roots, merge_tol=10 * opts.tol_energy * m)


__all__ = [
    "Matrix2", "DeltaMatrix", "free_greens", "assemble_delta_matrix",
    "delta_determinant", "greens_spectrum",
]
