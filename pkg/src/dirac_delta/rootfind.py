"""Root location on a bounded energy interval.

Residuals are passed as vectorized callables ``f(E: ndarray) -> ndarray``;
the result may carry a trailing axis of independent branches (for example
the eigenvalues of a symmetric matrix), each of which is scanned on its
own. Sign changes are refined by bisection, even-multiplicity candidates by
golden-section minimisation of ``|f|``.

An optional ``precise`` scalar evaluator (typically the same residual in
mpmath arithmetic) is used to split clusters of roots that are closer
together than double precision can resolve from a single scalar residual.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Callable, Optional, Sequence

import numpy as np

from .core import SolverBudgetExceeded

GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0


@dataclass(frozen=True)
class SolverOptions:
    grid_points: int = 4001
    tol_energy: float = 1e-12  # units of m
    tol_residual: float = 1e-10  # relative to the median |f| of the scan
    max_refinements: int = 3
    edge_margin: float = 1e-9  # units of m
    touching_threshold: float = 1e-8
    precise_dps: int = 50

    def __post_init__(self):
        if self.grid_points < 2:
            raise ValueError("grid_points must be >= 2")
        for name in ("tol_energy", "tol_residual", "edge_margin", "touching_threshold"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if self.max_refinements < 0:
            raise ValueError("max_refinements must be >= 0")

    def with_overrides(self, **kw) -> "SolverOptions":
        return replace(self, **kw)


@dataclass(frozen=True)
class Bracket:
    lo: float
    hi: float
    f_lo: float
    f_hi: float
    kind: str  # "sign_change" | "touching_candidate"
    branch: int = 0
    scale: float = 1.0

    def __post_init__(self):
        if not self.lo < self.hi:
            raise ValueError(f"bracket needs lo < hi, got [{self.lo}, {self.hi}]")
        if self.kind == "sign_change" and not self.f_lo * self.f_hi < 0:
            raise ValueError("sign_change bracket without a sign change")


@dataclass(frozen=True)
class FoundRoot:
    energy: float
    residual: float
    multiplicity: str = "simple"
    branch: int = 0


Residual = Callable[[np.ndarray], np.ndarray]
Precise = Callable[[float], object]


def _as_branches(values: np.ndarray) -> np.ndarray:
    values = np.asarray(values, dtype=float)
    return values[:, None] if values.ndim == 1 else values


def _branch_fn(f: Residual, branch: int) -> Callable[[float], float]:
    def g(E: float) -> float:
        return float(_as_branches(f(np.array([E], dtype=float)))[0, branch])
    return g


def _scale(col: np.ndarray) -> float:
    finite = np.abs(col[np.isfinite(col)])
    s = float(np.median(finite)) if finite.size else 1.0
    return s if s > 0 else 1.0


def bisect(fn: Callable[[float], float], lo: float, hi: float, f_lo: float, tol: float) -> float:
    """Plain bisection; ``f_lo`` is the sign reference at ``lo``."""
    s_lo = math.copysign(1.0, f_lo)
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        fm = fn(mid)
        if fm == 0:
            return mid
        if math.copysign(1.0, fm) == s_lo:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def golden_min(fn: Callable[[float], float], lo: float, hi: float, tol: float) -> float:
    """Golden-section search for a minimum of ``fn`` on [lo, hi]."""
    a, b = lo, hi
    c = b - GOLDEN * (b - a)
    d = a + GOLDEN * (b - a)
    fc, fd = fn(c), fn(d)
    while b - a > tol:
        if fc <= fd:
            b, d, fd = d, c, fc
            c = b - GOLDEN * (b - a)
            if not a < c < b:
                break
            fc = fn(c)
        else:
            a, c, fc = c, d, fd
            d = a + GOLDEN * (b - a)
            if not a < d < b:
                break
            fd = fn(d)
    return c if fc <= fd else d


def scan_brackets(f: Residual, interval: tuple[float, float], opts: SolverOptions,
                  grid_points: Optional[int] = None) -> list[Bracket]:
    """Evaluate ``f`` on a uniform grid and collect candidate brackets."""
    lo, hi = interval
    if not lo < hi:
        raise ValueError("interval must satisfy lo < hi")
    n = grid_points or opts.grid_points
    grid = np.linspace(lo, hi, n)
    values = _as_branches(f(grid))
    out: list[Bracket] = []
    for k in range(values.shape[1]):
        col = values[:, k]
        scale = _scale(col)
        fn = _branch_fn(f, k)
        out.extend(_scan_column(fn, grid, col, scale, k, opts))
    return out


def _scan_column(fn, grid, col, scale, branch, opts) -> list[Bracket]:
    out: list[Bracket] = []
    a, b = col[:-1], col[1:]
    for i in np.flatnonzero(a * b < 0):
        out.append(Bracket(grid[i], grid[i + 1], col[i], col[i + 1], "sign_change", branch, scale))
    for i in np.flatnonzero(col[1:-1] == 0) + 1:
        prev, nxt = col[i - 1], col[i + 1]
        kind = "sign_change" if prev * nxt < 0 else "touching_candidate"
        out.append(Bracket(grid[i - 1], grid[i + 1], prev, nxt, kind, branch, scale))
    fm, f0, fp = col[:-2], col[1:-1], col[2:]
    sgn = np.sign(f0)
    with np.errstate(divide="ignore", invalid="ignore"):
        curv = fp - 2.0 * f0 + fm
        vertex = f0 - (fp - fm) ** 2 / (8.0 * curv)
        cand = ((fm * f0 > 0) & (fp * f0 > 0) & (np.abs(f0) <= np.abs(fm)) & (np.abs(f0) <= np.abs(fp))
                & (curv != 0) & (vertex * sgn <= opts.touching_threshold * scale))
    for i in np.flatnonzero(cand) + 1:
        lo, hi = grid[i - 1], grid[i + 1]
        s0 = math.copysign(1.0, col[i])
        x = golden_min(lambda E: s0 * fn(E), lo, hi, opts.tol_energy)
        fx = fn(x)
        if fx * col[i] < 0 and lo < x < hi:
            out.append(Bracket(lo, x, col[i - 1], fx, "sign_change", branch, scale))
            out.append(Bracket(x, hi, fx, col[i + 1], "sign_change", branch, scale))
        else:
            out.append(Bracket(lo, hi, col[i - 1], col[i + 1], "touching_candidate", branch, scale))
    out.sort(key=lambda br: br.lo)
    return out


def refine_root(f: Residual, b: Bracket, opts: SolverOptions, energy_unit: float = 1.0) -> Optional[float]:
    """Refine one bracket. Returns ``None`` for a rejected touching candidate."""
    fn = _branch_fn(f, b.branch)
    tol = opts.tol_energy * energy_unit
    if b.kind == "sign_change":
        return bisect(fn, b.lo, b.hi, b.f_lo, tol)
    x = golden_min(lambda E: abs(fn(E)), b.lo, b.hi, tol)
    if abs(fn(x)) < opts.tol_residual * b.scale:
        return x
    return None


def _probe(precise: Precise, center: float, h: float, tol: float,
           lo_bound: float, hi_bound: float) -> list[tuple[float, float]]:
    """Sign-change intervals of ``precise`` on a geometric probe set around ``center``."""
    floor = max(1e-15 * max(1.0, abs(center)), tol)
    offsets = []
    d = h
    while d > floor:
        offsets.append(d)
        d /= 2.0
    pts = sorted({center} | {center + s * o for o in offsets for s in (1.0, -1.0)})
    pts = [p for p in pts if lo_bound <= p <= hi_bound]
    vals = [float_sign(precise(p)) for p in pts]
    out = []
    for i, (p, v) in enumerate(zip(pts, vals)):
        if v == 0:
            out.append((p, p))
        elif i + 1 < len(pts) and v * vals[i + 1] < 0:
            out.append((p, pts[i + 1]))
    return out


def resolve_cluster(precise: Precise, center: float, h: float, tol: float,
                    lo_bound: float, hi_bound: float, depth: int = 2) -> list[float]:
    """Roots of ``precise`` within about ``h`` of ``center``.

    Every root found is probed again on a finer geometric set around itself,
    which separates roots that shared one probe interval.
    """
    roots: list[float] = []
    pending = [(center, h)]
    for _ in range(depth + 1):
        fresh = []
        for c, w in pending:
            for a, b in _probe(precise, c, w, tol, lo_bound, hi_bound):
                r = a if a == b else bisect(lambda E: float_sign(precise(E)), a, b, float_sign(precise(a)), tol)
                if all(abs(r - q) > 10 * tol for q in roots):
                    roots.append(r)
                    if b > a:
                        fresh.append((r, b - a))
        if not fresh:
            break
        pending = fresh
    return sorted(roots)


def _precise_min(precise: Precise, x: float, h: float, tol: float, lo: float, hi: float) -> float:
    return golden_min(lambda E: abs(float(precise(E))), max(lo, x - h), min(hi, x + h), tol)


def float_sign(v) -> float:
    if v > 0:
        return 1.0
    if v < 0:
        return -1.0
    return 0.0


def solve_all(f: Residual, interval: tuple[float, float], opts: SolverOptions = SolverOptions(),
              precise: Optional[Precise] = None, energy_unit: float = 1.0,
              min_count: Optional[int] = None) -> list[FoundRoot]:
    """All roots of ``f`` on ``interval``, sorted and deduplicated.

    ``min_count`` is an optional lower bound on the number of roots (for
    example from an algebraic argument); the grid is refined by halving
    until it is met or ``max_refinements`` is exhausted.
    """
    roots: list[FoundRoot] = []
    for attempt in range(opts.max_refinements + 1):
        n = (opts.grid_points - 1) * 2**attempt + 1
        roots = _solve_once(f, interval, opts, precise, energy_unit, n)
        if min_count is None or len(roots) >= min_count:
            return roots
    raise SolverBudgetExceeded(
        f"found {len(roots)} roots after {opts.max_refinements} refinements, expected >= {min_count}")


def _pick(f: Residual, E: np.ndarray, branch: np.ndarray) -> np.ndarray:
    return _as_branches(f(E))[np.arange(len(E)), branch]


def bisect_many(f: Residual, brackets: Sequence[Bracket], tol: float) -> np.ndarray:
    """Bisection of many sign-change brackets with one call of ``f`` per step."""
    lo = np.array([b.lo for b in brackets], dtype=float)
    hi = np.array([b.hi for b in brackets], dtype=float)
    s_lo = np.sign([b.f_lo for b in brackets])
    branch = np.array([b.branch for b in brackets], dtype=int)
    steps = int(np.ceil(np.log2(max(np.max(hi - lo), tol) / tol))) if len(lo) else 0
    for _ in range(steps + 1):
        mid = 0.5 * (lo + hi)
        fm = np.sign(_pick(f, mid, branch))
        exact = fm == 0
        lo = np.where(exact, mid, np.where(fm == s_lo, mid, lo))
        hi = np.where(exact, mid, np.where(fm == s_lo, hi, mid))
    return 0.5 * (lo + hi)


def _local_orders(f: Residual, x: np.ndarray, branch: np.ndarray, h: float,
                  interval: tuple[float, float]) -> np.ndarray:
    """Apparent order of each zero from the decay of |f| towards it."""
    offs = np.array([h, h / 16.0, -h, -h / 16.0])
    pts = np.clip((x[:, None] + offs[None, :]).ravel(), *interval)
    vals = np.abs(_pick(f, pts, np.repeat(branch, 4))).reshape(-1, 4)
    with np.errstate(divide="ignore", invalid="ignore"):
        orders = np.log(vals[:, [0, 2]] / vals[:, [1, 3]]) / np.log(16.0)
    orders = np.where(np.isfinite(orders), orders, 1.0)
    return orders.max(axis=1)


def _solve_once(f, interval, opts, precise, energy_unit, n) -> list[FoundRoot]:
    lo, hi = interval
    h = (hi - lo) / (n - 1)
    tol = opts.tol_energy * energy_unit
    found: list[tuple[float, str, int]] = []
    brackets = scan_brackets(f, interval, opts, n)
    simple = [b for b in brackets if b.kind == "sign_change"]
    xs = bisect_many(f, simple, tol)
    if precise is not None and len(simple):
        orders = _local_orders(f, xs, np.array([b.branch for b in simple]), h, interval)
    else:
        orders = np.ones(len(simple))
    for b, x, order in zip(simple, xs, orders):
        if order > 1.5 and precise is not None:
            near = resolve_cluster(precise, x, h, tol, lo, hi)
            if near:
                found.extend((r, "simple", b.branch) for r in near)
                continue
            t = _precise_min(precise, x, h, tol, lo, hi)
            if abs(_branch_fn(f, b.branch)(t)) < opts.tol_residual * b.scale:
                found.append((t, "touching", b.branch))
                continue
        found.append((float(x), "simple", b.branch))
    for b in brackets:
        if b.kind != "touching_candidate":
            continue
        x = refine_root(f, b, opts, energy_unit)
        if precise is not None:
            near = resolve_cluster(precise, x if x is not None else 0.5 * (b.lo + b.hi),
                                   b.hi - b.lo, tol, lo, hi)
            if near:
                found.extend((r, "simple", b.branch) for r in near)
                continue
            if x is not None:
                x = _precise_min(precise, x, b.hi - b.lo, tol, lo, hi)
        if x is not None:
            found.append((x, "touching", b.branch))
    found.sort()
    merged: list[list] = []
    for x, mult, branch in found:
        if merged and x - merged[-1][0] <= 10.0 * tol:
            prev = merged[-1]
            if prev[2] != branch or mult == "touching":
                prev[1] = "touching"
            continue
        merged.append([x, mult, branch])
    if not merged:
        return []
    res = _pick(f, np.array([r[0] for r in merged]), np.array([r[2] for r in merged]))
    return [FoundRoot(float(x), float(r), mult, br) for (x, mult, br), r in zip(merged, res)]


def energies(roots: Sequence[FoundRoot]) -> np.ndarray:
    return np.array([r.energy for r in roots])
