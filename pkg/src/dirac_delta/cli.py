"""Command-line front end: ``solve``, ``sweep`` and ``audit``.

Output is a flat table (CSV or JSON) with dimensionless columns E/m, g and
m*R. Exit codes: 0 success, 1 configuration error, 2 solver failure,
3 audit failures present.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import math
import sys
from dataclasses import dataclass, field, fields, replace
from typing import Iterable, Optional, Sequence

import numpy as np

from .closedform import (PresetKind, closedform_spectrum, merged_limit_energy, preset_problem,
                         single_energy)
from .core import BoundStateProblem, DeltaCenter, DeltaConvention, DiracDeltaError, ValidationError
from .greens import greens_spectrum
from .rootfind import SolverOptions
from .transfer import transfer_spectrum

log = logging.getLogger("dirac_delta")

METHODS = ("greens", "transfer", "closedform")
COLUMNS = ("preset", "g", "mR1", "mR2", "method", "convention", "branch", "E_over_m", "residual", "status")
AUDIT_COLUMNS = ("check", "preset", "g", "mR", "method", "convention", "expected", "measured",
                 "deviation", "tolerance", "status")
MERGED_MR = 1e-6  # stands in for mR = 0, where centers would coincide
FAR_MR = 20.0


class ConfigError(ValidationError):
    """Configuration problem; the message names the offending field."""


@dataclass(frozen=True)
class RunConfig:
    problem: Optional[BoundStateProblem]
    preset: Optional[PresetKind] = None
    g: Optional[float] = None
    mR1: Optional[float] = None
    mR2: Optional[float] = None
    m: float = 1.0
    methods: tuple[str, ...] = ("greens", "transfer")
    conventions: tuple[DeltaConvention, ...] = (DeltaConvention.CAYLEY,)
    solver: SolverOptions = field(default_factory=SolverOptions)
    sweep: Optional["SweepSpec"] = None

    def at(self, g: Optional[float] = None, mR1: Optional[float] = None,
           mR2: Optional[float] = None) -> "RunConfig":
        """Copy at another preset parameter point (problem rebuilt)."""
        g = self.g if g is None else g
        mR1 = self.mR1 if mR1 is None else mR1
        mR2 = self.mR2 if mR2 is None else mR2
        return replace(self, g=g, mR1=mR1, mR2=mR2, problem=_preset_or_none(self.preset, g, mR1, mR2, self.m))


@dataclass(frozen=True)
class SweepSpec:
    axis: str  # "g" | "mR"
    start: float
    stop: float
    count: int
    fixed: float

    def __post_init__(self):
        if self.axis not in ("g", "mR"):
            raise ConfigError(f"sweep.axis: expected 'g' or 'mR', got {self.axis!r}")
        if self.count < 2:
            raise ConfigError("sweep.count: must be >= 2")
        if not self.start < self.stop:
            raise ConfigError("sweep: start must be < stop")

    def values(self) -> np.ndarray:
        v = np.linspace(self.start, self.stop, self.count)
        if self.axis == "mR":
            v[v <= 0] = MERGED_MR
        return v


def _preset_or_none(preset, g, mR1, mR2, m) -> Optional[BoundStateProblem]:
    """Preset problem, or None when g = 0 leaves no center."""
    if g == 0:
        return None
    kw = {} if preset is PresetKind.SINGLE else (
        {"R": mR1 / m} if preset.n_centers == 2 else {"R1": mR1 / m, "R2": mR2 / m})
    return preset_problem(preset, g, m=m, **kw)


FIGURES = {
    "figure1a": (PresetKind.DOUBLE_SYMMETRIC, SweepSpec("g", 0.0, math.pi, 629, 1.0)),
    "figure1b": (PresetKind.DOUBLE_SYMMETRIC, SweepSpec("mR", 0.0, 5.0, 500, 1.5)),
    "figure2a": (PresetKind.DIPOLE, SweepSpec("g", 0.0, math.pi, 629, 1.0)),
    "figure2b": (PresetKind.DIPOLE, SweepSpec("mR", 0.0, 5.0, 500, 1.5)),
    "figure3a": (PresetKind.TRIPLE_SAME, SweepSpec("g", 0.0, math.pi, 629, 1.0)),
    "figure3b": (PresetKind.TRIPLE_SAME, SweepSpec("mR", 0.0, 5.0, 500, 1.5)),
    "figure4a": (PresetKind.TRIPLE_ALTERNATING, SweepSpec("g", 0.0, math.pi, 629, 1.0)),
    "figure4b": (PresetKind.TRIPLE_ALTERNATING, SweepSpec("mR", 0.0, 5.0, 500, 1.5)),
}
# Green's function (equivalent to the Cayley form) against squeezed-rectangle transfer.
FIGURE_RUNS = (("greens", DeltaConvention.CAYLEY), ("transfer", DeltaConvention.SQUEEZE))


# Config parsing ----------------------------------------------------------------

def _number(doc: dict, key: str, required: bool = False, positive: bool = False) -> Optional[float]:
    if key not in doc or doc[key] is None:
        if required:
            raise ConfigError(f"{key}: required")
        return None
    v = doc[key]
    if isinstance(v, bool) or not isinstance(v, (int, float)) or not math.isfinite(v):
        raise ConfigError(f"{key}: expected a finite number, got {v!r}")
    if positive and not v > 0:
        raise ConfigError(f"{key}: must be positive, got {v!r}")
    return float(v)


def _solver(doc) -> SolverOptions:
    if doc is None:
        return SolverOptions()
    if not isinstance(doc, dict):
        raise ConfigError("solver: expected an object")
    known = {f.name: f.type for f in fields(SolverOptions)}
    kw = {}
    for k, v in doc.items():
        if k not in known:
            raise ConfigError(f"solver.{k}: unknown option")
        if isinstance(v, bool) or not isinstance(v, (int, float)):
            raise ConfigError(f"solver.{k}: expected a number")
        kw[k] = int(v) if k in ("grid_points", "max_refinements", "precise_dps") else float(v)
    try:
        return SolverOptions(**kw)
    except ValueError as exc:
        raise ConfigError(f"solver: {exc}") from None


def _conventions(v) -> tuple[DeltaConvention, ...]:
    if v is None:
        return (DeltaConvention.CAYLEY,)
    items = v if isinstance(v, list) else (["squeeze", "cayley"] if v == "both" else [v])
    try:
        return tuple(DeltaConvention.parse(x) for x in items)
    except ValidationError as exc:
        raise ConfigError(f"convention: {exc}") from None


def parse_config(text: str) -> RunConfig:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"<root>: invalid JSON ({exc})") from None
    if not isinstance(doc, dict):
        raise ConfigError("<root>: expected a JSON object")
    m = _number(doc, "m", positive=True) or 1.0
    methods = doc.get("methods", ["greens", "transfer"])
    if not isinstance(methods, list) or not methods:
        raise ConfigError("methods: expected a non-empty list")
    for i, name in enumerate(methods):
        if name not in METHODS:
            raise ConfigError(f"methods[{i}]: unknown method {name!r}")
    conventions = _conventions(doc.get("convention"))
    solver = _solver(doc.get("solver"))
    sweep = None
    if "sweep" in doc:
        sw = doc["sweep"]
        if not isinstance(sw, dict):
            raise ConfigError("sweep: expected an object")
        try:
            sweep = SweepSpec(str(sw.get("axis")), _number(sw, "start", True), _number(sw, "stop", True),
                              int(_number(sw, "count", True)), 0.0)
        except ConfigError as exc:
            msg = str(exc)
            raise ConfigError(msg if msg.startswith("sweep") else f"sweep.{msg}") from None

    if ("preset" in doc) == ("centers" in doc):
        raise ConfigError("<root>: give exactly one of 'preset' or 'centers'")
    if "centers" in doc:
        if "closedform" in methods:
            raise ConfigError("methods: closedform needs a preset")
        if sweep is not None:
            raise ConfigError("sweep: needs a preset")
        centers = doc["centers"]
        if not isinstance(centers, list) or not centers:
            raise ConfigError("centers: expected a non-empty list")
        parsed = []
        for i, c in enumerate(centers):
            if not isinstance(c, dict):
                raise ConfigError(f"centers[{i}]: expected an object")
            try:
                parsed.append(DeltaCenter(_number(c, "position", True) / m, _number(c, "strength", True)))
            except ConfigError as exc:
                raise ConfigError(f"centers[{i}].{exc}") from None
        try:
            problem = BoundStateProblem(m, tuple(parsed))
        except ValidationError as exc:
            raise ConfigError(f"centers: {exc}") from None
        return RunConfig(problem, None, None, None, None, m, tuple(methods), conventions, solver)

    try:
        preset = PresetKind.parse(doc["preset"])
    except ValidationError as exc:
        raise ConfigError(f"preset: {exc}") from None
    g = _number(doc, "g", required=sweep is None or sweep.axis != "g")
    g = 0.0 if g is None else g
    mR = _number(doc, "mR", positive=True)
    mR1 = _number(doc, "mR1", positive=True) or mR
    mR2 = _number(doc, "mR2", positive=True) or mR1
    needs_distance = preset is not PresetKind.SINGLE and (sweep is None or sweep.axis != "mR")
    if needs_distance and mR1 is None:
        raise ConfigError("mR: required for this preset")
    if sweep is not None:
        sweep = replace(sweep, fixed=mR1 if sweep.axis == "g" else g)
    cfg = RunConfig(None, preset, g, mR1, mR2, m, tuple(methods), conventions, solver, sweep)
    if needs_distance or preset is PresetKind.SINGLE:
        try:
            cfg = cfg.at()
        except ValidationError as exc:
            raise ConfigError(f"preset: {exc}") from None
    return cfg


# Rows ------------------------------------------------------------------------

def _fmt(x) -> str:
    if x is None or x == "":
        return ""
    if isinstance(x, (float, np.floating)):
        return f"{float(x):.15g}"
    return str(x)


def _base(cfg: RunConfig) -> dict:
    two = cfg.preset is not None and cfg.preset.n_centers == 2
    return {"preset": cfg.preset.value if cfg.preset else "custom", "g": cfg.g,
            "mR1": cfg.mR1, "mR2": None if two else cfg.mR2}


def _spectrum(cfg: RunConfig, method: str, conv: DeltaConvention):
    if method == "greens":
        return greens_spectrum(cfg.problem, cfg.solver)
    if method == "transfer":
        return transfer_spectrum(cfg.problem, cfg.solver, conv)
    kw = ({} if cfg.preset is PresetKind.SINGLE else {"R": cfg.mR1 / cfg.m} if cfg.preset.n_centers == 2
          else {"R1": cfg.mR1 / cfg.m, "R2": cfg.mR2 / cfg.m})
    return closedform_spectrum(cfg.preset, cfg.g, m=cfg.m, convention=conv, opts=cfg.solver, **kw)


def _runs(cfg: RunConfig):
    for method in cfg.methods:
        convs = (DeltaConvention.CAYLEY,) if method == "greens" else cfg.conventions
        for conv in convs:
            yield method, conv


def solve_rows(cfg: RunConfig, runs=None) -> list[dict]:
    rows = []
    base = _base(cfg)
    for method, conv in runs or _runs(cfg):
        row = dict(base, method=method, convention=conv.value, branch="", E_over_m=None, residual=None)
        if cfg.problem is None:
            rows.append(dict(row, status="empty"))
            continue
        try:
            spec = _spectrum(cfg, method, conv)
        except DiracDeltaError as exc:
            rows.append(dict(row, status=f"error: {exc}"))
            continue
        if not len(spec):
            rows.append(dict(row, status="empty"))
        for r in spec:
            rows.append(dict(row, branch=r.branch if method == "closedform" else "",
                             E_over_m=r.energy / cfg.m, residual=r.residual,
                             status="ok" if r.multiplicity == "simple" else "touching"))
    return rows


def run_solve(cfg: RunConfig) -> list[dict]:
    """One row per (method, convention, root); errors raise."""
    if cfg.problem is None:
        raise ConfigError("problem: no center with nonzero strength")
    rows = solve_rows(cfg)
    bad = [r for r in rows if r["status"].startswith("error")]
    if bad:
        raise SolverFailure("; ".join(f"{r['method']}: {r['status']}" for r in bad))
    return rows


class SolverFailure(DiracDeltaError):
    pass


def _markers(cfg: RunConfig, sweep: SweepSpec) -> list[dict]:
    """Analytic reference levels drawn as isolated points in the figures."""
    if sweep.axis != "mR" or cfg.preset is None:
        return []
    n = cfg.preset.n_centers
    rows = []
    base = dict(_base(cfg), branch="", residual=None)
    for conv in (DeltaConvention.CAYLEY, DeltaConvention.SQUEEZE):
        merged = None
        if cfg.preset in (PresetKind.DOUBLE_SYMMETRIC, PresetKind.TRIPLE_SAME):
            merged = merged_limit_energy(n, cfg.g, cfg.m, conv)
        elif cfg.preset is PresetKind.TRIPLE_ALTERNATING:
            merged = single_energy(cfg.g, cfg.m, conv)
        if merged is not None:
            rows.append(dict(base, mR1=0.0, mR2=None if n == 2 else 0.0, method="merged_limit",
                             convention=conv.value, E_over_m=merged / cfg.m, status="marker"))
        if cfg.preset is PresetKind.TRIPLE_SAME or cfg.preset is PresetKind.DOUBLE_SYMMETRIC:
            e = single_energy(n * cfg.g, cfg.m, conv)
            if e is not None:
                rows.append(dict(base, mR1=0.0, mR2=None if n == 2 else 0.0, method=f"single_{n}g",
                                 convention=conv.value, E_over_m=e / cfg.m, status="marker"))
        e = single_energy(cfg.g, cfg.m, conv)
        if e is not None:
            levels = [e] if cfg.preset in (PresetKind.DOUBLE_SYMMETRIC, PresetKind.TRIPLE_SAME) else [-e, e]
            for v in levels:
                rows.append(dict(base, mR1=sweep.stop, mR2=None if n == 2 else sweep.stop,
                                 method="single_limit", convention=conv.value, E_over_m=v / cfg.m,
                                 status="marker"))
    return rows


def run_sweep(cfg: RunConfig, sweep: SweepSpec, runs=None) -> list[dict]:
    """Rows ordered by axis value, then by run, then by energy."""
    rows = []
    for v in sweep.values():
        try:
            point = cfg.at(g=float(v)) if sweep.axis == "g" else cfg.at(mR1=float(v), mR2=float(v))
        except ValidationError as exc:
            base = _base(replace(cfg, g=float(v)) if sweep.axis == "g" else replace(cfg, mR1=float(v), mR2=float(v)))
            rows.append(dict(base, method="", convention="", branch="", E_over_m=None, residual=None,
                             status=f"error: {exc}"))
            continue
        rows.extend(solve_rows(point, runs))
    return rows + _markers(cfg, sweep)


def figure_config(name: str, base: Optional[RunConfig] = None) -> tuple[RunConfig, SweepSpec]:
    if name not in FIGURES:
        raise ConfigError(f"--figure: unknown figure {name!r}")
    preset, sweep = FIGURES[name]
    solver = base.solver if base else SolverOptions()
    g = sweep.fixed if sweep.axis == "mR" else 0.0
    mR = sweep.fixed if sweep.axis == "g" else 1.0
    cfg = RunConfig(None, preset, g, mR, mR, 1.0, ("greens", "transfer"),
                    (DeltaConvention.SQUEEZE,), solver, sweep)
    return cfg, sweep


# Audit -------------------------------------------------------------------------

def _audit_row(check, cfg, mR, method, conv, expected, measured, tol, status=None):
    dev = None if expected is None or measured is None else abs(measured - expected)
    if status is None:
        status = "pass" if dev is not None and dev < tol else "fail"
    return {"check": check, "preset": cfg.preset.value, "g": cfg.g, "mR": mR, "method": method,
            "convention": conv.value, "expected": expected, "measured": measured,
            "deviation": dev, "tolerance": tol, "status": status}


def _engine_runs():
    return (("greens", DeltaConvention.CAYLEY), ("transfer", DeltaConvention.CAYLEY),
            ("transfer", DeltaConvention.SQUEEZE))


def _energies(cfg, method, conv) -> list[float]:
    return [r.energy / cfg.m for r in _spectrum(cfg, method, conv)]


def _nearest(values: Sequence[float], target: float) -> Optional[float]:
    return min(values, key=lambda v: abs(v - target)) if values else None


def run_audit(cfg: RunConfig) -> list[dict]:
    """Limit laws for the configured preset and coupling g."""
    if cfg.preset is None or cfg.preset is PresetKind.SINGLE:
        raise ConfigError("preset: audit needs a multi-center preset")
    if not cfg.g:
        raise ConfigError("g: audit needs g != 0")
    kind, n, g = cfg.preset, cfg.preset.n_centers, cfg.g
    rows = []
    merged_cfg = cfg.at(mR1=MERGED_MR, mR2=MERGED_MR)
    far_cfg = cfg.at(mR1=FAR_MR, mR2=FAR_MR)
    for method, conv in _engine_runs():
        single = single_energy(g, 1.0, conv)
        merged = _energies(merged_cfg, method, conv)
        if kind is PresetKind.DIPOLE:
            rows.append(_audit_row("annihilation", cfg, MERGED_MR, method, conv, 0.0, float(len(merged)),
                                   0.5))
        elif kind is PresetKind.TRIPLE_ALTERNATING:
            rows.append(_audit_row("merged_decoupled", cfg, MERGED_MR, method, conv, single,
                                   _nearest(merged, single), 1e-5))
        else:
            additive = single_energy(n * g, 1.0, conv)
            got = _nearest(merged, additive) if additive is not None else None
            if conv is DeltaConvention.SQUEEZE:
                rows.append(_audit_row("additivity", cfg, MERGED_MR, method, conv, additive, got, 1e-5))
            else:
                formula = merged_limit_energy(n, g, 1.0, conv)
                rows.append(_audit_row("merged_formula", cfg, MERGED_MR, method, conv, formula,
                                       _nearest(merged, formula), 1e-5))
                off = additive is not None and got is not None and abs(got - additive) >= 1e-5
                rows.append(_audit_row("additivity", cfg, MERGED_MR, method, conv, additive, got, 1e-5,
                                       status="expected-fail" if off else "pass"))
        far = _energies(far_cfg, method, conv)
        targets = [single] if kind in (PresetKind.DOUBLE_SYMMETRIC, PresetKind.TRIPLE_SAME) else [single, -single]
        if not far:
            rows.append(_audit_row("far_separation", cfg, FAR_MR, method, conv, single, None, 1e-8))
        for e in far:
            rows.append(_audit_row("far_separation", cfg, FAR_MR, method, conv, _nearest(targets, e), e, 1e-8))
        if kind is PresetKind.TRIPLE_ALTERNATING:
            picks = [_nearest(_energies(cfg.at(mR1=r, mR2=r), method, conv), single)
                     for r in (0.1, 0.5, 1.0, 2.0, 5.0)]
            spread = None if None in picks else max(picks) - min(picks)
            rows.append(_audit_row("decoupled_constancy", cfg, "0.1..5", method, conv, 0.0, spread, 1e-10))
        if kind is PresetKind.DIPOLE and cfg.problem is not None:
            es = sorted(_energies(cfg, method, conv))
            asym = max((abs(a + b) for a, b in zip(es, es[::-1])), default=0.0)
            rows.append(_audit_row("pm_symmetry", cfg, cfg.mR1, method, conv, 0.0, asym, 1e-10))
    return rows


# Output ------------------------------------------------------------------------

def render(rows: Iterable[dict], columns: Sequence[str], fmt: str) -> str:
    rows = list(rows)
    if fmt == "json":
        def conv(v):
            if isinstance(v, (float, np.floating)):
                return float(_fmt(v))
            return v
        return json.dumps({"rows": [{c: conv(r.get(c)) for c in columns} for r in rows]}, indent=1) + "\n"
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for r in rows:
        w.writerow([_fmt(r.get(c)) for c in columns])
    return buf.getvalue()


def _read_config(path: Optional[str]) -> Optional[RunConfig]:
    if path is None:
        return None
    try:
        with open(path, encoding="utf-8") as fh:
            return parse_config(fh.read())
    except OSError as exc:
        raise ConfigError(f"--config: {exc}") from None


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="dirac-delta", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)
    for name in ("solve", "sweep", "audit"):
        sp = sub.add_parser(name)
        sp.add_argument("--config", required=name != "sweep")
        sp.add_argument("--output", default=None, help="file path (default stdout)")
        sp.add_argument("--format", choices=("csv", "json"), default="csv")
        if name == "sweep":
            sp.add_argument("--figure", choices=sorted(FIGURES))
    return p


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    code = 0
    try:
        cfg = _read_config(args.config)
        columns = COLUMNS
        if args.command == "solve":
            rows = run_solve(cfg)
        elif args.command == "sweep":
            if args.figure:
                fcfg, sweep = figure_config(args.figure, cfg)
                rows = run_sweep(fcfg, sweep, FIGURE_RUNS)
            elif cfg is None:
                raise ConfigError("--config or --figure is required")
            elif cfg.sweep is None:
                raise ConfigError("sweep: missing from config")
            else:
                rows = run_sweep(cfg, cfg.sweep)
        else:
            rows = run_audit(cfg)
            columns = AUDIT_COLUMNS
            if any(r["status"] == "fail" for r in rows):
                code = 3
    except ConfigError as exc:
        log.error("config error: %s", exc)
        return 1
    except (SolverFailure, DiracDeltaError) as exc:
        log.error("solver failure: %s", exc)
        return 2
    text = render(rows, columns, args.format)
    if args.output:
        with open(args.output, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return code


if __name__ == "__main__":
    sys.exit(main())
