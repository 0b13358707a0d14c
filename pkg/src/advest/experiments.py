"""Experiment drivers: table presets, custom runs from key=value configs, and
the randomized guarantee suite.  Everything here returns plain rows; the CLI
only formats and writes them.
"""
from __future__ import annotations

import csv
import io
import logging
import math
from dataclasses import dataclass, field, fields

import numpy as np

from .estimators import (GUARANTEE_SLACK, OSC_CONSTANT, EfficiencyReport, EstimateReport,
                         efficiency_report, estimate, source_norms)
from .mesh import Mesh1D, build_graded, build_uniform
from .problem import AdvectionProblem, PiecewisePolynomial, parse_source
from .reconstruction import StructureCheck, check_structure
from .solvers import MIN_DEGREE, SOLVERS, solve

log = logging.getLogger(__name__)

TABLE_BETAS = (1e-4, 1e-2, 1.0, 1e2, 1e4)
TABLE_ELEMENTS = (4, 16, 64, 256)
ETA_STOP = 1e-14
STRUCTURE_TOL = 1e-10


def fmt_e(x: float | None) -> str:
    """Scientific, 4 significant digits."""
    if x is None or (isinstance(x, float) and math.isnan(x)):
        return ""
    return f"{x:.3e}"


def fmt_ieff(x: float | None) -> str:
    if x is None or not math.isfinite(x):
        return ""
    return f"{x:.3f}"


def fmt_bool(b: bool | None) -> str:
    return "" if b is None else ("true" if b else "false")


# single runs


def solution_scale(problem: AdvectionProblem, mesh: Mesh1D) -> float:
    """|Omega| ||f|| / |beta|, an a priori bound of ||u||; sets the slack of the bound check."""
    length = mesh.vertices[-1] - mesh.vertices[0]
    return length * float(np.sqrt(np.sum(source_norms(problem, mesh) ** 2))) / abs(problem.beta)


@dataclass
class CaseResult:
    method: str
    k: int
    kprime: int
    mesh: Mesh1D
    problem: AdvectionProblem
    report: EstimateReport
    structure: StructureCheck
    efficiency: EfficiencyReport | None
    scale: float

    @property
    def dofs(self) -> int:
        return self.mesh.n_elements * (self.k + 1)

    @property
    def guaranteed(self) -> bool | None:
        return self.report.guaranteed(GUARANTEE_SLACK, self.scale)

    @property
    def violation(self) -> bool:
        """Bound broken although its hypothesis (hat orthogonality) holds."""
        return bool(self.report.orthogonal and self.guaranteed is False)


def run_case(method: str, k: int, kprime: int | None, problem: AdvectionProblem, mesh: Mesh1D,
             c_osc: float = OSC_CONSTANT, with_efficiency: bool = True) -> CaseResult:
    kprime = k if kprime is None else kprime
    u_h = solve(method, problem, mesh, k)
    rep = estimate(u_h, problem, kprime, c_osc=c_osc)
    eff = efficiency_report(u_h, problem, rep, kprime) if (with_efficiency and rep.error is not None) else None
    return CaseResult(method, k, kprime, mesh, problem, rep,
                      check_structure(rep.reconstruction, problem), eff,
                      solution_scale(problem, mesh))


# presets


@dataclass
class Block:
    label: str
    header: list[str]
    rows: list[list[str]] = field(default_factory=list)
    #: the CaseResults behind each row (several per row for the beta sweeps)
    cases: list[list[CaseResult]] = field(default_factory=list)


@dataclass
class TableResult:
    name: str
    title: str
    blocks: list[Block]

    @property
    def all_cases(self) -> list[CaseResult]:
        return [c for b in self.blocks for row in b.cases for c in row]

    @property
    def violations(self) -> int:
        return sum(c.violation for c in self.all_cases)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        buf.write(f"# {self.title}\n")
        for b in self.blocks:
            buf.write(f"# {b.label}\n")
            w.writerow(b.header)
            w.writerows(b.rows)
        return buf.getvalue()


def beta_label(b: float) -> str:
    return f"beta={b:.0e}"


def beta_sweep(method: str, k: int, elements=TABLE_ELEMENTS, betas=TABLE_BETAS,
               source: str = "piecewise_quadratic") -> Block:
    """Rows (elements, DOF) by columns beta, entries I_eff."""
    blk = Block(f"k = k' = {k}", ["elements", "dofs"] + [beta_label(b) for b in betas])
    src = parse_source(source)
    for n in elements:
        mesh = build_uniform((0.0, 1.0), n)
        cases = [run_case(method, k, k, AdvectionProblem(b, src), mesh) for b in betas]
        blk.rows.append([str(n), str(n * (k + 1))] + [fmt_ieff(c.report.i_eff) for c in cases])
        blk.cases.append(cases)
    return blk


CONVERGENCE_HEADER = ["elements", "dofs", "eta_nc", "eta_osc", "error", "eta", "i_eff"]


def convergence_row(c: CaseResult) -> list[str]:
    r = c.report
    return [str(c.mesh.n_elements), str(c.dofs), fmt_e(r.eta_nc), fmt_e(r.eta_osc),
            fmt_e(r.error), fmt_e(r.eta), fmt_ieff(r.i_eff)]


def convergence_block(method: str, k: int, elements, beta: float = 1.0,
                      source: str = "arctan", eta_stop: float = ETA_STOP) -> Block:
    """Uniform refinement with k' = k; stops after the first mesh with eta <= eta_stop."""
    blk = Block(f"k = k' = {k}", list(CONVERGENCE_HEADER))
    problem = AdvectionProblem(beta, parse_source(source))
    for n in elements:
        c = run_case(method, k, k, problem, build_uniform((0.0, 1.0), n))
        blk.rows.append(convergence_row(c))
        blk.cases.append([c])
        if c.report.eta <= eta_stop:
            break
    return blk


def _sequence(k: int) -> list[int]:
    if k <= 2:
        return [4, 16, 64, 256, 1024]
    if k == 3:
        return [4, 16, 64, 256]
    return [4, 8, 16, 32, 64]


def _table1():
    return TableResult("table1", "PG2, f = x^2 + x + sin(2 pi x_{i-1}) on K_i, I_eff against beta",
                       [beta_sweep("pg2", 1), beta_sweep("pg2", 2)])


def _table2():
    return TableResult("table2", "dG, f = x^2 + x + sin(2 pi x_{i-1}) on K_i, I_eff against beta",
                       [beta_sweep("dg", 1), beta_sweep("dg", 2)])


def _table3():
    return TableResult("table3", "PG2, f = arctan(x), beta = 1, uniform refinement",
                       [convergence_block("pg2", k, _sequence(k)) for k in range(0, 5)])


def _table4():
    return TableResult("table4", "dG, f = arctan(x), beta = 1, uniform refinement",
                       [convergence_block("dg", k, _sequence(k)) for k in range(1, 5)])


PRESETS = {"table1": _table1, "table2": _table2, "table3": _table3, "table4": _table4}


def run_preset(name: str) -> TableResult:
    try:
        fn = PRESETS[name]
    except KeyError:
        raise ValueError(f"unknown preset {name!r}; choose from {', '.join(sorted(PRESETS))}") from None
    return fn()


# custom runs


class ConfigError(ValueError):
    """Bad configuration value, with the origin (file:line) and field name."""

    def __init__(self, message: str, origin: str = "", field_name: str = ""):
        self.origin = origin
        self.field_name = field_name
        where = ": ".join(p for p in (origin, f"field {field_name!r}" if field_name else "") if p)
        super().__init__(f"{where}: {message}" if where else message)


@dataclass
class RunConfig:
    method: str = "pg2"
    k: int = 1
    kprime: int | None = None
    elements: list[int] = field(default_factory=lambda: [4, 16, 64])
    beta: list[float] = field(default_factory=lambda: [1.0])
    source: str = "arctan"
    mesh: str = "uniform"
    grading: float = 1.0
    domain: tuple[float, float] = (0.0, 1.0)
    c_osc: float = OSC_CONSTANT
    out: str | None = None

    def validate(self, origin: str = "") -> RunConfig:
        if self.method not in SOLVERS:
            raise ConfigError(f"unknown method {self.method!r} (expected one of {', '.join(sorted(SOLVERS))})",
                              origin, "method")
        if self.k < MIN_DEGREE[self.method]:
            raise ConfigError(f"{self.method} needs k >= {MIN_DEGREE[self.method]}", origin, "k")
        if self.kprime is not None and self.kprime < 0:
            raise ConfigError("k' must be >= 0", origin, "kprime")
        if not self.elements or any(n < 1 for n in self.elements):
            raise ConfigError("element counts must be positive integers", origin, "elements")
        if not self.beta or any(b == 0 or not math.isfinite(b) for b in self.beta):
            raise ConfigError("velocities must be finite and nonzero", origin, "beta")
        if self.mesh not in ("uniform", "graded"):
            raise ConfigError("mesh must be 'uniform' or 'graded'", origin, "mesh")
        if self.grading <= 0:
            raise ConfigError("grading factor must be > 0", origin, "grading")
        if not self.domain[0] < self.domain[1]:
            raise ConfigError("domain must be a nonempty interval a,b", origin, "domain")
        try:
            parse_source(self.source)
        except ValueError as exc:
            raise ConfigError(str(exc), origin, "source") from None
        return self


def _int_list(s):
    return [int(t) for t in s.split(",") if t.strip()]


def _float_list(s):
    return [float(t) for t in s.split(",") if t.strip()]


def _domain(s):
    a, b = (float(t) for t in s.split(","))
    return (a, b)


def _opt_int(s):
    s = s.strip()
    return None if s.lower() in ("", "none", "k") else int(s)


_PARSERS = {
    "method": lambda s: s.strip().lower(),
    "k": int,
    "kprime": _opt_int,
    "elements": _int_list,
    "beta": _float_list,
    "source": str.strip,
    "mesh": lambda s: s.strip().lower(),
    "grading": float,
    "domain": _domain,
    "c_osc": float,
    "out": lambda s: s.strip() or None,
}


def parse_assignments(lines, origin: str = "<config>") -> dict:
    """Parse ``key = value`` lines ('#' starts a comment) into typed config values."""
    out = {}
    for i, raw in enumerate(lines, 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        where = f"{origin}:{i}" if origin else ""
        if "=" not in line:
            raise ConfigError(f"expected key = value, got {line!r}", where)
        key, value = (t.strip() for t in line.split("=", 1))
        key = key.replace("-", "_")
        if key not in _PARSERS:
            raise ConfigError(f"unknown key (known: {', '.join(sorted(_PARSERS))})", where, key)
        try:
            out[key] = _PARSERS[key](value)
        except ValueError as exc:
            raise ConfigError(f"cannot parse {value!r}: {exc}", where, key) from None
    return out


def load_config(text: str | None = None, origin: str = "<config>", overrides: dict | None = None) -> RunConfig:
    values = parse_assignments(text.splitlines(), origin) if text else {}
    for key, value in (overrides or {}).items():
        if value is None:
            continue
        values[key] = _PARSERS[key](value) if isinstance(value, str) else value
    known = {f.name for f in fields(RunConfig)}
    return RunConfig(**{k: v for k, v in values.items() if k in known}).validate(origin)


CUSTOM_HEADER = ["method", "k", "kprime", "mesh", "elements", "dofs", "beta", "source",
                 "eta_nc", "eta_osc", "error", "eta", "i_eff", "orthogonal", "guaranteed",
                 "structure_ok", "eff_local_max", "eff_global", "eff_global_hypothesis"]


def custom_row(cfg: RunConfig, c: CaseResult) -> list[str]:
    r, eff = c.report, c.efficiency
    return [c.method, str(c.k), str(c.kprime), cfg.mesh if cfg.mesh == "uniform" else f"graded:{cfg.grading:g}",
            str(c.mesh.n_elements), str(c.dofs), f"{c.problem.beta:g}", cfg.source,
            fmt_e(r.eta_nc), fmt_e(r.eta_osc), fmt_e(r.error), fmt_e(r.eta), fmt_ieff(r.i_eff),
            fmt_bool(r.orthogonal), fmt_bool(c.guaranteed), fmt_bool(c.structure.passed(STRUCTURE_TOL)),
            fmt_ieff(float(eff.local_ratios.max(initial=0.0))) if eff else "",
            fmt_ieff(eff.global_ratio) if eff else "",
            fmt_bool(eff.global_hypothesis) if eff else ""]


@dataclass
class CustomResult:
    config: RunConfig
    rows: list[list[str]]
    cases: list[CaseResult]

    @property
    def violations(self) -> int:
        return sum(c.violation for c in self.cases)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(CUSTOM_HEADER)
        w.writerows(self.rows)
        return buf.getvalue()


def make_mesh(cfg: RunConfig, n: int) -> Mesh1D:
    if cfg.mesh == "graded":
        return build_graded(cfg.domain, n, cfg.grading)
    return build_uniform(cfg.domain, n)


def run_custom(cfg: RunConfig) -> CustomResult:
    """One row per (element count, beta), in config order."""
    cfg.validate()
    src = parse_source(cfg.source)
    rows, cases = [], []
    for n in cfg.elements:
        mesh = make_mesh(cfg, n)
        for b in cfg.beta:
            c = run_case(cfg.method, cfg.k, cfg.kprime, AdvectionProblem(b, src), mesh, cfg.c_osc)
            cases.append(c)
            rows.append(custom_row(cfg, c))
    return CustomResult(cfg, rows, cases)


# randomized guarantee suite


@dataclass
class RandomCase:
    method: str
    k: int
    n: int
    beta: float
    vertices: np.ndarray
    coeffs: np.ndarray

    def build(self) -> tuple[AdvectionProblem, Mesh1D]:
        mesh = Mesh1D(self.vertices)
        src = PiecewisePolynomial(self.coeffs, name="random")
        return AdvectionProblem(self.beta, src), mesh


def random_case(rng: np.random.Generator) -> RandomCase:
    """Random mesh (1-64 elements), scheme, admissible k <= 4, log-uniform |beta|, piecewise f."""
    method = str(rng.choice(sorted(SOLVERS)))
    k = int(rng.integers(MIN_DEGREE[method], 5))
    n = int(rng.integers(1, 65))
    beta = float(10.0 ** rng.uniform(-4, 4)) * float(rng.choice([-1.0, 1.0]))
    a = float(rng.uniform(-1, 1))
    h = rng.uniform(0.25, 1.0, n)
    vertices = a + np.concatenate([[0.0], np.cumsum(h)]) * float(rng.uniform(0.5, 2.0)) / h.sum()
    deg = int(rng.integers(0, 4))
    coeffs = rng.normal(size=(n, deg + 1))
    return RandomCase(method, k, n, beta, vertices, coeffs)


@dataclass
class SuiteResult:
    seed: int
    cases: list[RandomCase]
    results: list[CaseResult]

    @property
    def n_orthogonal(self) -> int:
        return sum(r.report.orthogonal for r in self.results)

    @property
    def violations(self) -> list[int]:
        return [i for i, r in enumerate(self.results) if r.violation]

    @property
    def worst_margin(self) -> float:
        """max (error - eta) / scale over orthogonal cases; <= slack means no violation."""
        m = [(r.report.error - r.report.eta) / r.scale for r in self.results
             if r.report.orthogonal and r.scale > 0]
        return max(m) if m else -np.inf


def run_property_suite(seed: int = 0, cases: int = 200) -> SuiteResult:
    rng = np.random.default_rng(seed)
    drawn, results = [], []
    for _ in range(cases):
        rc = random_case(rng)
        problem, mesh = rc.build()
        drawn.append(rc)
        results.append(run_case(rc.method, rc.k, rc.k, problem, mesh, with_efficiency=False))
    return SuiteResult(seed, drawn, results)


__all__ = [
    "Block", "CaseResult", "ConfigError", "CustomResult", "PRESETS", "RunConfig", "SuiteResult",
    "TableResult", "convergence_block", "beta_sweep", "fmt_e", "fmt_ieff", "load_config",
    "parse_assignments", "random_case", "run_case", "run_custom", "run_preset", "run_property_suite",
    "solution_scale",
]
