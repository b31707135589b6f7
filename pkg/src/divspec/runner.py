"""Scenario execution: build geometry, mesh, solve across refinement
levels, estimate constants, evaluate the requested checks, and render
machine-readable reports."""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np
import scipy

from . import __version__, bounds, geometry
from .assembly import assemble
from .eigensolve import solve, verify_residuals
from .errors import ConfigError
from .mesh import generate, refine
from .scenario import canonical_items


@dataclass(frozen=True)
class LevelResult:
    level: int
    num_vertices: int
    num_cells: int
    num_boundary: int
    h_max: float
    n_dof: int
    eigenvalues: np.ndarray
    residual_max: float
    constants: bounds.BoundConstants
    reports: list
    residuals: np.ndarray


@dataclass(frozen=True)
class RunReport:
    scenario_items: list      # resolved scenario echo, (key, text) pairs
    levels: list              # LevelResult per refinement level
    verdict: str              # "pass" or "fail"
    timing_ms: int
    versions: dict
    strict: bool


def build_geometry(sc):
    """Chart, tensor field and drift field declared by a scenario."""
    n = sc.dim_n
    if sc.chart_kind == "identity":
        chart = geometry.identity_chart(n)
    elif sc.chart_kind == "immersion":
        chart = geometry.immersion_chart(sc.chart_immersion, n)
    else:
        chart = geometry.metric_chart(sc.chart_metric)
    if sc.tensor_kind == "identity":
        tensor = geometry.identity_tensor(chart)
    elif sc.tensor_kind == "diagonal":
        tensor = geometry.diagonal_tensor(chart, sc.tensor_diagonal)
    else:
        tensor = geometry.symmetric_tensor(chart, sc.tensor_full)
    eta = geometry.drift_field(n, sc.drift) if sc.drift is not None \
        else geometry.zero_drift(n)
    return chart, tensor, eta


def _evaluate_checks(sc, problem, spectrum, constants, chart, tensor, eta,
                     slack):
    reports = []
    k_cap = bounds.trusted_k_max(problem.n_dof)

    def keep_k(base, ks):
        kept = []
        for k in ks:
            if k <= k_cap:
                kept.append(k)
            else:
                reports.append(bounds.InequalityReport(
                    name=f"{base}[k={k}]", lhs=0.0, rhs=0.0, margin=0.0,
                    relative_margin=0.0, passed=False, k=k, inputs_digest="",
                    skipped=True,
                    reason=f"k={k} outside the trusted range (k <= {k_cap})"))
        return kept

    for check in sc.checks:
        if check.name == "theorem_1_1":
            for k in keep_k("theorem_1_1", check.params["k_list"]):
                reports.append(bounds.check_theorem_1_1(
                    spectrum, constants, k, slack))
        elif check.name == "theorem_1_2":
            reports.extend(bounds.check_theorem_1_2(spectrum, constants, slack))
        elif check.name == "recursion":
            for k in keep_k("recursion", check.params["k_list"]):
                reports.append(bounds.check_recursion(
                    spectrum, constants, k, slack))
        elif check.name == "yang_type":
            for k in keep_k("yang_type", check.params["k_list"]):
                reports.extend(bounds.check_yang_type(
                    spectrum, constants, k, slack))
        elif check.name == "theorem3":
            scen = bounds.Theorem3Scenario(
                variant=check.params["variant"],
                special_fields=tuple(check.params["fields"]),
                constant=check.params["constant"])
            pts = bounds.sample_points(problem.mesh)
            ks = keep_k(f"theorem3_{scen.variant}", check.params["k_list"])
            reports.extend(bounds.check_theorem3(
                spectrum, constants, scen, chart, tensor, eta, pts, ks, slack))
        elif check.name == "lemma1":
            for k in keep_k("lemma1", check.params["k_list"]):
                reports.append(bounds.lemma1_check(
                    problem, spectrum, chart, tensor, eta,
                    check.params["f"], k, check.params["mode"], slack))
    return reports


def run(sc, refinements=None, strict=False, slack=None):
    """Execute a scenario; deterministic given the scenario text."""
    t0 = time.perf_counter()
    slack = slack or bounds.DEFAULT_SLACK
    levels_wanted = refinements if refinements is not None else sc.refinements
    if strict:
        levels_wanted = max(levels_wanted, 3)
    chart, tensor, eta = build_geometry(sc)
    mesh = generate(sc.domain, sc.resolution)
    levels = []
    for level in range(levels_wanted):
        if level > 0:
            mesh = refine(mesh)
        problem = assemble(mesh, chart, tensor, eta)
        if level == 0 and sc.eigen_count > problem.n_dof:
            raise ConfigError(
                "eigen.count",
                f"{sc.eigen_count} eigenpairs requested but the coarse mesh "
                f"has only {problem.n_dof} degrees of freedom")
        spectrum = solve(problem, sc.eigen_count, method=sc.eigen_method,
                         tol=sc.eigen_tol, shift=sc.eigen_shift)
        verify_residuals(problem, spectrum)
        constants = bounds.estimate_constants(chart, tensor, eta, mesh,
                                              overrides=sc.overrides)
        reports = _evaluate_checks(sc, problem, spectrum, constants, chart,
                                   tensor, eta, slack)
        levels.append(LevelResult(
            level=level, num_vertices=mesh.num_vertices,
            num_cells=mesh.num_cells,
            num_boundary=int(mesh.boundary_vertices.size), h_max=mesh.h_max,
            n_dof=problem.n_dof, eigenvalues=np.array(spectrum.values),
            residual_max=float(np.max(spectrum.residuals)),
            constants=constants, reports=reports,
            residuals=np.array(spectrum.residuals)))
    verdict = _verdict(levels, strict)
    timing_ms = int(round((time.perf_counter() - t0) * 1000.0))
    versions = {"divspec": __version__, "numpy": np.__version__,
                "scipy": scipy.__version__}
    return RunReport(scenario_items=canonical_items(sc), levels=levels,
                     verdict=verdict, timing_ms=timing_ms, versions=versions,
                     strict=strict)


def _verdict(levels, strict):
    final = levels[-1].reports
    ok = all(r.passed for r in final if not r.skipped)
    if not strict:
        return "pass" if ok else "fail"
    # strict mode: margins must be positive at the last three levels and
    # the relative margin must have stopped drifting
    if len(levels) < 3:
        return "fail"
    last3 = levels[-3:]
    by_name = {}
    for lvl in last3:
        for r in lvl.reports:
            if not r.skipped:
                by_name.setdefault(r.name, []).append(r)
    for name, rs in by_name.items():
        if len(rs) != 3:
            return "fail"
        if any(r.margin <= 0.0 for r in rs):
            return "fail"
        d1 = abs(rs[1].relative_margin - rs[0].relative_margin)
        d2 = abs(rs[2].relative_margin - rs[1].relative_margin)
        if d2 > d1 + 1e-9:
            return "fail"
    return "pass" if ok else "fail"


# ---------------------------------------------------------------------------
# Serialization (all numbers to 17 significant digits)

def _fmt(v):
    if v is None:
        return "none"
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return f"{float(v):.17g}"


def _fmt_list(values):
    return "[" + ", ".join(_fmt(v) for v in values) + "]"


def render_report(report):
    lines = []
    for key, value in report.scenario_items:
        lines.append(f"scenario.{key} = {value}")
    for lvl in report.levels:
        p = f"levels[{lvl.level}]"
        lines.append(f"{p}.mesh.vertices = {lvl.num_vertices}")
        lines.append(f"{p}.mesh.cells = {lvl.num_cells}")
        lines.append(f"{p}.mesh.boundary = {lvl.num_boundary}")
        lines.append(f"{p}.mesh.h_max = {_fmt(lvl.h_max)}")
        lines.append(f"{p}.n_dof = {lvl.n_dof}")
        lines.append(f"{p}.eigenvalues = {_fmt_list(lvl.eigenvalues)}")
        lines.append(f"{p}.residual_max = {_fmt(lvl.residual_max)}")
        lines.extend(_constants_lines(p, lvl.constants))
        for i, r in enumerate(lvl.reports):
            lines.extend(_report_lines(f"{p}.checks[{i}]", r))
    final = report.levels[-1]
    lines.extend(_constants_lines("", final.constants))
    for i, r in enumerate(final.reports):
        lines.extend(_report_lines(f"checks[{i}]", r))
    lines.append(f"verdict = {report.verdict}")
    lines.append(f"timing_ms = {report.timing_ms}")
    for key in sorted(report.versions):
        lines.append(f"versions.{key} = {report.versions[key]}")
    return "\n".join(lines) + "\n"


def _constants_lines(prefix, c):
    p = f"{prefix}.constants" if prefix else "constants"
    lines = [f"{p}.n = {c.n}", f"{p}.eps = {_fmt(c.eps)}",
             f"{p}.delta = {_fmt(c.delta)}", f"{p}.H0 = {_fmt(c.H0)}",
             f"{p}.C0 = {_fmt(c.C0)}", f"{p}.T0 = {_fmt(c.T0)}",
             f"{p}.eta0 = {_fmt(c.eta0)}",
             f"{p}.sample_count = {c.sample_count}"]
    if c.overridden:
        lines.append(f"{p}.overridden = [" + ", ".join(sorted(c.overridden))
                     + "]")
    for name in sorted(c.extremizers):
        point = ", ".join(_fmt(x) for x in c.extremizers[name])
        lines.append(f"{p}.extremizer.{name} = [{point}]")
    return lines


def _report_lines(prefix, r):
    lines = [f"{prefix}.name = {r.name}", f"{prefix}.lhs = {_fmt(r.lhs)}",
             f"{prefix}.rhs = {_fmt(r.rhs)}",
             f"{prefix}.margin = {_fmt(r.margin)}",
             f"{prefix}.relative_margin = {_fmt(r.relative_margin)}",
             f"{prefix}.passed = {_fmt(r.passed)}"]
    if r.k is not None:
        lines.append(f"{prefix}.k = {r.k}")
    lines.append(f"{prefix}.inputs_digest = {r.inputs_digest}")
    if r.skipped:
        lines.append(f"{prefix}.skipped = true")
        lines.append(f"{prefix}.reason = {r.reason}")
    elif r.reason:
        lines.append(f"{prefix}.note = {r.reason}")
    return lines


def render_csv(report):
    """Eigenvalue table: refinement, index, lambda, upsilon, residual."""
    lines = ["refinement,index,lambda,upsilon,residual"]
    for lvl in report.levels:
        shift = lvl.constants.shift
        for i, lam in enumerate(lvl.eigenvalues):
            ups = lam + shift if shift is not None else float("nan")
            lines.append(f"{lvl.level},{i + 1},{_fmt(lam)},{_fmt(ups)},"
                         f"{_fmt(lvl.residuals[i])}")
    return "\n".join(lines) + "\n"


def render_matrix(matrix):
    """Upper-triangle coordinate dump: row col value, zero-based."""
    coo = matrix.tocoo()
    entries = [(int(r), int(c), float(v))
               for r, c, v in zip(coo.row, coo.col, coo.data) if r <= c]
    entries.sort()
    return "\n".join(f"{r} {c} {_fmt(v)}" for r, c, v in entries) + "\n"
