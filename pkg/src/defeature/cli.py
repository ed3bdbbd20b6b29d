"""Command-line driver: load scenarios, run them, write reports."""
from __future__ import annotations

import argparse
import concurrent.futures
import dataclasses
import sys
import time
from pathlib import Path

from . import adaptive, fem, pipeline
from .errors import (DefeatureError, ExpressionError, OutputIOError, ParseError, SchemaError,
                     SingularSystem, IncompatibleData, SolverDivergence, PointOutsideDomain,
                     MissingBoundaryData, MissingSide)
from .estimator import EstimatorReport, report
from .mesh import mesh_model, write_vtk
from .scenario import Scenario, expand, load_scenario

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_SOLVER = 3
EXIT_GEOMETRY = 4

_INPUT_ERRORS = (ParseError, SchemaError, ExpressionError)
_SOLVER_ERRORS = (SingularSystem, IncompatibleData, SolverDivergence, PointOutsideDomain,
                  MissingBoundaryData, MissingSide)


@dataclasses.dataclass
class RunOptions:
    out: Path | None = None
    reference: bool = True
    theta: float | None = None
    tol: float | None = None
    vtk: bool | None = None


@dataclasses.dataclass
class RunReport:
    name: str
    estimator: EstimatorReport
    reference_estimator: EstimatorReport | None = None
    true_error: float | None = None
    effectivity: float | None = None
    error_split: tuple | None = None  # Stokes: (strain part, pressure part)
    records: list = dataclasses.field(default_factory=list)
    timing: dict = dataclasses.field(default_factory=dict)
    files: list = dataclasses.field(default_factory=list)

    def summary(self) -> str:
        lines = [f"scenario             {self.name}", "", "[estimator at h_defeatured]", self.estimator.summary()]
        if self.reference_estimator is not None:
            lines += ["[estimator at reference resolution]", self.reference_estimator.summary()]
        if self.true_error is not None:
            lines.append(f"true error           {self.true_error:.6e}")
            lines.append(f"effectivity          {self.effectivity:.6f}")
        if self.error_split is not None:
            lines.append(f"error strain part    {self.error_split[0]:.6e}")
            lines.append(f"error pressure part  {self.error_split[1]:.6e}")
        if self.records:
            lines.append("")
            lines.append("[adaptive]")
            for r in self.records:
                eff = "" if r.effectivity is None else f"  effectivity {r.effectivity:.4f}"
                marked = " ".join(str(k) for k in sorted(r.marked)) or "-"
                lines.append(f"iteration {r.iteration:<3d} inserted {r.n_inserted:<3d} "
                             f"estimator {r.estimator_total:.6e}{eff}  marked {marked}")
        return "\n".join(lines) + "\n"


def _adaptive_config(scenario: Scenario, opts: RunOptions) -> adaptive.AdaptiveConfig | None:
    if scenario.adaptive is None and opts.theta is None and opts.tol is None:
        return None
    theta, tol, max_iter = scenario.adaptive or (0.95, 0.0, 100)
    return adaptive.AdaptiveConfig(theta=opts.theta if opts.theta is not None else theta,
                                   tol=opts.tol if opts.tol is not None else tol, max_iter=max_iter)


def run_scenario(scenario: Scenario, opts: RunOptions | None = None) -> RunReport:
    """Solve, estimate and (optionally) compare against an overkill exact-domain solve."""
    opts = opts or RunOptions()
    timing = {}
    model = scenario.model()
    problem = scenario.problem_kind()
    bc = scenario.boundary_data()
    config = _adaptive_config(scenario, opts)

    t = time.perf_counter()
    coarse_meshes = mesh_model(model, scenario.sizing())
    coarse = pipeline.solve_all(model, problem, bc, coarse_meshes)
    coarse_rep = report(coarse, bc, problem, prefactor=scenario.prefactor, with_flux=True)
    timing["defeatured"] = time.perf_counter() - t
    out = RunReport(scenario.name, coarse_rep, timing=timing)
    vtk_state = coarse

    ref_meshes = exact = None
    if opts.reference:
        t = time.perf_counter()
        ref_meshes = mesh_model(model, scenario.sizing(reference=True))
        exact = pipeline.solve_exact(model, problem, bc, ref_meshes)
        timing["reference_exact"] = time.perf_counter() - t
        if config is None:
            t = time.perf_counter()
            ref_state = pipeline.solve_all(model, problem, bc, ref_meshes)
            out.reference_estimator = report(ref_state, bc, problem, prefactor=scenario.prefactor, with_flux=True)
            out.true_error = fem.energy_norm_error(exact, ref_state.composite)
            if problem.variant == "stokes":
                out.error_split = fem.energy_error_split(exact, ref_state.composite)
            timing["reference_defeatured"] = time.perf_counter() - t
            vtk_state = ref_state

    if config is not None:
        t = time.perf_counter()
        out.records = adaptive.run(model, problem, bc, config, reference=exact,
                                   meshes=ref_meshes or coarse_meshes, prefactor=scenario.prefactor)
        timing["adaptive"] = time.perf_counter() - t
        if opts.reference:
            out.reference_estimator = out.records[0].report
            out.true_error = out.records[0].true_error

    if out.true_error:
        out.effectivity = out.reference_estimator.total / out.true_error

    if opts.out is not None:
        _write_outputs(out, scenario, opts, vtk_state, exact)
    return out


def _write_outputs(out: RunReport, scenario: Scenario, opts: RunOptions, state, exact) -> None:
    files = {"summary.txt": None, "estimator.csv": out.estimator.to_csv()}
    if out.reference_estimator is not None:
        files["estimator_reference.csv"] = out.reference_estimator.to_csv()
    if out.records:
        files["adaptive_trace.csv"] = adaptive.trace_csv(out.records)
    try:
        opts.out.mkdir(parents=True, exist_ok=True)
        for name, text in files.items():
            if text is not None:
                (opts.out / name).write_text(text)
                out.files.append(name)
        want_vtk = scenario.vtk if opts.vtk is None else opts.vtk
        if want_vtk:
            write_vtk(opts.out / "defeatured.vtk", state.mesh0, {"u0": state.field0.nodal_values()})
            out.files.append("defeatured.vtk")
            if exact is not None:
                write_vtk(opts.out / "reference.vtk", exact.mesh, {"u": exact.nodal_values()})
                out.files.append("reference.vtk")
        out.files.append("summary.txt")
        text = out.summary() + "\n[files]\n" + "".join(f"{f}\n" for f in sorted(out.files))
        (opts.out / "summary.txt").write_text(text)
    except OSError as exc:
        raise OutputIOError(f"cannot write to {opts.out}: {exc}") from exc


def _run_named(name: str, out: Path, multiple: bool, opts: RunOptions) -> RunReport:
    scenario = load_scenario(name)
    target = out / scenario.name if multiple else out
    return run_scenario(scenario, dataclasses.replace(opts, out=target))


def exit_code(exc: BaseException) -> int:
    if isinstance(exc, _INPUT_ERRORS):
        return EXIT_INPUT
    if isinstance(exc, _SOLVER_ERRORS):
        return EXIT_SOLVER
    if isinstance(exc, DefeatureError):
        return EXIT_GEOMETRY
    raise exc


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="defeature", description="Defeaturing error estimation runs")
    sub = parser.add_subparsers(dest="command", required=True)
    run = sub.add_parser("run", help="run a scenario file, a built-in scenario or a built-in group")
    run.add_argument("--scenario", required=True, help="file path, built-in name or group name")
    run.add_argument("--out", required=True, type=Path, help="output directory")
    run.add_argument("--theta", type=float, help="marking parameter (enables the adaptive loop)")
    run.add_argument("--tol", type=float, help="adaptive stopping tolerance (enables the adaptive loop)")
    run.add_argument("--jobs", type=int, default=1, help="parallel scenarios within a group")
    run.add_argument("--no-reference", action="store_true", help="skip the overkill exact-domain solve")
    run.add_argument("--vtk", action="store_true", default=None, help="write VTK files")
    sub.add_parser("list", help="list built-in scenarios and groups")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "list":
        from .scenario import BUILTIN_GROUPS, builtin_texts
        for name in builtin_texts():
            print(name)
        for name, members in BUILTIN_GROUPS.items():
            print(f"{name} (group: {', '.join(members)})")
        return EXIT_OK

    names = expand(args.scenario)
    opts = RunOptions(reference=not args.no_reference, theta=args.theta, tol=args.tol, vtk=args.vtk)
    multiple = len(names) > 1
    try:
        if args.jobs > 1 and multiple:
            with concurrent.futures.ProcessPoolExecutor(max_workers=args.jobs) as pool:
                futures = [pool.submit(_run_named, n, args.out, True, opts) for n in names]
                reports = [f.result() for f in futures]
        else:
            reports = [_run_named(n, args.out, multiple, opts) for n in names]
    except DefeatureError as exc:
        print(f"defeature: {type(exc).__name__}: {exc}", file=sys.stderr)
        return exit_code(exc)
    for rep in reports:
        eff = "" if rep.effectivity is None else f"  effectivity {rep.effectivity:.4f}"
        print(f"{rep.name}: estimator {rep.estimator.total:.6e}{eff}")
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
