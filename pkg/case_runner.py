# cosserat_dem/case_runner.py
import logging
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from datetime import datetime as dt

import numpy as np

import config
from cases import make_case
from cases.base_case import BaseCase, CaseSpec
from errors import CaseError, CosseratDEMError
from mesh_io import write_vtk
from plotting_utils import plot_sweep
from probes import write_timeseries
from reconstruction import dump_stencils
from reporting import (SEPARATOR, ErrorReport, consolidated_text, error_report, sweep_table, write_cells_csv,
                       write_report)
from simulation import CaseResult, solve_spec
from solver import SolverConfig
from system import export_matrices

logger = logging.getLogger(__name__)


@dataclass
class RunOptions:
    output_dir: str = config.RESULTS_BASE_DIR
    refine: int = 1
    solver: str = config.SOLVER_METHOD
    dt: float | None = None
    threads: int = config.THREADS
    emit: list = field(default_factory=lambda: list(config.DEFAULT_EMIT))
    save_plots: bool = config.SAVE_PLOTS
    export_matrices: bool = False

    def __post_init__(self):
        unknown = sorted(set(self.emit) - set(config.EMIT_CHOICES))
        if unknown:
            raise CaseError(f"Unknown emit targets {unknown}. Expected a subset of {config.EMIT_CHOICES}.")
        if self.refine < 1:
            raise CaseError(f"refine must be >= 1, got {self.refine}.")
        if self.threads < 1:
            raise CaseError(f"threads must be >= 1, got {self.threads}.")

    @property
    def solver_config(self) -> SolverConfig:
        return SolverConfig(method=self.solver)

    @property
    def common_params(self) -> dict:
        return {"refine": self.refine, "dt": self.dt}


def create_session_folder(base_dir: str, name: str) -> str:
    timestamp = dt.now().strftime("%Y%m%d_%H%M%S")
    path = os.path.join(base_dir, f"{name}_{timestamp}")
    os.makedirs(path, exist_ok=True)
    logger.info(f"Output: session folder {path}")
    return path


def emit_fields(result: CaseResult, session_path: str, emit: list) -> dict:
    """Writes the requested artifacts; returns artifact name -> path."""
    artifacts = {}
    n = result.mesh.n_cells
    if "vtk" in emit:
        U, Phi = result.fields()
        path = os.path.join(session_path, "fields.vtk")
        write_vtk(result.mesh, path, {"u": U, "phi": Phi, "sigma": result.stresses.sigma.reshape(n, -1),
                                      "mu": result.stresses.mu.reshape(n, -1)})
        artifacts["vtk"] = path
    if "csv" in emit:
        artifacts["cells"] = os.path.join(session_path, "cells.csv")
        write_cells_csv(result, artifacts["cells"])
        artifacts["stencils"] = os.path.join(session_path, "stencils.csv")
        dump_stencils(result.ops, artifacts["stencils"])
        if result.trajectory is not None:
            artifacts["timeseries"] = os.path.join(session_path, "timeseries.csv")
            write_timeseries(result.trajectory, artifacts["timeseries"])
    return artifacts


def finish_case(result: CaseResult, options: RunOptions, case: BaseCase | None, session_path: str) -> tuple:
    """Error report, case metrics and checks, then the emitted files."""
    name = result.spec.name
    try:
        report = error_report(result)
        if case is not None:
            report.metrics.update(case.postprocess(result, session_path if options.save_plots else None))
            report.checks.update(case.checks(report))
        artifacts = emit_fields(result, session_path, options.emit)
        if options.export_matrices:
            export_matrices(result.parts, os.path.join(session_path, "matrices"))
            artifacts["matrices"] = os.path.join(session_path, "matrices")
        if "report" in options.emit:
            artifacts["report"], artifacts["report_json"] = write_report(report, session_path)
    except CaseError:
        raise
    except CosseratDEMError as exc:
        raise CaseError(f"Case {name}: {exc}") from exc
    status = "PASS" if report.passed else "FAIL"
    logger.info(f"Case {name}: {status} ({sum(report.checks.values())}/{len(report.checks)} checks)")
    return report, artifacts


def run_case(spec: CaseSpec, options: RunOptions | None = None, case: BaseCase | None = None,
             session_path: str | None = None) -> tuple[ErrorReport, dict]:
    """
    Solves one CaseSpec and writes its artifacts into a session folder.

    Returns:
        (ErrorReport, dict): the report and artifact name -> path.
    """
    options = options or RunOptions()
    session_path = session_path or create_session_folder(options.output_dir, spec.name)
    os.makedirs(session_path, exist_ok=True)
    result = solve_spec(spec, refine=options.refine, solver_config=options.solver_config, dt=options.dt)
    return finish_case(result, options, case, session_path)


def _sweep_row(entry: dict, report: ErrorReport) -> dict:
    row = {"case": report.case, "passed": report.passed}
    row.update({k.lower(): v for k, v in entry.items() if np.isscalar(v)})
    row.update({k: v for k, v in report.metrics.items() if np.isscalar(v)})
    return row


def run_builtin(case_name: str, options: RunOptions | None = None, overrides: dict | None = None) -> list:
    """
    Runs a registered case, or every entry of its sweep. overrides replace
    entries of the case's config.CASE_SPECIFIC_PARAMS. Sweep entries are
    solved on options.threads worker threads; postprocessing stays on the
    calling thread.
    """
    options = options or RunOptions()
    case = make_case(case_name, options.common_params, overrides)
    session_path = create_session_folder(options.output_dir, case_name)
    entries = case.sweep()
    if not entries:
        report, _ = run_case(case.build_spec(), options, case, session_path)
        reports = [report]
    else:
        specs = [case.build_spec(entry) for entry in entries]
        logger.info(f"Case {case_name}: sweep of {len(specs)} runs on {options.threads} thread(s)")
        solve = lambda spec: solve_spec(spec, options.refine, options.solver_config, options.dt)  # noqa: E731
        with ThreadPoolExecutor(max_workers=options.threads) as pool:
            results = list(pool.map(solve, specs))
        reports = []
        for entry, result in zip(entries, results):
            sub = os.path.join(session_path, result.spec.name)
            os.makedirs(sub, exist_ok=True)
            report, _ = finish_case(result, options, case, sub)
            reports.append(report)

        table = sweep_table([_sweep_row(e, r) for e, r in zip(entries, reports)])
        table.to_csv(os.path.join(session_path, "sweep.csv"), index=False)
        sweep_checks = case.sweep_checks(table)
        if options.save_plots and "stress concentration" in table:
            x = "a" if table["a"].nunique() > 1 else "r/ell"
            columns = [c for c in ("stress concentration", "expected concentration") if c in table]
            plot_sweep(table, x, columns, title=f"{case_name} sweep",
                       save_path=os.path.join(session_path, "sweep.png"))
        if sweep_checks:
            summary = ErrorReport(case=f"{case_name} (sweep)", n_cells=0, n_dofs=0, checks=sweep_checks)
            reports.append(summary)

    report_path = os.path.join(session_path, "ConsolidatedReport.txt")
    with open(report_path, "w") as fh:
        fh.write(f"{SEPARATOR}\nCase: {case_name}    Refine: {options.refine}    Solver: {options.solver}\n")
        fh.write(consolidated_text(reports) + "\n")
    logger.info(f"Output: consolidated report saved to {report_path}")
    return reports
