# cosserat_dem/main.py
import argparse
import logging
import sys

import config
from case_runner import RunOptions, run_builtin, run_case
from cases import CASE_MAP, make_case
from errors import CosseratDEMError
from run_config import load_run_config

logger = logging.getLogger("cosserat_dem")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="cosserat-dem", description="Cosserat DEM solver CLI")
    parser.add_argument("--log-level", type=str, default=config.LOG_LEVEL,
                        choices=["DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL"], help="Logging level")
    sub = parser.add_subparsers(dest="command", required=True)

    run_opts = argparse.ArgumentParser(add_help=False)
    run_opts.add_argument("--output-dir", type=str, default=config.RESULTS_BASE_DIR, help="Results base folder")
    run_opts.add_argument("--refine", type=int, default=1, help="Uniform refinement factor for generated meshes")
    run_opts.add_argument("--solver", type=str, default=config.SOLVER_METHOD, choices=config.SOLVER_CHOICES,
                          help="Linear solver")
    run_opts.add_argument("--dt", type=float, default=None, help="Time step (dynamic runs)")
    run_opts.add_argument("--threads", type=int, default=config.THREADS, help="Worker threads for sweeps")
    run_opts.add_argument("--emit", nargs="+", default=config.DEFAULT_EMIT, choices=config.EMIT_CHOICES,
                          help="Artifacts to write")
    run_opts.add_argument("--no-plots", action="store_true", help="Skip matplotlib figures")
    run_opts.add_argument("--export-matrices", action="store_true", help="Write MatrixMarket system parts")

    p_run = sub.add_parser("run", parents=[run_opts], help="Run a YAML run-config file")
    p_run.add_argument("config_file", type=str, help="Path to the run configuration")
    p_case = sub.add_parser("case", parents=[run_opts], help="Run a builtin validation case")
    p_case.add_argument("case_name", type=str, nargs="?", default=config.ACTIVE_CASE_NAME,
                        help=f"One of {sorted(CASE_MAP)}")
    sub.add_parser("list", help="List builtin cases")
    return parser


def _options(args) -> RunOptions:
    return RunOptions(output_dir=args.output_dir, refine=args.refine, solver=args.solver, dt=args.dt,
                      threads=args.threads, emit=list(args.emit), save_plots=not args.no_plots,
                      export_matrices=args.export_matrices)


def main(argv: list | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=getattr(logging, args.log_level),
                        format="%(asctime)s %(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "list":
            for name in CASE_MAP:
                print(f"{name:<16} {make_case(name).description}")
            return 0
        if args.command == "run":
            report, _ = run_case(load_run_config(args.config_file), _options(args))
            print(report.to_text())
            reports = [report]
        else:
            reports = run_builtin(args.case_name, _options(args))
            for report in reports:
                print(report.to_text())
    except CosseratDEMError as exc:
        logger.error(f"Run failed: {exc}")
        return 1
    return 0 if all(r.passed for r in reports) else 2


if __name__ == "__main__":
    sys.exit(main())
