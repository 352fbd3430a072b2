"""Command-line driver for the iteration experiments and the verification suite."""

import argparse
import logging
import sys
from typing import Optional, Sequence

from .config import ConfigManager, RunConfig, configure_logging
from .exceptions import BiotPrecondError
from .experiments import CellResult, ExperimentRunner, case_points
from .mesh import build_unit_square_mesh
from .models import BoundaryMode, CaseKind, ResidualMeasure, TableFormat
from .reporting import (
    CompositeTableExporter,
    FileTableExporter,
    StreamTableExporter,
    emit_table,
    emit_verification_table,
    write_mesh_dump,
    write_reports,
)
from .sparsela import write_matrix_market
from .verify import run_verification

logger = logging.getLogger(__name__)


def _add_output_options(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--output", help="Write the table to this file instead of stdout")
    parser.add_argument("--tee", action="store_true", help="With --output, also print to stdout")
    parser.add_argument("--mesh-dump", dest="mesh_dump", help="Write the mesh of the first N here")


def _add_sweep_options(parser: argparse.ArgumentParser, biot: bool) -> None:
    parser.add_argument("--N", dest="n_list", type=int, nargs="+", help="Mesh sizes")
    parser.add_argument("--lambda", dest="lambda_list", type=float, nargs="+", help="Lame lambda values")
    if biot:
        parser.add_argument("--alpha", dest="alpha_list", type=float, nargs="+", help="Biot-Willis values")
        parser.add_argument("--kappa", dest="kappa_list", type=float, nargs="+", help="Conductivity values")
    parser.add_argument(
        "--bc", choices=[m.value for m in BoundaryMode], default=BoundaryMode.CLAMPED.value,
        help="Elasticity boundary regime (default: clamped)",
    )
    parser.add_argument("--tol", type=float, help="Relative preconditioned residual tolerance")
    parser.add_argument(
        "--measure", choices=[m.value for m in ResidualMeasure],
        help="Stopping measure: squared ratio (default) or its square root",
    )
    parser.add_argument("--maxiter", type=int, help="Iteration limit")
    parser.add_argument("--seed", type=int, help="Seed of the random loads and initial guesses")
    parser.add_argument("--mu", type=float, help="Shear modulus")
    parser.add_argument("--dt", type=float, help="Time step folded into kappa")
    parser.add_argument("--s0", type=float, help="Storage coefficient (default alpha^2/lambda)")
    parser.add_argument("--jobs", type=int, help="Parameter points solved in parallel")
    parser.add_argument(
        "--format", choices=[f.value for f in TableFormat], default=TableFormat.CSV.value,
        help="Table format (default: csv)",
    )
    parser.add_argument("--dump", help="Write every Krylov report as JSON to this file")
    parser.add_argument(
        "--export-matrix", dest="export_matrix",
        help="Write the matrix of the first sweep point in Matrix Market format",
    )
    _add_output_options(parser)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="biotprecond",
        description="Parameter-robust preconditioning experiments for four-field Biot poroelasticity.",
    )
    parser.add_argument("--config", help="YAML or JSON configuration file")
    parser.add_argument("--log-level", dest="log_level", help="Logging level (default from config)")
    sub = parser.add_subparsers(dest="command", required=True)

    descriptions = {
        CaseKind.CASE1: "Stress-only problem, preconditioned CG",
        CaseKind.CASE2: "Mixed elasticity, preconditioned MINRES",
        CaseKind.CASE3: "Biot system with constant conductivity, preconditioned MINRES",
        CaseKind.CASE4: "Biot system with layered conductivity, preconditioned MINRES",
    }
    for case, text in descriptions.items():
        p = sub.add_parser(case.value, help=text, description=text)
        _add_sweep_options(p, biot=case in (CaseKind.CASE3, CaseKind.CASE4))

    p = sub.add_parser("verify", help="Dense verification suite on small meshes")
    p.add_argument("--N", dest="n", type=int, help="Mesh size of the spectral checks")
    p.add_argument("--condition-N", dest="condition_n", type=int, help="Mesh size of the condition checks")
    p.add_argument("--lambda", dest="lambda_list", type=float, nargs="+", help="Lambda sweep")
    p.add_argument("--mu", type=float, help="Shear modulus")
    _add_output_options(p)
    return parser


def _exporter(args: argparse.Namespace):
    if not args.output:
        return StreamTableExporter()
    exporters = [FileTableExporter(args.output)]
    if args.tee:
        exporters.append(StreamTableExporter())
    return CompositeTableExporter(exporters)


def _run_case(args: argparse.Namespace, manager: ConfigManager) -> int:
    config = manager.apply_overrides(
        "solver", tol=args.tol, maxiter=args.maxiter, seed=args.seed, residual_measure=args.measure
    )
    config = manager.apply_overrides(
        "sweep",
        n_list=args.n_list,
        lambda_list=args.lambda_list,
        alpha_list=getattr(args, "alpha_list", None),
        kappa_list=getattr(args, "kappa_list", None),
        mu=args.mu,
        dt=args.dt,
        s0=args.s0,
        jobs=args.jobs,
    )
    sweep = config.sweep
    points = case_points(
        args.command, args.bc, sweep.n_list, sweep.lambda_list, sweep.alpha_list, sweep.kappa_list
    )
    runner = ExperimentRunner(config.solver, mu=sweep.mu, dt=sweep.dt, s0=sweep.s0, jobs=sweep.jobs)

    if args.mesh_dump and sweep.n_list:
        write_mesh_dump(build_unit_square_mesh(sweep.n_list[0]), args.mesh_dump)
    if args.export_matrix and points:
        write_matrix_market(runner.matrix(points[0]), args.export_matrix)

    def progress(result: CellResult) -> None:
        logger.info("%s: %d iterations", result.point.key, result.record.iterations)

    results = runner.run(points, progress=progress)
    if args.dump:
        write_reports(results, args.dump)
    _exporter(args).export(emit_table(results, args.format))
    return 0


def _run_verify(args: argparse.Namespace, manager: ConfigManager) -> int:
    config = manager.apply_overrides(
        "verify", n=args.n, condition_n=args.condition_n, lambda_list=args.lambda_list, mu=args.mu
    )
    if args.mesh_dump:
        write_mesh_dump(build_unit_square_mesh(config.verify.n), args.mesh_dump)
    records = run_verification(config.verify)
    _exporter(args).export(emit_verification_table(records))
    failed = [r for r in records if not r.passed]
    if failed:
        logger.warning("%d of %d checks failed", len(failed), len(records))
        return 1
    return 0


def main(argv: Optional[Sequence[str]] = None) -> int:
    """Entry point; returns the process exit code."""
    args = build_parser().parse_args(argv)
    manager = ConfigManager()
    try:
        config: RunConfig = manager.load(args.config)
        if args.log_level:
            config = manager.apply_overrides("logging", level=args.log_level)
        configure_logging(config.logging)
        for key, message in manager.validate_required_settings().items():
            logger.warning("%s: %s", key, message)

        if args.command == "verify":
            return _run_verify(args, manager)
        return _run_case(args, manager)
    except (BiotPrecondError, FileNotFoundError, ValueError) as exc:
        print(f"biotprecond: error: {exc}", file=sys.stderr)
        return 2
