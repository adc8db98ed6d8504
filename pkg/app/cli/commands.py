"""
CLI commands for SDP Code Bounds.

run() dispatches a validated RunConfig to the formulations, solver,
certify and moments services and returns an exit code with a report
document. run_one_sided_table() reproduces the one-sided kissing table.
"""

import importlib.metadata
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from fractions import Fraction
from typing import Any, Dict, List, Optional, Sequence, TextIO, Tuple

import structlog

import app
from app.config import Config
from app.models.report import BoundReport, Command, FormulationKind, RunConfig
from app.models.sdp import SdpModel, SolveStatus, SolverSettings
from app.services.certify import CertificationError, certify_result, verify_certificate
from app.services.formulations import (
    FormulationError,
    build_sdp0,
    build_sdp0_antipodal,
    build_sdpa,
    build_sdpa_subset,
    build_sdphat,
    hemisphere_lp_bound,
    lp_dual_bound,
    lp_polynomial_bound,
    one_sided_partition,
    solve_bound,
)
from app.services.moments import MomentError, recover_distribution
from app.services.sdpmodel import ModelError
from app.services.solver import SolverError
from app.services.spaces import SpaceError, sphere, zonal_family
from app.utils.rationals import format_number
from app.utils.serialization import (
    SerializationError,
    certificate_from_dict,
    certificate_to_dict,
    config_hash,
    read_json,
    read_model,
    report_to_dict,
    write_json,
    write_model,
)
from app.utils.validators import ConfigError, config_summary, parse_run_config


logger = structlog.get_logger(__name__)


EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_SOLVER = 2
EXIT_CERTIFICATION = 3

VALIDATION_ERRORS = (ConfigError, SpaceError, FormulationError, ModelError, MomentError, SerializationError)

# Published one-sided kissing rows for n = 3..9
PUBLISHED_LOWER = {3: 9, 4: 18, 5: 32, 6: 51, 7: 93, 8: 183}
PUBLISHED_LP = {3: 9, 4: 20, 5: 39, 6: 75, 7: 135, 8: 238, 9: 378}
PUBLISHED_SDP = {3: 9, 4: 19, 5: 35, 6: 64, 7: 110, 8: 186, 9: 309}


class SolveFailure(Exception):
    """A solve ended without an optimal status or an accepted certificate."""

    def __init__(self, message: str, document: Dict[str, Any]):
        super().__init__(message)
        self.document = document


def versions() -> Dict[str, str]:
    """Package versions recorded in every report."""
    found = {"sdp-code-bounds": app.__version__}
    for package in ("numpy", "scipy", "sympy", "structlog"):
        try:
            found[package] = importlib.metadata.version(package)
        except importlib.metadata.PackageNotFoundError:
            found[package] = "unknown"
    return found


def build_model(config: RunConfig) -> SdpModel:
    """SdpModel for a bound or verify configuration."""
    m = config.m
    family = zonal_family(config.space, 2 * m - 1)
    a, b = config.interval
    kind = config.formulation
    if kind is FormulationKind.SDP0:
        return build_sdp0(family, a, b, m)
    if kind is FormulationKind.SDP0_ANTIPODAL:
        return build_sdp0_antipodal(family, a, b, m)
    if kind is FormulationKind.SDPA:
        return build_sdpa(family, a, b, config.breakpoints, config.ad, m)
    if kind is FormulationKind.SDPA_SUBSET:
        return build_sdpa_subset(family, a, b, config.anchors, config.anchor_intervals, config.ad, m,
                                 breakpoints=config.breakpoints)
    return build_sdphat(family, a, b, config.partition, config.ad, m)


def run(config: RunConfig, iteration_log: Optional[TextIO] = None) -> Tuple[int, Dict[str, Any]]:
    """
    Execute one command.

    Args:
        config: Validated run configuration
        iteration_log: Optional stream for solver iteration lines

    Returns:
        (exit code, report document); the document is also written to
        config.output when set
    """
    started = time.perf_counter()
    digest = config_hash(config.raw)
    log = logger.bind(config_hash=digest[:12], **config_summary(config))
    log.info("run_started")

    try:
        if config.command is Command.BOUND:
            code, document = _run_bound(config, iteration_log)
        elif config.command is Command.LP:
            code, document = _run_lp(config)
        elif config.command is Command.RECOVER:
            code, document = _run_recover(config)
        else:
            code, document = _run_verify(config)
    except VALIDATION_ERRORS as e:
        log.warning("run_rejected", error=str(e), error_type=type(e).__name__)
        code, document = EXIT_VALIDATION, {"status": "invalid", "error": str(e)}
    except SolverError as e:
        log.error("run_solver_error", error=str(e))
        code, document = EXIT_SOLVER, {"status": "solver_error", "error": str(e)}
    except SolveFailure as e:
        log.error("run_solve_failed", error=str(e))
        code, document = EXIT_SOLVER, e.document
    except CertificationError as e:
        log.error("run_certificate_rejected", error=str(e), constraint=e.constraint)
        code, document = EXIT_CERTIFICATION, {"status": "rejected", "error": str(e), "constraint": e.constraint}

    document.setdefault("format", "sdp-code-bounds/report/1")
    document["command"] = config.command.value
    document["config_hash"] = digest
    document["runtime_ms"] = round((time.perf_counter() - started) * 1000, 1)
    document["versions"] = versions()
    document["exit_code"] = code

    if config.output:
        write_json(document, config.output)
    log.info("run_completed", exit_code=code, runtime_ms=document["runtime_ms"])
    return code, document


def _certificate_path(config: RunConfig) -> Optional[str]:
    path = config.raw.get("certificate")
    if path:
        return str(path)
    if config.output:
        return f"{config.output}.cert.json"
    return None


def _run_bound(config: RunConfig, iteration_log: Optional[TextIO]) -> Tuple[int, Dict[str, Any]]:
    model = build_model(config)
    if config.model_path:
        write_model(model, config.model_path)
    report, result = solve_bound(model, config.solver, iteration_log)

    if result.status in (SolveStatus.PRIMAL_INFEASIBLE, SolveStatus.DUAL_UNBOUNDED):
        raise SolveFailure(f"Solve ended with status {result.status.value}", report_to_dict(report))

    certificate_path = None
    rescue = result.status is SolveStatus.NUMERICAL_LIMIT
    if config.certify or rescue:
        try:
            certificate, bound = certify_result(model, result, config.max_denominator)
        except CertificationError as e:
            if rescue:
                raise SolveFailure(f"Solve ended with {result.status.value}; certification failed: {e}",
                                   report_to_dict(report)) from e
            raise
        report.bound_certified = bound
        if rescue:
            report.bound = float(bound)
            report.notes.append("bound from certificate after numerical limit")
        certificate_path = _certificate_path(config)
        if certificate_path:
            write_json(certificate_to_dict(certificate), certificate_path)

    document = report_to_dict(report, certificate_path=certificate_path)
    if report.bound is None:
        raise SolveFailure(f"Solve ended with status {result.status.value}", document)
    return EXIT_OK, document


def _run_lp(config: RunConfig) -> Tuple[int, Dict[str, Any]]:
    a, b = config.interval
    if config.polynomial is not None:
        family = zonal_family(config.space, len(config.polynomial) - 1)
        bound = lp_polynomial_bound(family, config.polynomial, a, b)
        report = BoundReport("lp_polynomial", None, SolveStatus.OPTIMAL.value, float(bound),
                             bound_certified=bound, notes=["exact sign check on [a, b]"])
        return EXIT_OK, report_to_dict(report)

    family = zonal_family(config.space, config.degree)
    report = lp_dual_bound(family, a, b, config.degree, config.grid_points)
    return EXIT_OK, report_to_dict(report)


def _run_recover(config: RunConfig) -> Tuple[int, Dict[str, Any]]:
    a, b = config.interval
    distribution = recover_distribution(config.moments, a, b, tol=config.tol, rank=config.rank)
    return EXIT_OK, {
        "status": "recovered",
        "atoms": [{"location": float(atom.location), "weight": float(atom.weight)} for atom in distribution.atoms],
        "total_weight": float(distribution.total_weight),
        "integrality_deviations": [
            {"location": float(t), "deviation": deviation} for t, deviation in distribution.integrality_deviations()
        ],
    }


def _run_verify(config: RunConfig) -> Tuple[int, Dict[str, Any]]:
    model = read_model(config.model_path) if config.model_path else build_model(config)
    certificate = certificate_from_dict(read_json(config.certificate_path))
    bound = verify_certificate(model, certificate)
    return EXIT_OK, {
        "status": "verified",
        "formulation": model.formulation,
        "m": model.metadata.get("m"),
        "bound_certified": format_number(bound),
        "bound_float": float(bound),
        "certificate": config.certificate_path,
    }


def run_from_path(command: str, config_path: str, output: Optional[str] = None,
                  iteration_log: Optional[TextIO] = None) -> Tuple[int, Dict[str, Any]]:
    """Read, validate and run a configuration file."""
    try:
        raw = read_json(config_path)
        config = parse_run_config(raw, command)
    except (OSError, SerializationError, ConfigError) as e:
        logger.warning("config_rejected", path=config_path, error=str(e))
        return EXIT_VALIDATION, {"status": "invalid", "error": str(e)}
    if output:
        config.output = output
    return run(config, iteration_log)


# ---------------------------------------------------------------------------
# One-sided kissing table
# ---------------------------------------------------------------------------

@dataclass
class TableRow:
    """One dimension of the one-sided kissing table."""
    n: int
    sdphat_bound: Optional[float]
    sdphat_status: str
    subset_bound: Optional[float]
    subset_status: str
    lp_bound: Optional[float] = None

    def floor(self, value: Optional[float]) -> Optional[int]:
        # absorb solver noise just below an integer
        return None if value is None else math.floor(value + 1e-6)


def _one_sided_row(n: int, m: int, settings: Optional[SolverSettings]) -> TableRow:
    settings = settings or SolverSettings(max_block_dimension=Config.TABLE_MAX_BLOCK_DIMENSION)
    family = zonal_family(sphere(n), 2 * m - 1)
    a, b = Fraction(-1), Fraction(1, 2)
    hat, _ = solve_bound(build_sdphat(family, a, b, one_sided_partition(n), [], m), settings)
    subset_model = build_sdpa_subset(family, a, b, ((Fraction(1),),), [(Fraction(0), Fraction(1))], [], m)
    subset, _ = solve_bound(subset_model, settings)
    lp = hemisphere_lp_bound(n)
    return TableRow(n, hat.bound, hat.status, subset.bound, subset.status, lp.bound)


def run_one_sided_table(dimensions: Sequence[int] = Config.TABLE_DIMENSIONS, m: int = Config.TABLE_ORDER,
                        settings: Optional[SolverSettings] = None,
                        max_workers: int = Config.MAX_PARALLEL_SOLVES) -> Tuple[List[TableRow], str]:
    """
    Cell-partitioned, subset and LP bounds on hemisphere pi/3-codes, one
    independent job per dimension, run concurrently.

    Returns:
        (rows, rendered text table with the published rows alongside)
    """
    logger.info("one_sided_table_started", dimensions=list(dimensions), m=m)
    with ThreadPoolExecutor(max_workers=max_workers) as pool:
        rows = list(pool.map(lambda n: _one_sided_row(n, m, settings), dimensions))
    return rows, render_table(rows)


def render_table(rows: Sequence[TableRow]) -> str:
    def cell(value) -> str:
        return "-" if value is None else str(value)

    lines = [
        "n".ljust(18) + "".join(str(row.n).rjust(7) for row in rows),
        "lower (published)".ljust(18) + "".join(cell(PUBLISHED_LOWER.get(row.n)).rjust(7) for row in rows),
        "LP (published)".ljust(18) + "".join(cell(PUBLISHED_LP.get(row.n)).rjust(7) for row in rows),
        "LP (computed)".ljust(18) + "".join(cell(row.floor(row.lp_bound)).rjust(7) for row in rows),
        "SDP (published)".ljust(18) + "".join(cell(PUBLISHED_SDP.get(row.n)).rjust(7) for row in rows),
        "subset (computed)".ljust(18) + "".join(cell(row.floor(row.subset_bound)).rjust(7) for row in rows),
        "cells (computed)".ljust(18) + "".join(cell(row.floor(row.sdphat_bound)).rjust(7) for row in rows),
    ]
    return "\n".join(lines)


def table_document(rows: Sequence[TableRow], m: int) -> Dict[str, Any]:
    return {
        "format": "sdp-code-bounds/table/1",
        "m": m,
        "rows": [
            {
                "n": row.n,
                "sdphat_bound": row.sdphat_bound,
                "sdphat_status": row.sdphat_status,
                "subset_bound": row.subset_bound,
                "subset_status": row.subset_status,
                "lp_bound": row.lp_bound,
                "published_sdp": PUBLISHED_SDP.get(row.n),
                "published_lp": PUBLISHED_LP.get(row.n),
            }
            for row in rows
        ],
        "versions": versions(),
    }
