"""
Validators for SDP Code Bounds run configurations.

A run configuration is a JSON document; numbers in it may be JSON numbers,
"p/q" strings or symbolic expressions such as "pi/3" or "cos(2*pi/5)".
parse_run_config checks every field the chosen command needs before
anything is built or solved.
"""

import logging
import re
from dataclasses import fields
from typing import Any, Dict, List, Mapping, Optional, Tuple

import sympy

from app.config import Config
from app.models.report import (
    AdConstraint,
    AdKind,
    Command,
    FormulationKind,
    PartitionCell,
    PartitionSpec,
    RunConfig,
)
from app.models.sdp import SolverSettings
from app.models.space import SpaceKind, SpaceSpec
from app.services.formulations import FormulationError, make_partition, one_sided_partition
from app.utils.rationals import parse_token


logger = logging.getLogger(__name__)


_ONE_SIDED = re.compile(r"^one_sided(?:\((\d+)\))?$")


class ConfigError(ValueError):
    """Raised when a run configuration is malformed or incomplete."""
    pass


def _require(raw: Mapping[str, Any], key: str, command: Command) -> Any:
    if key not in raw or raw[key] is None:
        raise ConfigError(f"Command '{command.value}' requires field '{key}'")
    return raw[key]


def _number(value: Any, field_name: str):
    try:
        return parse_token(value)
    except (ValueError, TypeError) as e:
        raise ConfigError(f"Field '{field_name}': {e}") from e


def _integer(value: Any, field_name: str, minimum: int = 0) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise ConfigError(f"Field '{field_name}' must be an integer, got {value!r}")
    if value < minimum:
        raise ConfigError(f"Field '{field_name}' must be at least {minimum}, got {value}")
    return value


def validate_space(raw: Any) -> SpaceSpec:
    """
    Parse {"kind": "sphere" | "hamming", "n": int}.

    Raises:
        ConfigError: On an unknown kind or invalid dimension
    """
    if not isinstance(raw, Mapping):
        raise ConfigError(f"Field 'space' must be an object, got {raw!r}")
    try:
        kind = SpaceKind(raw.get("kind"))
    except ValueError as e:
        raise ConfigError(f"Unknown space kind {raw.get('kind')!r}") from e
    n = _integer(raw.get("n"), "space.n", minimum=1)
    try:
        return SpaceSpec(kind, n)
    except ValueError as e:
        raise ConfigError(str(e)) from e


def validate_interval(raw: Any, field_name: str = "interval") -> Tuple[Any, Any]:
    """Parse a two-element [a, b] list with a <= b."""
    if not isinstance(raw, (list, tuple)) or len(raw) != 2:
        raise ConfigError(f"Field '{field_name}' must be a list [a, b], got {raw!r}")
    a, b = (_number(v, field_name) for v in raw)
    if a > b:
        raise ConfigError(f"Field '{field_name}' has a > b: [{a}, {b}]")
    return a, b


def validate_ad(raw: Any) -> List[AdConstraint]:
    """
    Parse side constraints.

    Each entry is {"kind": "pfender", "theta": ...},
    {"kind": "cap_count", "theta": ..., "k": int} or
    {"kind": "linear_custom", "coefficients": {...}, "constant": ..., "label": ...}.
    Angles stay as given so that symbolic tokens keep their exact cosine.
    """
    if raw is None:
        return []
    if not isinstance(raw, list):
        raise ConfigError("Field 'ad' must be a list")
    result = []
    for index, entry in enumerate(raw):
        name = f"ad[{index}]"
        if not isinstance(entry, Mapping):
            raise ConfigError(f"Field '{name}' must be an object")
        try:
            kind = AdKind(entry.get("kind"))
        except ValueError as e:
            raise ConfigError(f"Field '{name}': unknown kind {entry.get('kind')!r}") from e
        if kind is AdKind.LINEAR_CUSTOM:
            coefficients = entry.get("coefficients")
            if not isinstance(coefficients, Mapping) or not coefficients:
                raise ConfigError(f"Field '{name}.coefficients' must be a non-empty object")
            result.append(AdConstraint(
                kind,
                coefficients={str(k): _number(v, f"{name}.coefficients") for k, v in coefficients.items()},
                constant=_number(entry.get("constant", 0), f"{name}.constant"),
                label=str(entry.get("label", f"linear[{index}]")),
            ))
            continue
        theta = entry.get("theta")
        if theta is None:
            raise ConfigError(f"Field '{name}.theta' is required for {kind.value}")
        _number(theta, f"{name}.theta")
        if kind is AdKind.PFENDER:
            result.append(AdConstraint(kind, theta=theta, label=entry.get("label", f"pfender({theta})")))
        else:
            k = _integer(entry.get("k"), f"{name}.k", minimum=1)
            result.append(AdConstraint(kind, theta=theta, k=k, label=entry.get("label", f"cap_count({theta},{k})")))
    return result


def validate_anchors(raw: Any, field_name: str = "anchors") -> Tuple[Tuple[Any, ...], ...]:
    """Square matrix of pairwise anchor tau values."""
    if not isinstance(raw, list) or any(not isinstance(row, list) for row in raw):
        raise ConfigError(f"Field '{field_name}' must be a list of lists")
    matrix = tuple(tuple(_number(v, field_name) for v in row) for row in raw)
    if any(len(row) != len(matrix) for row in matrix):
        raise ConfigError(f"Field '{field_name}' must be a square matrix")
    return matrix


def validate_partition(raw: Any, space: SpaceSpec, interval: Tuple[Any, Any]) -> PartitionSpec:
    """
    Parse "one_sided", "one_sided(n)" or an explicit
    {"anchors": [[...]], "cells": [{"theta": [lo, hi], "anchor_intervals": [[a, b], ...]}]}.
    """
    try:
        if isinstance(raw, str):
            match = _ONE_SIDED.match(raw.strip())
            if not match:
                raise ConfigError(f"Unknown partition {raw!r}")
            n = int(match.group(1)) if match.group(1) else space.n
            if n != space.n:
                raise ConfigError(f"Partition {raw!r} does not match space dimension {space.n}")
            return one_sided_partition(n)

        if not isinstance(raw, Mapping):
            raise ConfigError("Field 'partition' must be a string or an object")
        anchors = validate_anchors(raw.get("anchors", []), "partition.anchors")
        cells_raw = raw.get("cells")
        if not isinstance(cells_raw, list) or not cells_raw:
            raise ConfigError("Field 'partition.cells' must be a non-empty list")
        cells = []
        for index, cell in enumerate(cells_raw):
            name = f"partition.cells[{index}]"
            theta = cell.get("theta") if isinstance(cell, Mapping) else None
            if not isinstance(theta, list) or len(theta) != 2:
                raise ConfigError(f"Field '{name}.theta' must be [lo, hi]")
            lo, hi = (_angle(v, f"{name}.theta") for v in theta)
            intervals = tuple(validate_interval(v, f"{name}.anchor_intervals")
                              for v in cell.get("anchor_intervals", []))
            cells.append(PartitionCell(lo, hi, intervals))
        return make_partition(anchors, cells, interval[0], interval[1], region=str(raw.get("region", "")))
    except FormulationError as e:
        raise ConfigError(f"Field 'partition': {e}") from e


def _angle(value: Any, field_name: str):
    if isinstance(value, str):
        try:
            return sympy.sympify(value, locals={"pi": sympy.pi})
        except (sympy.SympifyError, SyntaxError, TypeError) as e:
            raise ConfigError(f"Field '{field_name}': cannot evaluate {value!r}") from e
    return _number(value, field_name)


def validate_solver(raw: Any) -> SolverSettings:
    """SolverSettings with overrides for any subset of its fields."""
    if raw is None:
        return SolverSettings()
    if not isinstance(raw, Mapping):
        raise ConfigError("Field 'solver' must be an object")
    known = {f.name for f in fields(SolverSettings)}
    unknown = sorted(set(raw) - known)
    if unknown:
        raise ConfigError(f"Unknown solver settings: {unknown}")
    try:
        return SolverSettings(**raw)
    except (TypeError, ValueError) as e:
        raise ConfigError(f"Field 'solver': {e}") from e


def parse_run_config(raw: Mapping[str, Any], command: Optional[str] = None) -> RunConfig:
    """
    Parse and validate a run configuration document.

    Args:
        raw: Decoded JSON document
        command: Command from the command line; overrides raw["command"]

    Returns:
        Validated RunConfig

    Raises:
        ConfigError: Naming the first missing or invalid field
    """
    if not isinstance(raw, Mapping):
        raise ConfigError("Run configuration must be a JSON object")
    name = command or raw.get("command")
    try:
        cmd = Command(name)
    except ValueError as e:
        raise ConfigError(f"Unknown command {name!r}") from e

    config = RunConfig(command=cmd, raw=dict(raw))
    config.solver = validate_solver(raw.get("solver"))
    config.output = raw.get("output")
    config.certify = bool(raw.get("certify", False))
    config.max_denominator = _integer(raw.get("max_denominator", Config.CERTIFY_MAX_DENOMINATOR),
                                      "max_denominator", minimum=1)

    # verify either rebuilds the model from the bound fields or reads a model file
    from_model_file = cmd is Command.VERIFY and raw.get("model") is not None
    if cmd in (Command.BOUND, Command.LP, Command.VERIFY) and not from_model_file:
        config.space = validate_space(_require(raw, "space", cmd))
        config.interval = validate_interval(_require(raw, "interval", cmd))

    if cmd in (Command.BOUND, Command.VERIFY) and not from_model_file:
        _parse_bound_fields(config, raw, cmd)
    if cmd is Command.BOUND and raw.get("model_output") is not None:
        config.model_path = str(raw["model_output"])
    if cmd is Command.VERIFY:
        config.certificate_path = str(_require(raw, "certificate", cmd))
        if from_model_file:
            config.model_path = str(raw["model"])
    elif cmd is Command.LP:
        _parse_lp_fields(config, raw, cmd)
    elif cmd is Command.RECOVER:
        _parse_recover_fields(config, raw, cmd)

    logger.debug(f"Parsed run configuration for command={cmd.value}")
    return config


def _parse_bound_fields(config: RunConfig, raw: Mapping[str, Any], cmd: Command) -> None:
    try:
        config.formulation = FormulationKind(_require(raw, "formulation", cmd))
    except ValueError as e:
        raise ConfigError(f"Unknown formulation {raw.get('formulation')!r}") from e
    config.m = _integer(_require(raw, "m", cmd), "m", minimum=1)
    config.ad = validate_ad(raw.get("ad"))
    if raw.get("breakpoints") is not None:
        if not isinstance(raw["breakpoints"], list):
            raise ConfigError("Field 'breakpoints' must be a list")
        config.breakpoints = [_number(v, "breakpoints") for v in raw["breakpoints"]]

    kind = config.formulation
    if config.ad and kind in (FormulationKind.SDP0, FormulationKind.SDP0_ANTIPODAL):
        raise ConfigError(f"Formulation '{kind.value}' takes no side constraints")
    if kind is FormulationKind.SDPA_SUBSET:
        config.anchors = validate_anchors(_require(raw, "anchors", cmd))
        intervals = _require(raw, "anchor_intervals", cmd)
        if not isinstance(intervals, list):
            raise ConfigError("Field 'anchor_intervals' must be a list")
        config.anchor_intervals = [validate_interval(v, "anchor_intervals") for v in intervals]
    if kind is FormulationKind.SDPHAT:
        config.partition = validate_partition(_require(raw, "partition", cmd), config.space, config.interval)


def _parse_lp_fields(config: RunConfig, raw: Mapping[str, Any], cmd: Command) -> None:
    if raw.get("polynomial") is not None:
        polynomial = raw["polynomial"]
        if not isinstance(polynomial, list) or len(polynomial) < 2:
            raise ConfigError("Field 'polynomial' must list f_0..f_N with N >= 1")
        config.polynomial = [_number(v, "polynomial") for v in polynomial]
        return
    config.degree = _integer(_require(raw, "degree", cmd), "degree", minimum=1)
    config.grid_points = _integer(raw.get("grid_points", Config.LP_GRID_POINTS), "grid_points", minimum=2)


def _parse_recover_fields(config: RunConfig, raw: Mapping[str, Any], cmd: Command) -> None:
    config.interval = validate_interval(_require(raw, "interval", cmd))
    moments = _require(raw, "moments", cmd)
    if not isinstance(moments, list) or len(moments) < 2:
        raise ConfigError("Field 'moments' must list at least s_0 and s_1")
    config.moments = [_number(v, "moments") for v in moments]
    if raw.get("rank") is not None:
        config.rank = _integer(raw["rank"], "rank", minimum=1)
    tol = raw.get("tol", 1e-6)
    if isinstance(tol, bool) or not isinstance(tol, (int, float)) or tol <= 0:
        raise ConfigError(f"Field 'tol' must be a positive number, got {tol!r}")
    config.tol = float(tol)


def config_summary(config: RunConfig) -> Dict[str, Any]:
    """Short description used in log events."""
    return {
        "command": config.command.value,
        "space": config.space.describe() if config.space else None,
        "formulation": config.formulation.value if config.formulation else None,
        "m": config.m,
    }
