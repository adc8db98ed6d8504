"""
JSON codecs for models, certificates and reports.

Every exact number is written as a "p/q" string and every float as its
round-trip decimal string, so documents re-parse to identical values.
"""

import hashlib
import json
import logging
from fractions import Fraction
from typing import Any, Dict, Mapping, Optional

from app.models.report import BoundReport, RationalCertificate
from app.models.sdp import AffineBlock, LinearEquality, ObjectiveSense, SdpModel
from app.utils.rationals import format_number, is_exact, parse_number, to_exact


logger = logging.getLogger(__name__)

MODEL_FORMAT = "sdp-code-bounds/model/1"
CERTIFICATE_FORMAT = "sdp-code-bounds/certificate/1"
REPORT_FORMAT = "sdp-code-bounds/report/1"


class SerializationError(ValueError):
    """Raised when a document cannot be decoded."""
    pass


def _number(value) -> str:
    if is_exact(value):
        return format_number(to_exact(value))
    return format_number(float(value))


def _entries(entries) -> list:
    return [[int(i), int(j), _number(v)] for i, j, v in entries]


def _coeffs(coeffs: Mapping[str, Any]) -> Dict[str, str]:
    return {name: _number(v) for name, v in sorted(coeffs.items())}


def model_to_dict(model: SdpModel) -> Dict[str, Any]:
    """Canonical JSON-compatible description of a model."""
    return {
        "format": MODEL_FORMAT,
        "variables": list(model.variables),
        "objective": {"sense": model.sense.value, "coeffs": _coeffs(model.objective)},
        "blocks": [
            {
                "label": block.label,
                "size": block.size,
                "constant": _entries(block.constant),
                "terms": {name: _entries(entries) for name, entries in sorted(block.terms.items())},
            }
            for block in model.blocks
        ],
        "equalities": [
            {"label": eq.label, "constant": _number(eq.constant), "coeffs": _coeffs(eq.coeffs)}
            for eq in model.equalities
        ],
        "metadata": dict(model.metadata),
    }


def model_from_dict(document: Mapping[str, Any]) -> SdpModel:
    """
    Decode a model document and validate it with sdpmodel.assemble.

    Raises:
        SerializationError: On a wrong format tag, missing fields or numbers
            that are not "p/q" or decimal strings
        ModelError: If the decoded model is malformed
    """
    # imported here: the services package imports this module
    from app.services.sdpmodel import assemble

    if document.get("format") != MODEL_FORMAT:
        raise SerializationError(f"Not a model document: format={document.get('format')!r}")
    try:
        objective = document["objective"]
        blocks = [
            AffineBlock(
                size=int(block["size"]),
                constant=_decode_entries(block["constant"]),
                terms={str(name): _decode_entries(entries) for name, entries in block["terms"].items()},
                label=str(block.get("label", "")),
            )
            for block in document["blocks"]
        ]
        equalities = [
            LinearEquality(
                coeffs=_decode_coeffs(eq["coeffs"]),
                constant=_decode_number(eq["constant"]),
                label=str(eq.get("label", "")),
            )
            for eq in document.get("equalities", [])
        ]
        sense = ObjectiveSense(objective["sense"])
        coeffs = _decode_coeffs(objective["coeffs"])
        variables = [str(name) for name in document["variables"]]
    except KeyError as e:
        raise SerializationError(f"Model is missing field {e.args[0]!r}") from e
    except (TypeError, ValueError) as e:
        raise SerializationError(f"Malformed model document: {e}") from e
    return assemble(variables, coeffs, blocks, sense, equalities, document.get("metadata"))


def _decode_number(value):
    if not isinstance(value, str):
        raise SerializationError(f"Model numbers must be strings, got {value!r}")
    try:
        return parse_number(value)
    except ValueError as e:
        raise SerializationError(str(e)) from e


def _decode_entries(entries) -> tuple:
    return tuple((int(i), int(j), _decode_number(v)) for i, j, v in entries)


def _decode_coeffs(coeffs: Mapping[str, Any]) -> Dict[str, Any]:
    return {str(name): _decode_number(v) for name, v in coeffs.items()}


def canonical_json(document: Any) -> str:
    return json.dumps(document, sort_keys=True, separators=(",", ":"))


def model_hash(model: SdpModel) -> str:
    """sha256 of the canonical model description; binds certificates to models."""
    return hashlib.sha256(canonical_json(model_to_dict(model)).encode("utf-8")).hexdigest()


def config_hash(raw: Mapping[str, Any]) -> str:
    """sha256 of a run configuration document, key order ignored."""
    return hashlib.sha256(canonical_json(raw).encode("utf-8")).hexdigest()


def certificate_to_dict(certificate: RationalCertificate) -> Dict[str, Any]:
    return {
        "format": CERTIFICATE_FORMAT,
        "model_hash": certificate.model_hash,
        "bound_kind": certificate.bound_kind,
        "max_denominator": certificate.max_denominator,
        "claimed_bound": format_number(certificate.claimed_bound),
        "dual_blocks": [[[format_number(v) for v in row] for row in block] for block in certificate.dual_blocks],
        "equality_multipliers": [format_number(v) for v in certificate.equality_multipliers],
    }


def certificate_from_dict(document: Mapping[str, Any]) -> RationalCertificate:
    """
    Decode a certificate document.

    Raises:
        SerializationError: On a wrong format tag, missing fields or non-rational numbers
    """
    if document.get("format") != CERTIFICATE_FORMAT:
        raise SerializationError(f"Not a certificate document: format={document.get('format')!r}")
    try:
        return RationalCertificate(
            model_hash=str(document["model_hash"]),
            dual_blocks=tuple(
                tuple(tuple(_rational(v) for v in row) for row in block) for block in document["dual_blocks"]
            ),
            equality_multipliers=tuple(_rational(v) for v in document["equality_multipliers"]),
            claimed_bound=_rational(document["claimed_bound"]),
            bound_kind=str(document["bound_kind"]),
            max_denominator=int(document.get("max_denominator", 0)),
        )
    except KeyError as e:
        raise SerializationError(f"Certificate is missing field {e.args[0]!r}") from e


def _rational(value) -> Fraction:
    parsed = parse_number(value)
    if not isinstance(parsed, Fraction):
        if isinstance(value, int) and not isinstance(value, bool):
            return Fraction(value)
        raise SerializationError(f"Certificate numbers must be exact rationals, got {value!r}")
    return parsed


def report_to_dict(report: BoundReport, config_digest: Optional[str] = None,
                   runtime_ms: Optional[float] = None, versions: Optional[Mapping[str, str]] = None,
                   certificate_path: Optional[str] = None) -> Dict[str, Any]:
    return {
        "format": REPORT_FORMAT,
        "config_hash": config_digest,
        "formulation": report.formulation,
        "m": report.m,
        "status": report.status,
        "bound_float": report.bound,
        "bound_certified": None if report.bound_certified is None else format_number(report.bound_certified),
        "objective": report.objective,
        "variables": {name: float(v) for name, v in report.variables.items()},
        "notes": list(report.notes),
        "certificate": certificate_path,
        "runtime_ms": runtime_ms,
        "versions": dict(versions or {}),
    }


def write_json(document: Mapping[str, Any], path: str) -> None:
    with open(path, "w", encoding="utf-8") as handle:
        json.dump(document, handle, indent=2, sort_keys=True)
        handle.write("\n")
    logger.debug(f"Wrote {path}")


def read_json(path: str) -> Dict[str, Any]:
    try:
        with open(path, "r", encoding="utf-8") as handle:
            return json.load(handle)
    except json.JSONDecodeError as e:
        raise SerializationError(f"{path} is not valid JSON: {e}") from e
    except OSError as e:
        raise SerializationError(f"Cannot read {path}: {e.strerror or e}") from e


def write_model(model: SdpModel, path: str) -> None:
    write_json(model_to_dict(model), path)


def read_model(path: str) -> SdpModel:
    """Load a model file written by write_model."""
    return model_from_dict(read_json(path))
