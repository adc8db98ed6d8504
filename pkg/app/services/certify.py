"""
Certify Service: exact rational certificates for bounds from SdpModel duals.

A certificate lists a PSD multiplier Y_b per block and a multiplier w_e per
equality such that, for every variable i,

    sum_b <T_i^b, Y_b> + sum_e w_e a_ei = g_i

with g = c for min models and g = -c for max models. Weak duality then
bounds the objective of every feasible point by

    min:  c.x >= -sum_b <T_0^b, Y_b> - sum_e w_e const_e
    max:  c.x <=  sum_b <T_0^b, Y_b> + sum_e w_e const_e

All checks run in Fraction arithmetic on the model data as stored (floats
in the model are taken at their exact binary value).
"""

from fractions import Fraction
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import structlog

from app.config import Config
from app.models.report import PsdCheck, RationalCertificate
from app.models.sdp import BoundKind, ObjectiveSense, SdpModel, SolveResult
from app.utils.rationals import ExactBasis, common_denominator, exact_solve, rationalize, to_exact
from app.utils.serialization import model_hash


logger = structlog.get_logger(__name__)

__all__ = [
    "CertificationError",
    "rationalize",
    "check_psd_exact",
    "build_certificate",
    "verify_certificate",
    "certify_result",
    "bound_from_dual_value",
]


class CertificationError(Exception):
    """
    Raised when a certificate cannot be built or is rejected.

    constraint names the block, variable or field whose exact check failed.
    """

    def __init__(self, message: str, constraint: Optional[str] = None):
        super().__init__(message)
        self.constraint = constraint


Matrix = List[List[Fraction]]


# ---------------------------------------------------------------------------
# Exact PSD test
# ---------------------------------------------------------------------------

def check_psd_exact(Q: Sequence[Sequence]) -> PsdCheck:
    """
    Exact PSD test by fraction-free symmetric elimination.

    The matrix is scaled to integers and eliminated Bareiss-style, always
    pivoting on the largest remaining diagonal entry. Q is PSD iff the
    elimination stops with a remaining Schur complement that is zero. On
    failure the returned witness v has v^T Q v < 0.

    Raises:
        ValueError: If Q is not square and symmetric
    """
    n = len(Q)
    exact = [[to_exact(v) for v in row] for row in Q]
    for row in exact:
        if len(row) != n:
            raise ValueError("Matrix must be square")
    for i in range(n):
        for j in range(i + 1, n):
            if exact[i][j] != exact[j][i]:
                raise ValueError(f"Matrix is not symmetric at ({i}, {j})")
    if n == 0:
        return PsdCheck(True, 0)

    scale = common_denominator(v for row in exact for v in row)
    M = [[int(v * scale) for v in row] for row in exact]
    # basis[j] is the vector b_j with b_i^T Q b_j proportional to M[i][j] (same sign)
    basis = [[Fraction(int(i == j)) for i in range(n)] for j in range(n)]
    remaining = list(range(n))
    previous = 1
    pivots: List[Fraction] = []

    while remaining:
        p = max(remaining, key=lambda i: M[i][i])
        if M[p][p] <= 0:
            break
        remaining.remove(p)
        for j in remaining:
            factor = Fraction(M[p][j], M[p][p])
            if factor:
                basis[j] = [bj - factor * bp for bj, bp in zip(basis[j], basis[p])]
        for index, i in enumerate(remaining):
            for j in remaining[index:]:
                value = (M[p][p] * M[i][j] - M[i][p] * M[p][j]) // previous
                M[i][j] = M[j][i] = value
        pivots.append(Fraction(M[p][p], previous * scale))
        previous = M[p][p]

    witness = None
    negative = [i for i in remaining if M[i][i] < 0]
    if negative:
        witness = basis[min(negative, key=lambda i: M[i][i])]
    else:
        for index, i in enumerate(remaining):
            j = next((j for j in remaining[index + 1:] if M[i][j] != 0), None)
            if j is not None:
                sign = 1 if M[i][j] > 0 else -1
                witness = [bi - sign * bj for bi, bj in zip(basis[i], basis[j])]
                break

    if witness is not None:
        witness = _integral(witness)
        return PsdCheck(False, len(pivots), tuple(pivots), tuple(witness))
    return PsdCheck(True, len(pivots), tuple(pivots))


def _integral(vector: Sequence[Fraction]) -> List[Fraction]:
    denominator = common_denominator(vector)
    return [Fraction(int(v * denominator)) for v in vector]


def quadratic_form(Q: Sequence[Sequence], v: Sequence) -> Fraction:
    """v^T Q v exactly."""
    n = len(v)
    return sum((to_exact(v[i]) * to_exact(Q[i][j]) * to_exact(v[j]) for i in range(n) for j in range(n)),
               Fraction(0))


# ---------------------------------------------------------------------------
# Exact model data
# ---------------------------------------------------------------------------

def _target(model: SdpModel) -> Dict[str, Fraction]:
    sign = 1 if model.sense is ObjectiveSense.MIN else -1
    return {name: sign * to_exact(model.objective.get(name, 0)) for name in model.variables}


def _stationarity(model: SdpModel, blocks: Sequence[Matrix], multipliers: Sequence[Fraction]) -> Dict[str, Fraction]:
    """sum_b <T_i^b, Y_b> + sum_e w_e a_ei for every variable i."""
    totals = {name: Fraction(0) for name in model.variables}
    for block, Y in zip(model.blocks, blocks):
        for name, entries in block.terms.items():
            totals[name] += _inner(entries, Y)
    for equality, w in zip(model.equalities, multipliers):
        if w:
            for name, coefficient in equality.coeffs.items():
                totals[name] += w * to_exact(coefficient)
    return totals


def _inner(entries, Y: Matrix) -> Fraction:
    total = Fraction(0)
    for i, j, value in entries:
        contribution = to_exact(value) * Y[i][j]
        total += contribution if i == j else 2 * contribution
    return total


def _dual_value(model: SdpModel, blocks: Sequence[Matrix], multipliers: Sequence[Fraction]) -> Fraction:
    value = sum((_inner(block.constant, Y) for block, Y in zip(model.blocks, blocks)), Fraction(0))
    value += sum((w * to_exact(eq.constant) for eq, w in zip(model.equalities, multipliers)), Fraction(0))
    return value if model.sense is ObjectiveSense.MAX else -value


def bound_from_dual_value(model: SdpModel, value: Fraction) -> Fraction:
    """
    Code bound implied by a certified objective bound.

    Models without a bound kind return the objective bound unchanged.

    Raises:
        CertificationError: If a reciprocal bound is not positive
    """
    kind = model.bound_kind
    if kind is BoundKind.RECIPROCAL:
        if value <= 0:
            raise CertificationError(f"Certified lower bound {value} on y is not positive", "claimed_bound")
        return (1 + value) / value
    if kind is BoundKind.PLUS_ONE:
        return 1 + value
    return value


# ---------------------------------------------------------------------------
# Building certificates
# ---------------------------------------------------------------------------

def _gram_round(Z: np.ndarray, max_denominator: int, shift: float) -> Matrix:
    """Rational PSD matrix V V^T near Z, with eigenvalues lifted by shift."""
    Z = (np.asarray(Z, dtype=float) + np.asarray(Z, dtype=float).T) / 2.0
    eigenvalues, vectors = np.linalg.eigh(Z)
    factor = vectors * np.sqrt(np.maximum(eigenvalues, 0.0) + shift)
    V = _unsymmetrized(factor, max_denominator)
    size = Z.shape[0]
    Y = [[Fraction(0)] * size for _ in range(size)]
    for i in range(size):
        for j in range(i, size):
            value = sum((V[i][k] * V[j][k] for k in range(size)), Fraction(0))
            Y[i][j] = Y[j][i] = value
    return Y


def _unsymmetrized(values: np.ndarray, max_denominator: int) -> Matrix:
    return [[Fraction(float(v)).limit_denominator(max_denominator) for v in row] for row in values]


def build_certificate(model: SdpModel, result: SolveResult, max_denominator: int,
                      shift: float = 0.0) -> RationalCertificate:
    """
    Round a floating dual to rationals and repair stationarity exactly.

    Each dual block is rounded through a Gram factor, so it is PSD before
    repair. Residuals are then removed by adjusting a greedy independent set
    of unknowns: equality multipliers first, then diagonal entries of blocks
    with the largest smallest eigenvalue. The result is not checked here;
    use verify_certificate.

    Raises:
        CertificationError: If the residual is outside the span of the
            adjustable unknowns
    """
    if max_denominator < 1:
        raise ValueError("max_denominator must be at least 1")
    if len(result.dual) != len(model.blocks):
        raise CertificationError("Solve result does not match the model's blocks", "dual_blocks")

    blocks = [_gram_round(_square_factorable(Z), max_denominator, shift) for Z in result.dual]
    multipliers = [rationalize(float(w), max_denominator) for w in result.equality_multipliers]
    target = _target(model)
    totals = _stationarity(model, blocks, multipliers)
    residual = {name: target[name] - totals[name] for name in model.variables}

    if any(residual.values()):
        _repair(model, result, blocks, multipliers, residual)

    value = _dual_value(model, blocks, multipliers)
    certificate = RationalCertificate(
        model_hash=model_hash(model),
        dual_blocks=tuple(tuple(tuple(row) for row in Y) for Y in blocks),
        equality_multipliers=tuple(multipliers),
        claimed_bound=bound_from_dual_value(model, value),
        bound_kind=model.bound_kind.value,
        max_denominator=max_denominator,
    )
    return certificate


def _square_factorable(Z) -> np.ndarray:
    Z = np.atleast_2d(np.asarray(Z, dtype=float))
    if Z.shape[0] != Z.shape[1]:
        raise CertificationError(f"Dual block has shape {Z.shape}", "dual_blocks")
    return Z


def _repair(model: SdpModel, result: SolveResult, blocks: List[Matrix], multipliers: List[Fraction],
            residual: Dict[str, Fraction]) -> None:
    index = model.variable_index
    n = len(model.variables)

    candidates: List[Tuple[Tuple, List[Fraction]]] = []
    for e, equality in enumerate(model.equalities):
        column = [Fraction(0)] * n
        for name, coefficient in equality.coeffs.items():
            column[index[name]] += to_exact(coefficient)
        candidates.append((("w", e), column))

    margins = []
    for b, (block, Z) in enumerate(zip(model.blocks, result.dual)):
        Z = np.atleast_2d(np.asarray(Z, dtype=float))
        margin = float(np.linalg.eigvalsh((Z + Z.T) / 2.0)[0])
        for p in range(block.size):
            margins.append((margin, float(Z[p, p]), b, p))
    margins.sort(key=lambda item: (-item[0], -item[1]))

    entry_columns = _diagonal_columns(model, index)
    for _, _, b, p in margins:
        column = entry_columns.get((b, p))
        if column is not None:
            candidates.append((("Y", b, p), column))

    basis = ExactBasis(n)
    chosen = []
    for key, column in candidates:
        if basis.rank == n:
            break
        if any(column) and basis.try_add(column):
            chosen.append((key, column))

    rhs = [residual[name] for name in model.variables]
    matrix = [[column[i] for _, column in chosen] for i in range(n)]
    delta = exact_solve(matrix, rhs) if chosen else None
    if delta is None:
        worst = max(model.variables, key=lambda name: abs(residual[name]))
        raise CertificationError(
            f"Stationarity residual {float(residual[worst]):.3e} at variable {worst!r} cannot be repaired",
            worst,
        )

    for (key, _), step in zip(chosen, delta):
        if key[0] == "w":
            multipliers[key[1]] += step
        else:
            _, b, p = key
            blocks[b][p][p] += step


def _diagonal_columns(model: SdpModel, index: Dict[str, int]) -> Dict[Tuple[int, int], List[Fraction]]:
    """Column of the stationarity map for each diagonal entry Y_b[p][p]."""
    n = len(model.variables)
    columns: Dict[Tuple[int, int], List[Fraction]] = {}
    for b, block in enumerate(model.blocks):
        for name, entries in block.terms.items():
            for i, j, value in entries:
                if i != j:
                    continue
                column = columns.setdefault((b, i), [Fraction(0)] * n)
                column[index[name]] += to_exact(value)
    return columns


# ---------------------------------------------------------------------------
# Verification
# ---------------------------------------------------------------------------

def verify_certificate(model: SdpModel, certificate: RationalCertificate) -> Fraction:
    """
    Check a certificate in exact arithmetic and return the verified bound.

    Order of checks: model binding, shapes, stationarity for every
    variable, PSD of every block, then the claimed bound.

    Raises:
        CertificationError: Naming the first violated constraint
    """
    if certificate.model_hash != model_hash(model):
        raise CertificationError("Certificate was issued for a different model", "model_hash")
    if certificate.bound_kind != model.bound_kind.value:
        raise CertificationError(
            f"Certificate bound kind {certificate.bound_kind!r} does not match model "
            f"{model.bound_kind.value!r}", "bound_kind",
        )
    if len(certificate.dual_blocks) != len(model.blocks):
        raise CertificationError(
            f"Certificate has {len(certificate.dual_blocks)} blocks, model has {len(model.blocks)}", "dual_blocks"
        )
    if len(certificate.equality_multipliers) != len(model.equalities):
        raise CertificationError("Certificate equality multipliers do not match the model", "equality_multipliers")

    blocks = []
    for block, Y in zip(model.blocks, certificate.dual_blocks):
        if len(Y) != block.size or any(len(row) != block.size for row in Y):
            raise CertificationError(f"Dual block for {block.label!r} has the wrong size", block.label)
        blocks.append([[to_exact(v) for v in row] for row in Y])
    multipliers = [to_exact(w) for w in certificate.equality_multipliers]

    target = _target(model)
    totals = _stationarity(model, blocks, multipliers)
    for name in model.variables:
        if totals[name] != target[name]:
            _reject(model, f"Equality residual {totals[name] - target[name]} at variable {name!r}", name)

    for block, Y in zip(model.blocks, blocks):
        label = block.label or "block"
        for i in range(block.size):
            for j in range(i + 1, block.size):
                if Y[i][j] != Y[j][i]:
                    _reject(model, f"Dual block {label!r} is not symmetric", label)
        check = check_psd_exact(Y)
        if not check.is_psd:
            value = quadratic_form(Y, check.witness)
            _reject(model, f"Dual block {label!r} is not PSD: witness gives {value}", label)

    bound = bound_from_dual_value(model, _dual_value(model, blocks, multipliers))
    if bound != certificate.claimed_bound:
        _reject(model, f"Claimed bound {certificate.claimed_bound} differs from verified {bound}", "claimed_bound")

    logger.info("certificate_verified", formulation=model.formulation, bound=str(bound),
                approx=float(bound))
    return bound


def _reject(model: SdpModel, message: str, constraint: str) -> None:
    logger.warning("certificate_rejected", formulation=model.formulation, constraint=constraint, reason=message)
    raise CertificationError(message, constraint)


def _float_residual(model: SdpModel, result: SolveResult) -> float:
    target = {name: float(v) for name, v in _target(model).items()}
    index = model.variable_index
    totals = np.zeros(len(model.variables))
    for block, Z in zip(model.blocks, result.dual):
        Z = np.atleast_2d(np.asarray(Z, dtype=float))
        for name in block.terms:
            totals[index[name]] += float(np.sum(block.dense_term(name) * Z))
    for equality, w in zip(model.equalities, result.equality_multipliers):
        for name, coefficient in equality.coeffs.items():
            totals[index[name]] += float(w) * float(coefficient)
    return float(np.max(np.abs(np.array([target[name] for name in model.variables]) - totals), initial=0.0))


def certify_result(model: SdpModel, result: SolveResult,
                   max_denominator: int = Config.CERTIFY_MAX_DENOMINATOR,
                   max_cap: int = Config.CERTIFY_MAX_DENOMINATOR_CAP) -> Tuple[RationalCertificate, Fraction]:
    """
    Round, repair and verify, growing the denominator on failure.

    Each denominator is tried with no eigenvalue lift and with lifts of
    10 and 1000 times the floating stationarity residual, so diagonal
    repairs cannot push a block out of the PSD cone.

    Returns:
        (certificate, verified bound)

    Raises:
        CertificationError: With the last rejection if every attempt fails
    """
    residual = _float_residual(model, result)
    shifts = [0.0] + [max(residual, 1e-15) * factor for factor in (10.0, 1000.0)]
    denominator = max_denominator
    last_error: Optional[CertificationError] = None
    while denominator <= max_cap:
        for shift in shifts:
            try:
                certificate = build_certificate(model, result, denominator, shift)
                bound = verify_certificate(model, certificate)
                logger.info("certificate_accepted", formulation=model.formulation,
                            max_denominator=denominator, shift=shift, bound=str(bound))
                return certificate, bound
            except CertificationError as e:
                last_error = e
                logger.debug("certificate_attempt_failed", max_denominator=denominator,
                              shift=shift, constraint=e.constraint, reason=str(e))
        denominator *= Config.CERTIFY_DENOMINATOR_GROWTH

    raise CertificationError(
        f"No certificate up to denominator {max_cap}: {last_error}",
        last_error.constraint if last_error else None,
    )
