"""
Formulations Service: builders that turn code-bound relaxations into
SdpModel instances, plus the Delsarte LP reference bounds.

Relaxations:
    sdp0            min y over normalized power sums x_1..x_{2m-1}
    sdp0_antipodal  sdp0 with every odd moment fixed to -y
    sdpa            max c over per-interval power sums with side constraints
    sdpa_subset     sdpa for codes on a subset cut out by anchor points
    sdphat          max sum c_j over a partition of the subset into cells
"""

import math
from fractions import Fraction
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
import structlog
import sympy
from scipy.optimize import linprog

from app.config import Config
from app.models.report import AdConstraint, AdKind, BoundReport, PartitionCell, PartitionSpec
from app.models.sdp import (
    AffineBlock,
    BoundKind,
    LinearEquality,
    ObjectiveSense,
    SdpModel,
    SolveResult,
    SolveStatus,
    SolverSettings,
)
from app.models.space import SpaceKind, ZonalFamily
from app.services.moments import hankel_pattern
from app.services.sdpmodel import (
    CONSTANT,
    LinearExpr,
    ModelError,
    assemble,
    expr_add,
    matrix_block,
    scalar_block,
)
from app.services.solver import solve
from app.services.spaces import gegenbauer_family
from app.utils.rationals import exact_cos, is_exact, to_exact


logger = structlog.get_logger(__name__)

# Breakpoints of side constraints must match an interval endpoint this closely
BREAKPOINT_TOL = 1e-12

_ANGLES = {"pi": sympy.pi, "sqrt": sympy.sqrt, "cos": sympy.cos}

_T = sympy.Symbol("t")

# Points of a hemisphere pi/3-code below height 1/2 project onto the equator
# with pairwise cosines at most this value
EQUATOR_COSINE = 1 / math.sqrt(3)
# pi/3-code points that fit in the pi/6-cap around the opposite pole
OPPOSITE_CAP_POINTS = 2


class FormulationError(ValueError):
    """Raised when a relaxation cannot be built from the given data."""
    pass


# ---------------------------------------------------------------------------
# Shared pieces
# ---------------------------------------------------------------------------

def _check_interval(family: ZonalFamily, a, b, m: Optional[int] = None) -> None:
    space = family.space
    low, high = space.tau_range
    if not a < b:
        raise FormulationError(f"Interval [{a}, {b}] must have a < b")
    if a < low or b > high:
        raise FormulationError(f"Interval [{a}, {b}] is not inside the tau range [{low}, {high}]")
    if a <= space.tau0 <= b:
        raise FormulationError(f"Interval [{a}, {b}] contains tau0 = {space.tau0}")
    if m is not None:
        if m < 1:
            raise FormulationError(f"Order m must be at least 1, got {m}")
        if family.k_max < 2 * m - 1:
            raise FormulationError(
                f"Order m={m} needs Phi_k up to k={2 * m - 1}, family stops at {family.k_max}"
            )


def _hankel_blocks(m: int, a, b, moment: Callable[[int], LinearExpr], label: str) -> List[AffineBlock]:
    """R, F+ and F- blocks whose moment k is the linear expression moment(k)."""
    blocks = []
    for name, pattern in hankel_pattern(m, a, b).items():
        entries = [
            [expr_add(*[moment(k) for k in entry], scales=list(entry.values())) for entry in row]
            for row in pattern
        ]
        blocks.append(matrix_block(entries, f"{label}.{name}"))
    return blocks


def _nontrivial(block: AffineBlock) -> bool:
    """Scalar blocks with no variables and a nonnegative constant carry no information."""
    if block.terms:
        return True
    if block.size == 1:
        value = sum((v for _, _, v in block.constant), 0)
        if value < 0:
            raise FormulationError(f"Constraint {block.label!r} is infeasible: {value} >= 0")
        return False
    return True


def _describe(a, b) -> List[str]:
    return [_format(a), _format(b)]


def _format(value) -> str:
    if is_exact(value):
        value = to_exact(value)
        return f"{value.numerator}/{value.denominator}"
    return repr(float(value))


def bound_from_y(y_star):
    """
    Code-size bound (1 + y) / y from the optimal sdp0 value.

    Raises:
        FormulationError: If y_star is not positive
    """
    if y_star <= 0:
        raise FormulationError(f"y* must be positive for a finite bound, got {y_star}")
    return (1 + y_star) / y_star


# ---------------------------------------------------------------------------
# SDP0
# ---------------------------------------------------------------------------

def build_sdp0(family: ZonalFamily, a, b, m: int) -> SdpModel:
    """
    The plain moment relaxation.

    Variables y, x1..x{2m-1} (normalized power sums over ordered pairs of
    distinct points); minimize y subject to y + sum_d p_kd x_d >= 0 for
    k = 1..2m-1 and the normalized Hankel blocks on [a, b].

    Raises:
        FormulationError: If k_max < 2m-1 or [a, b] is not a valid distance interval
    """
    _check_interval(family, a, b, m)
    degree = 2 * m - 1
    variables = ["y"] + [f"x{d}" for d in range(1, degree + 1)]

    def moment(k: int) -> LinearExpr:
        return {CONSTANT: 1} if k == 0 else {f"x{k}": 1}

    blocks = []
    for k in range(1, degree + 1):
        expr = expr_add({"y": 1, CONSTANT: family.coefficient(k, 0)},
                        *[{f"x{d}": family.coefficient(k, d)} for d in range(1, k + 1)])
        blocks.append(scalar_block(expr, f"phi[{k}]"))
    blocks += _hankel_blocks(m, a, b, moment, "H")

    return assemble(
        variables, {"y": 1}, blocks, ObjectiveSense.MIN,
        metadata={
            "formulation": "sdp0",
            "bound_kind": BoundKind.RECIPROCAL.value,
            "space": family.space.describe(),
            "interval": _describe(a, b),
            "m": m,
        },
    )


def build_sdp0_antipodal(family: ZonalFamily, a, b, m: int) -> SdpModel:
    """
    sdp0 for antipodal codes: each point's antipode is the only partner at
    tau = -1, so every odd normalized moment equals -y.

    Variables y, x2, x4, ..., x{2m-2}.
    """
    if family.space.kind is not SpaceKind.SPHERE:
        raise FormulationError("Antipodal codes are defined on the sphere only")
    _check_interval(family, a, b, m)
    if a != -1:
        raise FormulationError(f"Antipodal codes need -1 in the interval, got a = {a}")
    degree = 2 * m - 1
    variables = ["y"] + [f"x{d}" for d in range(2, degree, 2)]

    def moment(k: int) -> LinearExpr:
        if k == 0:
            return {CONSTANT: 1}
        return {"y": -1} if k % 2 else {f"x{k}": 1}

    blocks = []
    for k in range(1, degree + 1):
        expr = expr_add({"y": 1, CONSTANT: family.coefficient(k, 0)},
                        *[moment(d) for d in range(1, k + 1)],
                        scales=[1] + [family.coefficient(k, d) for d in range(1, k + 1)])
        block = scalar_block(expr, f"phi[{k}]")
        if _nontrivial(block):
            blocks.append(block)
    blocks += _hankel_blocks(m, a, b, moment, "H")

    return assemble(
        variables, {"y": 1}, blocks, ObjectiveSense.MIN,
        metadata={
            "formulation": "sdp0_antipodal",
            "bound_kind": BoundKind.RECIPROCAL.value,
            "space": family.space.describe(),
            "interval": _describe(a, b),
            "m": m,
        },
    )


# ---------------------------------------------------------------------------
# Side constraints
# ---------------------------------------------------------------------------

def cap_thresholds(theta, k_max: int) -> List[float]:
    """
    t_k = sqrt(cos(theta) + (1 - cos(theta)) / (k + 1)) for k = 1..k_max.

    A theta-code has at most k points within angle arccos(t_k) of any
    direction, so at most k * c ordered pairs have tau in [-1, -t_k).
    """
    cosine = float(exact_cos(theta))
    if not -1 < cosine < 1:
        raise FormulationError(f"theta must lie in (0, pi), got {theta}")
    if k_max < 1:
        raise FormulationError(f"k_max must be at least 1, got {k_max}")
    return [math.sqrt(cosine + (1 - cosine) / (k + 1)) for k in range(1, k_max + 1)]


def pfender_constraint(theta) -> AdConstraint:
    """
    Pfender's inequality for theta-codes: over the pairs with tau below
    -sqrt(cos theta), s_2 <= cos(theta) s_0 + (1 - cos theta) c.
    """
    return AdConstraint(AdKind.PFENDER, theta=theta, label=f"pfender({theta})")


def cap_count_constraint(theta, k: int) -> AdConstraint:
    """At most k * c ordered pairs with tau in [-1, -t_k)."""
    if k < 1:
        raise FormulationError(f"Cap count k must be at least 1, got {k}")
    return AdConstraint(AdKind.CAP_COUNT, theta=theta, k=k, label=f"cap_count({theta},{k})")


def linear_constraint(coefficients: Dict[str, object], constant=0, label: str = "") -> AdConstraint:
    """constant + sum coefficients[v] * v >= 0 over model variables."""
    return AdConstraint(AdKind.LINEAR_CUSTOM, coefficients=dict(coefficients), constant=constant,
                        label=label or "linear")


def render_ad(ad: AdConstraint, breakpoints: Optional[Sequence] = None,
              interval_var: Optional[Callable[[int, int], str]] = None,
              count_var: str = "c") -> List[AffineBlock]:
    """
    Scalar blocks for a side constraint.

    Pfender and cap-count constraints need the interval breakpoints of an
    sdpa-type model; interval_var(i, k) names the power-sum variable of
    interval i (0-based) and degree k.

    Raises:
        FormulationError: If the constraint's threshold is not a breakpoint
    """
    if ad.kind is AdKind.LINEAR_CUSTOM:
        expr = expr_add({CONSTANT: ad.constant}, ad.coefficients)
        return [scalar_block(expr, f"ad:{ad.label}")]

    if breakpoints is None or interval_var is None:
        raise FormulationError(f"{ad.kind.value} constraints need interval breakpoints")
    cosine = exact_cos(ad.theta)

    if ad.kind is AdKind.PFENDER:
        threshold = -math.sqrt(float(cosine))
        below = _intervals_below(breakpoints, threshold, ad.label)
        expr = {count_var: 1 - cosine}
        for i in below:
            expr = expr_add(expr, {interval_var(i, 0): cosine, interval_var(i, 2): -1})
        return [scalar_block(expr, f"ad:{ad.label}")]

    threshold = -cap_thresholds(ad.theta, ad.k)[-1]
    below = _intervals_below(breakpoints, threshold, ad.label)
    expr = {count_var: ad.k}
    for i in below:
        expr = expr_add(expr, {interval_var(i, 0): -1})
    return [scalar_block(expr, f"ad:{ad.label}")]


def _intervals_below(breakpoints: Sequence, threshold: float, label: str) -> List[int]:
    """Indices of the intervals [u_i, u_{i+1}) lying below threshold."""
    for index, u in enumerate(breakpoints):
        if abs(float(u) - threshold) <= BREAKPOINT_TOL:
            return list(range(index))
    raise FormulationError(
        f"Constraint {label} needs breakpoint {threshold!r}, which is not among "
        f"{[float(u) for u in breakpoints]}"
    )


# ---------------------------------------------------------------------------
# SDPA and SDPA on subsets
# ---------------------------------------------------------------------------

def _interval_var(i: int, k: int) -> str:
    return f"x[{i + 1},{k}]"


def _check_breakpoints(breakpoints: Sequence, a, b) -> None:
    if len(breakpoints) < 2:
        raise FormulationError("Need at least the two breakpoints a and b")
    if breakpoints[0] != a or breakpoints[-1] != b:
        raise FormulationError(f"Breakpoints must run from a={a} to b={b}")
    if any(not u < v for u, v in zip(breakpoints, breakpoints[1:])):
        raise FormulationError(f"Breakpoints must be strictly increasing: {list(breakpoints)}")


def _sdpa_parts(family: ZonalFamily, a, b, breakpoints: Sequence, ad: Sequence[AdConstraint], m: int):
    _check_interval(family, a, b, m)
    breakpoints = list(breakpoints) if breakpoints else [a, b]
    _check_breakpoints(breakpoints, a, b)
    degree = 2 * m - 1
    intervals = len(breakpoints) - 1

    variables = ["c", "z"] + [_interval_var(i, k) for i in range(intervals) for k in range(degree + 1)]
    blocks = [matrix_block([[{CONSTANT: 1}, {"c": 1}], [{"c": 1}, {"z": 1}]], "gamma")]

    for k in range(1, degree + 1):
        expr = {"c": 1}
        for d in range(k + 1):
            for i in range(intervals):
                expr = expr_add(expr, {_interval_var(i, d): family.coefficient(k, d)})
        blocks.append(scalar_block(expr, f"phi[{k}]"))

    for i in range(intervals):
        blocks += _hankel_blocks(m, breakpoints[i], breakpoints[i + 1],
                                 lambda k, i=i: {_interval_var(i, k): 1}, f"H[{i + 1}]")

    for constraint in ad:
        blocks += render_ad(constraint, breakpoints, _interval_var)

    pair_count = expr_add({"z": 1, "c": -1}, *[{_interval_var(i, 0): -1} for i in range(intervals)])
    equalities = [LinearEquality(pair_count, Fraction(0), "pair_count")]
    return variables, blocks, equalities, breakpoints


def build_sdpa(family: ZonalFamily, a, b, breakpoints: Optional[Sequence], ad: Sequence[AdConstraint],
               m: int) -> SdpModel:
    """
    Interval-partitioned relaxation with side constraints.

    Variables c (code size), z (= c^2 relaxed to z >= c^2) and x[i,k], the
    power sums over ordered pairs with tau in [u_i, u_{i+1}). Maximize c.

    Raises:
        FormulationError: On unordered breakpoints or a side-constraint
            threshold that is not a breakpoint
    """
    variables, blocks, equalities, breakpoints = _sdpa_parts(family, a, b, breakpoints, ad, m)
    _check_custom_ad(ad, variables)
    return assemble(
        variables, {"c": 1}, blocks, ObjectiveSense.MAX, equalities,
        metadata={
            "formulation": "sdpa",
            "bound_kind": BoundKind.DIRECT.value,
            "space": family.space.describe(),
            "interval": _describe(a, b),
            "breakpoints": [_format(u) for u in breakpoints],
            "ad": [constraint.label for constraint in ad],
            "m": m,
        },
    )


def build_sdpa_subset(family: ZonalFamily, a, b, anchors: Sequence[Sequence],
                      anchor_intervals: Sequence[Tuple], ad: Sequence[AdConstraint], m: int,
                      breakpoints: Optional[Sequence] = None) -> SdpModel:
    """
    sdpa for codes inside {x : alpha_i <= tau(x, q_i) <= beta_i}.

    Adds y[i,k] = sum over code points of tau(q_i, .)^k, the (r+1)-square
    zonal Gram blocks G_k of the anchors and the code, and Hankel blocks
    for y[i,.] on [alpha_i, beta_i]. With no anchors the model is sdpa.
    """
    r = len(anchors)
    if len(anchor_intervals) != r:
        raise FormulationError(f"Got {len(anchor_intervals)} anchor intervals for {r} anchors")
    for alpha, beta in anchor_intervals:
        if alpha > beta:
            raise FormulationError(f"Anchor interval [{alpha}, {beta}] is empty")
    _check_anchors(family, anchors)

    variables, blocks, equalities, breakpoints = _sdpa_parts(family, a, b, breakpoints, ad, m)
    degree = 2 * m - 1
    intervals = len(breakpoints) - 1
    anchor_var = lambda i, k: f"y[{i + 1},{k}]"
    variables += [anchor_var(i, k) for i in range(r) for k in range(degree + 1)]
    _check_custom_ad(ad, variables)

    if r:
        for k in range(degree + 1):
            entries = [[None] * (r + 1) for _ in range(r + 1)]
            for p in range(r):
                for q in range(r):
                    entries[p][q] = {CONSTANT: family.evaluate(k, anchors[p][q])}
                cross = expr_add(*[{anchor_var(p, d): family.coefficient(k, d)} for d in range(k + 1)])
                entries[p][r] = entries[r][p] = cross
            # F_k(C, C): the diagonal pairs contribute c
            code = expr_add({"c": 1}, *[{_interval_var(i, d): family.coefficient(k, d)}
                                        for d in range(k + 1) for i in range(intervals)])
            entries[r][r] = code
            blocks.append(matrix_block(entries, f"G[{k}]"))

        for i, (alpha, beta) in enumerate(anchor_intervals):
            blocks += _hankel_blocks(m, alpha, beta, lambda k, i=i: {anchor_var(i, k): 1}, f"A[{i + 1}]")
            equalities.append(LinearEquality({anchor_var(i, 0): 1, "c": -1}, Fraction(0), f"anchor_count[{i + 1}]"))

    return assemble(
        variables, {"c": 1}, blocks, ObjectiveSense.MAX, equalities,
        metadata={
            "formulation": "sdpa" if r == 0 else "sdpa_subset",
            "bound_kind": BoundKind.DIRECT.value,
            "space": family.space.describe(),
            "interval": _describe(a, b),
            "breakpoints": [_format(u) for u in breakpoints],
            "anchors": r,
            "ad": [constraint.label for constraint in ad],
            "m": m,
        },
    )


def _check_anchors(family: ZonalFamily, anchors: Sequence[Sequence]) -> None:
    r = len(anchors)
    for p in range(r):
        if len(anchors[p]) != r:
            raise FormulationError("Anchor tau matrix must be square")
        if anchors[p][p] != family.space.tau0:
            raise FormulationError(f"Anchor tau matrix diagonal must be tau0, got {anchors[p][p]}")
        for q in range(r):
            if anchors[p][q] != anchors[q][p]:
                raise FormulationError("Anchor tau matrix must be symmetric")


def _check_custom_ad(ad: Sequence[AdConstraint], variables: Sequence[str]) -> None:
    known = set(variables)
    for constraint in ad:
        if constraint.kind is AdKind.LINEAR_CUSTOM:
            unknown = [name for name in constraint.coefficients if name not in known]
            if unknown:
                raise FormulationError(f"Constraint {constraint.label} uses unknown variables {unknown}")


# ---------------------------------------------------------------------------
# Partitions and SDP-hat
# ---------------------------------------------------------------------------

def _angle(value):
    if isinstance(value, sympy.Basic):
        return value
    if isinstance(value, str):
        return sympy.sympify(value, locals=_ANGLES)
    if isinstance(value, Fraction):
        return sympy.Rational(value.numerator, value.denominator)
    return sympy.Float(value, 30)


def _cos_value(angle):
    """cos of a sympy angle: Fraction when rational, float otherwise."""
    cosine = sympy.cos(angle)
    if cosine.is_Rational:
        return Fraction(int(cosine.p), int(cosine.q))
    return float(cosine.evalf(30))


def cell_pair_interval(cell_i: PartitionCell, cell_j: PartitionCell, a, b, same: bool = False):
    """
    Range of tau between distinct points of two cells (colatitude ranges
    about a common pole), clipped to [a, b].

    Returns:
        (a_ij, b_ij), or None when no pair of points of the two cells has tau in [a, b]
    """
    lo_i, hi_i = _angle(cell_i.theta_lo), _angle(cell_i.theta_hi)
    lo_j, hi_j = _angle(cell_j.theta_lo), _angle(cell_j.theta_hi)
    if same:
        lower = max(a, _cos_value(sympy.Min(sympy.pi, 2 * hi_i)))
        upper = b
    else:
        min_angle = sympy.Max(0, lo_i - hi_j, lo_j - hi_i)
        max_angle = sympy.Min(sympy.pi, hi_i + hi_j)
        lower = max(a, _cos_value(max_angle))
        upper = min(b, _cos_value(min_angle))
    if lower > upper:
        return None
    return lower, upper


def make_partition(anchors: Sequence[Sequence], cells: Sequence[PartitionCell], a, b,
                   region: str = "") -> PartitionSpec:
    """PartitionSpec with pair intervals computed by cell_pair_interval."""
    for cell in cells:
        if _angle(cell.theta_lo) > _angle(cell.theta_hi):
            raise FormulationError(f"Cell [{cell.theta_lo}, {cell.theta_hi}] is empty")
        if len(cell.anchor_intervals) != len(anchors):
            raise FormulationError("Every cell needs one interval per anchor")
    ordered = sorted(cells, key=lambda cell: float(_angle(cell.theta_lo)))
    for left, right in zip(ordered, ordered[1:]):
        if _angle(right.theta_lo) < _angle(left.theta_hi):
            raise FormulationError("Cells overlap")

    pair_intervals = {}
    for i in range(len(cells)):
        for j in range(i, len(cells)):
            pair_intervals[(i, j)] = cell_pair_interval(cells[i], cells[j], a, b, same=(i == j))
    return PartitionSpec(tuple(tuple(row) for row in anchors), tuple(cells), pair_intervals, region)


def one_sided_partition(n: int) -> PartitionSpec:
    """
    Three colatitude cells [0, pi/4], (pi/4, 2pi/5), [2pi/5, pi/2] of the
    closed hemisphere about e_0, with e_0 as the single anchor and the
    kissing interval [-1, 1/2].
    """
    if n < 3:
        raise FormulationError(f"Sphere dimension must be at least 3, got {n}")
    edges = [sympy.Integer(0), sympy.pi / 4, 2 * sympy.pi / 5, sympy.pi / 2]
    cells = []
    for lo, hi in zip(edges, edges[1:]):
        cells.append(PartitionCell(lo, hi, ((_cos_value(hi), _cos_value(lo)),)))
    return make_partition(((Fraction(1),),), cells, Fraction(-1), Fraction(1, 2), region=f"hemisphere(n={n})")


def whole_space_partition(family: ZonalFamily, a, b) -> PartitionSpec:
    """Single cell covering the space, no anchors."""
    cell = PartitionCell(sympy.Integer(0), sympy.pi, ())
    return PartitionSpec((), (cell,), {(0, 0): (a, b)}, region=family.space.describe())


def build_sdphat(family: ZonalFamily, a, b, partition: PartitionSpec, ad: Sequence[AdConstraint],
                 m: int) -> SdpModel:
    """
    Cell-partitioned relaxation.

    Variables c[j] (points in cell j), x[i,j,k] (i <= j, power sums over
    all pairs of cells i and j, coincident pairs included) and y[i,j,k]
    (power sums of tau between anchor i and cell j). Maximize sum c[j].

    Raises:
        FormulationError: On an inconsistent partition, an empty pair
            interval or an unsupported side constraint
    """
    _check_interval(family, a, b, m)
    r, d = partition.r, partition.d
    degree = 2 * m - 1
    tau0 = family.space.tau0
    if d < 1:
        raise FormulationError("Partition needs at least one cell")
    _check_anchors(family, partition.anchors)
    for cell in partition.cells:
        if len(cell.anchor_intervals) != r:
            raise FormulationError("Every cell needs one interval per anchor")

    count = lambda j: f"c[{j + 1}]"
    pair = lambda i, j, k: f"x[{min(i, j) + 1},{max(i, j) + 1},{k}]"
    anchor = lambda i, j, k: f"y[{i + 1},{j + 1},{k}]"

    variables = [count(j) for j in range(d)]
    variables += [pair(i, j, k) for i in range(d) for j in range(i, d) for k in range(degree + 1)]
    variables += [anchor(i, j, k) for i in range(r) for j in range(d) for k in range(degree + 1)]

    blocks: List[AffineBlock] = []
    for k in range(degree + 1):
        size = r + d
        entries = [[None] * size for _ in range(size)]
        for p in range(r):
            for q in range(r):
                entries[p][q] = {CONSTANT: family.evaluate(k, partition.anchors[p][q])}
            for j in range(d):
                entries[p][r + j] = entries[r + j][p] = expr_add(
                    *[{anchor(p, j, l): family.coefficient(k, l)} for l in range(k + 1)])
        for i in range(d):
            for j in range(d):
                entries[r + i][r + j] = expr_add(*[{pair(i, j, l): family.coefficient(k, l)} for l in range(k + 1)])
        blocks.append(matrix_block(entries, f"gamma[{k}]"))

    for i in range(r):
        for j, cell in enumerate(partition.cells):
            alpha, beta = cell.anchor_intervals[i]
            if alpha > beta:
                raise FormulationError(f"Anchor interval of cell {j + 1} is empty")
            blocks += _hankel_blocks(m, alpha, beta, lambda k, i=i, j=j: {anchor(i, j, k): 1},
                                     f"A[{i + 1},{j + 1}]")

    for i in range(d):
        for j in range(i, d):
            interval = partition.pair_intervals.get((i, j))
            if interval is None:
                raise FormulationError(f"Pair interval of cells {i + 1} and {j + 1} is empty")
            low, high = interval
            if i == j:
                # coincident pairs sit at tau0, outside [low, high]
                moment = lambda k, i=i: {pair(i, i, k): 1, count(i): -(tau0 ** k)}
            else:
                moment = lambda k, i=i, j=j: {pair(i, j, k): 1}
            if low == high:
                raise FormulationError(f"Pair interval of cells {i + 1} and {j + 1} is a single point")
            blocks += _hankel_blocks(m, low, high, lambda k, f=moment: expr_add(f(k)),
                                     f"P[{i + 1},{j + 1}]")

    size = d + 1
    entries = [[None] * size for _ in range(size)]
    entries[0][0] = {CONSTANT: 1}
    for j in range(d):
        entries[0][j + 1] = entries[j + 1][0] = {count(j): 1}
        for i in range(d):
            entries[i + 1][j + 1] = {pair(i, j, 0): 1}
    blocks.append(matrix_block(entries, "counts"))
    blocks += [scalar_block({count(j): 1}, f"nonnegative[{j + 1}]") for j in range(d)]

    for constraint in ad:
        if constraint.kind is not AdKind.LINEAR_CUSTOM:
            raise FormulationError(f"{constraint.kind.value} constraints are not defined on partitions")
    _check_custom_ad(ad, variables)
    blocks += [block for constraint in ad for block in render_ad(constraint)]

    equalities = [
        LinearEquality({anchor(i, j, 0): 1, count(j): -1}, Fraction(0), f"anchor_count[{i + 1},{j + 1}]")
        for i in range(r) for j in range(d)
    ]

    return assemble(
        variables, {count(j): 1 for j in range(d)}, blocks, ObjectiveSense.MAX, equalities,
        metadata={
            "formulation": "sdphat",
            "bound_kind": BoundKind.DIRECT.value,
            "space": family.space.describe(),
            "interval": _describe(a, b),
            "region": partition.region,
            "anchors": r,
            "cells": d,
            "ad": [constraint.label for constraint in ad],
            "m": m,
        },
    )


# ---------------------------------------------------------------------------
# Solving and reporting
# ---------------------------------------------------------------------------

def bound_from_objective(model: SdpModel, objective):
    """Code-size bound implied by an objective value of the model."""
    kind = model.bound_kind
    if kind is BoundKind.RECIPROCAL:
        return bound_from_y(objective)
    if kind is BoundKind.PLUS_ONE:
        return 1 + objective
    if kind is BoundKind.DIRECT:
        return objective
    raise FormulationError(f"Model {model.formulation!r} does not encode a code bound")


def solve_bound(model: SdpModel, settings: Optional[SolverSettings] = None,
                iteration_log=None) -> Tuple[BoundReport, SolveResult]:
    """
    Solve a relaxation and convert its optimum into a BoundReport.

    The bound is left empty unless the solve is optimal; a numerical-limit
    result can still be rescued by certification.
    """
    result = solve(model, settings, iteration_log)
    bound = None
    notes = []
    if result.status is SolveStatus.OPTIMAL:
        try:
            bound = float(bound_from_objective(model, result.objective))
        except FormulationError as e:
            notes.append(str(e))
    else:
        notes.append(result.message or result.status.value)

    report = BoundReport(
        formulation=model.formulation,
        m=model.metadata.get("m"),
        status=result.status.value,
        bound=bound,
        objective=result.objective,
        variables=dict(result.x),
        notes=notes,
    )
    logger.info("bound_computed", formulation=model.formulation, m=report.m,
                status=report.status, bound=bound)
    return report, result


# ---------------------------------------------------------------------------
# Delsarte LP
# ---------------------------------------------------------------------------

def lp_grid(family: ZonalFamily, a, b, grid_points: int) -> np.ndarray:
    """Equidistant points of [a, b]; the integer points for Hamming spaces."""
    if family.space.kind is SpaceKind.HAMMING:
        return np.arange(math.ceil(float(a)), math.floor(float(b)) + 1, dtype=float)
    if grid_points < 2:
        raise FormulationError(f"grid_points must be at least 2, got {grid_points}")
    return np.linspace(float(a), float(b), grid_points)


def lp_dual_bound(family: ZonalFamily, a, b, N: int, grid_points: int = Config.LP_GRID_POINTS,
                  refinement_rounds: int = Config.LP_REFINEMENT_ROUNDS) -> BoundReport:
    """
    Delsarte LP bound with polynomial degree N.

    Minimizes sum f_k subject to f_k >= 0 and sum f_k Phi_k(t) <= -1 on a
    grid of [a, b]. Points where the resulting f = 1 + sum f_k Phi_k is
    positive between grid points are added and the LP re-solved. The final
    maximum v of f on [a, b] comes from exact root isolation
    (polynomial_upper_bound); a positive v is absorbed by lowering f_0 to
    1 - v, giving the valid bound (1 - v + sum f_k) / (1 - v).

    Raises:
        FormulationError: If N exceeds k_max or the LP has no solution
    """
    if N < 1 or N > family.k_max:
        raise FormulationError(f"Degree N must lie in [1, {family.k_max}], got {N}")
    if a > b:
        raise FormulationError(f"Interval [{a}, {b}] is empty")
    exact_grid = family.space.kind is SpaceKind.HAMMING
    grid = lp_grid(family, a, b, grid_points)
    if len(grid) == 0:
        raise FormulationError(f"No distances of the space lie in [{a}, {b}]")

    rounds = 0
    while True:
        f = _solve_grid_lp(family, grid, N)
        if exact_grid:
            break
        # floating maxima only choose refinement points
        peak, points = _positive_maxima(family, f, float(a), float(b))
        if peak <= 1e-12 or rounds >= refinement_rounds:
            break
        grid = np.union1d(grid, points)
        rounds += 1

    violation = Fraction(0)
    if not exact_grid:
        polynomial = _exact_polynomial(family, [1] + [to_exact(float(v)) for v in f])
        violation = max(polynomial_upper_bound(polynomial, a, b), Fraction(0))

    notes = [f"grid={len(grid)}", f"refinement_rounds={rounds}"]
    if violation > 0:
        if violation >= 1:
            raise FormulationError(f"Grid LP solution violates the sign condition by {float(violation)}")
        notes.append(f"f0_inflated_by={float(violation):.3e}")
    total = sum((to_exact(float(v)) for v in f), Fraction(0))
    bound = float((1 - violation + total) / (1 - violation))

    logger.info("lp_bound_computed", space=family.space.describe(), degree=N,
                grid=len(grid), rounds=rounds, violation=float(violation), bound=bound)
    return BoundReport(
        formulation="lp",
        m=None,
        status=SolveStatus.OPTIMAL.value,
        bound=bound,
        objective=float(total),
        variables={"f0": float(1 - violation), **{f"f{k}": float(v) for k, v in enumerate(f, start=1)}},
        notes=notes,
    )


def hemisphere_lp_bound(n: int, degree: int = Config.HEMISPHERE_LP_DEGREE,
                        grid_points: int = Config.LP_GRID_POINTS) -> BoundReport:
    """
    LP bound on pi/3-codes X in a closed hemisphere of S^{n-1} with pole e_0.

    Two Delsarte bounds are combined:
      * the pi/6-cap around -e_0 holds two points at angle pi/3 from each
        other and from the hemisphere, so |X| <= K(n) - 2;
      * the points of height <e_0, x> >= 1/2 stay a pi/3-code when mirrored
        through the equator, so 2 |X_high| + |X_low| <= K(n), and the points
        of X_low project onto S^{n-2} with cosines at most 1/sqrt(3), so
        |X_low| <= A(n - 1). Together |X| <= (K(n) + A(n - 1)) / 2.

    K and A are lp_dual_bound values; A on the circle (n = 3) is the exact
    count 2 pi / arccos(1/sqrt(3)).

    Raises:
        FormulationError: If n < 3 or degree < 1
    """
    if n < 3:
        raise FormulationError(f"Hemisphere dimension must be at least 3, got {n}")
    kissing = lp_dual_bound(gegenbauer_family(n, degree), Fraction(-1), Fraction(1, 2), degree, grid_points)
    if n == 3:
        equator = 2 * math.pi / math.acos(EQUATOR_COSINE)
    else:
        equator = lp_dual_bound(gegenbauer_family(n - 1, degree), Fraction(-1), EQUATOR_COSINE,
                                degree, grid_points).bound

    # absorb solver noise just below an integer
    by_cap = math.floor(kissing.bound + 1e-6) - OPPOSITE_CAP_POINTS
    by_mirror = math.floor((kissing.bound + equator) / 2 + 1e-6)
    bound = min(by_cap, by_mirror)
    logger.info("hemisphere_lp_bound_computed", n=n, degree=degree, kissing=kissing.bound,
                equator=equator, bound=bound)
    return BoundReport(
        formulation="lp_hemisphere",
        m=None,
        status=SolveStatus.OPTIMAL.value,
        bound=float(bound),
        objective=float(bound),
        variables={"kissing_lp": kissing.bound, "equator_lp": equator},
        notes=[f"cap={by_cap}", f"mirror={by_mirror}"],
    )


def _solve_grid_lp(family: ZonalFamily, grid: np.ndarray, N: int) -> np.ndarray:
    values = family.evaluate_grid(grid)[1:N + 1].T  # rows: points, cols: k
    outcome = linprog(
        c=np.ones(N),
        A_ub=values,
        b_ub=-np.ones(len(grid)),
        bounds=[(0, None)] * N,
        method="highs",
    )
    if outcome.status != 0:
        raise FormulationError(f"Grid LP failed: {outcome.message}")
    return np.asarray(outcome.x)


def _monomial_coefficients(family: ZonalFamily, f: Sequence[float], f0: float = 1.0) -> np.ndarray:
    """Ascending monomial coefficients of f0 + sum_k f[k-1] Phi_k."""
    table = family.float_table()
    coefficients = f0 * table[0].copy()
    for k, weight in enumerate(f, start=1):
        coefficients += weight * table[k]
    return coefficients


def _positive_maxima(family: ZonalFamily, f: Sequence[float], a: float, b: float) -> Tuple[float, List[float]]:
    """Largest value of f = 1 + sum f_k Phi_k on [a, b] and the local maxima where f > 0."""
    coefficients = _monomial_coefficients(family, f)
    value, points = polynomial_maxima(coefficients, a, b)
    return value, [t for t, v in points if v > 0]


def polynomial_maxima(coefficients: np.ndarray, a: float, b: float) -> Tuple[float, List[Tuple[float, float]]]:
    """
    Maximum of a polynomial (ascending coefficients) on [a, b].

    Returns:
        (max value, [(t, f(t)) for the endpoints and interior critical points])
    """
    poly = np.polynomial.Polynomial(coefficients)
    candidates = {a, b}
    for root in poly.deriv().roots() if len(coefficients) > 1 else []:
        if abs(root.imag) < 1e-9 and a < root.real < b:
            candidates.add(float(root.real))
    points = sorted((t, float(poly(t))) for t in candidates)
    return max(v for _, v in points), points


def _exact_polynomial(family: ZonalFamily, f_coeffs: Sequence) -> List[Fraction]:
    coefficients = [Fraction(0)] * (len(f_coeffs))
    for k, weight in enumerate(f_coeffs):
        for d in range(k + 1):
            coefficients[d] += to_exact(weight) * family.coefficient(k, d)
    return coefficients


def _sympy_rational(value: Fraction) -> sympy.Rational:
    return sympy.Rational(value.numerator, value.denominator)


def _horner(coefficients: Sequence[Fraction], point: Fraction) -> Fraction:
    result = Fraction(0)
    for c in reversed(coefficients):
        result = result * point + c
    return result


def _isolating_intervals(coefficients: Sequence[Fraction], a: Fraction, b: Fraction,
                         eps: Optional[Fraction] = None) -> List[Tuple[Fraction, Fraction]]:
    """Disjoint rational intervals inside [a, b], each holding one real root."""
    if not any(coefficients[1:]) or a >= b:
        return []
    poly = sympy.Poly(list(reversed([_sympy_rational(c) for c in coefficients])), _T, domain="QQ")
    intervals = poly.intervals(inf=_sympy_rational(a), sup=_sympy_rational(b),
                               eps=None if eps is None else _sympy_rational(eps))
    result = []
    for (low, high), _ in intervals:
        low = max(a, Fraction(int(low.p), int(low.q)))
        high = min(b, Fraction(int(high.p), int(high.q)))
        result.append((low, high))
    return result


def polynomial_upper_bound(coefficients: Sequence[Fraction], a, b,
                           eps: Fraction = Fraction(1, 10 ** 12)) -> Fraction:
    """
    Rational number no smaller than max f over [a, b].

    The critical points of f are isolated exactly and refined to width eps.
    On an isolating interval [l, h] f stays below max(f(l), f(h)) + L (h - l),
    where L bounds |f'| on [a, b].
    """
    a, b = to_exact(a), to_exact(b)
    best = max(_horner(coefficients, a), _horner(coefficients, b))
    derivative = [d * c for d, c in enumerate(coefficients)][1:]
    if not derivative:
        return best
    radius = max(abs(a), abs(b), Fraction(1))
    lipschitz = sum((abs(c) * radius ** d for d, c in enumerate(derivative)), Fraction(0))
    for low, high in _isolating_intervals(derivative, a, b, eps):
        peak = max(_horner(coefficients, low), _horner(coefficients, high)) + lipschitz * (high - low)
        best = max(best, peak)
    return best


def polynomial_sign_witness(coefficients: Sequence[Fraction], a, b) -> Optional[Fraction]:
    """
    Exact check that a rational polynomial is <= 0 on [a, b].

    Real roots are isolated with sympy; the sign between consecutive roots
    is read at interval endpoints and midpoints.

    Returns:
        None if the polynomial is nonpositive on [a, b], else a rational t with f(t) > 0
    """
    a, b = to_exact(a), to_exact(b)
    candidates = {a, b}
    for low, high in _isolating_intervals(coefficients, a, b):
        candidates.update((low, high))
    ordered = sorted(candidates)
    ordered += [(p + q) / 2 for p, q in zip(ordered, ordered[1:])]
    for point in sorted(ordered):
        if _horner(coefficients, point) > 0:
            return point
    return None


def lp_polynomial_bound(family: ZonalFamily, f_coeffs: Sequence, a, b) -> Fraction:
    """
    Bound f(tau0) / f_0 from a Delsarte polynomial f = sum_k f_k Phi_k.

    Args:
        f_coeffs: f_0..f_N with f_0 > 0 and f_k >= 0

    Raises:
        FormulationError: On negative coefficients or if f is positive
            somewhere on [a, b] (the message names the witness t)
    """
    if len(f_coeffs) - 1 > family.k_max:
        raise FormulationError(f"Polynomial degree {len(f_coeffs) - 1} exceeds k_max={family.k_max}")
    coeffs = [to_exact(v) for v in f_coeffs]
    if coeffs[0] <= 0:
        raise FormulationError(f"f_0 must be positive, got {coeffs[0]}")
    if any(v < 0 for v in coeffs[1:]):
        raise FormulationError("f_k must be nonnegative for k >= 1")
    if a > b:
        raise FormulationError(f"Interval [{a}, {b}] is empty")

    polynomial = _exact_polynomial(family, coeffs)
    witness = polynomial_sign_witness(polynomial, a, b)
    if witness is not None:
        value = sum((c * witness ** d for d, c in enumerate(polynomial)), Fraction(0))
        raise FormulationError(f"f({witness}) = {value} > 0: polynomial is not valid on [{a}, {b}]")
    return sum(coeffs, Fraction(0)) / coeffs[0]


def sdp0_dual_polynomial(family: ZonalFamily, model: SdpModel, result: SolveResult,
                         margin: float = 1e-10) -> List[float]:
    """
    Delsarte polynomial read off an sdp0 dual: f_k is the multiplier of the
    degree-k scalar constraint and f_0 the dual lower bound on y, lowered
    by the measured maximum of f on [a, b] plus margin.

    Returns:
        Coefficients f_0..f_{2m-1} ready for lp_polynomial_bound
    """
    if model.formulation != "sdp0":
        raise FormulationError(f"Expected an sdp0 model, got {model.formulation!r}")
    a, b = (_parse_metadata_number(v) for v in model.metadata["interval"])
    degree = 2 * model.metadata["m"] - 1
    f = []
    for k in range(1, degree + 1):
        index = next(i for i, block in enumerate(model.blocks) if block.label == f"phi[{k}]")
        f.append(max(0.0, float(result.dual[index][0, 0])))
    f0 = float(result.dual_objective)
    peak, _ = polynomial_maxima(_monomial_coefficients(family, f, f0), float(a), float(b))
    f0 -= max(0.0, peak) + margin
    if f0 <= 0:
        raise FormulationError("Dual multipliers do not give a positive f_0")
    return [f0] + f


def _parse_metadata_number(text: str):
    if "/" in text:
        numerator, denominator = text.split("/")
        return Fraction(int(numerator), int(denominator))
    return float(text)


def build_lp_primal(family: ZonalFamily, points: Sequence, N: int) -> SdpModel:
    """
    Distance-distribution LP on a finite set of tau values, as 1x1 blocks.

    Maximize sum_j alpha_j subject to alpha_j >= 0 and
    1 + sum_j alpha_j Phi_k(t_j) >= 0 for k = 1..N; the code bound is
    1 + optimum. Exact for Hamming spaces on integer points; for the sphere
    it bounds codes whose distances lie in the given set.
    """
    if N < 1 or N > family.k_max:
        raise FormulationError(f"Degree N must lie in [1, {family.k_max}], got {N}")
    if len(points) == 0:
        raise FormulationError("Need at least one distance value")
    for t in points:
        if t == family.space.tau0:
            raise FormulationError("Distance values must exclude tau0")
    names = [f"alpha[{j}]" for j in range(len(points))]
    blocks = [scalar_block({name: 1}, f"nonnegative[{j}]") for j, name in enumerate(names)]
    for k in range(1, N + 1):
        expr = expr_add({CONSTANT: 1}, *[{name: family.evaluate(k, t)} for name, t in zip(names, points)])
        blocks.append(scalar_block(expr, f"phi[{k}]"))
    try:
        return assemble(
            names, {name: 1 for name in names}, blocks, ObjectiveSense.MAX,
            metadata={
                "formulation": "lp_primal",
                "bound_kind": BoundKind.PLUS_ONE.value,
                "space": family.space.describe(),
                "points": [_format(t) for t in points],
                "degree": N,
            },
        )
    except ModelError as e:
        raise FormulationError(str(e)) from e


# ---------------------------------------------------------------------------
# Concrete codes
# ---------------------------------------------------------------------------

def greedy_spherical_code(n: int, theta, attempts: int, rng: np.random.Generator,
                          hemisphere: bool = False) -> np.ndarray:
    """
    Random greedy theta-code on S^{n-1}: candidates are kept when their
    inner product with every kept point is at most cos(theta). With
    hemisphere=True only points with nonnegative first coordinate are used.
    """
    cosine = float(exact_cos(theta))
    kept: List[np.ndarray] = []
    for _ in range(attempts):
        candidate = rng.standard_normal(n)
        candidate /= np.linalg.norm(candidate)
        if hemisphere and candidate[0] < 0:
            candidate[0] = -candidate[0]
        if all(float(candidate @ point) <= cosine for point in kept):
            kept.append(candidate)
    return np.array(kept).reshape(len(kept), n)


def _distinct_pairs(tau: np.ndarray) -> np.ndarray:
    mask = ~np.eye(tau.shape[0], dtype=bool)
    return tau[mask]


def sdp0_point_from_code(tau: np.ndarray, m: int) -> Dict[str, float]:
    """sdp0 variables of a concrete code given its tau matrix."""
    c = tau.shape[0]
    if c < 2:
        raise FormulationError("A code needs at least two points")
    values = _distinct_pairs(np.asarray(tau, dtype=float))
    point = {"y": 1.0 / (c - 1)}
    for d in range(1, 2 * m):
        point[f"x{d}"] = float(np.mean(values ** d))
    return point


def _interval_of(t: float, breakpoints: Sequence[float]) -> int:
    """Index i with t in [u_i, u_{i+1}), the last interval closed."""
    for i in range(len(breakpoints) - 1):
        if t < breakpoints[i + 1]:
            return i
    return len(breakpoints) - 2


def sdpa_point_from_code(tau: np.ndarray, breakpoints: Sequence, m: int) -> Dict[str, float]:
    """sdpa variables of a concrete code."""
    c = tau.shape[0]
    edges = [float(u) for u in breakpoints]
    point = {"c": float(c), "z": float(c * c)}
    for i in range(len(edges) - 1):
        for k in range(2 * m):
            point[_interval_var(i, k)] = 0.0
    for t in _distinct_pairs(np.asarray(tau, dtype=float)):
        i = _interval_of(t, edges)
        for k in range(2 * m):
            point[_interval_var(i, k)] += t ** k
    return point


def sdpa_subset_point_from_code(tau: np.ndarray, anchor_tau: np.ndarray, breakpoints: Sequence,
                                m: int) -> Dict[str, float]:
    """sdpa_subset variables; anchor_tau[i, q] is tau between anchor i and code point q."""
    point = sdpa_point_from_code(tau, breakpoints, m)
    anchor_tau = np.asarray(anchor_tau, dtype=float)
    for i in range(anchor_tau.shape[0]):
        for k in range(2 * m):
            point[f"y[{i + 1},{k}]"] = float(np.sum(anchor_tau[i] ** k))
    return point


def assign_cells(points: np.ndarray, partition: PartitionSpec) -> List[int]:
    """Cell index of each sphere point by its colatitude to e_0."""
    edges = [(float(_angle(cell.theta_lo)), float(_angle(cell.theta_hi))) for cell in partition.cells]
    assignment = []
    for point in points:
        colatitude = math.acos(max(-1.0, min(1.0, float(point[0]))))
        for j, (lo, hi) in enumerate(edges):
            if lo <= colatitude <= hi:
                assignment.append(j)
                break
        else:
            raise FormulationError(f"Point with colatitude {colatitude} is outside every cell")
    return assignment


def sdphat_point_from_code(tau: np.ndarray, anchor_tau: np.ndarray, cells: Sequence[int], d: int,
                           m: int) -> Dict[str, float]:
    """sdphat variables of a code whose point q lies in cell cells[q]."""
    tau = np.asarray(tau, dtype=float)
    anchor_tau = np.asarray(anchor_tau, dtype=float).reshape(-1, tau.shape[0])
    members = [[q for q, cell in enumerate(cells) if cell == j] for j in range(d)]
    point = {f"c[{j + 1}]": float(len(members[j])) for j in range(d)}
    for i in range(d):
        for j in range(i, d):
            block = tau[np.ix_(members[i], members[j])]
            for k in range(2 * m):
                point[f"x[{i + 1},{j + 1},{k}]"] = float(np.sum(block ** k))
    for i in range(anchor_tau.shape[0]):
        for j in range(d):
            values = anchor_tau[i, members[j]]
            for k in range(2 * m):
                point[f"y[{i + 1},{j + 1},{k}]"] = float(np.sum(values ** k))
    return point
