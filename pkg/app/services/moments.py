"""
Moments Service: Hankel moment matrices and atomic measure recovery.

A sequence s_0..s_{2m-1} is the moment sequence of a nonnegative measure on
[a, b] exactly when the three order-m Hankel blocks R, F+ and F- are PSD.
This module builds those blocks, tests membership and recovers atomic
measures from power sums with a Prony kernel.
"""

from fractions import Fraction
from typing import Dict, List, Optional, Sequence, Union

import numpy as np
import structlog
import sympy

from app.config import Config
from app.models.moment import Atom, AtomicDistribution, HankelBlocks, MomentVector
from app.services.certify import check_psd_exact
from app.utils.rationals import exact_solve, is_exact, to_exact


logger = structlog.get_logger(__name__)

_T = sympy.Symbol("t")
# Width of the isolating intervals for irrational atom locations
_ROOT_EPS = sympy.Rational(1, 10 ** 15)


class MomentError(ValueError):
    """Raised for malformed moment inputs."""
    pass


class RecoveryError(MomentError):
    """Raised when power sums are not realized by an atomic measure on [a, b]."""
    pass


# Entry patterns: each matrix entry is a map {moment index: coefficient}
Pattern = List[List[Dict[int, object]]]


def hankel_pattern(m: int, a, b) -> Dict[str, Pattern]:
    """
    Linear patterns of the order-m blocks as maps from moment index to
    coefficient, shared by build_H and the SDP builders.

    Returns:
        {"R": ..., "F+": ..., "F-": ...}, each an m x m pattern
    """
    if m < 1:
        raise MomentError(f"Hankel order must be at least 1, got {m}")
    R, plus, minus = [], [], []
    for i in range(m):
        R.append([{i + j: 1} for j in range(m)])
        plus.append([_drop_zero({i + j + 1: 1, i + j: -a}) for j in range(m)])
        minus.append([_drop_zero({i + j: b, i + j + 1: -1}) for j in range(m)])
    return {"R": R, "F+": plus, "F-": minus}


def power_sums(atoms: AtomicDistribution, k_max: int) -> MomentVector:
    """
    s_k = sum_i w_i t_i^k for k = 0..k_max.

    Exact when every location and weight is exact.
    """
    if k_max < 1:
        raise MomentError(f"k_max must be at least 1, got {k_max}")
    exact = all(is_exact(atom.location) and is_exact(atom.weight) for atom in atoms.atoms)
    zero = Fraction(0) if exact else 0.0
    values = []
    for k in range(k_max + 1):
        total = zero
        for atom in atoms.atoms:
            location = Fraction(atom.location) if exact else float(atom.location)
            weight = Fraction(atom.weight) if exact else float(atom.weight)
            total += weight * location ** k
        values.append(total)
    return MomentVector(tuple(values))


def build_H(s: Union[MomentVector, Sequence], m: int, a, b) -> HankelBlocks:
    """
    Assemble R_m, F_m^+(a) and F_m^-(b) from s_0..s_{2m-1}.

    Raw and normalized moments are both accepted; the PSD pattern does not
    depend on s_0.

    Raises:
        MomentError: If m < 1, a >= b or s is too short
    """
    values = s.values if isinstance(s, MomentVector) else tuple(s)
    if m < 1:
        raise MomentError(f"Hankel order must be at least 1, got {m}")
    if len(values) < 2 * m:
        raise MomentError(f"Order {m} needs {2 * m} moments, got {len(values)}")
    if not a < b:
        raise MomentError(f"Interval [{a}, {b}] is empty or degenerate")

    pattern = hankel_pattern(m, a, b)

    def render(matrix: Pattern):
        return tuple(
            tuple(sum((coef * values[k] for k, coef in entry.items()), 0) for entry in row)
            for row in matrix
        )

    return HankelBlocks(m, render(pattern["R"]), render(pattern["F+"]), render(pattern["F-"]))


def is_psd(matrix, tol: float = Config.MOMENT_PSD_TOL) -> bool:
    """Floating PSD test: smallest eigenvalue >= -tol * max(1, largest eigenvalue)."""
    array = np.array([[float(v) for v in row] for row in matrix]) if not isinstance(matrix, np.ndarray) else matrix
    if array.size == 0:
        return True
    eigenvalues = np.linalg.eigvalsh((array + array.T) / 2.0)
    return eigenvalues[0] >= -tol * max(1.0, eigenvalues[-1])


def in_delta(x: Sequence, m: int, a, b, tol: float = Config.MOMENT_PSD_TOL) -> bool:
    """
    Membership of normalized moments (x_1..x_{2m-1}, with x_0 = 1) in the
    convex body cut out by the order-m Hankel blocks on [a, b].
    """
    if len(x) != 2 * m - 1:
        raise MomentError(f"Expected {2 * m - 1} normalized moments, got {len(x)}")
    one = Fraction(1) if all(is_exact(v) for v in x) else 1.0
    blocks = build_H((one,) + tuple(x), m, a, b)
    return all(is_psd(block, tol) for block in (blocks.R, blocks.F_plus, blocks.F_minus))


def numerical_rank(matrix, tol: float = Config.MOMENT_RANK_TOL) -> int:
    """Number of singular values above tol times the largest one."""
    array = np.asarray(matrix, dtype=float)
    if array.size == 0:
        return 0
    singular = np.linalg.svd(array, compute_uv=False)
    if singular[0] == 0:
        return 0
    return int(np.sum(singular > tol * singular[0]))


def recover_distribution(
    s: Union[MomentVector, Sequence],
    a,
    b,
    tol: float = 1e-6,
    rank: Optional[int] = None,
    rank_tol: float = Config.MOMENT_RANK_TOL,
    clamp_window: float = Config.MOMENT_CLAMP_WINDOW,
) -> AtomicDistribution:
    """
    Recover an atomic measure on [a, b] from its power sums.

    The rank r of R_m (m = floor((len + 1) / 2)) is the number of atoms. The
    locations are the roots of the kernel polynomial of the (r + 1)-column
    Hankel matrix and the weights solve the Vandermonde system.

    When s, a and b are all exact the whole computation is exact: rank and
    PSD tests by fraction-free elimination, rational roots by factoring the
    kernel polynomial and irrational ones isolated to 1e-15. Rational
    atoms then come back as Fractions.

    Args:
        s: Power sums s_0..s_K
        a, b: Support interval
        tol: Relative tolerance for PSD, root, weight and residual checks
        rank: Use this many atoms instead of the numerical rank
        rank_tol: Relative singular value threshold for the numerical rank
        clamp_window: Atoms this close outside [a, b] are moved onto the endpoint

    Returns:
        AtomicDistribution whose power sums reproduce s

    Raises:
        RecoveryError: If the power sums are not those of an atomic measure
            on [a, b] with the detected number of atoms
    """
    raw = tuple(s.values if isinstance(s, MomentVector) else s)
    if len(raw) >= 2 and all(is_exact(v) for v in raw + (a, b)):
        return _recover_exact([to_exact(v) for v in raw], to_exact(a), to_exact(b), rank)

    values = np.array([float(v) for v in raw])
    length = len(values)
    if length < 2:
        raise MomentError("Need at least s_0 and s_1 to recover a distribution")
    a_f, b_f = float(a), float(b)
    scale = max(1.0, float(np.max(np.abs(values))))

    m = (length + 1) // 2
    R = _hankel(values, m, m)
    if not is_psd(R, tol):
        raise RecoveryError("Moment matrix R is not positive semidefinite")
    if length >= 2 * m:
        blocks = build_H(values, m, a_f, b_f)
        if not (is_psd(blocks.F_plus, tol) and is_psd(blocks.F_minus, tol)):
            raise RecoveryError(f"Localizing matrices are not PSD: moments are not supported on [{a}, {b}]")

    r = numerical_rank(R, rank_tol) if rank is None else rank
    if r == 0:
        return AtomicDistribution(())
    if length - r < r:
        raise RecoveryError(f"{length} power sums cannot determine {r} atoms")

    kernel_matrix = _hankel(values, length - r, r + 1)
    _, _, vt = np.linalg.svd(kernel_matrix)
    kernel = vt[-1]
    if abs(kernel[-1]) < 1e-14:
        raise RecoveryError("Kernel polynomial has degenerate leading coefficient")
    roots = np.roots(kernel[::-1])

    locations = []
    for root in roots:
        if abs(root.imag) > tol * max(1.0, abs(root.real)):
            raise RecoveryError(f"Prony root {root} is not real")
        t = float(root.real)
        if t < a_f - clamp_window or t > b_f + clamp_window:
            raise RecoveryError(f"Atom at {t} lies outside [{a}, {b}]")
        locations.append(min(max(t, a_f), b_f))
    locations.sort()
    if any(q - p <= tol for p, q in zip(locations, locations[1:])):
        raise RecoveryError(f"Recovered atoms are not distinct: {locations}")

    vandermonde = np.vander(np.array(locations), length, increasing=True).T
    weights, *_ = np.linalg.lstsq(vandermonde, values, rcond=None)

    atoms = []
    for t, w in zip(locations, weights):
        if w < -tol * scale:
            raise RecoveryError(f"Negative weight {w} at atom {t}")
        if w <= tol * scale:
            logger.warning("negligible_atom_dropped", location=t, weight=float(w))
            continue
        atoms.append(Atom(t, float(w)))

    reproduced = np.array([sum(atom.weight * atom.location ** k for atom in atoms) for k in range(length)])
    residual = float(np.max(np.abs(reproduced - values)))
    if residual > tol * scale:
        raise RecoveryError(f"Recovered atoms reproduce the power sums only to {residual:.3e}")

    logger.info("distribution_recovered", atoms=len(atoms), rank=r, residual=residual)
    return AtomicDistribution(tuple(atoms))


def _recover_exact(values: List[Fraction], a: Fraction, b: Fraction, rank: Optional[int]) -> AtomicDistribution:
    length = len(values)
    m = (length + 1) // 2
    R = [[values[i + j] for j in range(m)] for i in range(m)]
    check = check_psd_exact(R)
    if not check.is_psd:
        raise RecoveryError("Moment matrix R is not positive semidefinite")
    if length >= 2 * m:
        blocks = build_H(values, m, a, b)
        if not (check_psd_exact(blocks.F_plus).is_psd and check_psd_exact(blocks.F_minus).is_psd):
            raise RecoveryError(f"Localizing matrices are not PSD: moments are not supported on [{a}, {b}]")

    r = check.rank if rank is None else rank
    if r == 0:
        return AtomicDistribution(())
    if length - r < r:
        raise RecoveryError(f"{length} power sums cannot determine {r} atoms")

    # monic kernel polynomial c_0 + c_1 t + ... + t^r
    rows = [[values[i + j] for j in range(r)] for i in range(length - r)]
    coefficients = exact_solve(rows, [-values[i + r] for i in range(length - r)])
    if coefficients is None:
        raise RecoveryError(f"No kernel polynomial of degree {r} annihilates the power sums")
    kernel = sympy.Poly([sympy.Integer(1)] + [sympy.Rational(c.numerator, c.denominator)
                                              for c in reversed(coefficients)], _T, domain="QQ")

    locations: List = []
    remainder = kernel
    for root, multiplicity in kernel.ground_roots().items():
        if multiplicity > 1:
            raise RecoveryError(f"Kernel polynomial has a repeated root at {root}")
        locations.append(Fraction(int(root.p), int(root.q)))
        remainder = remainder.exquo(sympy.Poly(_T - root, _T, domain="QQ"))
    if remainder.degree() > 0:
        isolated = remainder.intervals(eps=_ROOT_EPS)
        if sum(multiplicity for _, multiplicity in isolated) != remainder.degree():
            raise RecoveryError("Kernel polynomial has non-real roots")
        for (low, high), multiplicity in isolated:
            if multiplicity > 1:
                raise RecoveryError("Kernel polynomial has a repeated root")
            locations.append(float((low + high) / 2))
    locations.sort()
    for t in locations:
        if t < a or t > b:
            raise RecoveryError(f"Atom at {t} lies outside [{a}, {b}]")

    if all(isinstance(t, Fraction) for t in locations):
        weights = exact_solve([[t ** k for t in locations] for k in range(length)], values)
        if weights is None:
            raise RecoveryError("Recovered atoms do not reproduce the power sums")
        negligible = Fraction(0)
    else:
        vandermonde = np.vander(np.array([float(t) for t in locations]), length, increasing=True).T
        weights, *_ = np.linalg.lstsq(vandermonde, np.array([float(v) for v in values]), rcond=None)
        weights = [float(w) for w in weights]
        negligible = 1e-12 * max(1.0, max(abs(float(v)) for v in values))

    atoms = []
    for t, w in zip(locations, weights):
        if w < -negligible:
            raise RecoveryError(f"Negative weight {w} at atom {t}")
        if w > negligible:
            atoms.append(Atom(t, w))
    logger.info("distribution_recovered", atoms=len(atoms), rank=r, exact=True)
    return AtomicDistribution(tuple(atoms))


def recover_from_sdp0(x: Dict[str, float], a, b, tol: float = 1e-5, rank_tol: float = 1e-6) -> AtomicDistribution:
    """
    Distance distribution seen from one point of an extremal code, from an
    SDP0 optimum: the normalized moments (1, x_1, ...) scaled by 1 / y.

    Atoms within tol outside [a, b] are moved onto the endpoint.

    Args:
        x: Optimal variable values with keys "y" and "x1".."x{2m-1}"
    """
    y = x["y"]
    if y <= 0:
        raise MomentError(f"y must be positive to scale moments, got {y}")
    degree = sum(1 for name in x if name.startswith("x"))
    moments = MomentVector((1.0,) + tuple(x[f"x{k}"] for k in range(1, degree + 1)), normalized=True)
    return recover_distribution(moments.scaled(1 / y), a, b, tol=tol, rank_tol=rank_tol, clamp_window=tol)


def _hankel(values: np.ndarray, rows: int, cols: int) -> np.ndarray:
    return np.array([[values[i + j] for j in range(cols)] for i in range(rows)])


def _drop_zero(entry: Dict[int, object]) -> Dict[int, object]:
    return {k: v for k, v in entry.items() if v != 0}
