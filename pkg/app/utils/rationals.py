"""
Exact number helpers for SDP Code Bounds.

Parsing and formatting of "p/q" rationals, symbolic config tokens,
continued-fraction rounding and small exact linear-algebra routines
used by the certifier.
"""

import logging
import math
from fractions import Fraction
from typing import Iterable, List, Optional, Sequence, Union

import numpy as np
import sympy


logger = logging.getLogger(__name__)


Number = Union[int, float, Fraction]

# Names allowed inside symbolic config tokens such as "pi/3" or "-sqrt(cos(pi/3))"
_TOKEN_NAMESPACE = {
    "pi": sympy.pi,
    "sqrt": sympy.sqrt,
    "cos": sympy.cos,
    "sin": sympy.sin,
    "acos": sympy.acos,
    "Rational": sympy.Rational,
}


def is_exact(value) -> bool:
    """True for ints and Fractions (bools excluded)."""
    return isinstance(value, (int, Fraction)) and not isinstance(value, bool)


def to_exact(value: Number) -> Fraction:
    """
    Convert a number to a Fraction without rounding.

    Floats are converted to the binary rational they actually store.
    """
    if isinstance(value, Fraction):
        return value
    if isinstance(value, (int, np.integer)):
        return Fraction(int(value))
    if isinstance(value, (float, np.floating)):
        if not math.isfinite(value):
            raise ValueError(f"Cannot convert non-finite value {value} to a rational")
        return Fraction(float(value))
    if isinstance(value, sympy.Rational):
        return Fraction(int(value.p), int(value.q))
    raise TypeError(f"Unsupported number type: {type(value).__name__}")


def normalize_number(value) -> Number:
    """Ints become Fractions, numpy scalars become Python numbers."""
    if isinstance(value, bool):
        raise TypeError("Booleans are not numbers here")
    if isinstance(value, (int, np.integer)):
        return Fraction(int(value))
    if isinstance(value, (float, np.floating)):
        return float(value)
    if isinstance(value, Fraction):
        return value
    if isinstance(value, sympy.Rational):
        return Fraction(int(value.p), int(value.q))
    raise TypeError(f"Unsupported number type: {type(value).__name__}")


def format_number(value: Number) -> str:
    """
    Serialize a number: rationals as "p/q", floats as round-trip decimal strings.
    """
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    exact = to_exact(value)
    return f"{exact.numerator}/{exact.denominator}"


def parse_number(text) -> Number:
    """
    Inverse of format_number; also accepts JSON numbers.

    A string containing "/" is a rational; any other numeric string is a float.
    """
    if isinstance(text, bool):
        raise ValueError("Booleans are not numbers")
    if isinstance(text, (int, float, Fraction)):
        return normalize_number(text)
    if not isinstance(text, str):
        raise ValueError(f"Cannot parse number from {text!r}")
    stripped = text.strip()
    if "/" in stripped:
        numerator, _, denominator = stripped.partition("/")
        try:
            return Fraction(int(numerator), int(denominator))
        except (ValueError, ZeroDivisionError) as e:
            raise ValueError(f"Malformed rational {text!r}") from e
    try:
        return float(stripped)
    except ValueError as e:
        raise ValueError(f"Malformed number {text!r}") from e


def parse_token(value) -> Number:
    """
    Resolve a config value that may be a number, a "p/q" string or a symbolic
    expression like "pi/3" or "cos(2*pi/5)".

    Rational results stay exact; irrational ones are evaluated at 30 digits
    and returned as floats.
    """
    if isinstance(value, (int, float, Fraction)) and not isinstance(value, bool):
        return normalize_number(value)
    if not isinstance(value, str):
        raise ValueError(f"Expected a number or expression, got {value!r}")
    try:
        return parse_number(value)
    except ValueError:
        pass
    try:
        expr = sympy.sympify(value, locals=_TOKEN_NAMESPACE)
    except (sympy.SympifyError, SyntaxError, TypeError) as e:
        raise ValueError(f"Cannot evaluate expression {value!r}") from e
    if expr.free_symbols:
        raise ValueError(f"Expression {value!r} has free symbols {expr.free_symbols}")
    expr = sympy.nsimplify(expr) if expr.is_Float else expr
    if expr.is_Rational:
        return Fraction(int(expr.p), int(expr.q))
    numeric = expr.evalf(30)
    if not numeric.is_real:
        raise ValueError(f"Expression {value!r} is not real")
    return float(numeric)


def exact_cos(theta) -> Number:
    """cos(theta) exactly when theta is a symbolic token with a rational cosine."""
    if isinstance(theta, str):
        expr = sympy.sympify(theta, locals=_TOKEN_NAMESPACE)
        cosine = sympy.cos(expr)
        if cosine.is_Rational:
            return Fraction(int(cosine.p), int(cosine.q))
        return float(cosine.evalf(30))
    return math.cos(float(theta))


def rationalize(values, max_denominator: int):
    """
    Best continued-fraction approximation with bounded denominator, entrywise.

    Scalars return a Fraction; square 2-D arrays are symmetrized first and
    returned as nested lists of Fractions; other arrays keep their shape as lists.
    """
    if max_denominator < 1:
        raise ValueError("max_denominator must be at least 1")

    if np.isscalar(values) or isinstance(values, Fraction):
        return _rationalize_scalar(values, max_denominator)

    array = np.asarray(values, dtype=float)
    if array.ndim == 2 and array.shape[0] == array.shape[1]:
        array = (array + array.T) / 2.0
        size = array.shape[0]
        result = [[Fraction(0)] * size for _ in range(size)]
        for i in range(size):
            for j in range(i, size):
                entry = _rationalize_scalar(array[i, j], max_denominator)
                result[i][j] = entry
                result[j][i] = entry
        return result
    return [rationalize(item, max_denominator) if np.ndim(item) else
            _rationalize_scalar(item, max_denominator) for item in array]


def _rationalize_scalar(value, max_denominator: int) -> Fraction:
    if isinstance(value, Fraction):
        return value.limit_denominator(max_denominator)
    return Fraction(float(value)).limit_denominator(max_denominator)


class ExactBasis:
    """
    Incremental row-echelon basis over the rationals.

    Used to pick linearly independent columns greedily.
    """

    def __init__(self, dimension: int):
        self.dimension = dimension
        self._rows: List[List[Fraction]] = []
        self._pivots: List[int] = []

    @property
    def rank(self) -> int:
        return len(self._rows)

    def try_add(self, vector: Sequence[Fraction]) -> bool:
        """Add vector if it is independent of the basis; report whether it was."""
        reduced = list(vector)
        for row, pivot in zip(self._rows, self._pivots):
            factor = reduced[pivot]
            if factor:
                factor = factor / row[pivot]
                reduced = [r - factor * b for r, b in zip(reduced, row)]
        for index, entry in enumerate(reduced):
            if entry:
                self._rows.append(reduced)
                self._pivots.append(index)
                return True
        return False


def exact_solve(matrix: Sequence[Sequence[Fraction]], rhs: Sequence[Fraction]) -> Optional[List[Fraction]]:
    """
    Particular solution of matrix · u = rhs by exact Gauss-Jordan elimination.

    Free unknowns are set to zero. Returns None when the system is inconsistent.
    """
    rows = len(matrix)
    cols = len(matrix[0]) if rows else 0
    augmented = [list(matrix[i]) + [rhs[i]] for i in range(rows)]
    pivot_columns: List[int] = []
    row = 0
    for col in range(cols):
        pivot_row = next((r for r in range(row, rows) if augmented[r][col] != 0), None)
        if pivot_row is None:
            continue
        augmented[row], augmented[pivot_row] = augmented[pivot_row], augmented[row]
        pivot = augmented[row][col]
        augmented[row] = [entry / pivot for entry in augmented[row]]
        for r in range(rows):
            if r != row and augmented[r][col] != 0:
                factor = augmented[r][col]
                augmented[r] = [a - factor * b for a, b in zip(augmented[r], augmented[row])]
        pivot_columns.append(col)
        row += 1
        if row == rows:
            break

    for r in range(row, rows):
        if augmented[r][cols] != 0:
            return None

    solution = [Fraction(0)] * cols
    for r, col in enumerate(pivot_columns):
        solution[col] = augmented[r][cols]
    return solution


def common_denominator(values: Iterable[Fraction]) -> int:
    """Least common multiple of the denominators."""
    result = 1
    for value in values:
        result = result * value.denominator // math.gcd(result, value.denominator)
    return result
