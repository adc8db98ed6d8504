"""
Spaces Service for 2-point-homogeneous spaces and their zonal polynomials.

Builds exact coefficient tables for the Gegenbauer (sphere) and Krawtchouk
(binary Hamming) families and evaluates zonal Gram matrices of point sets.
"""

from fractions import Fraction
from typing import List, Sequence

import numpy as np
import structlog
import sympy

from app.models.space import SpaceKind, SpaceSpec, ZonalFamily
from app.utils.rationals import is_exact, to_exact


logger = structlog.get_logger(__name__)

_T = sympy.Symbol("t")


class SpaceError(ValueError):
    """Raised when a space or zonal family cannot be constructed."""
    pass


def sphere(n: int) -> SpaceSpec:
    """Unit sphere in R^n."""
    if n < 3:
        raise SpaceError(f"Sphere dimension must be at least 3, got {n}")
    return SpaceSpec(SpaceKind.SPHERE, n)


def hamming(n: int) -> SpaceSpec:
    """Binary Hamming space of length n."""
    if n < 1:
        raise SpaceError(f"Hamming length must be at least 1, got {n}")
    return SpaceSpec(SpaceKind.HAMMING, n)


def gegenbauer_family(n: int, k_max: int) -> ZonalFamily:
    """
    Normalized Gegenbauer polynomials G_k^{(n)} with G_k(1) = 1.

    Uses G_0 = 1, G_1 = t and
    G_k = ((2k + n - 4) t G_{k-1} - (k - 1) G_{k-2}) / (k + n - 3).

    Args:
        n: Ambient dimension (sphere S^{n-1}), at least 3
        k_max: Highest degree to build

    Returns:
        ZonalFamily over the sphere with exact coefficients

    Raises:
        SpaceError: If n < 3 or k_max < 0
    """
    space = sphere(n)
    if k_max < 0:
        raise SpaceError(f"k_max must be non-negative, got {k_max}")

    polys = [sympy.Poly(1, _T, domain="QQ")]
    if k_max >= 1:
        polys.append(sympy.Poly(_T, _T, domain="QQ"))
    for k in range(2, k_max + 1):
        numerator = polys[k - 1] * sympy.Poly((2 * k + n - 4) * _T, _T, domain="QQ") \
            - polys[k - 2] * (k - 1)
        polys.append(numerator * sympy.Rational(1, k + n - 3))

    family = ZonalFamily(space, k_max, tuple(_coefficients(p, k) for k, p in enumerate(polys)))
    logger.debug("zonal_family_built", family="gegenbauer", n=n, k_max=k_max)
    return family


def krawtchouk_family(n: int, k_max: int) -> ZonalFamily:
    """
    Normalized Krawtchouk polynomials K_k(t, n) / C(n, k), so K_k(0) = 1.

    K_k(t, n) = sum_j (-1)^j C(t, j) C(n - t, k - j), expanded as a
    polynomial in t.

    Raises:
        SpaceError: If k_max is negative or exceeds n
    """
    space = hamming(n)
    if k_max < 0 or k_max > n:
        raise SpaceError(f"k_max must lie in [0, {n}], got {k_max}")

    coeffs = []
    for k in range(k_max + 1):
        expr = sum(
            (-1) ** j * _binomial_poly(_T, j) * _binomial_poly(n - _T, k - j)
            for j in range(k + 1)
        )
        poly = sympy.Poly(sympy.expand(expr), _T, domain="QQ") * sympy.Rational(1, sympy.binomial(n, k))
        coeffs.append(_coefficients(poly, k))

    logger.debug("zonal_family_built", family="krawtchouk", n=n, k_max=k_max)
    return ZonalFamily(space, k_max, tuple(coeffs))


def zonal_family(space: SpaceSpec, k_max: int) -> ZonalFamily:
    """Family matching the space kind."""
    if space.kind is SpaceKind.SPHERE:
        return gegenbauer_family(space.n, k_max)
    return krawtchouk_family(space.n, k_max)


def zonal_gram(family: ZonalFamily, tau, k: int):
    """
    Apply Phi_k entrywise to a symmetric matrix of pairwise tau values.

    Exact input (ints / Fractions) gives a list-of-lists of Fractions,
    anything else a float numpy array.

    Raises:
        SpaceError: If k exceeds k_max or the diagonal is not tau0
    """
    if k > family.k_max:
        raise SpaceError(f"k={k} exceeds family k_max={family.k_max}")

    rows = [list(row) for row in (tau.tolist() if isinstance(tau, np.ndarray) else tau)]
    tau0 = family.space.tau0
    exact = all(is_exact(v) for row in rows for v in row)

    for i, row in enumerate(rows):
        if abs(float(row[i]) - float(tau0)) > 1e-9:
            raise SpaceError(f"Diagonal entry {i} is {row[i]}, expected tau0={tau0}")

    if exact:
        return [[family.evaluate(k, to_exact(v)) for v in row] for row in rows]

    values = np.array(rows, dtype=float)
    table = family.float_table()[k, :k + 1]
    return np.polynomial.polynomial.polyval(values, table)


def pairwise_tau(space: SpaceSpec, points) -> np.ndarray:
    """
    Matrix of tau values between points.

    Sphere points are unit vectors (rows); Hamming points are 0/1 vectors.
    """
    points = np.asarray(points)
    if space.kind is SpaceKind.SPHERE:
        tau = np.clip(points @ points.T, -1.0, 1.0)
        np.fill_diagonal(tau, 1.0)
        return tau
    bits = points.astype(int)
    return (bits[:, None, :] != bits[None, :, :]).sum(axis=2)


def random_points(space: SpaceSpec, count: int, rng: np.random.Generator) -> np.ndarray:
    """Uniformly random points of the space."""
    if space.kind is SpaceKind.SPHERE:
        raw = rng.standard_normal((count, space.n))
        return raw / np.linalg.norm(raw, axis=1, keepdims=True)
    return rng.integers(0, 2, size=(count, space.n))


def gegenbauer_inner_product(family: ZonalFamily, j: int, k: int) -> Fraction:
    """
    Exact value of int Phi_j Phi_k (1 - t^2)^((n-3)/2) dt divided by the
    total weight, computed from the closed-form even moments of the weight.
    """
    if family.space.kind is not SpaceKind.SPHERE:
        raise SpaceError("Weighted inner product is defined for sphere families only")
    alpha2 = Fraction(family.space.n - 3)  # twice the weight exponent
    product = _poly_product(family.coeffs[j], family.coeffs[k])

    total = Fraction(0)
    moment = Fraction(1)
    for p, coefficient in enumerate(product):
        if p % 2:
            continue
        if p:
            i = p // 2 - 1
            moment *= Fraction(2 * i + 1) / (2 * i + alpha2 + 3)
        total += coefficient * moment
    return total


def _poly_product(left: Sequence[Fraction], right: Sequence[Fraction]) -> List[Fraction]:
    product = [Fraction(0)] * (len(left) + len(right) - 1)
    for i, a in enumerate(left):
        for j, b in enumerate(right):
            product[i + j] += a * b
    return product


def _binomial_poly(expr, j: int):
    """C(expr, j) as a polynomial expression in t."""
    result = sympy.Integer(1)
    for i in range(j):
        result *= (expr - i)
    return result / sympy.factorial(j)


def _coefficients(poly: sympy.Poly, k: int):
    """Ascending coefficient tuple of length k + 1 as Fractions."""
    ascending = list(reversed(poly.all_coeffs()))
    ascending += [sympy.Integer(0)] * (k + 1 - len(ascending))
    coeffs = tuple(Fraction(int(c.p), int(c.q)) for c in (sympy.Rational(v) for v in ascending[:k + 1]))
    if coeffs[k] == 0:
        raise SpaceError(f"Phi_{k} has degree below {k}")
    return coeffs
