"""
Data models for 2-point-homogeneous spaces.

A space descriptor fixes the distance convention (the value tau0 taken on
coincident points and the range of tau) and a zonal family stores the
polynomials Phi_k with exact rational coefficients.
"""

from dataclasses import dataclass
from enum import Enum
from fractions import Fraction
from typing import Tuple, Union

import numpy as np


class SpaceKind(Enum):
    """Supported space kinds."""
    SPHERE = "sphere"
    HAMMING = "hamming"


@dataclass(frozen=True)
class SpaceSpec:
    """
    Unit sphere S^{n-1} (tau = inner product) or binary Hamming space of
    length n (tau = Hamming distance).
    """
    kind: SpaceKind
    n: int

    def __post_init__(self):
        if self.kind is SpaceKind.SPHERE and self.n < 3:
            raise ValueError(f"Sphere dimension must be at least 3, got {self.n}")
        if self.kind is SpaceKind.HAMMING and self.n < 1:
            raise ValueError(f"Hamming length must be at least 1, got {self.n}")

    @property
    def tau0(self) -> Fraction:
        return Fraction(1) if self.kind is SpaceKind.SPHERE else Fraction(0)

    @property
    def tau_range(self) -> Tuple[Fraction, Fraction]:
        if self.kind is SpaceKind.SPHERE:
            return Fraction(-1), Fraction(1)
        return Fraction(0), Fraction(self.n)

    def contains(self, t) -> bool:
        low, high = self.tau_range
        return low <= t <= high

    def describe(self) -> str:
        if self.kind is SpaceKind.SPHERE:
            return f"sphere(n={self.n})"
        return f"hamming(n={self.n})"


@dataclass(frozen=True)
class ZonalFamily:
    """
    Polynomials Phi_0..Phi_{k_max} with Phi_k(t) = sum_d coeffs[k][d] t^d.

    coeffs[k] has exactly k + 1 entries.
    """
    space: SpaceSpec
    k_max: int
    coeffs: Tuple[Tuple[Fraction, ...], ...]

    def coefficient(self, k: int, d: int) -> Fraction:
        if d > k:
            return Fraction(0)
        return self.coeffs[k][d]

    def evaluate(self, k: int, t: Union[int, Fraction, float]):
        """Phi_k(t); exact for rational t, float otherwise."""
        if k > self.k_max:
            raise ValueError(f"Phi_{k} requested but family stops at k_max={self.k_max}")
        if isinstance(t, float):
            return float(np.polyval([float(c) for c in reversed(self.coeffs[k])], t))
        value = Fraction(0)
        for coefficient in reversed(self.coeffs[k]):
            value = value * t + coefficient
        return value

    def float_table(self) -> np.ndarray:
        """(k_max+1) x (k_max+1) array with entry [k, d] = p_kd."""
        table = np.zeros((self.k_max + 1, self.k_max + 1))
        for k, row in enumerate(self.coeffs):
            table[k, :len(row)] = [float(c) for c in row]
        return table

    def evaluate_grid(self, points) -> np.ndarray:
        """Array [k, j] = Phi_k(points[j]) in floating point."""
        points = np.asarray(points, dtype=float)
        powers = np.vander(points, self.k_max + 1, increasing=True)
        return self.float_table() @ powers.T
