"""
Data models for moment sequences and atomic distance distributions.
"""

from dataclasses import dataclass, field
from fractions import Fraction
from typing import List, Tuple

import numpy as np
from scipy.linalg import block_diag


@dataclass(frozen=True)
class MomentVector:
    """
    Power sums s_0..s_K of pairwise tau values.

    With normalized=True the vector holds s_k / s_0 and s_0 is exactly 1.
    """
    values: Tuple
    normalized: bool = False

    def __post_init__(self):
        if len(self.values) < 2:
            raise ValueError("A moment vector needs at least s_0 and s_1")
        if self.normalized and self.values[0] != 1:
            raise ValueError(f"Normalized moments must start with 1, got {self.values[0]}")

    def __len__(self) -> int:
        return len(self.values)

    @property
    def max_order(self) -> int:
        """Largest m for which order-m Hankel blocks can be built."""
        return len(self.values) // 2

    def as_floats(self) -> np.ndarray:
        return np.array([float(v) for v in self.values])

    def normalize(self) -> "MomentVector":
        s0 = self.values[0]
        if s0 == 0:
            raise ValueError("Cannot normalize a moment vector with s_0 = 0")
        return MomentVector(tuple(v / s0 for v in self.values), normalized=True)

    def scaled(self, factor) -> "MomentVector":
        return MomentVector(tuple(v * factor for v in self.values), normalized=False)


@dataclass(frozen=True)
class Atom:
    """A point mass: weight w at tau value t."""
    location: object
    weight: object


@dataclass(frozen=True)
class AtomicDistribution:
    """Finite measure on tau values; atoms sorted by location."""
    atoms: Tuple[Atom, ...] = field(default_factory=tuple)

    def __post_init__(self):
        locations = [atom.location for atom in self.atoms]
        if any(b <= a for a, b in zip(locations, locations[1:])):
            raise ValueError("Atom locations must be strictly increasing")

    @property
    def locations(self) -> List:
        return [atom.location for atom in self.atoms]

    @property
    def weights(self) -> List:
        return [atom.weight for atom in self.atoms]

    @property
    def total_weight(self):
        return sum(self.weights, Fraction(0))

    def integrality_deviations(self, scale=1) -> List[Tuple[object, float]]:
        """
        Distance of scale * w to the nearest integer, per atom.

        Distance distributions of actual codes give integer pair counts.
        """
        deviations = []
        for atom in self.atoms:
            scaled = float(atom.weight) * float(scale)
            deviations.append((atom.location, abs(scaled - round(scaled))))
        return deviations


@dataclass(frozen=True)
class HankelBlocks:
    """
    The three moment matrices of order m on [a, b].

    R[i][j] = s_{i+j}; F_plus[i][j] = s_{i+j+1} - a s_{i+j};
    F_minus[i][j] = b s_{i+j} - s_{i+j+1}.
    """
    order: int
    R: Tuple[Tuple, ...]
    F_plus: Tuple[Tuple, ...]
    F_minus: Tuple[Tuple, ...]

    def as_arrays(self) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        return tuple(
            np.array([[float(v) for v in row] for row in matrix])
            for matrix in (self.R, self.F_plus, self.F_minus)
        )

    def stacked(self) -> np.ndarray:
        """H_m as a single block-diagonal float matrix."""
        return block_diag(*self.as_arrays())
