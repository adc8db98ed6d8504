"""
Data models for block-diagonal linear matrix inequality problems.

A model is a list of named scalar variables, a linear objective, affine
symmetric blocks that must be positive semidefinite and a separate list of
linear equalities. Block entries are stored as upper-triangle coordinate
lists (i <= j) holding Fractions or floats.
"""

from dataclasses import dataclass, field
from enum import Enum
from fractions import Fraction
from typing import Any, Dict, List, Mapping, Optional, Tuple, Union

import numpy as np

from app.config import Config


Number = Union[int, float, Fraction]
Entry = Tuple[int, int, Number]


class ObjectiveSense(Enum):
    """Direction of optimization."""
    MIN = "min"
    MAX = "max"


class BoundKind(Enum):
    """How an optimal objective turns into an upper bound on code size."""
    RECIPROCAL = "reciprocal"  # min y: bound (1 + y) / y
    DIRECT = "direct"          # max c: bound is the objective
    PLUS_ONE = "plus_one"      # max sum of distance distribution: bound 1 + objective
    NONE = "none"


@dataclass(frozen=True)
class AffineBlock:
    """
    Symmetric block constant + sum_i x_i * terms[i], required to be PSD.

    A size-1 block is a scalar inequality.
    """
    size: int
    constant: Tuple[Entry, ...]
    terms: Dict[str, Tuple[Entry, ...]]
    label: str = ""

    @property
    def variables(self) -> List[str]:
        return list(self.terms)

    def dense_constant(self) -> np.ndarray:
        return _dense(self.size, self.constant)

    def dense_term(self, name: str) -> np.ndarray:
        return _dense(self.size, self.terms.get(name, ()))

    def exact_matrix(self, values: Mapping[str, Fraction]) -> List[List[Fraction]]:
        """constant + sum x_i terms[i] with Fraction arithmetic."""
        matrix = [[Fraction(0)] * self.size for _ in range(self.size)]
        _accumulate(matrix, self.constant, Fraction(1))
        for name, entries in self.terms.items():
            _accumulate(matrix, entries, values[name])
        return matrix


@dataclass(frozen=True)
class LinearEquality:
    """constant + sum_i coeffs[i] * x_i = 0."""
    coeffs: Dict[str, Number]
    constant: Number = Fraction(0)
    label: str = ""


@dataclass(frozen=True)
class SdpModel:
    """Validated block-diagonal LMI model (see sdpmodel.assemble)."""
    variables: Tuple[str, ...]
    sense: ObjectiveSense
    objective: Dict[str, Number]
    blocks: Tuple[AffineBlock, ...]
    equalities: Tuple[LinearEquality, ...] = ()
    metadata: Dict[str, Any] = field(default_factory=dict)

    @property
    def variable_index(self) -> Dict[str, int]:
        return {name: i for i, name in enumerate(self.variables)}

    @property
    def total_block_dimension(self) -> int:
        return sum(block.size for block in self.blocks)

    @property
    def bound_kind(self) -> BoundKind:
        return BoundKind(self.metadata.get("bound_kind", BoundKind.NONE.value))

    @property
    def formulation(self) -> str:
        return self.metadata.get("formulation", "custom")

    def objective_vector(self) -> np.ndarray:
        return np.array([float(self.objective.get(name, 0)) for name in self.variables])

    def block(self, label: str) -> AffineBlock:
        for block in self.blocks:
            if block.label == label:
                return block
        raise KeyError(f"No block labelled {label!r}")


class SolveStatus(Enum):
    """Terminal state of an interior-point solve."""
    OPTIMAL = "optimal"
    PRIMAL_INFEASIBLE = "primal_infeasible"
    DUAL_UNBOUNDED = "dual_unbounded"
    NUMERICAL_LIMIT = "numerical_limit"


@dataclass(frozen=True)
class SolverSettings:
    """Interior-point tolerances and limits; defaults come from Config."""
    tol_gap: float = Config.SOLVER_TOL_GAP
    tol_feas: float = Config.SOLVER_TOL_FEAS
    max_iter: int = Config.SOLVER_MAX_ITER
    step_fraction: float = Config.SOLVER_STEP_FRACTION
    initial_scale: float = Config.SOLVER_INITIAL_SCALE
    divergence_limit: float = Config.SOLVER_DIVERGENCE_LIMIT
    max_block_dimension: int = Config.SOLVER_MAX_BLOCK_DIMENSION
    equality_mode: str = Config.SOLVER_EQUALITY_MODE

    def __post_init__(self):
        if self.tol_gap <= 0 or self.tol_feas <= 0:
            raise ValueError("Solver tolerances must be positive")
        if not 0 < self.step_fraction < 1:
            raise ValueError(f"step_fraction must lie in (0, 1), got {self.step_fraction}")
        if self.max_iter < 1:
            raise ValueError("max_iter must be at least 1")
        if self.initial_scale <= 0:
            raise ValueError("initial_scale must be positive")
        if self.equality_mode not in ("native", "relaxed"):
            raise ValueError(f"Unknown equality_mode {self.equality_mode!r}")


@dataclass
class SolveResult:
    """
    Outcome of a solve.

    dual holds one PSD multiplier matrix per block and equality_multipliers
    one value per equality. objective and dual_objective are in the model's
    own sense: for a min model dual_objective is a lower bound on objective.
    """
    status: SolveStatus
    x: Dict[str, float]
    objective: float
    dual_objective: float
    dual: List[np.ndarray]
    equality_multipliers: List[float]
    duality_gap: float
    iterations: int
    primal_infeasibility: float = 0.0
    dual_infeasibility: float = 0.0
    message: Optional[str] = None

    @property
    def is_optimal(self) -> bool:
        return self.status is SolveStatus.OPTIMAL


@dataclass(frozen=True)
class BlockEvaluation:
    """Value of one block at a point and its smallest eigenvalue."""
    label: str
    matrix: np.ndarray
    min_eigenvalue: float


def _dense(size: int, entries) -> np.ndarray:
    matrix = np.zeros((size, size))
    for i, j, value in entries:
        matrix[i, j] += float(value)
        if i != j:
            matrix[j, i] += float(value)
    return matrix


def _accumulate(matrix, entries, scale) -> None:
    for i, j, value in entries:
        contribution = scale * _exact(value)
        matrix[i][j] += contribution
        if i != j:
            matrix[j][i] += contribution


def _exact(value) -> Fraction:
    if isinstance(value, Fraction):
        return value
    if isinstance(value, int):
        return Fraction(value)
    return Fraction(float(value))
