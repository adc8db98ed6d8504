"""
Data models for formulation inputs, bound reports, certificates and run
configuration.
"""

from dataclasses import dataclass, field
from enum import Enum
from fractions import Fraction
from typing import Any, Dict, List, Optional, Tuple

from app.models.sdp import SolverSettings
from app.models.space import SpaceSpec


class AdKind(Enum):
    """Side constraint families for interval-partitioned relaxations."""
    PFENDER = "pfender"
    CAP_COUNT = "cap_count"
    LINEAR_CUSTOM = "linear_custom"


@dataclass(frozen=True)
class AdConstraint:
    """
    Extra linear constraint valid for every code.

    LinearCustom coefficients are keyed by model variable names (for example
    "c", "z", "x[1,2]"); the rendered constraint is constant + sum >= 0.
    """
    kind: AdKind
    theta: Optional[float] = None
    k: Optional[int] = None
    coefficients: Dict[str, Any] = field(default_factory=dict)
    constant: Any = Fraction(0)
    label: str = ""


@dataclass(frozen=True)
class PartitionCell:
    """
    One cell of a partition of the target region.

    theta_lo/theta_hi are colatitudes to the anchor pole (sphere case).
    anchor_intervals[i] = (alpha_i, beta_i) bounds tau between the anchor
    q_i and any code point in the cell.
    """
    theta_lo: float
    theta_hi: float
    anchor_intervals: Tuple[Tuple[Any, Any], ...]


@dataclass(frozen=True)
class PartitionSpec:
    """
    Anchors q_1..q_r (pairwise tau matrix) and cells Pi_1..Pi_d.

    pair_intervals[(i, j)] for i <= j is the tau interval available to pairs
    with one point in Pi_i and the other in Pi_j, or None when empty.
    """
    anchors: Tuple[Tuple[Any, ...], ...]
    cells: Tuple[PartitionCell, ...]
    pair_intervals: Dict[Tuple[int, int], Optional[Tuple[Any, Any]]]
    region: str = ""

    @property
    def r(self) -> int:
        return len(self.anchors)

    @property
    def d(self) -> int:
        return len(self.cells)


@dataclass
class BoundReport:
    """Result of one bound computation."""
    formulation: str
    m: Optional[int]
    status: str
    bound: Optional[float]
    objective: Optional[float] = None
    bound_certified: Optional[Fraction] = None
    variables: Dict[str, float] = field(default_factory=dict)
    notes: List[str] = field(default_factory=list)


@dataclass(frozen=True)
class RationalCertificate:
    """
    Exact dual multipliers for an SdpModel.

    dual_blocks[b] is a symmetric matrix of Fractions for block b, and
    equality_multipliers[e] the multiplier of equality e.
    """
    model_hash: str
    dual_blocks: Tuple[Tuple[Tuple[Fraction, ...], ...], ...]
    equality_multipliers: Tuple[Fraction, ...]
    claimed_bound: Fraction
    bound_kind: str
    max_denominator: int = 0


@dataclass(frozen=True)
class PsdCheck:
    """Outcome of an exact PSD test; witness v has v^T Q v < 0 on failure."""
    is_psd: bool
    rank: int
    pivots: Tuple[Fraction, ...] = ()
    witness: Optional[Tuple[Fraction, ...]] = None


class Command(Enum):
    """CLI commands."""
    BOUND = "bound"
    LP = "lp"
    RECOVER = "recover"
    VERIFY = "verify"


class FormulationKind(Enum):
    """Relaxations the bound command can build."""
    SDP0 = "sdp0"
    SDP0_ANTIPODAL = "sdp0_antipodal"
    SDPA = "sdpa"
    SDPA_SUBSET = "sdpa_subset"
    SDPHAT = "sdphat"


@dataclass
class RunConfig:
    """Parsed and validated run configuration document."""
    command: Command
    raw: Dict[str, Any]
    space: Optional[SpaceSpec] = None
    interval: Optional[Tuple[Any, Any]] = None
    formulation: Optional[FormulationKind] = None
    m: Optional[int] = None
    breakpoints: Optional[List[Any]] = None
    ad: List[AdConstraint] = field(default_factory=list)
    partition: Optional[PartitionSpec] = None
    anchors: Optional[Tuple[Tuple[Any, ...], ...]] = None
    anchor_intervals: Optional[List[Tuple[Any, Any]]] = None
    degree: Optional[int] = None
    grid_points: Optional[int] = None
    polynomial: Optional[List[Any]] = None
    moments: Optional[List[Any]] = None
    rank: Optional[int] = None
    tol: float = 1e-6
    certificate_path: Optional[str] = None
    model_path: Optional[str] = None
    solver: SolverSettings = field(default_factory=SolverSettings)
    certify: bool = False
    max_denominator: int = 10 ** 6
    output: Optional[str] = None
