"""
SDP Model Service: assembly, validation and evaluation of block-diagonal
linear matrix inequality models.

Builders describe entries as linear expressions, dicts mapping variable
names to coefficients with the constant term under CONSTANT.
"""

from fractions import Fraction
from typing import Dict, Iterable, List, Mapping, Optional, Sequence

import numpy as np
import structlog

from app.models.sdp import (
    AffineBlock,
    BlockEvaluation,
    LinearEquality,
    Number,
    ObjectiveSense,
    SdpModel,
)


logger = structlog.get_logger(__name__)

CONSTANT = ""

LinearExpr = Dict[str, Number]


class ModelError(ValueError):
    """Raised when a model is malformed."""
    pass


def expr_add(*exprs: Mapping[str, Number], scales: Optional[Sequence[Number]] = None) -> LinearExpr:
    """Linear combination of expressions, zero coefficients dropped."""
    result: LinearExpr = {}
    for index, expr in enumerate(exprs):
        scale = 1 if scales is None else scales[index]
        for name, coefficient in expr.items():
            result[name] = result.get(name, 0) + scale * coefficient
    return {name: value for name, value in result.items() if value != 0}


class BlockBuilder:
    """
    Accumulates a symmetric affine block entry by entry.

    Only the upper triangle is stored; set(i, j) and set(j, i) address the
    same entry.
    """

    def __init__(self, size: int, label: str = ""):
        if size < 1:
            raise ModelError(f"Block size must be at least 1, got {size}")
        self.size = size
        self.label = label
        self._entries: Dict[tuple, LinearExpr] = {}

    def add(self, i: int, j: int, expr: Mapping[str, Number]) -> "BlockBuilder":
        if not (0 <= i < self.size and 0 <= j < self.size):
            raise ModelError(f"Entry ({i}, {j}) outside block {self.label!r} of size {self.size}")
        key = (min(i, j), max(i, j))
        self._entries[key] = expr_add(self._entries.get(key, {}), expr)
        return self

    def build(self) -> AffineBlock:
        constant = []
        terms: Dict[str, List] = {}
        for (i, j), expr in sorted(self._entries.items()):
            for name, value in expr.items():
                if name == CONSTANT:
                    constant.append((i, j, value))
                else:
                    terms.setdefault(name, []).append((i, j, value))
        return AffineBlock(
            size=self.size,
            constant=tuple(constant),
            terms={name: tuple(entries) for name, entries in terms.items()},
            label=self.label,
        )


def scalar_block(expr: Mapping[str, Number], label: str = "") -> AffineBlock:
    """1x1 block encoding the linear inequality expr >= 0."""
    return BlockBuilder(1, label).add(0, 0, expr).build()


def matrix_block(entries: Sequence[Sequence[Mapping[str, Number]]], label: str = "") -> AffineBlock:
    """Block from a full square matrix of linear expressions; must be symmetric."""
    size = len(entries)
    builder = BlockBuilder(size, label)
    for i in range(size):
        if len(entries[i]) != size:
            raise ModelError(f"Block {label!r} is not square")
        for j in range(i, size):
            if expr_add(entries[i][j]) != expr_add(entries[j][i]):
                raise ModelError(f"Block {label!r} is not symmetric at ({i}, {j})")
            builder.add(i, j, entries[i][j])
    return builder.build()


def block_from_matrices(constant, terms: Mapping[str, object], label: str = "", tol: float = 0.0) -> AffineBlock:
    """
    Block from dense matrices: constant + sum x_i * terms[i].

    Raises:
        ModelError: On shape mismatch or asymmetry beyond tol
    """
    size = len(constant)
    matrices = {CONSTANT: constant, **terms}
    builder = BlockBuilder(size, label)
    for name, matrix in matrices.items():
        if len(matrix) != size or any(len(row) != size for row in matrix):
            raise ModelError(f"Matrix for {name or 'constant'!r} in block {label!r} has the wrong shape")
        for i in range(size):
            for j in range(i, size):
                if abs(matrix[i][j] - matrix[j][i]) > tol:
                    raise ModelError(f"Matrix for {name or 'constant'!r} in block {label!r} is not symmetric")
                if matrix[i][j] != 0:
                    builder.add(i, j, {name: matrix[i][j]})
    return builder.build()


def assemble(
    variables: Sequence[str],
    objective: Mapping[str, Number],
    blocks: Iterable[AffineBlock],
    sense: ObjectiveSense = ObjectiveSense.MIN,
    equalities: Iterable[LinearEquality] = (),
    metadata: Optional[Mapping] = None,
) -> SdpModel:
    """
    Validate and freeze a model.

    Equalities are kept as a dedicated list; equalities_as_blocks renders
    them as paired scalar blocks when a solver needs that encoding.

    Raises:
        ModelError: On duplicate or empty names, unknown variables,
            out-of-range or lower-triangle entries
    """
    variables = tuple(variables)
    if len(set(variables)) != len(variables):
        raise ModelError("Variable names must be unique")
    if any(not name for name in variables):
        raise ModelError("Variable names must be non-empty")
    declared = set(variables)

    for name in objective:
        if name not in declared:
            raise ModelError(f"Objective references undeclared variable {name!r}")

    blocks = tuple(blocks)
    for index, block in enumerate(blocks):
        label = block.label or f"block[{index}]"
        if block.size < 1:
            raise ModelError(f"Block {label!r} has size {block.size}")
        for name, entries in [(CONSTANT, block.constant)] + list(block.terms.items()):
            if name and name not in declared:
                raise ModelError(f"Block {label!r} references undeclared variable {name!r}")
            for i, j, _ in entries:
                if not 0 <= i <= j < block.size:
                    raise ModelError(f"Block {label!r} has entry ({i}, {j}) outside its upper triangle")

    equalities = tuple(equalities)
    for equality in equalities:
        for name in equality.coeffs:
            if name not in declared:
                raise ModelError(f"Equality {equality.label!r} references undeclared variable {name!r}")

    model = SdpModel(
        variables=variables,
        sense=sense,
        objective=dict(objective),
        blocks=blocks,
        equalities=equalities,
        metadata=dict(metadata or {}),
    )
    logger.debug(
        "model_assembled",
        formulation=model.formulation,
        variables=len(variables),
        blocks=len(blocks),
        equalities=len(equalities),
        dimension=model.total_block_dimension,
    )
    return model


def eval_block(block: AffineBlock, x: Mapping[str, float]) -> BlockEvaluation:
    """Value constant + sum x_i terms[i] at x and its smallest eigenvalue."""
    matrix = block.dense_constant()
    for name in block.terms:
        if name not in x:
            raise ModelError(f"No value supplied for variable {name!r}")
        matrix = matrix + float(x[name]) * block.dense_term(name)
    min_eigenvalue = float(np.linalg.eigvalsh(matrix)[0])
    return BlockEvaluation(block.label, matrix, min_eigenvalue)


def feasibility_report(model: SdpModel, x: Mapping[str, float]) -> Dict[str, float]:
    """
    Worst violation per constraint kind at x: the most negative block
    eigenvalue and the largest equality residual.
    """
    min_eigenvalue = min((eval_block(block, x).min_eigenvalue for block in model.blocks), default=0.0)
    residual = max(
        (abs(float(eq.constant) + sum(float(c) * float(x[name]) for name, c in eq.coeffs.items()))
         for eq in model.equalities),
        default=0.0,
    )
    return {"min_eigenvalue": min_eigenvalue, "equality_residual": residual}


def is_feasible(model: SdpModel, x: Mapping[str, float], tol: float = 1e-8) -> bool:
    """True when every block is PSD and every equality holds within tol."""
    report = feasibility_report(model, x)
    return report["min_eigenvalue"] >= -tol and report["equality_residual"] <= tol


def equalities_as_blocks(model: SdpModel, slack: Number) -> SdpModel:
    """
    Replace each equality by the pair of scalar blocks
    slack + (constant + a.x) >= 0 and slack - (constant + a.x) >= 0.
    """
    extra = []
    for index, equality in enumerate(model.equalities):
        label = equality.label or f"equality[{index}]"
        expr = expr_add({CONSTANT: equality.constant}, dict(equality.coeffs))
        extra.append(scalar_block(expr_add(expr, {CONSTANT: slack}), f"{label}:lower"))
        extra.append(scalar_block(expr_add({CONSTANT: slack}, expr, scales=[1, -1]), f"{label}:upper"))

    metadata = dict(model.metadata)
    metadata["equality_encoding"] = "relaxed"
    return SdpModel(
        variables=model.variables,
        sense=model.sense,
        objective=dict(model.objective),
        blocks=model.blocks + tuple(extra),
        equalities=(),
        metadata=metadata,
    )
