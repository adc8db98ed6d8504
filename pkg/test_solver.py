"""
Tests for the interior-point solver on small models with known optima.
"""

import io
import sys
from fractions import Fraction

import numpy as np

from app.config import Config
from app.models.sdp import LinearEquality, ObjectiveSense, SolveStatus, SolverSettings
from app.services.sdpmodel import CONSTANT, assemble, matrix_block, scalar_block
from app.services.formulations import build_sdphat, one_sided_partition
from app.services.solver import InteriorPointSolver, SolverError, solve
from app.services.spaces import gegenbauer_family


def test_scalar_lp():
    # min x  s.t. x >= 1
    model = assemble(("x",), {"x": 1}, [scalar_block({"x": 1, CONSTANT: -1}, "x_ge_1")])
    result = solve(model)
    assert result.is_optimal, result.message
    assert abs(result.x["x"] - 1.0) < 1e-7
    assert abs(result.dual_objective - 1.0) < 1e-7
    assert abs(result.dual[0][0, 0] - 1.0) < 1e-6
    print("✅ Scalar LP solved")


def test_two_by_two_lmi():
    # min t  s.t. [[t, 1], [1, t]] PSD
    block = matrix_block([[{"t": 1}, {CONSTANT: 1}], [{CONSTANT: 1}, {"t": 1}]], "pair")
    result = solve(assemble(("t",), {"t": 1}, [block]))
    assert result.is_optimal
    assert abs(result.objective - 1.0) < 1e-7
    assert result.dual_objective <= result.objective + 1e-7
    print("✅ 2x2 LMI optimum t = 1")


def test_max_sense():
    # max x  s.t. [[1, x], [x, 1]] PSD
    block = matrix_block([[{CONSTANT: 1}, {"x": 1}], [{"x": 1}, {CONSTANT: 1}]], "corr")
    model = assemble(("x",), {"x": 1}, [block], sense=ObjectiveSense.MAX)
    result = solve(model)
    assert result.is_optimal
    assert abs(result.objective - 1.0) < 1e-7
    # for max models the dual objective bounds from above
    assert result.dual_objective >= result.objective - 1e-7
    print("✅ Max-sense model reported in its own sense")


def _equality_model():
    # min x + y  s.t. x, y >= 0 and x + 2y = 2
    return assemble(
        ("x", "y"),
        {"x": 1, "y": 1},
        [scalar_block({"x": 1}, "x_nonneg"), scalar_block({"y": 1}, "y_nonneg")],
        equalities=[LinearEquality({"x": 1, "y": 2}, Fraction(-2), "resource")],
    )


def test_equality_native():
    result = solve(_equality_model())
    assert result.is_optimal
    assert abs(result.objective - 1.0) < 1e-7
    assert abs(result.x["y"] - 1.0) < 1e-6
    assert abs(result.equality_multipliers[0] - 0.5) < 1e-6
    print("✅ Native equality handling")


def test_equality_relaxed():
    result = solve(_equality_model(), SolverSettings(equality_mode="relaxed"))
    # the slab between the paired blocks is only 2e-10 wide
    assert result.status in (SolveStatus.OPTIMAL, SolveStatus.NUMERICAL_LIMIT), result.message
    assert abs(result.objective - 1.0) < 1e-5
    assert len(result.dual) == 2
    assert len(result.equality_multipliers) == 1
    assert abs(result.equality_multipliers[0] - 0.5) < 1e-4
    print("✅ Relaxed equality handling folds multipliers back")


def test_infeasible_model_is_not_optimal():
    # x >= 1 and x <= 0
    model = assemble(("x",), {"x": 1}, [
        scalar_block({"x": 1, CONSTANT: -1}, "x_ge_1"),
        scalar_block({"x": -1}, "x_le_0"),
    ])
    result = solve(model, SolverSettings(divergence_limit=1e6, max_iter=100))
    assert result.status in (SolveStatus.PRIMAL_INFEASIBLE, SolveStatus.NUMERICAL_LIMIT), result.status
    assert result.message
    print(f"✅ Infeasible model reported as {result.status.value}")


def test_block_dimension_cap():
    block = matrix_block([[{"t": 1} if i == j else {} for j in range(5)] for i in range(5)], "big")
    model = assemble(("t",), {"t": 1}, [block])
    try:
        InteriorPointSolver(SolverSettings(max_block_dimension=4)).solve(model)
    except SolverError as e:
        assert "exceeds the cap" in str(e)
        print("✅ Block dimension cap enforced")
        return
    raise AssertionError("expected SolverError")


def test_default_cap_and_table_override():
    assert SolverSettings().max_block_dimension == 200
    assert Config.TABLE_MAX_BLOCK_DIMENSION >= 217
    family = gegenbauer_family(3, 11)
    model = build_sdphat(family, Fraction(-1), Fraction(1, 2), one_sided_partition(3), [], 6)
    assert model.total_block_dimension == 217
    try:
        InteriorPointSolver(SolverSettings()).solve(model)
        raise AssertionError("expected SolverError at the default cap")
    except SolverError as e:
        assert "217" in str(e)
    print("✅ Default cap 200 rejects the m = 6 table instance; the table raises it")


def test_iteration_log():
    stream = io.StringIO()
    model = assemble(("x",), {"x": 1}, [scalar_block({"x": 1, CONSTANT: -1})])
    result = solve(model, iteration_log=stream)
    lines = stream.getvalue().strip().splitlines()
    assert len(lines) == result.iterations
    assert lines[0].split()[0] == "1"
    print(f"✅ Iteration log has {len(lines)} lines")


def test_settings_validation():
    for kwargs in ({"tol_gap": 0}, {"step_fraction": 1.0}, {"max_iter": 0}, {"equality_mode": "penalty"}):
        try:
            SolverSettings(**kwargs)
        except ValueError:
            continue
        raise AssertionError(f"expected ValueError for {kwargs}")
    print("✅ SolverSettings validation")


def test_random_lmi_duality_gap():
    """Random feasible and bounded LMIs close their duality gap."""
    rng = np.random.default_rng(3)
    for _ in range(10):
        size = 4
        terms = {}
        for name in ("a", "b", "c"):
            A = rng.standard_normal((size, size))
            terms[name] = (A + A.T) / 2
        # identity constant keeps x = 0 strictly feasible; the trace bound keeps it bounded
        entries = [[{} for _ in range(size)] for _ in range(size)]
        for i in range(size):
            for j in range(size):
                expr = {name: float(M[i, j]) for name, M in terms.items()}
                if i == j:
                    expr[CONSTANT] = 1.0
                entries[i][j] = expr
        box = [scalar_block({name: 1, CONSTANT: 10}, f"{name}_lower") for name in terms]
        box += [scalar_block({name: -1, CONSTANT: 10}, f"{name}_upper") for name in terms]
        objective = {name: float(v) for name, v in zip(terms, rng.standard_normal(3))}
        model = assemble(tuple(terms), objective, [matrix_block(entries, "lmi")] + box)
        result = solve(model)
        assert result.is_optimal, result.message
        assert abs(result.objective - result.dual_objective) <= 1e-6 * (1 + abs(result.objective))
    print("✅ Random LMIs solved to a closed duality gap")


def main():
    print("=" * 70)
    print("SOLVER TESTS")
    print("=" * 70)
    test_scalar_lp()
    test_two_by_two_lmi()
    test_max_sense()
    test_equality_native()
    test_equality_relaxed()
    test_infeasible_model_is_not_optimal()
    test_block_dimension_cap()
    test_default_cap_and_table_override()
    test_iteration_log()
    test_settings_validation()
    test_random_lmi_duality_gap()
    print("\n✅ All solver tests passed!")
    return 0


if __name__ == "__main__":
    sys.exit(main())
