"""
Solver Service: dense primal-dual interior-point method for small
block-diagonal LMI models.

The model is solved in the form

    minimize    c^T x
    subject to  S = F0 + sum_i x_i F_i  is PSD (block by block)
                E x = f

together with its dual

    maximize    -<F0, Z> + f^T w
    subject to  <F_i, Z> + (E^T w)_i = c_i,   Z PSD.

Search directions are HKM directions with a Mehrotra predictor-corrector;
the Schur complement is formed densely every iteration. Max-sense models
are negated on entry and reported back in their own sense.
"""

import math
import time
import warnings
from dataclasses import dataclass
from typing import List, Optional, TextIO

import numpy as np
import scipy.linalg
import structlog

from app.models.sdp import ObjectiveSense, SdpModel, SolveResult, SolveStatus, SolverSettings
from app.services.sdpmodel import equalities_as_blocks


logger = structlog.get_logger(__name__)


class SolverError(Exception):
    """Raised when a model cannot be handed to the solver at all."""
    pass


@dataclass
class _BlockData:
    """Dense data of one block restricted to the variables it mentions."""
    size: int
    indices: np.ndarray
    constant: np.ndarray
    terms: np.ndarray  # (len(indices), size, size)


@dataclass
class _Iterate:
    x: np.ndarray
    S: List[np.ndarray]
    Z: List[np.ndarray]
    w: np.ndarray


class InteriorPointSolver:
    """
    Primal-dual path-following solver.

    One instance may solve many models; each solve owns its working memory.
    """

    def __init__(self, settings: Optional[SolverSettings] = None):
        """
        Initialize the solver.

        Args:
            settings: Tolerances and limits (defaults from Config)
        """
        self.settings = settings or SolverSettings()

    def solve(self, model: SdpModel, iteration_log: Optional[TextIO] = None) -> SolveResult:
        """
        Solve a model.

        Args:
            model: Validated SdpModel
            iteration_log: Optional text stream receiving one line per iteration

        Returns:
            SolveResult in the model's own objective sense

        Raises:
            SolverError: If the model exceeds the block-dimension cap or has no blocks
        """
        settings = self.settings
        if not model.blocks:
            raise SolverError("Model has no blocks")
        if model.total_block_dimension > settings.max_block_dimension:
            raise SolverError(
                f"Total block dimension {model.total_block_dimension} exceeds the cap "
                f"{settings.max_block_dimension}"
            )

        working = model
        if settings.equality_mode == "relaxed" and model.equalities:
            working = equalities_as_blocks(model, settings.tol_feas / 10)

        started = time.perf_counter()
        logger.info(
            "solve_started",
            formulation=model.formulation,
            variables=len(model.variables),
            blocks=len(model.blocks),
            dimension=model.total_block_dimension,
            equality_mode=settings.equality_mode,
        )

        result = self._run(working, iteration_log)

        if working is not model:
            result = self._fold_relaxed_equalities(model, result)

        logger.info(
            "solve_completed",
            formulation=model.formulation,
            status=result.status.value,
            objective=result.objective,
            dual_objective=result.dual_objective,
            iterations=result.iterations,
            runtime_ms=round((time.perf_counter() - started) * 1000, 1),
        )
        return result

    def _run(self, model: SdpModel, iteration_log: Optional[TextIO]) -> SolveResult:
        settings = self.settings
        sign = 1.0 if model.sense is ObjectiveSense.MIN else -1.0
        c = sign * model.objective_vector()
        n_vars = len(model.variables)
        blocks = _prepare_blocks(model)
        E, f = _prepare_equalities(model)
        total_dim = sum(block.size for block in blocks)

        primal_scale = 1.0 + max([np.linalg.norm(b.constant) for b in blocks] + [np.linalg.norm(f)])
        dual_scale = 1.0 + np.linalg.norm(c)

        it = _Iterate(
            x=np.zeros(n_vars),
            S=[settings.initial_scale * np.eye(b.size) for b in blocks],
            Z=[settings.initial_scale * np.eye(b.size) for b in blocks],
            w=np.zeros(len(f)),
        )

        best = None
        best_merit = math.inf
        status = SolveStatus.NUMERICAL_LIMIT
        message = f"Iteration limit {settings.max_iter} reached"
        iteration = 0

        for iteration in range(1, settings.max_iter + 1):
            Rp = [b.constant + _apply(b, it.x) - S for b, S in zip(blocks, it.S)]
            re = f - E @ it.x
            rd = c - _adjoint(blocks, it.Z, n_vars) - E.T @ it.w

            pobj = float(c @ it.x)
            dobj = float(-sum(np.sum(b.constant * Z) for b, Z in zip(blocks, it.Z)) + f @ it.w)
            mu = sum(float(np.sum(S * Z)) for S, Z in zip(it.S, it.Z)) / total_dim
            pinf = math.sqrt(sum(float(np.sum(R * R)) for R in Rp) + float(re @ re)) / primal_scale
            dinf = float(np.linalg.norm(rd)) / dual_scale
            gap = pobj - dobj
            rel_gap = abs(gap) / (1.0 + abs(pobj))
            min_eig = min(float(np.linalg.eigvalsh(S)[0]) for S in it.S)

            if iteration_log is not None:
                iteration_log.write(
                    f"{iteration:4d} {sign * pobj: .12e} {sign * dobj: .12e} {gap: .3e} {min_eig: .3e}\n"
                )
            logger.debug("solver_iteration", iteration=iteration, pobj=sign * pobj,
                         dobj=sign * dobj, gap=gap, pinf=pinf, dinf=dinf, mu=mu)

            merit = max(rel_gap, pinf, dinf)
            if merit < best_merit:
                best_merit = merit
                best = (_copy(it), pobj, dobj, rel_gap, pinf, dinf, iteration)

            if rel_gap <= settings.tol_gap and pinf <= settings.tol_feas and dinf <= settings.tol_feas:
                status, message = SolveStatus.OPTIMAL, None
                best = (_copy(it), pobj, dobj, rel_gap, pinf, dinf, iteration)
                break
            if dobj > settings.divergence_limit and pinf > settings.tol_feas:
                status, message = SolveStatus.PRIMAL_INFEASIBLE, "Dual objective diverged while primal residual stalled"
                break
            if pobj < -settings.divergence_limit and dinf > settings.tol_feas:
                status, message = SolveStatus.DUAL_UNBOUNDED, "Primal objective diverged while dual residual stalled"
                break

            try:
                step = self._step(blocks, E, c, it, Rp, re, rd, mu, total_dim)
            except (np.linalg.LinAlgError, FloatingPointError) as e:
                message = f"Numerical breakdown: {e}"
                break
            if step is None:
                message = "Step length collapsed"
                break

        if status in (SolveStatus.PRIMAL_INFEASIBLE, SolveStatus.DUAL_UNBOUNDED):
            final = (_copy(it), pobj, dobj, rel_gap, pinf, dinf, iteration)
        else:
            final = best
        chosen, pobj, dobj, rel_gap, pinf, dinf, _ = final

        return SolveResult(
            status=status,
            x={name: float(value) for name, value in zip(model.variables, chosen.x)},
            objective=sign * pobj,
            dual_objective=sign * dobj,
            dual=[Z.copy() for Z in chosen.Z],
            equality_multipliers=[float(v) for v in chosen.w],
            duality_gap=pobj - dobj,
            iterations=iteration,
            primal_infeasibility=pinf,
            dual_infeasibility=dinf,
            message=message,
        )

    def _step(self, blocks, E, c, it: _Iterate, Rp, re, rd, mu, total_dim) -> Optional[bool]:
        """One predictor-corrector step; updates the iterate in place."""
        settings = self.settings
        n_vars = len(it.x)
        S_inv = [_spd_inverse(S) for S in it.S]

        M = np.zeros((n_vars, n_vars))
        for b, Z, Si in zip(blocks, it.Z, S_inv):
            if len(b.indices) == 0:
                continue
            ZFS = np.einsum("ab,jbc,cd->jad", Z, b.terms, Si, optimize=True)
            M[np.ix_(b.indices, b.indices)] += np.einsum("iab,jba->ij", b.terms, ZFS, optimize=True)

        n_eq = E.shape[0]
        K = np.zeros((n_vars + n_eq, n_vars + n_eq))
        K[:n_vars, :n_vars] = M
        K[:n_vars, n_vars:] = -E.T
        K[n_vars:, :n_vars] = E
        solve_kkt = _kkt_solver(K)

        def direction(G):
            # h_i = <F_i, G - Z Rp S^-1> - rd_i
            h = -rd.copy()
            for b, Z, Si, R, Gb in zip(blocks, it.Z, S_inv, Rp, G):
                if len(b.indices):
                    h[b.indices] += np.einsum("jab,ab->j", b.terms, Gb - Z @ R @ Si)
            solution = solve_kkt(np.concatenate([h, re]))
            dx, dw = solution[:n_vars], solution[n_vars:]
            dS = [R + _apply(b, dx) for b, R in zip(blocks, Rp)]
            dZ = [Gb - _sym(Z @ dSb @ Si) for Gb, Z, dSb, Si in zip(G, it.Z, dS, S_inv)]
            return dx, dw, dS, dZ

        # Predictor
        G_aff = [-Z for Z in it.Z]
        dx_a, dw_a, dS_a, dZ_a = direction(G_aff)
        alpha_p = min(1.0, _max_step(it.S, dS_a))
        alpha_d = min(1.0, _max_step(it.Z, dZ_a))
        mu_aff = sum(
            float(np.sum((S + alpha_p * dS) * (Z + alpha_d * dZ)))
            for S, dS, Z, dZ in zip(it.S, dS_a, it.Z, dZ_a)
        ) / total_dim
        sigma = min(1.0, (max(mu_aff, 0.0) / mu) ** 3) if mu > 0 else 0.0

        # Corrector
        G = [
            sigma * mu * Si - Z - _sym(dZ @ dS @ Si)
            for Si, Z, dZ, dS in zip(S_inv, it.Z, dZ_a, dS_a)
        ]
        dx, dw, dS, dZ = direction(G)
        alpha_p = min(1.0, settings.step_fraction * _max_step(it.S, dS))
        alpha_d = min(1.0, settings.step_fraction * _max_step(it.Z, dZ))
        if alpha_p < 1e-12 and alpha_d < 1e-12:
            return None

        it.x = it.x + alpha_p * dx
        it.S = [_sym(S + alpha_p * d) for S, d in zip(it.S, dS)]
        it.Z = [_sym(Z + alpha_d * d) for Z, d in zip(it.Z, dZ)]
        it.w = it.w + alpha_d * dw
        return True

    @staticmethod
    def _fold_relaxed_equalities(model: SdpModel, result: SolveResult) -> SolveResult:
        """Map a relaxed-pair solution back onto the original blocks and equalities."""
        count = len(model.blocks)
        pairs = result.dual[count:]
        result.equality_multipliers = [
            float(lower[0, 0] - upper[0, 0]) for lower, upper in zip(pairs[0::2], pairs[1::2])
        ]
        result.dual = result.dual[:count]
        return result


def solve(model: SdpModel, settings: Optional[SolverSettings] = None,
          iteration_log: Optional[TextIO] = None) -> SolveResult:
    """Solve a model with a fresh InteriorPointSolver."""
    return InteriorPointSolver(settings).solve(model, iteration_log)


def _prepare_blocks(model: SdpModel) -> List[_BlockData]:
    index = model.variable_index
    prepared = []
    for block in model.blocks:
        names = list(block.terms)
        terms = np.array([block.dense_term(name) for name in names]) if names \
            else np.zeros((0, block.size, block.size))
        prepared.append(_BlockData(
            size=block.size,
            indices=np.array([index[name] for name in names], dtype=int),
            constant=block.dense_constant(),
            terms=terms,
        ))
    return prepared


def _prepare_equalities(model: SdpModel):
    index = model.variable_index
    E = np.zeros((len(model.equalities), len(model.variables)))
    f = np.zeros(len(model.equalities))
    for row, equality in enumerate(model.equalities):
        for name, coefficient in equality.coeffs.items():
            E[row, index[name]] += float(coefficient)
        f[row] = -float(equality.constant)
    return E, f


def _apply(block: _BlockData, x: np.ndarray) -> np.ndarray:
    if len(block.indices) == 0:
        return np.zeros((block.size, block.size))
    return np.einsum("j,jab->ab", x[block.indices], block.terms)


def _adjoint(blocks: List[_BlockData], Z: List[np.ndarray], n_vars: int) -> np.ndarray:
    result = np.zeros(n_vars)
    for block, Zb in zip(blocks, Z):
        if len(block.indices):
            result[block.indices] += np.einsum("jab,ab->j", block.terms, Zb)
    return result


def _sym(A: np.ndarray) -> np.ndarray:
    return (A + A.T) / 2.0


def _copy(it: _Iterate) -> _Iterate:
    return _Iterate(it.x.copy(), [S.copy() for S in it.S], [Z.copy() for Z in it.Z], it.w.copy())


def _spd_inverse(A: np.ndarray) -> np.ndarray:
    factor = scipy.linalg.cho_factor(A, lower=True)
    return _sym(scipy.linalg.cho_solve(factor, np.eye(A.shape[0])))


def _kkt_solver(K: np.ndarray):
    """LU-based solve of the Newton system, least squares if it is singular."""
    with warnings.catch_warnings():
        warnings.simplefilter("error", scipy.linalg.LinAlgWarning)
        try:
            factor = scipy.linalg.lu_factor(K)
        except (scipy.linalg.LinAlgWarning, np.linalg.LinAlgError, ValueError):
            factor = None

    def solve_rhs(rhs: np.ndarray) -> np.ndarray:
        if factor is not None:
            solution = scipy.linalg.lu_solve(factor, rhs)
            if np.all(np.isfinite(solution)):
                return solution
        return scipy.linalg.lstsq(K, rhs)[0]

    return solve_rhs


def _max_step(X: List[np.ndarray], dX: List[np.ndarray]) -> float:
    """Largest alpha with X + alpha dX PSD in every block (inf if unbounded)."""
    alpha = math.inf
    for Xb, dXb in zip(X, dX):
        L = np.linalg.cholesky(Xb)
        T = scipy.linalg.solve_triangular(L, dXb, lower=True)
        T = scipy.linalg.solve_triangular(L, T.T, lower=True)
        smallest = float(np.linalg.eigvalsh(_sym(T))[0])
        if smallest < 0:
            alpha = min(alpha, -1.0 / smallest)
    return alpha
