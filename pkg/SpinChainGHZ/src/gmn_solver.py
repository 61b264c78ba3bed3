# src/gmn_solver.py: fully decomposable witness SDP for three qubits
"""
Genuine multipartite negativity as the optimum of

    minimise Tr[W rho]  over Hermitian W
    subject to, for every bipartition M:  W = P_M + Q_M^{T_M},  0 <= P_M, Q_M <= 1

with ``gmn = max(0, -optimum)``. The problem is split as ADMM between the affine
decomposition constraints and the eigenvalue box, with over-relaxation and residual
balancing. Every ``check_every`` iterations the current iterate is shrunk into an
exactly feasible witness and a dual bound is read off the scaled multipliers; the
gap between the two certifies the result.
"""

import logging
import math
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Optional, Tuple, Union

import numpy as np

from .entanglement_measures import PARTITIONS, negativity, partial_transpose
from .exceptions import ConfigError, StateValidationError
from .free_fermion_dynamics import ReceiverState, state_residuals
from .models.schemas import CertificateReport, CheckResult

logger = logging.getLogger(__name__)

DEFAULT_TOLERANCE = 1e-7
DEFAULT_MAX_ITER = 50_000
RELAXATION = 1.6
CHECK_EVERY = 25
BALANCE_EVERY = 100
BALANCE_RATIO = 10.0

# input acceptance
INPUT_HERMITIAN_TOL = 1e-10
INPUT_TRACE_TOL = 1e-8
INPUT_PSD_TOL = 1e-9

# certificate tolerances
DECOMPOSITION_TOL = 1e-8
BOX_TOL = 1e-9
OBJECTIVE_TOL = 1e-9
NEGATIVITY_SLACK = 1e-6

PARTITION_LABELS = {qubit: label for label, qubit in PARTITIONS.items()}
_EYE = np.eye(8)


class SolverStatus(str, Enum):
    CONVERGED = "converged"
    CAP_REACHED = "cap-reached"


@dataclass(frozen=True)
class GmnProblem:
    rho: np.ndarray
    partitions: Tuple[int, ...] = (0, 1, 2)
    tolerance: float = DEFAULT_TOLERANCE
    max_iter: int = DEFAULT_MAX_ITER

    def __post_init__(self):
        rho = np.asarray(self.rho, dtype=complex)
        if rho.shape != (8, 8):
            raise StateValidationError(f"density matrix must be 8x8, got {rho.shape}")
        residuals = state_residuals(rho, check_sparsity=False)
        limits = {"hermiticity": INPUT_HERMITIAN_TOL, "trace": INPUT_TRACE_TOL, "positivity": INPUT_PSD_TOL}
        failed = {k: v for k, v in residuals.items() if v > limits[k]}
        if failed:
            raise StateValidationError(f"not a density matrix: {failed}")
        if not self.partitions or not set(self.partitions) <= {0, 1, 2}:
            raise ValueError(f"partitions must name qubits 0, 1, 2: {self.partitions}")
        if self.tolerance <= 0 or self.max_iter < 1:
            raise ValueError("tolerance must be positive and max_iter at least 1")
        object.__setattr__(self, "rho", (rho + rho.conj().T) / 2)


@dataclass(frozen=True)
class GmnSolution:
    optimum: float
    gmn: float
    witness: np.ndarray
    decomposition: Tuple[Tuple[np.ndarray, np.ndarray], ...]
    gap: float
    dual_value: float
    status: SolverStatus
    iterations: int
    partitions: Tuple[int, ...] = field(default=(0, 1, 2))


# ---------------- Linear maps and projections ----------------
def _herm(x: np.ndarray) -> np.ndarray:
    return (x + np.conj(np.swapaxes(x, -1, -2))) / 2


def _pt_stack(stack: np.ndarray, partitions: Tuple[int, ...]) -> np.ndarray:
    return np.stack([partial_transpose(x, qubit) for x, qubit in zip(stack, partitions)])


def _project_affine(w, p, q, partitions):
    """Nearest point with W = P_M + T_M(Q_M) for every M."""
    r = p + _pt_stack(q, partitions) - w
    shift = r.sum(axis=0) / (len(partitions) + 2)
    lam = (r - shift) / 2
    return w + shift, p - lam, q - _pt_stack(lam, partitions)


def _project_box(stack: np.ndarray) -> np.ndarray:
    """Clip eigenvalues of each Hermitian matrix in the stack to [0, 1]."""
    vals, vecs = np.linalg.eigh(_herm(stack))
    vals = np.clip(vals, 0.0, 1.0)
    return (vecs * vals[:, None, :]) @ np.conj(np.swapaxes(vecs, -1, -2))


def _objective(witness: np.ndarray, rho: np.ndarray) -> float:
    return float(np.real(np.sum(witness * rho.T)))


def _polish(p: np.ndarray, q: np.ndarray, partitions):
    """Uniform shrink of an affine-feasible iterate into the box.

    With eps the largest box violation, (X + eps) / (1 + 2 eps) has eigenvalues in [0, 1]
    and the decomposition constraints stay satisfied.
    """
    p, q = _herm(p), _herm(q)
    eigs = np.linalg.eigvalsh(np.concatenate([p, q]))
    eps = max(0.0, -float(eigs.min()), float(eigs.max()) - 1.0)
    p = (p + eps * _EYE) / (1.0 + 2.0 * eps)
    q = (q + eps * _EYE) / (1.0 + 2.0 * eps)
    witness = _herm(np.mean(p + _pt_stack(q, partitions), axis=0))
    return witness, p, q


def dual_bound(rho: np.ndarray, multipliers: np.ndarray, partitions: Tuple[int, ...]) -> float:
    """Lower bound on the optimum from any multiplier estimate.

    The estimates are shifted to sum to ``rho``; each then contributes the negative
    parts of its spectrum and of its partial transpose.
    """
    y = _herm(multipliers)
    y = y + (rho - y.sum(axis=0)) / len(partitions)
    own = np.linalg.eigvalsh(y)
    transposed = np.linalg.eigvalsh(_herm(_pt_stack(y, partitions)))
    return float(np.minimum(own, 0.0).sum() + np.minimum(transposed, 0.0).sum())


# ---------------- Solver ----------------
def solve_gmn(problem: GmnProblem, sigma: float = 1.0) -> GmnSolution:
    rho = problem.rho
    parts = tuple(problem.partitions)
    m = len(parts)

    w = np.zeros((8, 8), dtype=complex)
    p = np.zeros((m, 8, 8), dtype=complex)
    q = np.zeros((m, 8, 8), dtype=complex)
    up = np.zeros_like(p)
    uq = np.zeros_like(q)

    best: Optional[Tuple[float, np.ndarray, np.ndarray, np.ndarray]] = None
    best_dual = -math.inf
    status = SolverStatus.CAP_REACHED
    iterations = 0
    xp = p
    xq = q

    for iterations in range(1, problem.max_iter + 1):
        xw, xp, xq = _project_affine(w - rho / sigma, p - up, q - uq, parts)
        hw = RELAXATION * xw + (1 - RELAXATION) * w
        hp = RELAXATION * xp + (1 - RELAXATION) * p
        hq = RELAXATION * xq + (1 - RELAXATION) * q

        w_prev, p_prev, q_prev = w, p, q
        w = hw
        p = _project_box(hp + up)
        q = _project_box(hq + uq)
        up = up + hp - p
        uq = uq + hq - q

        if iterations % CHECK_EVERY == 0:
            best = _keep_best(best, _polish(xp, xq, parts), rho)
            lam = -sigma * (up + _pt_stack(uq, parts)) / 2
            best_dual = max(best_dual, dual_bound(rho, lam, parts))
            gap = best[0] - best_dual
            logger.debug("iter %d: primal %.12g dual %.12g gap %.3e", iterations, best[0], best_dual, gap)
            if gap <= problem.tolerance:
                status = SolverStatus.CONVERGED
                break

        if iterations % BALANCE_EVERY == 0:
            primal_res = math.sqrt(
                np.linalg.norm(xw - w) ** 2 + np.linalg.norm(xp - p) ** 2 + np.linalg.norm(xq - q) ** 2
            )
            dual_res = sigma * math.sqrt(
                np.linalg.norm(w - w_prev) ** 2
                + np.linalg.norm(p - p_prev) ** 2
                + np.linalg.norm(q - q_prev) ** 2
            )
            if primal_res > BALANCE_RATIO * dual_res:
                sigma *= 2.0
                up, uq = up / 2.0, uq / 2.0
            elif dual_res > BALANCE_RATIO * primal_res:
                sigma /= 2.0
                up, uq = up * 2.0, uq * 2.0

    if status is SolverStatus.CAP_REACHED:
        best = _keep_best(best, _polish(xp, xq, parts), rho)
        lam = -sigma * (up + _pt_stack(uq, parts)) / 2
        best_dual = max(best_dual, dual_bound(rho, lam, parts))
        logger.warning(
            "GMN solver reached its cap of %d iterations (gap %.3e)",
            problem.max_iter,
            best[0] - best_dual,
        )

    optimum, witness, p_best, q_best = best
    return GmnSolution(
        optimum=optimum,
        gmn=max(0.0, -optimum),
        witness=witness,
        decomposition=tuple((p_best[k], q_best[k]) for k in range(m)),
        gap=max(0.0, optimum - best_dual),
        dual_value=best_dual,
        status=status,
        iterations=iterations,
        partitions=parts,
    )


def _keep_best(best, candidate, rho):
    witness, p, q = candidate
    objective = _objective(witness, rho)
    if best is None or objective < best[0]:
        return objective, witness, p, q
    return best


# ---------------- Certificates ----------------
def check_certificate(solution: GmnSolution, problem: GmnProblem) -> CertificateReport:
    """Recompute every feasibility and optimality claim of a solution from scratch."""
    checks = []
    witness = solution.witness
    checks.append(_check("witness_hermitian", np.abs(witness - witness.conj().T).max(), DECOMPOSITION_TOL))

    for qubit, (p, q) in zip(solution.partitions, solution.decomposition):
        label = PARTITION_LABELS[qubit]
        residual = np.abs(witness - p - partial_transpose(q, qubit)).max()
        checks.append(_check(f"decomposition_{label}", residual, DECOMPOSITION_TOL))
        for name, x in (("P", p), ("Q", q)):
            eigs = np.linalg.eigvalsh(_herm(x))
            checks.append(_check(f"{name}_{label}_lower", max(0.0, -eigs.min()), BOX_TOL))
            checks.append(_check(f"{name}_{label}_upper", max(0.0, eigs.max() - 1.0), BOX_TOL))

    objective = _objective(witness, problem.rho)
    checks.append(_check("objective", abs(objective - solution.optimum), OBJECTIVE_TOL))
    checks.append(_check("gmn_value", abs(solution.gmn - max(0.0, -solution.optimum)), OBJECTIVE_TOL))

    state = ReceiverState(np.array(problem.rho))
    bound = min(negativity(state, label) for label in PARTITIONS)
    checks.append(_check("negativity_bound", max(0.0, solution.gmn - bound), NEGATIVITY_SLACK))

    if solution.status is SolverStatus.CONVERGED:
        checks.append(_check("duality_gap", solution.gap, problem.tolerance))
    else:
        checks.append(
            CheckResult(
                name="duality_gap",
                passed=True,
                residual=solution.gap,
                tolerance=problem.tolerance,
                detail="cap reached; gap reported, not certified",
            )
        )
    return CertificateReport(checks=checks)


def _check(name: str, residual: float, tolerance: float) -> CheckResult:
    residual = float(residual)
    return CheckResult(name=name, passed=residual <= tolerance, residual=residual, tolerance=tolerance)


# ---------------- File formats ----------------
def _parse_complex(token: str, where: str) -> complex:
    text = token.strip().replace("i", "j").replace("I", "j")
    try:
        return complex(text)
    except ValueError as exc:
        raise ConfigError(f"{where}: cannot parse complex entry {token!r}") from exc


def load_density_matrix(path: Union[str, Path]) -> np.ndarray:
    """Read 8 rows of 8 whitespace-separated ``a+bi`` entries; '#' starts a comment."""
    rows = []
    with open(path, "r", encoding="utf-8") as handle:
        for lineno, line in enumerate(handle, start=1):
            content = line.split("#", 1)[0].strip()
            if not content:
                continue
            tokens = content.split()
            if len(tokens) != 8:
                raise ConfigError(f"{path}:{lineno}: expected 8 entries, found {len(tokens)}")
            rows.append([_parse_complex(tok, f"{path}:{lineno}") for tok in tokens])
    if len(rows) != 8:
        raise ConfigError(f"{path}: expected 8 rows, found {len(rows)}")
    return np.array(rows, dtype=complex)


def format_report(solution: GmnSolution, report: CertificateReport) -> str:
    lines = [
        f"status = {solution.status.value}",
        f"optimum = {solution.optimum:.17g}",
        f"gmn = {solution.gmn:.17g}",
        f"dual_bound = {solution.dual_value:.17g}",
        f"gap = {solution.gap:.17g}",
        f"iterations = {solution.iterations}",
        f"certificate = {'pass' if report.passed else 'fail'}",
    ]
    for check in report.checks:
        verdict = "ok" if check.passed else "FAIL"
        lines.append(f"{check.name} = {check.residual:.17g} ({verdict}, tol {check.tolerance:.3g})")
    return "\n".join(lines) + "\n"
