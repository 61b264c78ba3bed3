# src/test_gmn_solver.py
import dataclasses

import cvxpy as cp
import numpy as np
import pytest

from src.entanglement_measures import (
    GHZ_VECTOR,
    PARTITIONS,
    W_VECTOR,
    biseparable_reference_state,
    negativity,
)
from src.exceptions import ConfigError, StateValidationError
from src.free_fermion_dynamics import ReceiverState
from src.gmn_solver import (
    GmnProblem,
    SolverStatus,
    check_certificate,
    dual_bound,
    format_report,
    load_density_matrix,
    solve_gmn,
)

GHZ = np.outer(GHZ_VECTOR, GHZ_VECTOR).astype(complex)
VACUUM = np.diag([1.0] + [0.0] * 7).astype(complex)
W_STATE = np.outer(W_VECTOR, W_VECTOR).astype(complex)


def _solve(rho, **kwargs):
    problem = GmnProblem(rho=rho, **kwargs)
    return problem, solve_gmn(problem)


def _random_local_unitary(rng):
    factors = []
    for _ in range(3):
        z = rng.normal(size=(2, 2)) + 1j * rng.normal(size=(2, 2))
        u, _ = np.linalg.qr(z)
        factors.append(u)
    return np.kron(np.kron(factors[0], factors[1]), factors[2])


@pytest.fixture(scope="module")
def ghz_solution():
    return _solve(GHZ)


# ---------------- solve_gmn ----------------
def test_product_state_has_no_gmn():
    problem, solution = _solve(VACUUM)
    assert solution.gmn == pytest.approx(0.0, abs=1e-6)
    assert check_certificate(solution, problem).passed


def test_ghz_state_gmn(ghz_solution):
    problem, solution = ghz_solution
    assert solution.gmn == pytest.approx(0.5, abs=1e-4)
    report = check_certificate(solution, problem)
    assert report.passed, report.failures()


def test_ghz_solution_is_certified(ghz_solution):
    problem, solution = ghz_solution
    assert solution.status is SolverStatus.CONVERGED
    assert solution.gap <= problem.tolerance
    assert solution.dual_value <= solution.optimum + 1e-12
    for p, q in solution.decomposition:
        assert np.linalg.eigvalsh(p).min() >= -1e-9
        assert np.linalg.eigvalsh(q).max() <= 1 + 1e-9


def test_biseparable_mixture_has_no_gmn():
    problem, solution = _solve(biseparable_reference_state())
    assert solution.gmn == pytest.approx(0.0, abs=1e-5)
    assert check_certificate(solution, problem).passed


def test_gmn_bounded_by_negativities():
    rng = np.random.default_rng(17)
    for _ in range(5):
        a = rng.normal(size=(8, 3)) + 1j * rng.normal(size=(8, 3))
        rho = a @ a.conj().T
        rho /= np.trace(rho)
        problem, solution = _solve(rho)
        bound = min(negativity(ReceiverState(rho.copy()), p) for p in PARTITIONS)
        assert 0.0 <= solution.gmn <= bound + 1e-6
        assert check_certificate(solution, problem).passed


def test_local_unitary_invariance(ghz_solution):
    rng = np.random.default_rng(23)
    mixed = 0.7 * GHZ + 0.3 * np.eye(8) / 8
    _, base = _solve(mixed)
    u = _random_local_unitary(rng)
    _, rotated = _solve(u @ mixed @ u.conj().T)
    assert rotated.gmn == pytest.approx(base.gmn, abs=1e-5)


def test_convex_under_mixing():
    rho1 = GHZ
    rho2 = 0.5 * GHZ + 0.5 * np.eye(8) / 8
    _, s1 = _solve(rho1)
    _, s2 = _solve(rho2)
    _, mixed = _solve(0.4 * rho1 + 0.6 * rho2)
    assert mixed.gmn <= 0.4 * s1.gmn + 0.6 * s2.gmn + 1e-6


@pytest.mark.slow
def test_noisy_ghz_is_monotone():
    values = []
    for p in np.linspace(0.0, 1.0, 21):
        _, solution = _solve(p * GHZ + (1 - p) * np.eye(8) / 8)
        values.append(solution.gmn)
    assert values[0] == pytest.approx(0.0, abs=1e-6)
    assert values[-1] == pytest.approx(0.5, abs=1e-4)
    assert all(b >= a - 1e-6 for a, b in zip(values, values[1:]))


def test_cap_reached_still_returns_feasible_witness():
    problem, solution = _solve(0.8 * GHZ + 0.2 * np.eye(8) / 8, max_iter=10)
    assert solution.status is SolverStatus.CAP_REACHED
    assert solution.iterations == 10
    report = check_certificate(solution, problem)
    assert report.passed, report.failures()


def test_rejects_non_density_input():
    with pytest.raises(StateValidationError):
        GmnProblem(rho=np.diag([1.5, -0.5, 0, 0, 0, 0, 0, 0]).astype(complex))
    with pytest.raises(StateValidationError):
        GmnProblem(rho=np.eye(4) / 4)


def test_dual_bound_never_exceeds_optimum(ghz_solution):
    problem, solution = ghz_solution
    rng = np.random.default_rng(1)
    for _ in range(10):
        guess = rng.normal(size=(3, 8, 8)) + 1j * rng.normal(size=(3, 8, 8))
        assert dual_bound(problem.rho, guess, (0, 1, 2)) <= solution.optimum + 1e-9


def _reference_gmn(rho):
    """Same witness program handed to a conic solver through cvxpy."""
    dims = [2, 2, 2]
    witness = cp.Variable((8, 8), hermitian=True)
    constraints = []
    for qubit in range(3):
        p = cp.Variable((8, 8), hermitian=True)
        q = cp.Variable((8, 8), hermitian=True)
        constraints += [
            witness == p + cp.partial_transpose(q, dims, qubit),
            p >> 0,
            np.eye(8) - p >> 0,
            q >> 0,
            np.eye(8) - q >> 0,
        ]
    problem = cp.Problem(cp.Minimize(cp.real(cp.trace(rho @ witness))), constraints)
    problem.solve()
    return max(0.0, -problem.value)


@pytest.mark.parametrize(
    "mix",
    [
        (1.0, 0.0, 0.0),
        (0.0, 1.0, 0.0),
        (0.6, 0.4, 0.0),
        (0.3, 0.5, 0.2),
        (0.5, 0.0, 0.5),
        (0.2, 0.2, 0.6),
    ],
)
def test_matches_conic_solver_on_ghz_w_mixtures(mix):
    rho = mix[0] * GHZ + mix[1] * W_STATE + mix[2] * np.eye(8) / 8
    problem, solution = _solve(rho)
    assert check_certificate(solution, problem).passed
    assert solution.gmn == pytest.approx(_reference_gmn(rho), abs=1e-4)


# ---------------- check_certificate ----------------
def test_infeasible_decomposition_is_flagged(ghz_solution):
    problem, solution = ghz_solution
    p, q = solution.decomposition[0]
    broken = dataclasses.replace(
        solution, decomposition=((p + 0.01 * np.eye(8), q),) + solution.decomposition[1:]
    )
    report = check_certificate(broken, problem)
    assert not report.passed
    assert any(c.name == "decomposition_1|23" for c in report.failures())


def test_mismatched_objective_is_flagged(ghz_solution):
    problem, solution = ghz_solution
    broken = dataclasses.replace(solution, optimum=solution.optimum + 0.1)
    names = [c.name for c in check_certificate(broken, problem).failures()]
    assert "objective" in names


# ---------------- file formats ----------------
def test_load_density_matrix(tmp_path):
    path = tmp_path / "ghz.txt"
    lines = ["# GHZ state"]
    for row in GHZ:
        lines.append(" ".join(f"{z.real:.17g}+{z.imag:.17g}i" for z in row))
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    assert np.allclose(load_density_matrix(path), GHZ)


def test_load_density_matrix_accepts_signed_imaginary_parts(tmp_path):
    path = tmp_path / "rho.txt"
    rows = ["0.5+0i" + " 0+0i" * 6 + " 0-0.25i"]
    rows += [" ".join(["0+0i"] * 8)] * 6
    rows += ["0+0.25i" + " 0+0i" * 6 + " 0.5+0i"]
    path.write_text("\n".join(rows) + "\n", encoding="utf-8")
    rho = load_density_matrix(path)
    assert rho[0, 7] == -0.25j
    assert rho[7, 0] == 0.25j


def test_load_density_matrix_rejects_bad_rows(tmp_path):
    path = tmp_path / "bad.txt"
    path.write_text("1 2 3\n", encoding="utf-8")
    with pytest.raises(ConfigError):
        load_density_matrix(path)
    path.write_text(" ".join(["x"] * 8) + "\n", encoding="utf-8")
    with pytest.raises(ConfigError):
        load_density_matrix(path)


def test_format_report(ghz_solution):
    problem, solution = ghz_solution
    text = format_report(solution, check_certificate(solution, problem))
    assert text.startswith("status = converged\n")
    assert "\ngmn = " in text
    assert "decomposition_2|13" in text
    assert text.endswith("\n")
