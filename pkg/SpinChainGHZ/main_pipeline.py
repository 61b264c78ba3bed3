# main_pipeline.py: evolution runs, coupling and length sweeps, oracle validation
"""
Operations behind the command-line front end. Each one builds the chain model,
drives the free-fermion pipeline over a time grid and writes its results through
``src.results_store``.
"""

import logging
import math
from dataclasses import dataclass
from itertools import combinations
from typing import Callable, Iterable, List, Optional, Sequence, Tuple

import numpy as np
from scipy.optimize import minimize_scalar

import config as settings
from src.chain_model import (
    CouplingPattern,
    PerturbativeFrequencies,
    SingleParticleSpectrum,
    build_couplings,
    diagonalize,
    hopping_matrix,
    perturbative_frequencies,
)
from src.exact_oracle import build_sector, evolve_amplitudes, oracle_receiver_density
from src.exceptions import (
    ConfigError,
    FitRefusedError,
    NonPerturbativeRegimeError,
    OracleCapError,
)
from src.free_fermion_dynamics import (
    STATE_TOLERANCES,
    AmplitudeTable,
    ReceiverState,
    all_three_amplitudes,
    amplitude_table,
    ghz_fidelity,
    receiver_density,
    state_residuals,
)
from src.gmn_solver import GmnProblem, GmnSolution, check_certificate, load_density_matrix, solve_gmn
from src.models.schemas import (
    CertificateReport,
    ChainSpec,
    CheckResult,
    EntanglementRecord,
    RunConfig,
    SweepResult,
    SweepRow,
    ValidationReport,
)
from src.plotting import render_svg
from src.processing import compute_record, compute_records_bulk, time_grid
from src.results_store import save_records, save_spectrum, save_sweep
from src.utils.file_utils import get_file_path

logger = logging.getLogger(__name__)

N3_ONLY = frozenset({"n3"})

# τ search
WINDOW_LOW = 0.5
WINDOW_HIGH = 1.5
MAX_SWEEP_J0 = 0.5
NONPERTURBATIVE_SPACING = 0.25
FIT_MAX_J0 = 0.05
MIN_FIT_POINTS = 3
GMN_NEIGHBOURS = 8

# validation
VALIDATION_HORIZON = 1e4
ADDITIVITY_TOL = 1e-9
ORTHONORMAL_TOL = 1e-12
PARTICLE_HOLE_TOL = 1e-12
RECONSTRUCTION_TOL = 1e-10
UNITARITY_TOL = 1e-10
NORM_TOL = 1e-10

DensityFn = Callable[[AmplitudeTable], ReceiverState]


@dataclass(frozen=True)
class ChainModel:
    spec: ChainSpec
    pattern: CouplingPattern
    spectrum: SingleParticleSpectrum
    freqs: Optional[PerturbativeFrequencies]


def build_model(spec: ChainSpec) -> ChainModel:
    pattern = build_couplings(spec)
    spectrum = diagonalize(pattern)
    try:
        freqs = perturbative_frequencies(spectrum, spec)
    except NonPerturbativeRegimeError as exc:
        logger.info("N=%d j0=%g has no perturbative time scales: %s", spec.n_total, spec.j0, exc)
        freqs = None
    return ChainModel(spec=spec, pattern=pattern, spectrum=spectrum, freqs=freqs)


def _output(path: Optional[str]):
    return None if path is None else get_file_path(settings.OUTPUT_DIR, path)


# ---------------- spectrum ----------------
def export_spectrum(spec: ChainSpec, out: str):
    model = build_model(spec)
    return save_spectrum(model.spectrum, _output(out))


# ---------------- evolve ----------------
def evolve_run(config: RunConfig) -> List[EntanglementRecord]:
    """One record per grid time, written to ``config.out`` (and ``config.svg``) when set.

    A failing time point still flushes the rows before it, followed by a status trailer,
    and the error is re-raised.
    """
    model = build_model(config.chain_spec())
    times = time_grid(config, model.freqs)
    logger.info(
        "evolve N=%d j0=%g: %d points on [%.6g, %.6g], gmn=%s",
        config.n_total,
        config.j0,
        len(times),
        times[0],
        times[-1],
        config.gmn,
    )

    records, error = compute_records_bulk(
        model.spectrum,
        times,
        measures=config.measures,
        gmn=config.gmn,
        gmn_stride=config.gmn_stride,
        workers=config.workers,
        tolerance=settings.GMN_TOLERANCE,
        max_iter=settings.GMN_MAX_ITER,
    )

    out = _output(config.out)
    if out is not None:
        status = None
        if error is not None:
            status = f"failed after {len(records)} of {len(times)} points: {type(error).__name__}: {error}"
        save_records(records, out, status=status)
    if error is not None:
        raise error
    if out is not None and config.svg is not None:
        render_svg(out, _output(config.svg))
    return records


# ---------------- τ search ----------------
def _n3_at(spectrum: SingleParticleSpectrum, t: float) -> float:
    return compute_record(spectrum, t, N3_ONLY).n3


def locate_transfer_time(
    spectrum: SingleParticleSpectrum,
    window: Tuple[float, float],
    spacing: float,
    workers: int = -1,
) -> Tuple[float, float]:
    """Time and value of the largest n3 in ``window``.

    A coarse grid picks the best sample; golden-section search then refines it
    between its neighbours.
    """
    low, high = window
    grid = np.arange(low, high + spacing / 2, spacing)
    records, error = compute_records_bulk(spectrum, grid, measures=N3_ONLY, workers=workers)
    if error is not None:
        raise error
    values = np.array([r.n3 for r in records])
    k = int(np.argmax(values))
    best_t, best_n3 = float(grid[k]), float(values[k])
    if k == 0 or k == len(grid) - 1:
        logger.warning("n3 maximum sits on the edge of the search window [%.6g, %.6g]", low, high)
        return best_t, best_n3

    try:
        result = minimize_scalar(
            lambda t: -_n3_at(spectrum, t),
            bracket=(grid[k - 1], grid[k], grid[k + 1]),
            method="golden",
        )
    except ValueError as exc:
        logger.debug("golden-section refinement failed at t=%.6g: %s", best_t, exc)
        return best_t, best_n3
    if low <= result.x <= high and -result.fun >= best_n3:
        return float(result.x), float(-result.fun)
    return best_t, best_n3


def _state_at(spectrum: SingleParticleSpectrum, t: float) -> ReceiverState:
    return receiver_density(amplitude_table(spectrum, t))


def _max_gmn_near(
    spectrum: SingleParticleSpectrum,
    tau: float,
    window: Tuple[float, float],
    spacing: float,
    workers: int,
) -> float:
    """Largest GMN on the coarse-grid samples within GMN_NEIGHBOURS spacings of tau."""
    offsets = spacing * np.arange(-GMN_NEIGHBOURS, GMN_NEIGHBOURS + 1)
    times = tau + offsets
    times = times[(times >= window[0]) & (times <= window[1])]
    records, error = compute_records_bulk(
        spectrum,
        times,
        measures=N3_ONLY,
        gmn=True,
        workers=workers,
        tolerance=settings.GMN_TOLERANCE,
        max_iter=settings.GMN_MAX_ITER,
    )
    if error is not None:
        raise error
    return max(r.gmn for r in records)


def _sweep_row(
    model: ChainModel,
    window: Tuple[float, float],
    spacing: float,
    workers: int,
    with_gmn: bool,
) -> SweepRow:
    tau, max_n3 = locate_transfer_time(model.spectrum, window, spacing, workers)
    state = _state_at(model.spectrum, tau)
    gmn_at_tau = max_gmn = None
    if with_gmn:
        problem = GmnProblem(rho=state.rho, tolerance=settings.GMN_TOLERANCE, max_iter=settings.GMN_MAX_ITER)
        gmn_at_tau = solve_gmn(problem).gmn
        max_gmn = max(gmn_at_tau, _max_gmn_near(model.spectrum, tau, window, spacing, workers))
    row = SweepRow(
        j0=model.spec.j0,
        n_total=model.spec.n_total,
        max_n3=max_n3,
        tau=tau,
        window_start=window[0],
        window_end=window[1],
        perturbative=model.freqs is not None,
        gmn_at_tau=gmn_at_tau,
        max_gmn=max_gmn,
        fidelity_at_tau=ghz_fidelity(state),
    )
    logger.info(
        "N=%d j0=%g: tau=%.6g max n3=%.6f fidelity=%.6f",
        row.n_total,
        row.j0,
        row.tau,
        row.max_n3,
        row.fidelity_at_tau,
    )
    return row


def _perturbative_window(freqs: PerturbativeFrequencies) -> Tuple[Tuple[float, float], float]:
    window = (WINDOW_LOW * freqs.tau_estimate, WINDOW_HIGH * freqs.tau_estimate)
    return window, freqs.t_fast / 40.0


def fit_power_law(j0s: Sequence[float], taus: Sequence[float]) -> Tuple[float, float, float]:
    """Least squares for log tau = a + b log j0. Returns (b, a, sum of squared residuals)."""
    if len(j0s) < MIN_FIT_POINTS:
        raise FitRefusedError(
            f"power-law fit needs at least {MIN_FIT_POINTS} points, got {len(j0s)}"
        )
    x = np.log(np.asarray(j0s, dtype=float))
    y = np.log(np.asarray(taus, dtype=float))
    slope, intercept = np.polyfit(x, y, 1)
    residual = float(np.sum((y - (intercept + slope * x)) ** 2))
    return float(slope), float(intercept), residual


# ---------------- sweep ----------------
def sweep_j0(config: RunConfig, j0_list: Iterable[float]) -> SweepResult:
    j0s = [float(j) for j in j0_list]
    if not j0s:
        raise ConfigError("j0 list is empty")
    if any(b <= a for a, b in zip(j0s, j0s[1:])):
        raise ConfigError(f"j0 list must be strictly ascending: {j0s}")
    if j0s[-1] > MAX_SWEEP_J0 or j0s[0] <= 0:
        raise ConfigError(f"sweep couplings must lie in (0, {MAX_SWEEP_J0}]: {j0s}")

    models = [build_model(config.chain_spec(j0=j0)) for j0 in j0s]
    if all(m.freqs is None for m in models):
        raise NonPerturbativeRegimeError(
            f"no coupling in {j0s} is perturbative for N={config.n_total}; cannot seed the tau search"
        )

    rows: List[Optional[SweepRow]] = [None] * len(models)
    for i, model in enumerate(models):
        if model.freqs is not None:
            window, spacing = _perturbative_window(model.freqs)
            rows[i] = _sweep_row(model, window, spacing, config.workers, config.gmn)

    ref = next(row for row in rows if row is not None)
    for i, model in enumerate(models):
        if rows[i] is not None:
            continue
        spacing = NONPERTURBATIVE_SPACING / config.j_bulk
        scaled = 1.5 * ref.tau * (ref.j0 / model.spec.j0) ** 2
        # never shorter than a few ballistic crossings of the chain
        end = max(scaled, 2.0 * model.spec.n_total / config.j_bulk)
        rows[i] = _sweep_row(model, (spacing, end), spacing, config.workers, config.gmn)

    fit_rows = [row for row in rows if row.j0 <= FIT_MAX_J0]
    fit = {}
    try:
        exponent, intercept, residual = fit_power_law(
            [r.j0 for r in fit_rows], [r.tau for r in fit_rows]
        )
        fit = dict(
            exponent=exponent,
            intercept=intercept,
            residual=residual,
            fit_range=(fit_rows[0].j0, fit_rows[-1].j0),
        )
        logger.info("tau ~ j0^%.4f over j0 in [%g, %g]", exponent, *fit["fit_range"])
    except FitRefusedError as exc:
        logger.warning("%s", exc)
        fit = dict(fit_error=str(exc))

    result = SweepResult(rows=rows, **fit)
    out = _output(config.out)
    if out is not None:
        save_sweep(result, out)
    return result


def sweep_length(config: RunConfig, n_list: Iterable[int]) -> SweepResult:
    """Transfer quality at fixed j0 for growing wire lengths."""
    rows = []
    for n in n_list:
        spec = config.chain_spec(n_total=int(n))
        if not spec.is_resonant:
            raise NonPerturbativeRegimeError(f"N={n} is not of the form 4n+7")
        model = build_model(spec)
        if model.freqs is None:
            raise NonPerturbativeRegimeError(f"N={n} j0={spec.j0} has no perturbative time scales")
        window, spacing = _perturbative_window(model.freqs)
        rows.append(_sweep_row(model, window, spacing, config.workers, config.gmn))

    result = SweepResult(rows=rows)
    out = _output(config.out)
    if out is not None:
        save_sweep(result, out)
    return result


# ---------------- validate ----------------
def _check(name: str, residual: float, tolerance: float, detail: str = "") -> CheckResult:
    residual = float(residual)
    return CheckResult(
        name=name, passed=residual <= tolerance, residual=residual, tolerance=tolerance, detail=detail
    )


def _entry_name(i: int, j: int) -> str:
    a, b = sorted((i, j))
    return f"rho_{a}{b}"


def validate_run(
    config: RunConfig,
    n_times: int,
    tol: float = 1e-10,
    density_fn: DensityFn = receiver_density,
    seed: Optional[int] = None,
) -> ValidationReport:
    """Compare the determinant pipeline with brute-force sector propagation.

    Random times are drawn from [0, min(2T, 1e4)]; beyond that the accumulated
    eigenvalue rounding in the phases exceeds the elementwise tolerance.
    """
    n = config.n_total
    if n > settings.ORACLE_MAX_SITES:
        raise OracleCapError(
            f"elementwise oracle comparison is capped at N <= {settings.ORACLE_MAX_SITES}, got N={n}"
        )
    if n_times < 1:
        raise ConfigError(f"times must be at least 1, got {n_times}")

    model = build_model(config.chain_spec())
    spectrum = model.spectrum
    horizon = VALIDATION_HORIZON
    if model.freqs is not None:
        horizon = min(2.0 * model.freqs.t_slow, VALIDATION_HORIZON)
    rng = np.random.default_rng(settings.SEED if seed is None else seed)
    times = np.sort(rng.uniform(0.0, horizon, size=n_times))

    prop = build_sector(model.pattern)
    checks = []

    sums = np.sort([sum(c) for c in combinations(spectrum.omegas, 3)])
    checks.append(_check("additivity", np.abs(np.sort(prop.energies) - sums).max(), ADDITIVITY_TOL))

    modes, omegas = spectrum.modes, spectrum.omegas
    checks.append(
        _check("orthonormality", np.abs(modes.T @ modes - np.eye(n)).max(), ORTHONORMAL_TOL)
    )
    checks.append(
        _check("particle_hole", np.abs(omegas + omegas[::-1]).max(), PARTICLE_HOLE_TOL)
    )
    rebuilt = (modes * omegas) @ modes.T
    checks.append(
        _check(
            "reconstruction",
            np.abs(rebuilt - hopping_matrix(model.pattern)).max(),
            RECONSTRUCTION_TOL,
        )
    )

    unitarity = norm = determinant = 0.0
    oracle = 0.0
    worst: Tuple[int, int] = (0, 0)
    worst_time = 0.0
    state_worst = {key: 0.0 for key in STATE_TOLERANCES}
    for t in times:
        table = amplitude_table(spectrum, t)
        unitarity = max(unitarity, np.abs(table.f @ table.f.conj().T - np.eye(n)).max())

        exact = evolve_amplitudes(prop, t)
        norm = max(norm, abs(np.linalg.norm(exact) - 1.0))
        determinant = max(determinant, np.abs(exact - all_three_amplitudes(table)).max())

        fast = density_fn(table).rho
        diff = np.abs(fast - oracle_receiver_density(prop, t).rho)
        idx = np.unravel_index(int(np.argmax(diff)), diff.shape)
        if diff[idx] > oracle:
            oracle, worst, worst_time = float(diff[idx]), (int(idx[0]), int(idx[1])), float(t)
        for key, value in state_residuals(fast).items():
            state_worst[key] = max(state_worst[key], value)

    checks.append(_check("unitarity", unitarity, UNITARITY_TOL))
    checks.append(_check("sector_norm", norm, NORM_TOL))
    checks.append(_check("determinant_identity", determinant, tol))
    worst_entry = _entry_name(*worst)
    checks.append(
        _check("oracle_elementwise", oracle, tol, detail=f"{worst_entry} at t={worst_time:.17g}")
    )
    for key, value in state_worst.items():
        checks.append(_check(f"state_{key}", value, STATE_TOLERANCES[key]))

    report = ValidationReport(
        n_total=n,
        j0=config.j0,
        n_times=n_times,
        checks=checks,
        worst_entry=worst_entry if oracle > tol else None,
    )
    if report.passed:
        logger.info("validation passed for N=%d j0=%g (max oracle residual %.3e)", n, config.j0, oracle)
    else:
        names = ", ".join(c.name for c in report.failures())
        logger.error("validation failed for N=%d j0=%g: %s (worst entry %s)", n, config.j0, names, worst_entry)
    return report


# ---------------- gmn ----------------
def gmn_from_file(path: str) -> Tuple[GmnSolution, CertificateReport]:
    rho = load_density_matrix(path)
    problem = GmnProblem(rho=rho, tolerance=settings.GMN_TOLERANCE, max_iter=settings.GMN_MAX_ITER)
    solution = solve_gmn(problem)
    report = check_certificate(solution, problem)
    logger.info(
        "gmn=%.10g status=%s gap=%.3e certificate=%s",
        solution.gmn,
        solution.status.value,
        solution.gap,
        "pass" if report.passed else "fail",
    )
    return solution, report


# ---------------- periodogram ----------------
def dominant_angular_frequency(
    times: np.ndarray, values: np.ndarray, min_frequency: float = 0.0
) -> float:
    """Angular frequency of the largest periodogram peak at or above ``min_frequency``.

    ``times`` must be uniformly spaced.
    """
    times = np.asarray(times, dtype=float)
    values = np.asarray(values, dtype=float)
    if len(times) < 4:
        raise ValueError("need at least 4 samples")
    dt = times[1] - times[0]
    spectrum = np.abs(np.fft.rfft(values - values.mean()))
    omegas = 2.0 * math.pi * np.fft.rfftfreq(len(values), d=dt)
    band = omegas >= min_frequency
    if not band.any():
        raise ValueError(f"no frequency above {min_frequency} is resolved")
    return float(omegas[band][np.argmax(spectrum[band])])
