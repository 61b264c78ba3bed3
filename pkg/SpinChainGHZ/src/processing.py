# src/processing.py: time grids and per-time-point records
import logging
import math
from typing import FrozenSet, List, Optional, Tuple

import numpy as np
from joblib import Parallel, delayed

from .chain_model import PerturbativeFrequencies, SingleParticleSpectrum
from .entanglement_measures import evaluate_state
from .exceptions import ConfigError
from .free_fermion_dynamics import amplitude_table, receiver_density
from .gmn_solver import DEFAULT_MAX_ITER, DEFAULT_TOLERANCE, GmnProblem, solve_gmn
from .models.schemas import ALL_MEASURES, EntanglementRecord, RunConfig

logger = logging.getLogger(__name__)

CHUNK_SIZE = 64
PPT_TOL = 1e-8


# ---------------- Time grid ----------------
def time_grid(config: RunConfig, freqs: Optional[PerturbativeFrequencies] = None) -> np.ndarray:
    """Explicit grid when t_max and steps are given, otherwise sized from the time scales.

    The automatic grid covers ``slow_periods`` slow periods and resolves the fast
    period with ``points_per_fast_period`` samples.
    """
    t_max, steps = config.t_max, config.steps
    if t_max is None or steps is None:
        if freqs is None:
            raise ConfigError(
                "t_max and steps are required when the chain has no perturbative time scales"
            )
        if t_max is None:
            t_max = config.t_min + config.slow_periods * freqs.t_slow
        if steps is None:
            span = t_max - config.t_min
            steps = int(math.ceil(config.points_per_fast_period * span / freqs.t_fast)) + 1
            steps = max(steps, 2)
    if t_max <= config.t_min:
        raise ConfigError(f"t_max ({t_max}) must exceed t_min ({config.t_min})")
    return np.linspace(config.t_min, t_max, steps)


# ---------------- Single time point ----------------
def compute_record(
    spectrum: SingleParticleSpectrum,
    t: float,
    measures: FrozenSet[str] = ALL_MEASURES,
    with_gmn: bool = False,
    tolerance: float = DEFAULT_TOLERANCE,
    max_iter: int = DEFAULT_MAX_ITER,
) -> EntanglementRecord:
    state = receiver_density(amplitude_table(spectrum, t))
    record = evaluate_state(state, t, measures)
    if not with_gmn:
        return record

    solution = solve_gmn(GmnProblem(rho=state.rho, tolerance=tolerance, max_iter=max_iter))
    record = record.model_copy(update={"gmn": solution.gmn, "gmn_status": solution.status.value})

    witnesses = (record.ghz_witness, record.w_witness)
    if (
        record.n3 is not None
        and record.n3 > PPT_TOL
        and all(w is not None and w >= 0 for w in witnesses)
        and solution.gmn <= PPT_TOL
    ):
        logger.warning("t=%.17g: n3=%.3e but no witness or GMN detects entanglement", t, record.n3)
    return record


def _compute_chunk(spectrum, times, gmn_flags, measures, tolerance, max_iter):
    records = []
    for t, with_gmn in zip(times, gmn_flags):
        try:
            records.append(
                compute_record(spectrum, float(t), measures, bool(with_gmn), tolerance, max_iter)
            )
        except Exception as exc:
            return records, (float(t), exc)
    return records, None


# ---------------- Many time points ----------------
def compute_records_bulk(
    spectrum: SingleParticleSpectrum,
    times: np.ndarray,
    measures: FrozenSet[str] = ALL_MEASURES,
    gmn: bool = False,
    gmn_stride: int = 1,
    workers: int = -1,
    tolerance: float = DEFAULT_TOLERANCE,
    max_iter: int = DEFAULT_MAX_ITER,
) -> Tuple[List[EntanglementRecord], Optional[Exception]]:
    """Records for every time, in time order.

    On failure the records before the first failing time are returned together
    with the exception; nothing after it is kept.
    """
    times = np.asarray(times, dtype=float)
    flags = np.zeros(len(times), dtype=bool)
    if gmn:
        flags[::gmn_stride] = True

    bounds = range(0, len(times), CHUNK_SIZE)
    results = Parallel(n_jobs=workers)(
        delayed(_compute_chunk)(
            spectrum,
            times[i : i + CHUNK_SIZE],
            flags[i : i + CHUNK_SIZE],
            measures,
            tolerance,
            max_iter,
        )
        for i in bounds
    )

    records: List[EntanglementRecord] = []
    failure = None
    for chunk_records, error in results:
        records.extend(chunk_records)
        if error is not None and (failure is None or error[0] < failure[0]):
            failure = error

    records.sort(key=lambda r: r.time)
    if failure is None:
        return records, None

    failed_at, exc = failure
    kept = [r for r in records if r.time < failed_at]
    logger.warning(
        "time point t=%.17g failed (%s); %d of %d points skipped",
        failed_at,
        exc,
        len(times) - len(kept),
        len(times),
    )
    return kept, exc
