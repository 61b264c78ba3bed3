# src/entanglement_measures.py: concurrences, negativities, witnesses and the class verdict
import logging
from typing import FrozenSet, Optional

import numpy as np

from .exceptions import StateValidationError
from .free_fermion_dynamics import ReceiverState, TwoQubitState, ghz_fidelity, reduce_pair
from .models.schemas import ALL_MEASURES, EntanglementRecord, Verdict

logger = logging.getLogger(__name__)

ZERO_CLIP = 1e-10
X_STATE_TOL = 1e-10
THRESHOLD_BAND = 1e-9

GHZ_THRESHOLD = -0.25
W_THRESHOLD = 0.0

# Single-qubit side of each bipartition, 0-indexed.
PARTITIONS = {"1|23": 0, "2|13": 1, "3|12": 2}

_PAULI_Y = np.array([[0.0, -1.0j], [1.0j, 0.0]])
_YY = np.kron(_PAULI_Y, _PAULI_Y)

GHZ_VECTOR = np.zeros(8)
GHZ_VECTOR[[0, 7]] = 1.0 / np.sqrt(2.0)
W_VECTOR = np.zeros(8)
W_VECTOR[[1, 2, 4]] = 1.0 / np.sqrt(3.0)


def _clip_zero(value: float, label: str) -> float:
    if value >= 0:
        return float(value)
    if value < -ZERO_CLIP:
        logger.warning("%s came out negative (%.3e); reported as 0", label, value)
    return 0.0


# ---------------- Two-qubit concurrences ----------------
def _is_x_state(rho2: np.ndarray) -> bool:
    support = np.eye(4, dtype=bool) | np.eye(4, dtype=bool)[::-1]
    return bool(np.abs(rho2[~support]).max() <= X_STATE_TOL)


def concurrence_x(state: TwoQubitState) -> float:
    """Concurrence of an X-shaped two-qubit matrix from its populations and coherences."""
    rho = state.rho2
    if not _is_x_state(rho):
        raise StateValidationError(f"pair {state.pair} reduction is not X-shaped")
    p = np.real(np.diag(rho))
    inner = abs(rho[1, 2]) - np.sqrt(max(p[0] * p[3], 0.0))
    outer = abs(rho[0, 3]) - np.sqrt(max(p[1] * p[2], 0.0))
    return float(2.0 * max(0.0, inner, outer))


def _spin_flip_roots(rho2: np.ndarray) -> np.ndarray:
    """Square roots of the eigenvalues of rho (Y x Y) rho* (Y x Y), descending.

    Computed from the Hermitian form sqrt(rho) rho~ sqrt(rho), which has the same spectrum.
    """
    rho = (rho2 + rho2.conj().T) / 2
    flipped = _YY @ rho.conj() @ _YY
    w, v = np.linalg.eigh(rho)
    root = (v * np.sqrt(np.clip(w, 0.0, None))) @ v.conj().T
    lam = np.clip(np.linalg.eigvalsh(root @ flipped @ root), 0.0, None)
    return np.sqrt(np.sort(lam)[::-1])


def wootters_concurrence(state: TwoQubitState) -> float:
    roots = _spin_flip_roots(state.rho2)
    return float(max(0.0, roots[0] - roots[1] - roots[2] - roots[3]))


def concurrence_assistance(state: TwoQubitState) -> float:
    return float(np.sum(_spin_flip_roots(state.rho2)))


# ---------------- Negativities ----------------
def partial_transpose(rho: np.ndarray, qubit: int) -> np.ndarray:
    """Transpose one qubit (0-indexed, qubit 0 most significant) of a 3-qubit matrix."""
    tensor = np.asarray(rho).reshape((2,) * 6)
    return np.swapaxes(tensor, qubit, qubit + 3).reshape(8, 8)


def negativity(state: ReceiverState, partition: str) -> float:
    qubit = PARTITIONS[partition]
    eigs = np.linalg.eigvalsh(partial_transpose(state.rho, qubit))
    return _clip_zero((np.sum(np.abs(eigs)) - 1.0) / 2.0, f"negativity {partition}")


def tripartite_negativity(state: ReceiverState) -> float:
    product = np.prod([negativity(state, p) for p in PARTITIONS])
    return float(np.cbrt(product))


# ---------------- Witnesses ----------------
def ghz_witness(state: ReceiverState) -> float:
    return 0.5 - ghz_fidelity(state)


def w_witness(state: ReceiverState) -> float:
    overlap = np.real(np.vdot(W_VECTOR, state.rho @ W_VECTOR))
    return float(2.0 / 3.0 - overlap)


def verdict_for(ghz_value: Optional[float]) -> Verdict:
    if ghz_value is None:
        return Verdict.BISEPARABLE_OR_UNKNOWN
    # inside the band a value counts as sitting on the threshold, which certifies nothing
    for threshold in (GHZ_THRESHOLD, W_THRESHOLD):
        if abs(ghz_value - threshold) <= THRESHOLD_BAND:
            ghz_value = threshold
    if ghz_value < GHZ_THRESHOLD:
        return Verdict.GHZ
    if ghz_value < W_THRESHOLD:
        return Verdict.W_OR_GHZ
    return Verdict.BISEPARABLE_OR_UNKNOWN


def on_threshold(ghz_value: Optional[float]) -> bool:
    if ghz_value is None:
        return False
    return min(abs(ghz_value - GHZ_THRESHOLD), abs(ghz_value - W_THRESHOLD)) <= THRESHOLD_BAND


def classify(record: EntanglementRecord) -> Verdict:
    return verdict_for(record.ghz_witness)


# ---------------- Reference states ----------------
def biseparable_reference_state() -> np.ndarray:
    """1/2 |000><000| + 1/2 |psi><psi|, psi = (|110> - |011>)/sqrt(2).

    Qubits 1 and 3 share a singlet while qubit 2 is excited.
    """
    psi = np.zeros(8)
    psi[6] = 1.0 / np.sqrt(2.0)
    psi[3] = -1.0 / np.sqrt(2.0)
    rho = 0.5 * np.outer(psi, psi)
    rho[0, 0] += 0.5
    return rho.astype(complex)


def trace_distance(rho: np.ndarray, sigma: np.ndarray) -> float:
    diff = np.asarray(rho) - np.asarray(sigma)
    return float(np.sum(np.abs(np.linalg.eigvalsh((diff + diff.conj().T) / 2))) / 2.0)


# ---------------- Full record ----------------
def evaluate_state(
    state: ReceiverState, t: float, measures: FrozenSet[str] = ALL_MEASURES
) -> EntanglementRecord:
    """Every selected quantifier at one time point; ``gmn`` is left to the SDP solver."""
    values = {}
    for pair in ("12", "13", "23"):
        if f"c{pair}" in measures:
            values[f"c{pair}"] = concurrence_x(reduce_pair(state, pair))
    if "c13_assist" in measures:
        values["c13_assist"] = concurrence_assistance(reduce_pair(state, "13"))

    negs = {}
    if "n3" in measures or any(f"neg_{p.replace('|', '_')}" in measures for p in PARTITIONS):
        negs = {p: negativity(state, p) for p in PARTITIONS}
    for partition, value in negs.items():
        key = f"neg_{partition.replace('|', '_')}"
        if key in measures:
            values[key] = value
    if "n3" in measures:
        values["n3"] = float(np.cbrt(np.prod(list(negs.values()))))

    ghz_value = ghz_witness(state)
    if "ghz_witness" in measures:
        values["ghz_witness"] = ghz_value
    if "w_witness" in measures:
        values["w_witness"] = w_witness(state)

    flagged = on_threshold(ghz_value)
    if flagged:
        logger.warning("t=%.17g: GHZ witness %.17g lies on a verdict threshold", t, ghz_value)
    return EntanglementRecord(
        time=float(t), verdict=verdict_for(ghz_value), on_threshold=flagged, **values
    )
