# src/free_fermion_dynamics.py: transition amplitudes and the receiver density matrix
"""
Closed-form dynamics of the GHZ state (|vac> + |123>)/sqrt(2) on the chain.

Single-particle amplitudes come straight from the spectrum; three-particle
amplitudes are 3x3 Slater determinants of them. The receiver block (sites
N-2, N-1, N, relabelled qubits 1, 2, 3 with qubit 1 the most significant bit)
is described by an 8x8 density matrix assembled entry by entry from those
determinants.
"""

import logging
from dataclasses import dataclass
from functools import lru_cache
from itertools import combinations
from typing import Dict, Optional, Sequence, Tuple

import numpy as np

from .chain_model import PerturbativeFrequencies, SingleParticleSpectrum
from .exceptions import SiteIndexError, StateValidationError

logger = logging.getLogger(__name__)

SENDER_SITES = (0, 1, 2)
PAIRS = ("12", "13", "23")

HERMITIAN_TOL = 1e-12
TRACE_TOL = 1e-10
PSD_TOL = 1e-10
SPARSITY_TOL = 1e-12

# Independent entries of the receiver matrix, upper triangle; (0, 7) is handled apart.
DENSITY_ENTRIES: Dict[str, Tuple[int, int]] = {
    **{f"rho_{i}{i}": (i, i) for i in range(8)},
    "rho_12": (1, 2),
    "rho_14": (1, 4),
    "rho_24": (2, 4),
    "rho_35": (3, 5),
    "rho_36": (3, 6),
    "rho_56": (5, 6),
}

_ONE_EXCITATION = (1, 2, 4)
_TWO_EXCITATIONS = (3, 5, 6)


def _allowed_support() -> np.ndarray:
    mask = np.eye(8, dtype=bool)
    for block in (_ONE_EXCITATION, _TWO_EXCITATIONS):
        mask[np.ix_(block, block)] = True
    mask[0, 7] = mask[7, 0] = True
    return mask


SPARSITY_MASK = _allowed_support()


# ---------------- Containers ----------------
@dataclass(frozen=True)
class AmplitudeTable:
    """``f[r, s]`` is the amplitude <r| exp(-iHt) |s> on 0-indexed sites."""

    time: float
    f: np.ndarray

    def __post_init__(self):
        self.f.flags.writeable = False

    @property
    def n_sites(self) -> int:
        return self.f.shape[0]


@dataclass(frozen=True)
class ReceiverState:
    rho: np.ndarray

    def __post_init__(self):
        if self.rho.shape != (8, 8):
            raise StateValidationError(f"receiver matrix must be 8x8, got {self.rho.shape}")
        self.rho.flags.writeable = False


@dataclass(frozen=True)
class TwoQubitState:
    rho2: np.ndarray
    pair: Optional[str] = None

    def __post_init__(self):
        if self.rho2.shape != (4, 4):
            raise StateValidationError(f"two-qubit matrix must be 4x4, got {self.rho2.shape}")


# ---------------- Single-particle amplitudes ----------------
def _check_site(site: int, n_sites: int) -> int:
    if not 1 <= site <= n_sites:
        raise SiteIndexError(f"site {site} outside 1..{n_sites}")
    return site - 1


def single_amplitude(spectrum: SingleParticleSpectrum, s: int, r: int, t: float) -> complex:
    n = spectrum.n_sites
    src, dst = _check_site(s, n), _check_site(r, n)
    phases = np.exp(-1j * spectrum.omegas * t)
    return complex(np.sum(phases * spectrum.modes[dst] * spectrum.modes[src]))


def amplitude_table(spectrum: SingleParticleSpectrum, t: float) -> AmplitudeTable:
    phases = np.exp(-1j * spectrum.omegas * t)
    f = (spectrum.modes * phases) @ spectrum.modes.T
    return AmplitudeTable(time=float(t), f=f)


# ---------------- Three-particle amplitudes ----------------
def _check_triple(triple: Sequence[int], n_sites: int, ordered: bool) -> Tuple[int, ...]:
    if len(triple) != 3:
        raise SiteIndexError(f"expected three sites, got {tuple(triple)}")
    idx = tuple(_check_site(site, n_sites) for site in triple)
    if len(set(idx)) != 3:
        raise SiteIndexError(f"sites must be distinct: {tuple(triple)}")
    if ordered and not idx[0] < idx[1] < idx[2]:
        raise SiteIndexError(f"triple must be strictly ascending: {tuple(triple)}")
    return idx


def slater_amplitude(table: AmplitudeTable, src: Sequence[int], dst: Sequence[int]) -> complex:
    """Determinant of the single-particle amplitudes from ``src`` to ``dst``.

    Sites are 1-indexed and need not be ordered; swapping two destinations flips the sign.
    """
    a = _check_triple(src, table.n_sites, ordered=False)
    b = _check_triple(dst, table.n_sites, ordered=False)
    return complex(np.linalg.det(table.f[np.ix_(b, a)]))


def three_amplitude(table: AmplitudeTable, src: Sequence[int], dst: Sequence[int]) -> complex:
    _check_triple(src, table.n_sites, ordered=True)
    _check_triple(dst, table.n_sites, ordered=True)
    return slater_amplitude(table, src, dst)


@lru_cache(maxsize=None)
def ascending_triples(n_sites: int) -> np.ndarray:
    """All 0-indexed ascending site triples in lexicographic order."""
    triples = np.array(list(combinations(range(n_sites), 3)), dtype=np.intp)
    triples.flags.writeable = False
    return triples


def all_three_amplitudes(table: AmplitudeTable) -> np.ndarray:
    """Amplitudes from the sender triple to every ascending triple, batched."""
    columns = table.f[:, SENDER_SITES]
    return np.linalg.det(columns[ascending_triples(table.n_sites)])


def transfer_probability(table: AmplitudeTable) -> float:
    n = table.n_sites
    return abs(three_amplitude(table, (1, 2, 3), (n - 2, n - 1, n))) ** 2


# ---------------- Receiver density matrix ----------------
@lru_cache(maxsize=None)
def _receiver_layout(n_sites: int) -> Tuple[Dict[int, np.ndarray], int]:
    """Triple positions feeding each receiver basis state.

    For basis state x the rest of the chain holds 3 - popcount(x) excitations;
    rest configurations are enumerated in the same order for every x so that
    vectors of the same sector line up term by term.
    """
    index = {tuple(t): i for i, t in enumerate(ascending_triples(n_sites).tolist())}
    receiver = (n_sites - 3, n_sites - 2, n_sites - 1)
    rest = range(n_sites - 3)

    layout = {}
    for x in range(8):
        occupied = tuple(site for bit, site in zip((4, 2, 1), receiver) if x & bit)
        layout[x] = np.array(
            [index[k + occupied] for k in combinations(rest, 3 - len(occupied))], dtype=np.intp
        )
    return layout, index[receiver]


def receiver_density(table: AmplitudeTable) -> ReceiverState:
    amps = all_three_amplitudes(table)
    layout, full = _receiver_layout(table.n_sites)

    rho = np.zeros((8, 8), dtype=complex)
    for x, y in DENSITY_ENTRIES.values():
        value = 0.5 * np.vdot(amps[layout[y]], amps[layout[x]])
        rho[x, y] = value
        rho[y, x] = np.conj(value)
    rho[0, 0] += 0.5
    rho[0, 7] = 0.5 * np.conj(amps[full])
    rho[7, 0] = 0.5 * amps[full]
    return ReceiverState(rho)


def state_residuals(rho: np.ndarray, check_sparsity: bool = True) -> Dict[str, float]:
    residuals = {
        "hermiticity": float(np.abs(rho - rho.conj().T).max()),
        "trace": float(abs(np.trace(rho) - 1.0)),
        "positivity": float(max(0.0, -np.linalg.eigvalsh((rho + rho.conj().T) / 2).min())),
    }
    if check_sparsity:
        residuals["sparsity"] = float(np.abs(rho[~SPARSITY_MASK]).max())
    return residuals


STATE_TOLERANCES = {
    "hermiticity": HERMITIAN_TOL,
    "trace": TRACE_TOL,
    "positivity": PSD_TOL,
    "sparsity": SPARSITY_TOL,
}


def check_receiver_state(state: ReceiverState, check_sparsity: bool = True) -> None:
    residuals = state_residuals(state.rho, check_sparsity)
    failed = {k: v for k, v in residuals.items() if v > STATE_TOLERANCES[k]}
    if failed:
        raise StateValidationError(f"receiver state fails validity checks: {failed}")


# ---------------- Reductions ----------------
def reduce_pair(state: ReceiverState, pair: str) -> TwoQubitState:
    if pair not in PAIRS:
        raise ValueError(f"pair must be one of {PAIRS}, got {pair!r}")
    traced = ({0, 1, 2} - {int(pair[0]) - 1, int(pair[1]) - 1}).pop()
    tensor = np.asarray(state.rho).reshape((2,) * 6)
    rho2 = np.trace(tensor, axis1=traced, axis2=traced + 3).reshape(4, 4)
    return TwoQubitState(rho2=rho2, pair=pair)


def single_qubit_populations(state: ReceiverState) -> np.ndarray:
    """Excitation probability of qubits 1, 2, 3."""
    diag = np.real(np.diag(state.rho)).reshape(2, 2, 2)
    return np.array([diag[1].sum(), diag[:, 1].sum(), diag[:, :, 1].sum()])


def ghz_fidelity(state: ReceiverState) -> float:
    rho = state.rho
    return float(np.real(rho[0, 0] + rho[7, 7] + rho[0, 7] + rho[7, 0]) / 2.0)


# ---------------- Perturbative amplitudes ----------------
def perturbative_f1(freqs: PerturbativeFrequencies, t: float) -> float:
    """Amplitude from site 1 to site N-2 to first order in the weak coupling.

    Equals (1 - cos(omega5 t))/4 - perturbative_f2/2.
    """
    slow = np.sin(freqs.omega76_plus * t) * np.sin(freqs.omega76_minus * t)
    return float((1.0 + 2.0 * slow - np.cos(freqs.omega5 * t)) / 4.0)


def perturbative_f2(freqs: PerturbativeFrequencies, t: float) -> float:
    return float(-np.sin(freqs.omega76_plus * t) * np.sin(freqs.omega76_minus * t))
