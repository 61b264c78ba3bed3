# src/chain_model.py: chain geometry, single-particle spectrum, perturbative time scales
"""
Free-fermion description of the weakly coupled XX chain.

The chain is a sender block of three sites, a uniform wire and a receiver block of
three sites. Blocks attach to the wire through the weak coupling ``j0``; every
other bond carries ``j_bulk``. After the Jordan-Wigner map the dynamics is fixed by
the N x N tridiagonal hopping matrix, diagonalised here with an implicit-shift QL
iteration.
"""

import logging
import math
from dataclasses import dataclass
from typing import Tuple

import numpy as np
import pandas as pd

from .exceptions import ChainGeometryError, EigensolverError, NonPerturbativeRegimeError
from .models.schemas import ChainSpec

logger = logging.getLogger(__name__)

MAX_QL_SWEEPS = 50
CLUSTER_WINDOW = 0.5
SEPARATION_FACTOR = 10.0
MAX_PERTURBATIVE_J0 = 0.2
SQRT2 = math.sqrt(2.0)


# ---------------- Containers ----------------
@dataclass(frozen=True)
class CouplingPattern:
    couplings: Tuple[float, ...]

    def __post_init__(self):
        if len(self.couplings) == 0:
            raise ChainGeometryError("coupling pattern is empty")
        if any(not j > 0 for j in self.couplings):
            raise ChainGeometryError(f"couplings must be positive: {self.couplings}")

    @property
    def n_sites(self) -> int:
        return len(self.couplings) + 1


@dataclass(frozen=True)
class SingleParticleSpectrum:
    """Eigenvalues (ascending) and eigenvectors (columns of ``modes``)."""

    omegas: np.ndarray
    modes: np.ndarray

    def __post_init__(self):
        self.omegas.flags.writeable = False
        self.modes.flags.writeable = False

    @property
    def n_sites(self) -> int:
        return len(self.omegas)


@dataclass(frozen=True)
class PerturbativeFrequencies:
    omega5: float
    omega76_minus: float
    omega76_plus: float
    t_slow: float
    t_fast: float
    tau_estimate: float


# ---------------- Geometry ----------------
def wire_length(spec: ChainSpec) -> int:
    return spec.wire_length


def build_couplings(spec: ChainSpec) -> CouplingPattern:
    """Uniform bonds except the two block-wire bonds, 3 and N-3 counted from 1."""
    n = spec.n_total
    if n < 7:
        raise ChainGeometryError(f"chain needs at least 7 sites, got {n}")
    if not spec.is_resonant:
        logger.warning(
            "N=%d violates the resonance condition N = 4n+7 (wire length %d)", n, spec.wire_length
        )

    couplings = [spec.j_bulk] * (n - 1)
    couplings[spec.block_size - 1] = spec.j0
    couplings[n - spec.block_size - 1] = spec.j0
    return CouplingPattern(tuple(couplings))


def hopping_matrix(pattern: CouplingPattern) -> np.ndarray:
    c = np.asarray(pattern.couplings, dtype=float)
    return np.diag(c, 1) + np.diag(c, -1)


# ---------------- Eigensolver ----------------
def _ql_implicit(diag: np.ndarray, offdiag: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Implicit-shift QL on a symmetric tridiagonal matrix.

    ``offdiag[i]`` couples rows i and i+1. Returns unsorted eigenvalues and the
    accumulated rotations, whose columns are the eigenvectors.
    """
    n = len(diag)
    d = diag.astype(float).copy()
    e = np.zeros(n)
    e[: n - 1] = offdiag
    z = np.eye(n)

    for l in range(n):
        sweeps = 0
        while True:
            m = l
            while m < n - 1:
                dd = abs(d[m]) + abs(d[m + 1])
                if abs(e[m]) + dd == dd:
                    break
                m += 1
            if m == l:
                break
            if sweeps == MAX_QL_SWEEPS:
                raise EigensolverError(
                    f"QL iteration did not converge for eigenvalue {l} after {MAX_QL_SWEEPS} sweeps"
                )
            sweeps += 1

            g = (d[l + 1] - d[l]) / (2.0 * e[l])
            r = math.hypot(g, 1.0)
            g = d[m] - d[l] + e[l] / (g + math.copysign(r, g))
            s = c = 1.0
            p = 0.0
            underflow = False
            for i in range(m - 1, l - 1, -1):
                f = s * e[i]
                b = c * e[i]
                r = math.hypot(f, g)
                e[i + 1] = r
                if r == 0.0:
                    d[i + 1] -= p
                    e[m] = 0.0
                    underflow = True
                    break
                s = f / r
                c = g / r
                g = d[i + 1] - p
                r = (d[i] - g) * s + 2.0 * c * b
                p = s * r
                d[i + 1] = g + p
                g = c * r - b
                upper = z[:, i + 1].copy()
                z[:, i + 1] = s * z[:, i] + c * upper
                z[:, i] = c * z[:, i] - s * upper
            if underflow:
                continue
            d[l] -= p
            e[l] = g
            e[m] = 0.0
    return d, z


def diagonalize(pattern: CouplingPattern) -> SingleParticleSpectrum:
    n = pattern.n_sites
    omegas, modes = _ql_implicit(np.zeros(n), np.asarray(pattern.couplings, dtype=float))

    order = np.argsort(omegas, kind="stable")
    omegas = omegas[order]
    modes = modes[:, order]
    # site-1 component is nonzero for an irreducible tridiagonal matrix
    modes = modes * np.where(modes[0] < 0, -1.0, 1.0)

    logger.debug("diagonalised %d-site chain, spectrum [%.6f, %.6f]", n, omegas[0], omegas[-1])
    return SingleParticleSpectrum(omegas=omegas, modes=modes)


# ---------------- Perturbative frequencies ----------------
def _nearest_cluster(omegas: np.ndarray, centre: float, count: int, label: str) -> np.ndarray:
    candidates = np.flatnonzero(np.abs(omegas - centre) <= CLUSTER_WINDOW)
    if len(candidates) < count:
        raise NonPerturbativeRegimeError(
            f"expected {count} eigenvalues near {label}, found {len(candidates)} within {CLUSTER_WINDOW}"
        )
    distance = np.abs(omegas[candidates] - centre)
    return np.sort(candidates[np.argsort(distance, kind="stable")[:count]])


def perturbative_frequencies(
    spectrum: SingleParticleSpectrum, spec: ChainSpec
) -> PerturbativeFrequencies:
    """Resonant splittings and time scales of the weak-coupling transfer.

    The triplet around zero is split at first order in ``j0`` (gap ``omega5``); the
    doublets around +-sqrt(2) are split at second order (``omega76_minus``).
    """
    if not spec.is_resonant:
        raise NonPerturbativeRegimeError(
            f"N={spec.n_total} is not of the form 4n+7; no resonant clusters"
        )
    if spec.j0 > MAX_PERTURBATIVE_J0 * spec.j_bulk:
        raise NonPerturbativeRegimeError(
            f"j0={spec.j0} is outside the perturbative range (j0 <= {MAX_PERTURBATIVE_J0})"
        )

    omegas = np.asarray(spectrum.omegas) / spec.j_bulk
    triplet = _nearest_cluster(omegas, 0.0, 3, "0")
    omega5 = float(omegas[triplet].max())
    if omega5 <= 0:
        raise NonPerturbativeRegimeError("zero-energy triplet is not split")

    rest = np.delete(omegas, triplet)
    separation = float(np.min(np.abs(rest[:, None] - omegas[triplet][None, :])))
    if separation <= SEPARATION_FACTOR * omega5:
        raise NonPerturbativeRegimeError(
            f"zero-energy triplet (gap {omega5:.3e}) is not isolated: nearest level at {separation:.3e}"
        )

    doublet = _nearest_cluster(omegas, SQRT2, 2, "sqrt(2)")
    omega6, omega7 = (float(w) for w in omegas[doublet])
    if omega6 <= 0:
        raise NonPerturbativeRegimeError("sqrt(2) doublet contains a non-positive level")

    scale = spec.j_bulk
    omega5 *= scale
    minus = (omega7 - omega6) / 2.0 * scale
    plus = (omega7 + omega6) / 2.0 * scale
    if minus <= 0:
        raise NonPerturbativeRegimeError("sqrt(2) doublet is degenerate")

    freqs = PerturbativeFrequencies(
        omega5=omega5,
        omega76_minus=minus,
        omega76_plus=plus,
        t_slow=2.0 * math.pi / minus,
        t_fast=2.0 * math.pi / omega5,
        tau_estimate=math.pi / (2.0 * minus),
    )
    logger.info(
        "N=%d j0=%g: omega5=%.6e omega76-=%.6e T=%.6g T~=%.6g",
        spec.n_total,
        spec.j0,
        freqs.omega5,
        freqs.omega76_minus,
        freqs.t_slow,
        freqs.t_fast,
    )
    return freqs


# ---------------- Export ----------------
def spectrum_to_frame(spectrum: SingleParticleSpectrum) -> pd.DataFrame:
    n = spectrum.n_sites
    frame = pd.DataFrame(
        np.asarray(spectrum.modes).T, columns=[f"phi_{i}" for i in range(1, n + 1)]
    )
    frame.insert(0, "omega", np.asarray(spectrum.omegas))
    frame.insert(0, "k", np.arange(1, n + 1))
    return frame
