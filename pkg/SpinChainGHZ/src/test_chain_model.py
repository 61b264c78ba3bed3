# src/test_chain_model.py
import math

import numpy as np
import pytest
from scipy.linalg import eigh_tridiagonal

from src.chain_model import (
    CouplingPattern,
    build_couplings,
    diagonalize,
    hopping_matrix,
    perturbative_frequencies,
    spectrum_to_frame,
    wire_length,
)
from src.exceptions import ChainGeometryError, NonPerturbativeRegimeError
from src.models.schemas import ChainSpec


def _spectrum(n, j0):
    spec = ChainSpec(n_total=n, j0=j0)
    return spec, diagonalize(build_couplings(spec))


# ---------------- build_couplings ----------------
def test_couplings_shortest_chain():
    pattern = build_couplings(ChainSpec(n_total=7, j0=0.1))
    assert pattern.couplings == (1.0, 1.0, 0.1, 0.1, 1.0, 1.0)


def test_couplings_n19_weak_bonds():
    pattern = build_couplings(ChainSpec(n_total=19, j0=0.01))
    weak = [i + 1 for i, j in enumerate(pattern.couplings) if j == 0.01]
    assert weak == [3, 16]
    assert sum(1 for j in pattern.couplings if j == 1.0) == 16


def test_couplings_reject_short_chain():
    with pytest.raises(ChainGeometryError, match="at least 7"):
        ChainSpec(n_total=6, j0=0.1)
    with pytest.raises(ChainGeometryError):
        build_couplings(ChainSpec.model_construct(n_total=5, j0=0.1, j_bulk=1.0, block_size=3))


def test_chainspec_rejects_bad_couplings():
    with pytest.raises(ChainGeometryError):
        ChainSpec(n_total=19, j0=0.0)
    with pytest.raises(ChainGeometryError):
        ChainSpec(n_total=19, j0=1.5)
    with pytest.raises(ChainGeometryError, match="odd"):
        ChainSpec(n_total=20, j0=0.01)


def test_non_resonant_length_warns(caplog):
    spec = ChainSpec(n_total=9, j0=0.05)
    assert not spec.is_resonant
    assert wire_length(spec) == 3
    with caplog.at_level("WARNING"):
        build_couplings(spec)
    assert "resonance" in caplog.text


def test_coupling_pattern_rejects_nonpositive():
    with pytest.raises(ChainGeometryError):
        CouplingPattern(())
    with pytest.raises(ChainGeometryError):
        CouplingPattern((1.0, -0.5))


# ---------------- diagonalize ----------------
def test_two_site_spectrum():
    spectrum = diagonalize(CouplingPattern((1.0,)))
    assert np.allclose(spectrum.omegas, [-1.0, 1.0], atol=1e-14)


def test_three_site_spectrum():
    spectrum = diagonalize(CouplingPattern((1.0, 1.0)))
    assert np.allclose(spectrum.omegas, [-math.sqrt(2), 0.0, math.sqrt(2)], atol=1e-14)


@pytest.mark.parametrize("n", [2, 5, 10, 17, 25])
def test_uniform_closed_form(n):
    spectrum = diagonalize(CouplingPattern((1.0,) * (n - 1)))
    expected = np.sort(2 * np.cos(np.arange(1, n + 1) * np.pi / (n + 1)))
    assert np.allclose(spectrum.omegas, expected, atol=1e-12)


@pytest.mark.parametrize("n,j0", [(7, 0.1), (11, 0.05), (19, 0.01), (23, 0.3), (23, 1.0)])
def test_spectrum_invariants(n, j0):
    spec, spectrum = _spectrum(n, j0)
    omegas, modes = spectrum.omegas, spectrum.modes
    assert np.all(np.diff(omegas) >= 0)
    assert np.abs(modes.T @ modes - np.eye(n)).max() <= 1e-12
    assert np.abs(omegas + omegas[::-1]).max() <= 1e-12
    matrix = hopping_matrix(build_couplings(spec))
    assert np.abs(modes @ np.diag(omegas) @ modes.T - matrix).max() <= 1e-10
    # mirror symmetry of the components
    assert np.abs(np.abs(modes) - np.abs(modes[::-1])).max() <= 1e-10
    assert np.all(modes[0] > 0)


def test_matches_reference_tridiagonal_solver():
    spec, spectrum = _spectrum(23, 0.02)
    reference = eigh_tridiagonal(np.zeros(23), np.asarray(build_couplings(spec).couplings))[0]
    assert np.allclose(spectrum.omegas, reference, atol=1e-12)


def test_spectrum_is_read_only():
    _, spectrum = _spectrum(7, 0.1)
    with pytest.raises(ValueError):
        spectrum.omegas[0] = 0.0


# ---------------- perturbative_frequencies ----------------
def test_time_scales_separate_n19():
    spec, spectrum = _spectrum(19, 0.01)
    freqs = perturbative_frequencies(spectrum, spec)
    assert freqs.omega5 / freqs.omega76_minus > 1e2
    assert freqs.omega76_minus < freqs.omega5 < freqs.omega76_plus
    assert freqs.t_slow == pytest.approx(2 * math.pi / freqs.omega76_minus)
    assert freqs.t_fast == pytest.approx(2 * math.pi / freqs.omega5)
    assert freqs.tau_estimate == pytest.approx(freqs.t_slow / 4)
    assert freqs.omega76_plus == pytest.approx(math.sqrt(2), abs=1e-3)


def test_first_order_scaling_of_omega5():
    f1 = perturbative_frequencies(*reversed(_spectrum(19, 0.01)))
    f2 = perturbative_frequencies(*reversed(_spectrum(19, 0.02)))
    assert f2.omega5 / f1.omega5 == pytest.approx(2.0, rel=0.05)


def test_second_order_scaling_of_doublet():
    f1 = perturbative_frequencies(*reversed(_spectrum(19, 0.01)))
    f2 = perturbative_frequencies(*reversed(_spectrum(19, 0.02)))
    assert f2.omega76_minus / f1.omega76_minus == pytest.approx(4.0, rel=0.10)


@pytest.mark.parametrize(
    "n,j0", [(11, 0.01), (11, 0.1), (15, 0.05), (15, 0.1), (19, 0.05), (23, 0.01), (23, 0.05)]
)
def test_frequency_ordering_in_weak_regime(n, j0):
    spec, spectrum = _spectrum(n, j0)
    freqs = perturbative_frequencies(spectrum, spec)
    assert freqs.omega76_minus < freqs.omega5 < freqs.omega76_plus


def test_non_resonant_chain_rejected():
    spec, spectrum = _spectrum(9, 0.01)
    with pytest.raises(NonPerturbativeRegimeError):
        perturbative_frequencies(spectrum, spec)


def test_uniform_chain_is_not_perturbative():
    spec, spectrum = _spectrum(19, 1.0)
    with pytest.raises(NonPerturbativeRegimeError):
        perturbative_frequencies(spectrum, spec)


# ---------------- export ----------------
def test_spectrum_frame_layout():
    _, spectrum = _spectrum(7, 0.1)
    frame = spectrum_to_frame(spectrum)
    assert list(frame.columns) == ["k", "omega"] + [f"phi_{i}" for i in range(1, 8)]
    assert frame["k"].tolist() == list(range(1, 8))
    assert np.allclose(frame.iloc[:, 2:].to_numpy().T, spectrum.modes)
