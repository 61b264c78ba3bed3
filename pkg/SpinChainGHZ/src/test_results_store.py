# src/test_results_store.py
import pandas as pd
import pytest

from src.chain_model import build_couplings, diagonalize
from src.models.schemas import ChainSpec, EntanglementRecord, SweepResult, SweepRow, Verdict
from src.results_store import (
    CSV_COLUMNS,
    SWEEP_COLUMNS,
    load_records,
    read_status,
    save_records,
    save_spectrum,
    save_sweep,
)

HEADER = "t,c12,c13,c23,c13_assist,neg_1_23,neg_2_13,neg_3_12,n3,ghz_witness,w_witness,gmn,verdict"


def _records():
    return [
        EntanglementRecord(time=2.5, c13=1 / 3, n3=None, ghz_witness=-0.3, verdict=Verdict.GHZ),
        EntanglementRecord(time=0.0, c13=0.0, ghz_witness=0.0),
        EntanglementRecord(time=1.25, c13=0.1, ghz_witness=-0.1, gmn=0.05, verdict=Verdict.W_OR_GHZ),
    ]


def test_header_and_row_order(tmp_path):
    path = save_records(_records(), tmp_path / "run.csv")
    lines = path.read_text(encoding="utf-8").splitlines()
    assert lines[0] == HEADER
    assert [line.split(",")[0] for line in lines[1:]] == ["0", "1.25", "2.5"]
    assert HEADER.split(",") == CSV_COLUMNS


def test_cells(tmp_path):
    path = save_records(_records(), tmp_path / "run.csv")
    lines = path.read_text(encoding="utf-8").splitlines()
    last = lines[-1].split(",")
    assert last[CSV_COLUMNS.index("c13")] == f"{1 / 3:.17g}"
    assert last[CSV_COLUMNS.index("gmn")] == ""
    assert last[CSV_COLUMNS.index("c12")] == ""
    assert last[-1] == "GHZ"
    assert lines[2].split(",")[CSV_COLUMNS.index("gmn")] == "0.050000000000000003"
    assert lines[2].split(",")[-1] == "W-or-GHZ"


def test_lf_endings_and_determinism(tmp_path):
    first = save_records(_records(), tmp_path / "a.csv").read_bytes()
    second = save_records(list(reversed(_records())), tmp_path / "b.csv").read_bytes()
    assert b"\r\n" not in first
    assert first == second


def test_status_trailer(tmp_path):
    path = save_records(_records()[:1], tmp_path / "partial.csv", status="failed at t=3")
    assert path.read_text(encoding="utf-8").endswith("# status: failed at t=3\n")
    assert read_status(path) == "failed at t=3"
    frame = load_records(path)
    assert len(frame) == 1
    assert read_status(save_records(_records(), tmp_path / "ok.csv")) is None


def test_round_trip_through_pandas(tmp_path):
    frame = load_records(save_records(_records(), tmp_path / "run.csv"))
    assert list(frame.columns) == CSV_COLUMNS
    assert frame["c13"].tolist() == pytest.approx([0.0, 0.1, 1 / 3], abs=0)
    assert frame["gmn"].isna().tolist() == [True, False, True]


def test_creates_parent_directories(tmp_path):
    path = save_records(_records(), tmp_path / "nested" / "dir" / "run.csv")
    assert path.exists()


def test_spectrum_file(tmp_path):
    spectrum = diagonalize(build_couplings(ChainSpec(n_total=7, j0=0.1)))
    frame = pd.read_csv(save_spectrum(spectrum, tmp_path / "spec.csv"))
    assert list(frame.columns) == ["k", "omega"] + [f"phi_{i}" for i in range(1, 8)]
    assert frame["omega"].tolist() == pytest.approx(list(spectrum.omegas), abs=1e-15)


def test_sweep_files(tmp_path):
    row = SweepRow(
        j0=0.05, n_total=11, max_n3=0.4, tau=120.0, window_start=60.0, window_end=180.0,
        perturbative=True, gmn_at_tau=0.2, max_gmn=0.25, fidelity_at_tau=0.9,
    )
    result = SweepResult(rows=[row], fit_error="power-law fit needs at least 3 points, got 1")
    path = save_sweep(result, tmp_path / "sweep.csv")
    rows = pd.read_csv(path)
    assert rows["tau"].tolist() == [120.0]
    assert rows["window_start"].tolist() == [60.0]
    assert rows["max_gmn"].tolist() == [0.25]
    assert list(rows.columns) == SWEEP_COLUMNS
    fit = pd.read_csv(tmp_path / "sweep.fit.csv")
    assert fit["fit_error"].iloc[0].startswith("power-law fit needs")
    assert fit["exponent"].isna().all()
