# src/test_plotting.py
import numpy as np

from src.models.schemas import EntanglementRecord, Verdict
from src.plotting import render_svg
from src.results_store import save_records


def _series(tmp_path, with_gmn=False):
    records = []
    for t in np.linspace(0.0, 10.0, 41):
        n3 = float(abs(np.sin(t)) / 2)
        records.append(
            EntanglementRecord(
                time=float(t),
                c13=float(abs(np.cos(t)) / 2),
                ghz_witness=0.5 - n3,
                gmn=n3 / 2 if with_gmn else None,
                verdict=Verdict.BISEPARABLE_OR_UNKNOWN,
            )
        )
    return save_records(records, tmp_path / "run.csv")


def test_svg_is_a_pure_function_of_the_csv(tmp_path):
    csv_path = _series(tmp_path)
    first = render_svg(csv_path, tmp_path / "a.svg").read_bytes()
    second = render_svg(csv_path, tmp_path / "b.svg").read_bytes()
    assert first == second
    assert b"<svg" in first


def test_gmn_column_changes_the_figure(tmp_path):
    plain = render_svg(_series(tmp_path), tmp_path / "plain.svg").read_bytes()
    richer = render_svg(_series(tmp_path, with_gmn=True), tmp_path / "gmn.svg").read_bytes()
    assert plain != richer
