# src/results_store.py: CSV outputs of runs, sweeps and spectra
import logging
from pathlib import Path
from typing import Iterable, List, Optional, Union

import numpy as np
import pandas as pd

from .chain_model import SingleParticleSpectrum, spectrum_to_frame
from .models.schemas import EntanglementRecord, SweepResult
from .utils.file_utils import ensure_parent_dir, sidecar_path

logger = logging.getLogger(__name__)

CSV_COLUMNS = [
    "t",
    "c12",
    "c13",
    "c23",
    "c13_assist",
    "neg_1_23",
    "neg_2_13",
    "neg_3_12",
    "n3",
    "ghz_witness",
    "w_witness",
    "gmn",
    "verdict",
]
SWEEP_COLUMNS = [
    "j0",
    "n_total",
    "max_n3",
    "tau",
    "window_start",
    "window_end",
    "perturbative",
    "gmn_at_tau",
    "max_gmn",
    "fidelity_at_tau",
]
FLOAT_FORMAT = "%.17g"
STATUS_PREFIX = "# status: "

PathLike = Union[str, Path]


def _write_frame(frame: pd.DataFrame, path: PathLike, status: Optional[str] = None) -> Path:
    path = ensure_parent_dir(path)
    frame.to_csv(path, index=False, float_format=FLOAT_FORMAT, na_rep="", lineterminator="\n")
    if status is not None:
        with open(path, "a", encoding="utf-8", newline="\n") as handle:
            handle.write(f"{STATUS_PREFIX}{status}\n")
    return path


# ---------------- Time series ----------------
def records_to_frame(records: Iterable[EntanglementRecord]) -> pd.DataFrame:
    rows = []
    for record in records:
        row = record.model_dump(exclude={"gmn_status", "on_threshold"})
        row["t"] = row.pop("time")
        row["verdict"] = record.verdict.value
        rows.append(row)
    frame = pd.DataFrame(rows, columns=CSV_COLUMNS)
    numeric = CSV_COLUMNS[:-1]
    frame[numeric] = frame[numeric].astype(float)
    return frame


def save_records(
    records: List[EntanglementRecord], path: PathLike, status: Optional[str] = None
) -> Path:
    """Write rows in time order; ``status`` appends a trailer line after a failed run."""
    ordered = sorted(records, key=lambda r: r.time)
    path = _write_frame(records_to_frame(ordered), path, status)
    logger.info("wrote %d rows to %s", len(ordered), path)
    return path


def load_records(path: PathLike) -> pd.DataFrame:
    return pd.read_csv(path, comment="#", keep_default_na=True)


def read_status(path: PathLike) -> Optional[str]:
    with open(path, "r", encoding="utf-8") as handle:
        lines = handle.read().splitlines()
    if lines and lines[-1].startswith(STATUS_PREFIX):
        return lines[-1][len(STATUS_PREFIX):]
    return None


# ---------------- Spectrum ----------------
def save_spectrum(spectrum: SingleParticleSpectrum, path: PathLike) -> Path:
    path = _write_frame(spectrum_to_frame(spectrum), path)
    logger.info("wrote %d modes to %s", spectrum.n_sites, path)
    return path


# ---------------- Sweeps ----------------
def save_sweep(result: SweepResult, path: PathLike) -> Path:
    """Per-point rows in ``path`` and the fit in a ``.fit`` sidecar next to it."""
    frame = pd.DataFrame([row.model_dump() for row in result.rows], columns=SWEEP_COLUMNS)
    path = _write_frame(frame, path)

    low, high = result.fit_range if result.fit_range is not None else (np.nan, np.nan)
    fit = pd.DataFrame(
        [
            {
                "exponent": result.exponent,
                "intercept": result.intercept,
                "residual": result.residual,
                "fit_min_j0": low,
                "fit_max_j0": high,
                "fit_error": result.fit_error,
            }
        ]
    )
    _write_frame(fit, sidecar_path(path, ".fit"))
    logger.info("wrote %d sweep rows to %s", len(result.rows), path)
    return path
