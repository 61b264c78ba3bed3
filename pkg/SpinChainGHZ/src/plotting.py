# src/plotting.py: SVG figure of a stored time series
import logging
from pathlib import Path
from typing import Union

import matplotlib

matplotlib.use("Agg")

from matplotlib import rc_context  # noqa: E402
from matplotlib.backends.backend_svg import FigureCanvasSVG  # noqa: E402
from matplotlib.figure import Figure  # noqa: E402

from .entanglement_measures import GHZ_THRESHOLD  # noqa: E402
from .results_store import load_records  # noqa: E402
from .utils.file_utils import ensure_parent_dir  # noqa: E402

logger = logging.getLogger(__name__)

PLOTTED = {
    "c13": "C$_{13}$",
    "c13_assist": "C$_{13}^{\\#}$",
    "n3": "N$^{(3)}$",
    "ghz_witness": "GHZ witness",
    "w_witness": "W witness",
    "gmn": "GMN",
}
FIGSIZE = (9.6, 5.4)
DPI = 100
RC = {"svg.hashsalt": "spinchain-ghz", "svg.fonttype": "path", "path.simplify": False}

PathLike = Union[str, Path]


def render_svg(csv_path: PathLike, svg_path: PathLike) -> Path:
    """Draw every non-empty quantifier column against time. Depends only on the CSV."""
    frame = load_records(csv_path)
    svg_path = ensure_parent_dir(svg_path)

    with rc_context(RC):
        fig = Figure(figsize=FIGSIZE, dpi=DPI)
        FigureCanvasSVG(fig)
        ax = fig.add_subplot(1, 1, 1)
        drawn = 0
        for column, label in PLOTTED.items():
            if column not in frame or frame[column].isna().all():
                continue
            series = frame[["t", column]].dropna()
            ax.plot(series["t"].to_numpy(), series[column].to_numpy(), label=label, linewidth=1.0)
            drawn += 1
        ax.axhline(GHZ_THRESHOLD, color="red", linewidth=0.8, linestyle="--", label="GHZ threshold")
        ax.set_xlabel("t")
        ax.set_ylabel("entanglement")
        ax.legend(loc="upper right", fontsize="small")
        fig.tight_layout()
        fig.savefig(svg_path, format="svg", metadata={"Date": None})

    logger.info("rendered %d series from %s to %s", drawn, csv_path, svg_path)
    return svg_path
