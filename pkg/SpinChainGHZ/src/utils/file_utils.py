# src/utils/file_utils.py
import os
from pathlib import Path
from typing import Optional, Union

PathLike = Union[str, Path]


def get_file_path(output_dir: Optional[PathLike], filename: PathLike) -> Path:
    """Relative names land under ``output_dir``; absolute paths are kept."""
    path = Path(filename)
    if path.is_absolute() or output_dir is None:
        return path
    return Path(output_dir) / path


def ensure_parent_dir(path: PathLike) -> Path:
    path = Path(path)
    if path.parent != Path(""):
        os.makedirs(path.parent, exist_ok=True)
    return path


def sidecar_path(path: PathLike, suffix: str) -> Path:
    """``runs/a.csv`` with suffix ``.fit`` gives ``runs/a.fit.csv``."""
    path = Path(path)
    return path.with_name(f"{path.stem}{suffix}{path.suffix}")
