# ================================
# config.py: SpinChainGHZ Settings
# ================================

import logging
import os
from typing import Any, Callable, Dict, Mapping, Optional

from dotenv import dotenv_values, load_dotenv

from src.exceptions import ConfigError

logger = logging.getLogger(__name__)

# ---------------- Load .env file ----------------
load_dotenv()


def _env_int(name: str, default: int) -> int:
    raw = os.getenv(name)
    if raw is None or raw.strip() == "":
        return default
    try:
        return int(raw)
    except ValueError as exc:
        raise ConfigError(f"{name} must be an integer, got {raw!r}") from exc


def _env_float(name: str, default: float) -> float:
    raw = os.getenv(name)
    if raw is None or raw.strip() == "":
        return default
    try:
        return float(raw)
    except ValueError as exc:
        raise ConfigError(f"{name} must be a number, got {raw!r}") from exc


# ---------------- Runtime Settings ----------------
LOG_LEVEL = os.getenv("GHZT_LOG_LEVEL", "INFO").upper()
WORKERS = _env_int("GHZT_WORKERS", -1)
OUTPUT_DIR = os.getenv("GHZT_OUTPUT_DIR", "outputs")

# ---------------- Solver Settings ----------------
GMN_TOLERANCE = _env_float("GHZT_GMN_TOLERANCE", 1e-7)
GMN_MAX_ITER = _env_int("GHZT_GMN_MAX_ITER", 50_000)

# ---------------- Validation Settings ----------------
ORACLE_MAX_SITES = _env_int("GHZT_ORACLE_MAX_SITES", 15)
SEED = _env_int("GHZT_SEED", 20240101)


# ---------------- Config file ----------------
FILE_KEYS = frozenset(
    {
        "n",
        "j0",
        "j_bulk",
        "t_min",
        "t_max",
        "steps",
        "measures",
        "gmn",
        "gmn_stride",
        "out",
        "svg",
        "workers",
        "times",
        "tol",
        "in",
        "log_level",
    }
)


def parse_bool(value: Any) -> bool:
    if isinstance(value, bool):
        return value
    text = str(value).strip().lower()
    if text in {"1", "true", "yes", "on"}:
        return True
    if text in {"0", "false", "no", "off"}:
        return False
    raise ConfigError(f"expected a boolean, got {value!r}")


def load_config_file(path: Optional[str]) -> Dict[str, str]:
    """Read ``key = value`` lines. Keys may use dashes or underscores."""
    if path is None:
        return {}
    if not os.path.isfile(path):
        raise ConfigError(f"config file not found: {path}")

    values = {}
    for key, value in dotenv_values(path).items():
        name = key.strip().replace("-", "_").lower()
        if name not in FILE_KEYS:
            raise ConfigError(f"{path}: unknown key {key!r}")
        if value is None:
            raise ConfigError(f"{path}: key {key!r} has no value")
        values[name] = value.strip()
    logger.debug("loaded %d settings from %s", len(values), path)
    return values


def merge_settings(
    file_values: Mapping[str, str],
    cli_values: Mapping[str, Any],
    converters: Mapping[str, Callable[[str], Any]],
) -> Dict[str, Any]:
    """Explicit CLI values win; file values fill the gaps; None means not given."""
    merged: Dict[str, Any] = {}
    for name, raw in file_values.items():
        if name not in converters:
            continue
        try:
            merged[name] = converters[name](raw)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"config value {name} = {raw!r}: {exc}") from exc
    for name, value in cli_values.items():
        if value is not None:
            merged[name] = value
    return merged


def log_config() -> None:
    logger.info(
        "settings: log_level=%s workers=%d output_dir=%s gmn_tolerance=%g gmn_max_iter=%d "
        "oracle_max_sites=%d seed=%d",
        LOG_LEVEL,
        WORKERS,
        OUTPUT_DIR,
        GMN_TOLERANCE,
        GMN_MAX_ITER,
        ORACLE_MAX_SITES,
        SEED,
    )
