# main.py: SpinChainGHZ command-line front end
"""
Subcommands:

    spectrum       single-particle spectrum of one chain to CSV
    evolve         entanglement time series to CSV (and SVG)
    sweep          tau and max n3 against the weak coupling, with the power-law fit
    sweep-length   tau and max n3 against the chain length at fixed coupling
    validate       determinant pipeline against brute-force sector propagation
    gmn            genuine multipartite negativity of a stored 8x8 density matrix

Exit codes: 0 success, 1 usage or configuration error, 2 validation failure,
3 SDP iteration cap reached.
"""

import argparse
import logging
import sys
from typing import Any, Callable, Dict, List, Optional

from pydantic import ValidationError

import config as settings
import main_pipeline
from src.exceptions import ConfigError, OracleCapError, SpinChainError
from src.gmn_solver import SolverStatus, format_report
from src.models.schemas import ALL_MEASURES, ChainSpec, RunConfig
from src.utils.file_utils import ensure_parent_dir, get_file_path

logger = logging.getLogger("spinchain")

LOG_FORMAT = "%(asctime)s %(levelname)s %(name)s: %(message)s"

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_VALIDATION = 2
EXIT_CAP_REACHED = 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


# ---------------- Value parsing ----------------
def _float_list(value: str) -> List[float]:
    return [float(item) for item in str(value).split(",") if item.strip()]


def _int_list(value: str) -> List[int]:
    return [int(item) for item in str(value).split(",") if item.strip()]


def _measures(value: str) -> frozenset:
    names = frozenset(item.strip() for item in str(value).split(",") if item.strip())
    unknown = names - ALL_MEASURES
    if unknown:
        raise ValueError(f"unknown measures {sorted(unknown)}; choose from {sorted(ALL_MEASURES)}")
    return names


CONVERTERS: Dict[str, Callable[[str], Any]] = {
    "n": int,
    "j0": float,
    "j_bulk": float,
    "t_min": float,
    "t_max": float,
    "steps": int,
    "measures": _measures,
    "gmn": settings.parse_bool,
    "gmn_stride": int,
    "out": str,
    "svg": str,
    "workers": int,
    "times": int,
    "tol": float,
    "in": str,
    "log_level": str,
}
COMMAND_CONVERTERS = {
    "sweep": {"j0": _float_list},
    "sweep-length": {"n": _int_list},
}


# ---------------- Parser ----------------
def _common(sub: argparse.ArgumentParser) -> None:
    sub.add_argument("--config", help="key = value file; explicit flags win")
    sub.add_argument("--log-level", dest="log_level")
    sub.add_argument("--workers", type=int, help="worker processes, -1 for all cores")


def _chain(sub: argparse.ArgumentParser, n_type=int, j0_type=float) -> None:
    sub.add_argument("--n", type=n_type, help="total number of sites")
    sub.add_argument("--j0", type=j0_type, help="block-wire coupling")
    sub.add_argument("--j-bulk", dest="j_bulk", type=float)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="spinchain", description="GHZ entanglement transfer on an XX chain")
    subparsers = parser.add_subparsers(dest="command", required=True)

    p = subparsers.add_parser("spectrum", help="single-particle spectrum to CSV")
    _chain(p)
    p.add_argument("--out")
    _common(p)

    p = subparsers.add_parser("evolve", help="entanglement time series")
    _chain(p)
    p.add_argument("--t-min", dest="t_min", type=float)
    p.add_argument("--t-max", dest="t_max", type=float)
    p.add_argument("--steps", type=int)
    p.add_argument("--measures", type=_measures, help="comma-separated subset of the CSV columns")
    p.add_argument("--gmn", action="store_const", const=True, default=None)
    p.add_argument("--gmn-stride", dest="gmn_stride", type=int)
    p.add_argument("--out")
    p.add_argument("--svg")
    _common(p)

    p = subparsers.add_parser("sweep", help="tau(j0) sweep and power-law fit")
    _chain(p, j0_type=_float_list)
    p.add_argument("--gmn", action="store_const", const=True, default=None)
    p.add_argument("--out")
    _common(p)

    p = subparsers.add_parser("sweep-length", help="transfer quality against chain length")
    _chain(p, n_type=_int_list)
    p.add_argument("--gmn", action="store_const", const=True, default=None)
    p.add_argument("--out")
    _common(p)

    p = subparsers.add_parser("validate", help="oracle comparison and invariant checks")
    _chain(p)
    p.add_argument("--times", type=int)
    p.add_argument("--tol", type=float)
    _common(p)

    p = subparsers.add_parser("gmn", help="GMN of a stored density matrix")
    p.add_argument("--in", dest="in")
    p.add_argument("--out")
    _common(p)
    return parser


def _require(values: Dict[str, Any], command: str, *names: str) -> None:
    missing = [name for name in names if values.get(name) is None]
    if missing:
        flags = ", ".join("--" + name.replace("_", "-") for name in missing)
        raise UsageError(f"{command}: missing required setting(s) {flags}")


def _run_config(values: Dict[str, Any], **overrides) -> RunConfig:
    fields = {
        "n_total": values.get("n"),
        "j0": values.get("j0"),
        "j_bulk": values.get("j_bulk"),
        "t_min": values.get("t_min"),
        "t_max": values.get("t_max"),
        "steps": values.get("steps"),
        "measures": values.get("measures"),
        "gmn": values.get("gmn"),
        "gmn_stride": values.get("gmn_stride"),
        "out": values.get("out"),
        "svg": values.get("svg"),
        "workers": values.get("workers", settings.WORKERS),
    }
    fields.update(overrides)
    return RunConfig(**{k: v for k, v in fields.items() if v is not None})


# ---------------- Commands ----------------
def cmd_spectrum(values: Dict[str, Any]) -> int:
    _require(values, "spectrum", "n", "j0", "out")
    spec = ChainSpec(n_total=values["n"], j0=values["j0"], j_bulk=values.get("j_bulk", 1.0))
    main_pipeline.export_spectrum(spec, values["out"])
    return EXIT_OK


def cmd_evolve(values: Dict[str, Any]) -> int:
    _require(values, "evolve", "n", "j0", "out")
    records = main_pipeline.evolve_run(_run_config(values))
    capped = [r.time for r in records if r.gmn_status == SolverStatus.CAP_REACHED.value]
    if capped:
        logger.warning("GMN solver hit its iteration cap at %d time point(s)", len(capped))
        return EXIT_CAP_REACHED
    return EXIT_OK


def cmd_sweep(values: Dict[str, Any]) -> int:
    _require(values, "sweep", "n", "j0", "out")
    j0s = values["j0"]
    if not j0s:
        raise UsageError("sweep: --j0 needs at least one value")
    result = main_pipeline.sweep_j0(_run_config(values, j0=j0s[0]), j0s)
    if result.exponent is not None:
        print(f"exponent = {result.exponent:.17g}")
        print(f"fit_range = {result.fit_range[0]:.17g},{result.fit_range[1]:.17g}")
    else:
        print(f"fit_error = {result.fit_error}")
    return EXIT_OK


def cmd_sweep_length(values: Dict[str, Any]) -> int:
    _require(values, "sweep-length", "n", "j0", "out")
    ns = values["n"]
    if not ns:
        raise UsageError("sweep-length: --n needs at least one value")
    main_pipeline.sweep_length(_run_config(values, n_total=ns[0]), ns)
    return EXIT_OK


def cmd_validate(values: Dict[str, Any]) -> int:
    _require(values, "validate", "n", "j0", "times")
    config = _run_config(values, out=None, svg=None)
    report = main_pipeline.validate_run(config, values["times"], tol=values.get("tol", 1e-10))
    for check in report.checks:
        verdict = "ok" if check.passed else "FAIL"
        line = f"{check.name} {check.residual:.3e} (tol {check.tolerance:.0e}) {verdict}"
        if check.detail:
            line += f" [{check.detail}]"
        print(line)
    print(f"result = {'pass' if report.passed else 'fail'}")
    return EXIT_OK if report.passed else EXIT_VALIDATION


def cmd_gmn(values: Dict[str, Any]) -> int:
    _require(values, "gmn", "in")
    solution, report = main_pipeline.gmn_from_file(values["in"])
    text = format_report(solution, report)
    sys.stdout.write(text)
    if values.get("out") is not None:
        path = ensure_parent_dir(get_file_path(settings.OUTPUT_DIR, values["out"]))
        with open(path, "w", encoding="utf-8", newline="\n") as handle:
            handle.write(text)
    if solution.status is SolverStatus.CAP_REACHED:
        return EXIT_CAP_REACHED
    return EXIT_OK if report.passed else EXIT_VALIDATION


COMMANDS = {
    "spectrum": cmd_spectrum,
    "evolve": cmd_evolve,
    "sweep": cmd_sweep,
    "sweep-length": cmd_sweep_length,
    "validate": cmd_validate,
    "gmn": cmd_gmn,
}


def _configure_logging(level: Optional[str]) -> None:
    name = (level or settings.LOG_LEVEL).upper()
    if not isinstance(logging.getLevelName(name), int):
        raise ConfigError(f"unknown log level {level!r}")
    logging.basicConfig(level=name, format=LOG_FORMAT, stream=sys.stderr)
    logging.getLogger().setLevel(name)


# ---------------- Entry point ----------------
def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        cli_values = {k: v for k, v in vars(args).items() if k not in {"command", "config"}}
        converters = {**CONVERTERS, **COMMAND_CONVERTERS.get(args.command, {})}
        values = settings.merge_settings(
            settings.load_config_file(args.config), cli_values, converters
        )
        _configure_logging(values.get("log_level"))
        settings.log_config()
        return COMMANDS[args.command](values)
    except UsageError as exc:
        print(str(exc), file=sys.stderr)
        return EXIT_USAGE
    except (ConfigError, ValidationError, OracleCapError) as exc:
        logger.error("%s", exc)
        return EXIT_USAGE
    except SpinChainError as exc:
        logger.error("%s: %s", type(exc).__name__, exc)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
