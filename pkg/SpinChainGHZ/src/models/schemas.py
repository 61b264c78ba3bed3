# src/models/schemas.py
from enum import Enum
from typing import Any, FrozenSet, List, Optional, Tuple

from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from ..exceptions import ChainGeometryError

# ---------------- Measure selection ----------------
ALL_MEASURES: FrozenSet[str] = frozenset(
    {
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
    }
)

INVARIANT_TOL = 1e-10


class Verdict(str, Enum):
    BISEPARABLE_OR_UNKNOWN = "biseparable-or-unknown"
    W_OR_GHZ = "W-or-GHZ"
    GHZ = "GHZ"


# ---------------- Chain parameters ----------------
class ChainSpec(BaseModel):
    """Parameter record of one chain: length, couplings and block geometry."""

    model_config = ConfigDict(frozen=True)

    n_total: int
    j0: float
    j_bulk: float = 1.0
    block_size: int = 3

    def __init__(self, **data: Any) -> None:
        try:
            super().__init__(**data)
        except ValidationError as exc:
            problems = "; ".join(err["msg"] for err in exc.errors())
            raise ChainGeometryError(f"invalid chain: {problems}") from exc

    @field_validator("n_total")
    @classmethod
    def _check_length(cls, value: int) -> int:
        if value < 7:
            raise ValueError(f"n_total must be at least 7, got {value}")
        if value % 2 == 0:
            raise ValueError(f"n_total must be odd, got {value}")
        return value

    @field_validator("block_size")
    @classmethod
    def _check_block(cls, value: int) -> int:
        if value != 3:
            raise ValueError("sender and receiver blocks hold exactly 3 sites")
        return value

    @model_validator(mode="after")
    def _check_couplings(self) -> "ChainSpec":
        if self.j_bulk <= 0:
            raise ValueError(f"j_bulk must be positive, got {self.j_bulk}")
        if not 0 < self.j0 <= self.j_bulk:
            raise ValueError(f"j0 must lie in (0, j_bulk], got {self.j0}")
        return self

    @property
    def wire_length(self) -> int:
        return self.n_total - 2 * self.block_size

    @property
    def is_resonant(self) -> bool:
        # N = 4n + 7, i.e. wire length 4n + 1
        return self.wire_length % 4 == 1


# ---------------- Run configuration ----------------
class RunConfig(BaseModel):
    model_config = ConfigDict(frozen=True)

    n_total: int
    j0: float
    j_bulk: float = 1.0
    t_min: float = 0.0
    t_max: Optional[float] = None
    steps: Optional[int] = None
    measures: FrozenSet[str] = ALL_MEASURES
    gmn: bool = False
    gmn_stride: int = Field(default=1, ge=1)
    out: Optional[str] = None
    svg: Optional[str] = None
    workers: int = -1
    points_per_fast_period: int = Field(default=40, ge=1)
    slow_periods: float = Field(default=1.2, gt=0)

    @field_validator("measures")
    @classmethod
    def _check_measures(cls, value: FrozenSet[str]) -> FrozenSet[str]:
        unknown = set(value) - ALL_MEASURES
        if unknown:
            raise ValueError(f"unknown measures: {sorted(unknown)}")
        return frozenset(value)

    @model_validator(mode="after")
    def _check_grid(self) -> "RunConfig":
        if self.t_min < 0:
            raise ValueError(f"t_min must be non-negative, got {self.t_min}")
        if self.t_max is not None and self.t_max <= self.t_min:
            raise ValueError(f"t_max ({self.t_max}) must exceed t_min ({self.t_min})")
        if self.steps is not None and self.steps < 2:
            raise ValueError(f"steps must be at least 2, got {self.steps}")
        return self

    def chain_spec(self, j0: Optional[float] = None, n_total: Optional[int] = None) -> ChainSpec:
        return ChainSpec(
            n_total=self.n_total if n_total is None else n_total,
            j0=self.j0 if j0 is None else j0,
            j_bulk=self.j_bulk,
        )


# ---------------- Time-series rows ----------------
class EntanglementRecord(BaseModel):
    """All quantifiers at one time point. Unselected measures stay None."""

    model_config = ConfigDict(frozen=True)

    time: float
    c12: Optional[float] = None
    c13: Optional[float] = None
    c23: Optional[float] = None
    c13_assist: Optional[float] = None
    neg_1_23: Optional[float] = None
    neg_2_13: Optional[float] = None
    neg_3_12: Optional[float] = None
    n3: Optional[float] = None
    ghz_witness: Optional[float] = None
    w_witness: Optional[float] = None
    gmn: Optional[float] = None
    verdict: Verdict = Verdict.BISEPARABLE_OR_UNKNOWN
    # not part of the CSV row
    gmn_status: Optional[str] = None
    on_threshold: bool = False

    @model_validator(mode="after")
    def _check_invariants(self) -> "EntanglementRecord":
        negs = (self.neg_1_23, self.neg_2_13, self.neg_3_12)
        if self.n3 is not None and all(n is not None for n in negs):
            expected = (negs[0] * negs[1] * negs[2]) ** (1.0 / 3.0)
            if abs(expected - self.n3) > INVARIANT_TOL:
                raise ValueError(f"n3={self.n3} is not the geometric mean of {negs}")
        if self.c13 is not None and self.c13_assist is not None:
            if self.c13_assist < self.c13 - INVARIANT_TOL:
                raise ValueError(f"c13_assist={self.c13_assist} below c13={self.c13}")
        return self


# ---------------- Sweeps ----------------
class SweepRow(BaseModel):
    model_config = ConfigDict(frozen=True)

    j0: float
    n_total: int
    max_n3: float
    tau: float = Field(gt=0)
    window_start: float
    window_end: float
    perturbative: bool
    gmn_at_tau: Optional[float] = None
    max_gmn: Optional[float] = None
    fidelity_at_tau: Optional[float] = None


class SweepResult(BaseModel):
    model_config = ConfigDict(frozen=True)

    rows: List[SweepRow]
    exponent: Optional[float] = None
    intercept: Optional[float] = None
    residual: Optional[float] = None
    fit_range: Optional[Tuple[float, float]] = None
    fit_error: Optional[str] = None

    @model_validator(mode="after")
    def _check_fit(self) -> "SweepResult":
        if self.exponent is not None and self.fit_range is None:
            raise ValueError("a fitted exponent must carry its fit range")
        return self


# ---------------- Reports ----------------
class CheckResult(BaseModel):
    name: str
    passed: bool
    residual: float
    tolerance: float
    detail: str = ""


class ValidationReport(BaseModel):
    n_total: int
    j0: float
    n_times: int
    checks: List[CheckResult]
    worst_entry: Optional[str] = None

    @property
    def passed(self) -> bool:
        return all(check.passed for check in self.checks)

    @property
    def max_residual(self) -> float:
        return max((check.residual for check in self.checks), default=0.0)

    def failures(self) -> List[CheckResult]:
        return [check for check in self.checks if not check.passed]


class CertificateReport(BaseModel):
    checks: List[CheckResult]

    @property
    def passed(self) -> bool:
        return all(check.passed for check in self.checks)

    def failures(self) -> List[CheckResult]:
        return [check for check in self.checks if not check.passed]
