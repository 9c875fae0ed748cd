"""JSON run configuration with strict key checking."""

from __future__ import annotations

import json
import math
from pathlib import Path
from typing import Literal, Optional

from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator


class ConfigError(ValueError):
    pass


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


class BasisCfg(_Strict):
    alpha: float = Field(2.0, gt=0)
    beta: float = Field(2.0, gt=0)
    gamma: float = 5.0
    N: int = Field(3, ge=1, le=10)

    @model_validator(mode="after")
    def _domain(self):
        if not self.gamma > self.alpha + self.beta - 1:
            raise ValueError("gamma must exceed alpha + beta - 1")
        return self


class FilterCfg(_Strict):
    enabled: bool = False
    p: int = Field(2, ge=1)
    c: float = Field(8.0, ge=0)
    gamma_filter: Optional[float] = None
    use_indicator: bool = False
    threshold: Optional[float] = None
    kind: Literal["natural", "natural_approx"] = "natural"
    apply: Literal["stage", "step"] = "stage"


class TimeCfg(_Strict):
    C_fix: float = Field(0.5, gt=0)
    t_end: float = Field(0.5, gt=0)
    snapshot_every: int = Field(0, ge=0)
    blowup_limit: float = Field(1e3, gt=0)


class MeshCfg(_Strict):
    n_blocks: Optional[int] = Field(None, ge=1)
    file: Optional[str] = None

    @model_validator(mode="after")
    def _one_source(self):
        if self.n_blocks is not None and self.file is not None:
            raise ValueError("give either n_blocks or file, not both")
        return self


class ProblemCfg(_Strict):
    name: Literal["advection", "burgers"] = "advection"
    psi: float = Field(math.pi / 4, ge=0, le=math.pi / 2 + 1e-12)
    speed: float = Field(1.0, gt=0)
    exact: bool = True
    tangential: Literal["own", "riemann"] = "own"


class CasesCfg(_Strict):
    psi: Optional[list[float]] = None
    wx: Optional[list[float]] = None
    wy: Optional[list[float]] = None

    @field_validator("psi", "wx", "wy")
    @classmethod
    def _nonempty(cls, v):
        if v is not None and len(v) == 0:
            raise ValueError("empty case grid")
        return v


class GridCfg(_Strict):
    alpha: tuple[float, float, float] = (0.1, 2.0, 0.1)
    beta: tuple[float, float, float] = (0.1, 2.0, 0.1)
    gamma_max: float = 6.0
    gamma_step: float = Field(0.1, gt=0)


class FilterPoint(_Strict):
    p: int = Field(ge=1)
    c: float = Field(ge=0)


class ConstantsCfg(_Strict):
    h: float = Field(math.sqrt(2) / 6, gt=0)
    C_fix: float = Field(0.5, gt=0)
    lambda_max: float = Field(1.0, gt=0)


class StabilityCfg(_Strict):
    N: int = Field(3, ge=1, le=8)
    tuples: Optional[list[tuple[float, float, float]]] = None
    grid: Optional[GridCfg] = None
    filters: Optional[list[FilterPoint]] = None
    gamma_filter: Optional[float] = None
    cases: CasesCfg = CasesCfg()
    rule: Literal["upwind", "own", "riemann"] = "upwind"
    path: Literal["lagrange", "vandermonde"] = "lagrange"
    backend: Literal["inrepo", "numpy"] = "inrepo"
    checkpoint: Optional[str] = None
    constants: ConstantsCfg = ConstantsCfg()


class CondCfg(_Strict):
    params: list[tuple[float, float, float]] = [(1, 1, 2), (2, 2, 5)]
    N_min: int = Field(2, ge=1)
    N_max: int = Field(10, le=10)
    lagrange: bool = True


class ExpansionFilterCfg(_Strict):
    kind: Literal["identity", "cosine", "exponential"] = "cosine"
    strength: float = Field(0.0, ge=0)
    order: float = Field(2, gt=0)


class FilterErrorCfg(_Strict):
    params: tuple[float, float, float] = (1, 1, 2)
    filter: ExpansionFilterCfg = ExpansionFilterCfg()
    function: Literal["sine", "poly2"] = "sine"
    N_min: int = Field(1, ge=1)
    N_max: int = Field(8, le=14)
    regions: list[Literal["all", "interior", "edge0", "edge1", "edge2", "vertex10"]] = ["all"]
    signed: bool = True
    rate: Optional[float] = None
    samples: int = Field(200, ge=10)


class EocCfg(_Strict):
    n_blocks: list[int] = [2, 4, 8, 16]
    N_values: list[int] = [1, 2, 3, 4, 5]
    t_end: float = Field(0.5, gt=0)
    psi: float = math.pi / 4
    speed: float = Field(math.sqrt(2), gt=0)
    C_fix: float = Field(0.5, gt=0)


class RunConfig(_Strict):
    basis: BasisCfg = BasisCfg()
    filter: FilterCfg = FilterCfg()
    time: TimeCfg = TimeCfg()
    mesh: MeshCfg = MeshCfg()
    problem: ProblemCfg = ProblemCfg()
    stability: StabilityCfg = StabilityCfg()
    cond: CondCfg = CondCfg()
    filter_error: FilterErrorCfg = FilterErrorCfg()
    eoc_study: EocCfg = EocCfg()


def _format(err: ValidationError) -> str:
    lines = []
    for e in err.errors():
        where = ".".join(str(p) for p in e["loc"]) or "<root>"
        if e["type"] == "extra_forbidden":
            lines.append(f"unknown key '{where}'")
        else:
            lines.append(f"{where}: {e['msg']}")
    return "; ".join(lines)


def parse_config(data: dict) -> RunConfig:
    if not isinstance(data, dict):
        raise ConfigError("config must be a JSON object")
    try:
        return RunConfig.model_validate(data)
    except ValidationError as exc:
        raise ConfigError(_format(exc)) from None


def load_config(path: str | Path | None) -> RunConfig:
    if path is None:
        return RunConfig()
    try:
        data = json.loads(Path(path).read_text())
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid JSON in {path}: {exc}") from None
    return parse_config(data)
