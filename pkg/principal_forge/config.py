from __future__ import annotations

import sys
import math
from pathlib import Path
from typing import Any, Literal, Optional

import click
from pydantic import Field, BaseModel, ValidationError, model_validator

if sys.version_info >= (3, 11):
    from typing import Self
else:
    from typing_extensions import Self

__all__ = (
    "SCHEMA_VERSION",
    "CalibrationSpec",
    "CurveSource",
    "SweepSpec",
    "ProfileOverrides",
    "Tolerances",
    "Outputs",
    "RunConfig",
    "load_config",
)

SCHEMA_VERSION = 1


class CalibrationSpec(BaseModel):
    """在 `low` 和 `high` 之间二分 `param`, 使总挠率为 2π·`target_m`."""

    param: str
    low: float
    high: float
    target_m: int = 0


class CurveSource(BaseModel):
    path: Optional[Path] = None
    family: Optional[str] = None
    params: dict[str, float] = {}
    resolution: int = Field(512, ge=64)
    calibrate: Optional[CalibrationSpec] = None

    @model_validator(mode="after")
    def _check_source(self) -> Self:
        if (self.path is None) == (self.family is None):
            raise ValueError('"path" 和 "family" 必须且只能指定一个')
        if self.calibrate and self.family is None:
            raise ValueError("只有解析曲线族可以校准")
        return self


class SweepSpec(BaseModel):
    count: int = Field(64, ge=1)
    mode: Literal["rederived", "frozen", "zero"] = "rederived"

    def thetas(self) -> list[float]:
        return [2.0 * math.pi * i / self.count for i in range(self.count)]


class ProfileOverrides(BaseModel):
    a_mode: Literal["default", "zero"] = "default"
    b_random: bool = False
    c_random: bool = False
    seed: int = 0
    eps: Optional[float] = Field(None, gt=0)


class Tolerances(BaseModel):
    quantization: float = Field(1e-6, gt=0)
    hyperbolicity: float = Field(1e-6, gt=0)
    validation_abs: float = Field(1e-4, gt=0)
    validation_rel: float = Field(1e-3, gt=0)
    seam: float = Field(1e-6, gt=0)


class Outputs(BaseModel):
    directory: Path = Path(".")
    report: Path = Path("report.json")
    mesh: Optional[Path] = Path("germ.obj")
    germ: Optional[Path] = Path("germ.json")
    csv_dir: Optional[Path] = Path("csv")
    log: Optional[Path] = None
    mesh_resolution: tuple[int, int] = (256, 9)


class RunConfig(BaseModel):
    schema_version: Literal[1] = SCHEMA_VERSION
    curve: CurveSource
    theta0: float = 0.0
    sweep: Optional[SweepSpec] = None
    profiles: ProfileOverrides = ProfileOverrides()
    tolerances: Tolerances = Tolerances()
    outputs: Outputs = Outputs()
    oracle: bool = True
    workers: int = Field(1, ge=1)


def load_config(path: Path, **overrides: Any) -> RunConfig:
    """读取 JSON 配置文件.

    参数:
        path: 配置文件路径
        overrides: 覆盖顶层字段
    """

    try:
        config = RunConfig.model_validate_json(path.read_text(encoding="utf-8"))
        if overrides:
            config = RunConfig.model_validate({**config.model_dump(), **overrides})
    except ValidationError as e:
        raise click.BadParameter(str(e), param_hint="--config") from e

    if config.curve.path is not None and not config.curve.path.is_absolute():
        config.curve.path = path.parent / config.curve.path

    return config
