"""输出文件: JSON 报告与芽描述, θ / 扫描 / 主曲率线的 CSV, OBJ 网格.

所有浮点数统一保留 12 位有效数字, 相同输入得到逐字节相同的文件.
"""

from __future__ import annotations

import csv
import json
import math
from enum import Enum
from pathlib import Path
from typing import Any, Union
from collections.abc import Iterable, Sequence

import numpy as np
from loguru import logger

from .theta import ThetaField
from .curve import FrenetCurve
from .config import SCHEMA_VERSION
from .hyperbolicity import SweepRow
from .exception import TooFewSamples
from .oracle import PrincipalFlowTrace
from .germ import StripMesh, SurfaceGerm

__all__ = (
    "SIGNIFICANT_DIGITS",
    "round_floats",
    "format_float",
    "write_json",
    "write_theta_csv",
    "write_sweep_csv",
    "write_trace_csv",
    "write_obj",
    "germ_descriptor",
    "read_samples",
)

SIGNIFICANT_DIGITS = 12

StrPath = Union[str, Path]


def format_float(value: float) -> str:
    return f"{value:.{SIGNIFICANT_DIGITS}g}"


def round_floats(data: Any) -> Any:
    """递归地把浮点数舍入到 12 位有效数字, 非有限值变为 None."""

    if isinstance(data, Enum):
        return data.value
    if isinstance(data, (bool, np.bool_)):
        return bool(data)
    if isinstance(data, (int, np.integer)):
        return int(data)
    if isinstance(data, (float, np.floating)):
        value = float(data)
        return float(format_float(value)) if math.isfinite(value) else None
    if isinstance(data, np.ndarray):
        return round_floats(data.tolist())
    if isinstance(data, dict):
        return {str(key): round_floats(value) for key, value in data.items()}
    if isinstance(data, (list, tuple)):
        return [round_floats(value) for value in data]
    if isinstance(data, Path):
        return data.as_posix()
    return data


def _prepare(path: StrPath) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    return path


def write_json(path: StrPath, data: Any) -> Path:
    path = _prepare(path)
    text = json.dumps(round_floats(data), ensure_ascii=False, indent=2)
    path.write_text(text + "\n", encoding="utf-8")
    logger.debug(f"写入 {path}")
    return path


def _cell(value: Any) -> Any:
    if value is None:
        return ""
    return format_float(value) if isinstance(value, float) else value


def _write_rows(path: StrPath, header: Sequence[str], rows: Iterable[Sequence]) -> Path:
    path = _prepare(path)
    with path.open("w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow(map(_cell, row))
    logger.debug(f"写入 {path}")
    return path


def write_theta_csv(path: StrPath, curve: FrenetCurve, theta: ThetaField) -> Path:
    rows = zip(curve.samples.tolist(), theta.values.tolist())
    return _write_rows(path, ("s", "theta"), rows)


def write_sweep_csv(path: StrPath, rows: Iterable[SweepRow]) -> Path:
    """每个 θ₀ 一行, 有脐点时 Λ 和 Λ′ 留空."""

    return _write_rows(
        path,
        ("theta0", "lambda", "dlambda", "umbilic_count"),
        ((row.theta0, row.lambda_, row.dlambda, row.umbilic_count) for row in rows),
    )


def write_trace_csv(path: StrPath, traces: Iterable[PrincipalFlowTrace]) -> Path:
    rows = (
        (trace.v0, s, v)
        for trace in traces
        for s, v in zip(trace.s.tolist(), trace.v.tolist())
    )
    return _write_rows(path, ("v0", "s", "v"), rows)


def write_obj(path: StrPath, mesh: StripMesh) -> Path:
    """四边形 OBJ, 面的顶点下标从 1 开始, 接缝处共用顶点."""

    path = _prepare(path)
    ns, nv = mesh.resolution
    with path.open("w", encoding="utf-8", newline="\n") as f:
        f.write(f"# principal strip {ns} x {nv}, seam gap {mesh.seam_gap:.3e}\n")
        for x, y, z in mesh.vertices.tolist():
            f.write(f"v {format_float(x)} {format_float(y)} {format_float(z)}\n")
        for face in (mesh.faces + 1).tolist():
            f.write("f " + " ".join(map(str, face)) + "\n")
    logger.debug(f"写入 {path}: {len(mesh.vertices)} 个顶点, {len(mesh.faces)} 个面")
    return path


def germ_descriptor(germ: SurfaceGerm) -> dict[str, Any]:
    """足以重建曲面芽的描述: 曲线来源, θ₀, ε 与各 profile."""

    return {
        "schema_version": SCHEMA_VERSION,
        "curve": germ.curve.source,
        "length": germ.curve.length,
        "theta0": germ.theta.theta0,
        "winding": germ.theta.winding,
        "total_torsion": germ.theta.total,
        "v_max": germ.v_max,
        "profiles": germ.profiles.describe(),
    }


def read_samples(path: StrPath) -> tuple[np.ndarray, bool, float]:
    """读取采样点文件.

    文件内容是 `[[x, y, z], ...]`, 或 `{"points": [...], "closed": true, "tol": 1e-9}`.
    """

    path = Path(path)
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
    except (OSError, ValueError) as e:
        raise TooFewSamples(f"无法读取采样点文件 {path}: {e}", path=str(path)) from e

    closed, tol = True, 1e-9
    if isinstance(data, dict):
        closed = bool(data.get("closed", closed))
        tol = float(data.get("tol", tol))
        data = data.get("points", [])

    try:
        points = np.asarray(data, dtype=float)
    except (TypeError, ValueError) as e:
        raise TooFewSamples(f"采样点文件 {path} 中有非数值坐标") from e
    return points, closed, tol
