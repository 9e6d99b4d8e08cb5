from __future__ import annotations

from typing import NamedTuple
from dataclasses import field, dataclass

import numpy as np
from loguru import logger
from scipy.interpolate import BSpline
from numpy.typing import NDArray, ArrayLike

from .exception import NotQuantized
from .curve import FrenetCurve, total_torsion
from .quadrature import periodic_spline, cumulative_periodic, spectral_derivative

__all__ = (
    "ThetaField",
    "DarbouxCurvatures",
    "solve_theta",
    "normal_direction",
    "transverse_direction",
    "darboux_curvatures",
    "rodrigues_defect",
)


@dataclass(frozen=True)
class ThetaField:
    """θ' = −τ, θ(0) = θ₀ 的解, 不取模.

    θ(s) = θ₀ − (T/L)·s + P(s), 其中 T 为总挠率, P 为周期部分. 因此在 s ≥ L 处求值
    能直接看到 θ 的缠绕.
    """

    theta0: float
    values: NDArray
    winding: int
    total: float
    length: float
    periodic: BSpline = field(repr=False)

    @property
    def drift(self) -> float:
        return -self.total / self.length

    def __call__(self, s: ArrayLike, nu: int = 0) -> NDArray:
        s = np.asarray(s, dtype=float)
        wrapped = np.mod(s, self.length)
        if nu == 0:
            return self.theta0 + self.drift * s + self.periodic(wrapped)
        if nu == 1:
            return self.drift + self.periodic(wrapped, 1)
        return self.periodic(wrapped, nu)


def solve_theta(
    curve: FrenetCurve, theta0: float, threshold: float = 1e-6
) -> ThetaField:
    """求解 θ 并检查总挠率的量子化条件.

    参数:
        curve: 曲线
        theta0: 初始角 θ₀
        threshold: 允许的 |T − 2πm|
    """

    summary = total_torsion(curve)
    if summary.residual > threshold:
        raise NotQuantized(
            f"总挠率 {summary.total:.12g} 与 2π·{summary.m} 相差 {summary.residual:.3e},"
            " 曲面芽无法闭合",
            total=summary.total,
            m=summary.m,
            residual=summary.residual,
        )

    values = theta0 - cumulative_periodic(curve.torsion, curve.length)
    values.setflags(write=False)
    periodic = values - theta0 + summary.total / curve.length * curve.samples
    logger.debug(f"θ₀ = {theta0:.12g}, 缠绕数 m = {summary.m}")
    return ThetaField(
        theta0,
        values,
        summary.m,
        summary.total,
        curve.length,
        periodic_spline(periodic, curve.length),
    )


def transverse_direction(
    curve: FrenetCurve, theta_field: ThetaField, s: ArrayLike | None = None
) -> NDArray:
    """N∧T = cosθ·n + sinθ·b, 即曲面在曲线上的 ∂/∂v 方向. `s` 为空时返回网格值."""

    if s is None:
        theta, n, b = theta_field.values, curve.normal, curve.binormal
    else:
        jet = curve.local(s)
        theta, n, b = theta_field(s), jet.normal, jet.binormal
    return np.cos(theta)[..., None] * n + np.sin(theta)[..., None] * b


def normal_direction(
    curve: FrenetCurve, theta_field: ThetaField, s: ArrayLike | None = None
) -> NDArray:
    """曲面沿曲线的单位法向 N = cosθ·b − sinθ·n. `s` 为空时返回网格值."""

    if s is None:
        theta, n, b = theta_field.values, curve.normal, curve.binormal
    else:
        jet = curve.local(s)
        theta, n, b = theta_field(s), jet.normal, jet.binormal
    return np.cos(theta)[..., None] * b - np.sin(theta)[..., None] * n


class DarbouxCurvatures(NamedTuple):
    geodesic: NDArray
    normal: NDArray
    geodesic_slope: NDArray
    normal_slope: NDArray


def darboux_curvatures(
    curve: FrenetCurve, theta_field: ThetaField
) -> DarbouxCurvatures:
    """曲线在 (t, N∧T, N) 标架下的测地曲率与法曲率及其导数, 测地挠率恒为零.

    t' = κg·(N∧T) + κn·N, (N∧T)' = −κg·t, N' = −κn·t.
    """

    k, dk, tau = curve.curvature, curve.curvature_slope, curve.torsion
    sin, cos = np.sin(theta_field.values), np.cos(theta_field.values)
    return DarbouxCurvatures(
        k * cos,
        -k * sin,
        dk * cos + k * tau * sin,
        -dk * sin + k * tau * cos,
    )


def rodrigues_defect(curve: FrenetCurve, theta_field: ThetaField) -> float:
    """N' 垂直于 t 的分量的最大模, 为零说明曲线是曲率线."""

    normal = normal_direction(curve, theta_field)
    derivative = spectral_derivative(normal, curve.length)
    along = np.einsum("ij,ij->i", derivative, curve.tangent)[:, None] * curve.tangent
    return float(np.linalg.norm(derivative - along, axis=-1).max())
