"""特征指数 Λ 及其导数, 以及构造双曲主曲率环的策略.

本模块中 Λ 一律取 ∮ k₂'/(k₂ − k₁) ds 的符号, 包括 ε 扰动后的 Λ(ε).
"""

from __future__ import annotations

import math
from enum import Enum
from dataclasses import field, replace, dataclass
from concurrent.futures import ThreadPoolExecutor
from typing import Any, Literal, Optional, NamedTuple
from collections.abc import Iterable, Iterator, Sequence

import numpy as np
from loguru import logger
from numpy.typing import NDArray

from .curve import FrenetCurve
from .utils import return_progressbar
from .theta import ThetaField, solve_theta
from .quadrature import grid, periodic_trapezoid
from .exception import EpsTooLarge, UmbilicOnCycle, IdenticallyZero
from .germ import (
    GermProfiles,
    CycleCurvatures,
    zero_a_profiles,
    umbilic_roots_of,
    cycle_curvatures,
    default_profiles,
)

__all__ = (
    "Verdict",
    "HyperbolicityReport",
    "GSIntegrals",
    "SweepRow",
    "characteristic_exponent",
    "gs_criterion",
    "dlambda_dtheta0",
    "default_lambda_slope",
    "perturbation_profile",
    "lambda_perturbed",
    "dlambda_deps0",
    "lambda_sweep",
    "assess_profiles",
    "certify_hyperbolic",
)

SweepMode = Literal["rederived", "frozen", "zero"]

MAX_HALVINGS = 20
PEAK_SAMPLES = 4096
CIRCLE_TOLERANCE = 1e-9


class Verdict(str, Enum):
    HYPERBOLIC = "Hyperbolic"
    NON_HYPERBOLIC = "NonHyperbolic"
    UMBILIC_OBSTRUCTION = "UmbilicObstruction"
    CIRCLE_OBSTRUCTION = "CircleObstruction"


@dataclass(frozen=True)
class HyperbolicityReport:
    theta0: float
    lambda_: float
    dlambda_dtheta0: float
    eps_used: float
    dlambda_deps0: float
    umbilic_roots: tuple[float, ...]
    verdict: Verdict
    lambda_default: float = 0.0
    winding: int = 0
    oracle_log_pi_prime: Optional[float] = None
    profiles: Optional[GermProfiles] = field(default=None, repr=False, compare=False)

    def to_dict(self) -> dict[str, Any]:
        return {
            "theta0": self.theta0,
            "lambda": self.lambda_,
            "lambda_default": self.lambda_default,
            "dlambda_dtheta0": self.dlambda_dtheta0,
            "eps_used": self.eps_used,
            "dlambda_deps0": self.dlambda_deps0,
            "umbilic_roots": list(self.umbilic_roots),
            "winding": self.winding,
            "oracle_log_pi_prime": self.oracle_log_pi_prime,
            "verdict": self.verdict.value,
            "profiles": self.profiles.describe() if self.profiles else None,
        }


def _umbilic_free(
    curve: FrenetCurve,
    theta: ThetaField,
    profiles: GermProfiles,
    cycle: CycleCurvatures | None = None,
) -> NDArray:
    """返回 k₂ − k₁, 曲线上有脐点时抛出 UmbilicOnCycle."""

    cycle = cycle or cycle_curvatures(curve, theta, profiles)
    gap = cycle.gap
    if np.all(gap > 0) or np.all(gap < 0):
        return gap

    roots = umbilic_roots_of(curve, theta, profiles)
    raise UmbilicOnCycle(
        f"曲线上有 {len(roots)} 个脐点, Λ 无定义",
        roots=roots,
        theta0=theta.theta0,
    )


def characteristic_exponent(
    curve: FrenetCurve, theta: ThetaField, profiles: GermProfiles
) -> float:
    """Λ = ∮ Â'/(Â + k sinθ) ds, Â = A + εa."""

    cycle = cycle_curvatures(curve, theta, profiles)
    gap = _umbilic_free(curve, theta, profiles, cycle)
    return periodic_trapezoid(cycle.dk2 / gap, curve.length)


class GSIntegrals(NamedTuple):
    first: float
    second: float
    mean: float


def gs_criterion(
    curve: FrenetCurve, theta: ThetaField, profiles: GermProfiles
) -> GSIntegrals:
    """∮ dk₁/(k₂−k₁), ∮ dk₂/(k₂−k₁) 与 ½∮ dH/√(H²−K).

    后者的符号随 k₂ − k₁ 的符号而定, 因为 √(H² − K) = |k₂ − k₁|/2.
    """

    cycle = cycle_curvatures(curve, theta, profiles)
    gap = _umbilic_free(curve, theta, profiles, cycle)
    mean_slope = 0.5 * (cycle.dk1 + cycle.dk2)
    return GSIntegrals(
        periodic_trapezoid(cycle.dk1 / gap, curve.length),
        periodic_trapezoid(cycle.dk2 / gap, curve.length),
        0.5 * periodic_trapezoid(mean_slope / (0.5 * np.abs(gap)), curve.length),
    )


def dlambda_dtheta0(
    curve: FrenetCurve,
    theta0: float,
    profiles: GermProfiles,
    threshold: float = 1e-6,
) -> float:
    """−∮ k Â' cosθ/(k sinθ + Â)² ds, Â 视为与 θ₀ 无关的固定函数.

    θ₀ 只通过分母进入 Λ, 因此对分母求导带负号.
    """

    theta = solve_theta(curve, theta0, threshold)
    cycle = cycle_curvatures(curve, theta, profiles)
    gap = _umbilic_free(curve, theta, profiles, cycle)
    integrand = curve.curvature * cycle.dk2 * np.cos(theta.values) / gap**2
    return -periodic_trapezoid(integrand, curve.length)


def default_lambda_slope(curve: FrenetCurve, theta: ThetaField) -> float:
    """默认 A 随 θ₀ 重新选取时 Λ(θ₀) = −∮ (k sinθ)'/k ds 的导数 −∮ (k cosθ)'/k ds."""

    sin, cos = np.sin(theta.values), np.cos(theta.values)
    slope = curve.curvature_slope * cos + curve.curvature * curve.torsion * sin
    return -periodic_trapezoid(slope / curve.curvature, curve.length)


def perturbation_profile(curve: FrenetCurve, theta: ThetaField) -> NDArray:
    """a = (k sinθ)' 的网格值."""

    sin, cos = np.sin(theta.values), np.cos(theta.values)
    return curve.curvature_slope * sin - curve.curvature * curve.torsion * cos


def lambda_perturbed(curve: FrenetCurve, theta: ThetaField, eps: float) -> float:
    """默认 A 下 ε 扰动后的 Λ(ε) = −∮ a/(k + εa) ds.

    与 `characteristic_exponent` 作用在 A + εa 上的结果相同.
    """

    a = perturbation_profile(curve, theta)
    denominator = curve.curvature + eps * a
    if np.min(denominator) <= 0:
        raise EpsTooLarge(
            f"ε = {eps:.6g} 时 k + εa 不再恒正",
            eps=eps,
            minimum=float(np.min(denominator)),
        )
    return -periodic_trapezoid(a / denominator, curve.length)


def dlambda_deps0(curve: FrenetCurve, theta: ThetaField) -> float:
    """Λ'(0) = ∮ [(k sinθ)'/k]² ds ≥ 0."""

    ratio = perturbation_profile(curve, theta) / curve.curvature
    return periodic_trapezoid(ratio**2, curve.length)


class SweepRow(NamedTuple):
    theta0: float
    lambda_: Optional[float]
    dlambda: Optional[float]
    umbilic_count: int

    def __str__(self) -> str:
        value = "脐点" if self.lambda_ is None else f"{self.lambda_:.6g}"
        return f"θ₀ = {self.theta0:.4f}, Λ = {value}"


def _sweep_profiles(
    curve: FrenetCurve,
    theta: ThetaField,
    mode: SweepMode,
    frozen: GermProfiles | None,
) -> GermProfiles:
    if mode == "frozen" and frozen is not None:
        return frozen
    profiles = default_profiles(curve, theta)
    return zero_a_profiles(profiles) if mode == "zero" else profiles


def _sweep_row(
    curve: FrenetCurve,
    theta0: float,
    mode: SweepMode,
    frozen: GermProfiles | None,
    threshold: float,
) -> SweepRow:
    theta = solve_theta(curve, theta0, threshold)
    profiles = _sweep_profiles(curve, theta, mode, frozen)
    try:
        roots = umbilic_roots_of(curve, theta, profiles)
    except IdenticallyZero:
        return SweepRow(theta0, None, None, curve.resolution)
    if roots:
        return SweepRow(theta0, None, None, len(roots))
    try:
        value = characteristic_exponent(curve, theta, profiles)
        if mode == "rederived":
            slope = default_lambda_slope(curve, theta)
        else:
            slope = dlambda_dtheta0(curve, theta0, profiles, threshold)
    except UmbilicOnCycle as e:
        return SweepRow(theta0, None, None, len(e.details.get("roots", ())))
    return SweepRow(theta0, value, slope, 0)


@return_progressbar
def lambda_sweep(
    curve: FrenetCurve,
    theta0s: Sequence[float],
    mode: SweepMode = "rederived",
    reference_theta0: float = 0.0,
    threshold: float = 1e-6,
    workers: int = 1,
) -> Iterator[SweepRow]:
    """对一组 θ₀ 计算 Λ 和 dΛ/dθ₀.

    dΛ/dθ₀ 总是同一模式下 Λ(θ₀) 这一列的导数: rederived 模式中 A 随 θ₀ 变化,
    其余模式中 A 固定.

    参数:
        curve: 曲线
        theta0s: θ₀ 的取值
        mode: rederived 时 A 随 θ₀ 重新取默认值; frozen 时 A 固定为
            `reference_theta0` 处的默认值; zero 时 A ≡ 0
        reference_theta0: frozen 模式下的参考 θ₀
        threshold: 量子化阈值
        workers: 并行线程数, 输出顺序与 `theta0s` 一致
    """

    frozen = None
    if mode == "frozen":
        reference = solve_theta(curve, reference_theta0, threshold)
        frozen = default_profiles(curve, reference)

    def row(theta0: float) -> SweepRow:
        return _sweep_row(curve, float(theta0), mode, frozen, threshold)

    rows: Iterable[SweepRow]
    if workers > 1:
        with ThreadPoolExecutor(workers) as executor:
            rows = list(executor.map(row, theta0s))
    else:
        rows = map(row, theta0s)

    for result in rows:
        logger.debug(str(result))
        yield result


def assess_profiles(
    curve: FrenetCurve,
    theta: ThetaField,
    profiles: GermProfiles,
    threshold: float = 1e-6,
) -> HyperbolicityReport:
    """对给定的 profile 直接判定, 不做 ε 扰动. 曲线上有脐点时给出 UmbilicObstruction."""

    roots = tuple(umbilic_roots_of(curve, theta, profiles))
    if roots:
        return HyperbolicityReport(
            theta.theta0,
            math.nan,
            math.nan,
            profiles.eps,
            dlambda_deps0(curve, theta),
            roots,
            Verdict.UMBILIC_OBSTRUCTION,
            math.nan,
            theta.winding,
            profiles=profiles,
        )

    value = characteristic_exponent(curve, theta, profiles)
    return HyperbolicityReport(
        theta.theta0,
        value,
        dlambda_dtheta0(curve, theta.theta0, profiles),
        profiles.eps,
        dlambda_deps0(curve, theta),
        (),
        Verdict.HYPERBOLIC if abs(value) > threshold else Verdict.NON_HYPERBOLIC,
        value,
        theta.winding,
        profiles=profiles,
    )


def _perturbation_peak(curve: FrenetCurve, theta: ThetaField) -> float:
    """max|a| 在固定的 PEAK_SAMPLES 点弧长网格上取值, 与 `curve` 的分辨率无关."""

    def magnitude(s: NDArray) -> NDArray:
        jet = curve.local(s)
        values = theta(s)
        a = jet.curvature_slope * np.sin(values)
        return np.abs(a - jet.curvature * jet.torsion * np.cos(values))

    return float(np.max(magnitude(grid(curve.length, PEAK_SAMPLES))))


def _choose_eps(curve: FrenetCurve, theta: ThetaField, eps: float | None) -> float:
    a = perturbation_profile(curve, theta)
    if eps is None:
        eps = 0.1 / max(_perturbation_peak(curve, theta), 1e-300)

    for _ in range(MAX_HALVINGS + 1):
        if np.min(curve.curvature + eps * a) > 0:
            return eps
        logger.warning(f"ε = {eps:.6g} 使 k + εa 失去正性, 减半")
        eps /= 2

    raise EpsTooLarge(f"减半 {MAX_HALVINGS} 次后 ε 仍然过大", eps=eps)


def certify_hyperbolic(
    curve: FrenetCurve,
    theta0: float,
    threshold: float = 1e-6,
    quantization: float = 1e-6,
    eps: float | None = None,
) -> HyperbolicityReport:
    """先用默认 A, 若 Λ 为零再做 ε 扰动.

    参数:
        curve: 曲线
        theta0: 初始角
        threshold: |Λ| 的双曲阈值
        quantization: 总挠率量子化阈值
        eps: ε 的初值, 默认 0.1/max|a|
    """

    theta = solve_theta(curve, theta0, quantization)
    profiles = default_profiles(curve, theta)
    slope = dlambda_deps0(curve, theta)

    k_sin = curve.curvature * np.sin(theta.values)
    scale = max(1.0, float(np.max(np.abs(k_sin))))
    if np.ptp(k_sin) <= CIRCLE_TOLERANCE * scale:
        if np.ptp(curve.curvature) > CIRCLE_TOLERANCE * scale:
            logger.warning(f"θ₀ = {theta0:.6g} 使 sinθ ≡ 0, 换一个 θ₀ 可以避免这一退化")
        logger.warning("k sinθ 为常数, Λ 在任何 ε 下都为零")
        return HyperbolicityReport(
            theta0,
            0.0,
            0.0,
            0.0,
            slope,
            (),
            Verdict.CIRCLE_OBSTRUCTION,
            0.0,
            theta.winding,
            profiles=profiles,
        )
    value = characteristic_exponent(curve, theta, profiles)
    derivative = dlambda_dtheta0(curve, theta0, profiles, quantization)

    if abs(value) > threshold:
        verdict, eps_used, final = Verdict.HYPERBOLIC, 0.0, value
    else:
        eps_used = _choose_eps(curve, theta, eps)
        final = lambda_perturbed(curve, theta, eps_used)
        profiles = replace(profiles, eps=eps_used)
        verdict = (
            Verdict.HYPERBOLIC if abs(final) > threshold else Verdict.NON_HYPERBOLIC
        )
        logger.info(f"默认 A 下 Λ = {value:.3e}, 取 ε = {eps_used:.6g}, Λ(ε) = {final:.6g}")

    return HyperbolicityReport(
        theta0,
        final,
        derivative,
        eps_used,
        slope,
        (),
        verdict,
        value,
        theta.winding,
        profiles=profiles,
    )
