"""沿主曲率线积分, 用首次回归映射独立验证特征指数."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Literal, NamedTuple

import numpy as np
from loguru import logger
from scipy.integrate import solve_ivp
from numpy.typing import NDArray, ArrayLike

from .quadrature import periodic_trapezoid
from .hyperbolicity import Verdict, HyperbolicityReport
from .germ import (
    SurfaceGerm,
    FundamentalForms,
    forms_from_jet,
    surface_jet,
    cycle_curvatures,
    fundamental_forms,
)
from .exception import (
    Mismatch,
    LeftStrip,
    OutOfStrip,
    NumericalError,
    BranchAmbiguity,
)

__all__ = (
    "PrincipalODECoefficients",
    "PrincipalFlowTrace",
    "PoincareEstimate",
    "CrossValidation",
    "ode_coefficients",
    "transverse_slope",
    "integrate_principal_lines",
    "integrate_principal_line",
    "variational_log_derivative",
    "poincare_log_derivative",
    "cycle_family",
    "cross_validate",
)

SHOOTING_OFFSETS = (1e-3, 5e-4)
START_FRACTION = 0.1


class PrincipalODECoefficients(NamedTuple):
    """P dv² + Q ds dv + R ds² = 0 中的系数 (以 dv/ds 为未知量)."""

    P: NDArray
    Q: NDArray
    R: NDArray


def _coefficients(forms: FundamentalForms) -> PrincipalODECoefficients:
    return PrincipalODECoefficients(
        forms.F * forms.g - forms.G * forms.f,
        forms.E * forms.g - forms.G * forms.e,
        forms.E * forms.f - forms.F * forms.e,
    )


def ode_coefficients(
    germ: SurfaceGerm, s: ArrayLike, v: ArrayLike
) -> PrincipalODECoefficients:
    return _coefficients(fundamental_forms(germ, s, v))


def _stable_root(coeffs: PrincipalODECoefficients) -> NDArray:
    P, Q, R = coeffs
    discriminant = Q**2 - 4 * P * R
    if np.any(discriminant <= 1e-12 * Q**2):
        raise BranchAmbiguity(
            "主方向方程的判别式接近零, 无法区分两族主曲率线",
            discriminant=float(np.min(discriminant)),
        )
    return -2 * R / (Q + np.copysign(np.sqrt(discriminant), Q))


def transverse_slope(germ: SurfaceGerm, s: ArrayLike, v: ArrayLike) -> NDArray:
    """dv/ds, 取 Pt² + Qt + R = 0 中在 v = 0 处连续到 t = 0 的根."""

    return _stable_root(ode_coefficients(germ, s, v))


@dataclass(frozen=True)
class PrincipalFlowTrace:
    v0: float
    s: NDArray
    v: NDArray
    v_end: float
    steps: int
    evaluations: int
    max_residual: float


def _residual(germ: SurfaceGerm, s: NDArray, v: NDArray) -> NDArray:
    coeffs = ode_coefficients(germ, s, v)
    slope = _stable_root(coeffs)
    P, Q, R = coeffs
    value = np.abs(P * slope**2 + Q * slope + R)
    scale = np.abs(P) * slope**2 + np.abs(Q * slope) + np.abs(R)
    return np.where(scale > 0, value / np.where(scale > 0, scale, 1.0), 0.0)


def integrate_principal_lines(
    germ: SurfaceGerm, v0: ArrayLike, rtol: float = 1e-10
) -> list[PrincipalFlowTrace]:
    """同时积分若干条从 (0, v₀) 出发的主曲率线, 到 s = L 为止.

    参数:
        germ: 曲面芽
        v0: 初始横向偏移, 每个都不超过 0.1·v_max
        rtol: 相对误差
    """

    v0 = np.atleast_1d(np.asarray(v0, dtype=float))
    if np.any(np.abs(v0) > START_FRACTION * germ.v_max * (1 + 1e-12)):
        raise OutOfStrip(
            f"初始偏移必须不超过 {START_FRACTION}·v_max = "
            f"{START_FRACTION * germ.v_max:.6g}",
            v0=v0.tolist(),
        )

    nonzero = np.abs(v0[v0 != 0])
    scale = max(float(np.min(nonzero, initial=np.inf)), 1e-6 * germ.v_max)
    atol = 1e-3 * rtol * min(scale, germ.v_max)

    def rhs(s: float, y: NDArray) -> NDArray:
        # NOTE: 试探步可能略微越出条带, 由事件函数负责终止
        jet = surface_jet(germ, np.full(y.shape, s), y)
        return _stable_root(_coefficients(forms_from_jet(jet)))

    def leave(s: float, y: NDArray) -> float:
        return germ.v_max - float(np.max(np.abs(y)))

    leave.terminal = True  # type: ignore[attr-defined]

    solution = solve_ivp(
        rhs,
        (0.0, germ.curve.length),
        v0,
        method="DOP853",
        rtol=rtol,
        atol=atol,
        events=leave,
    )
    if solution.status == 1:
        raise LeftStrip(
            f"主曲率线在 s = {solution.t_events[0][0]:.6g} 处离开条带",
            s=float(solution.t_events[0][0]),
        )
    if not solution.success:
        raise NumericalError(f"积分失败: {solution.message}")

    traces = []
    for index, start in enumerate(v0):
        v = solution.y[index]
        residual = _residual(germ, solution.t, v)
        traces.append(
            PrincipalFlowTrace(
                float(start),
                solution.t,
                v,
                float(v[-1]),
                solution.t.size - 1,
                int(solution.nfev),
                float(residual.max()),
            )
        )
    return traces


def integrate_principal_line(
    germ: SurfaceGerm, v0: float, rtol: float = 1e-10
) -> PrincipalFlowTrace:
    (trace,) = integrate_principal_lines(germ, [v0], rtol)
    return trace


def variational_log_derivative(germ: SurfaceGerm) -> float:
    """−∮ R_v/Q ds 沿 v = 0, R_v 用四阶中心差分, Q 由基本形式直接给出."""

    s = germ.curve.samples
    delta = 1e-3 * germ.v_max
    R = [
        ode_coefficients(germ, s, np.full_like(s, i * delta)).R for i in (-2, -1, 1, 2)
    ]
    R_v = (R[0] - 8 * R[1] + 8 * R[2] - R[3]) / (12 * delta)
    Q = ode_coefficients(germ, s, np.zeros_like(s)).Q
    return -periodic_trapezoid(R_v / Q, germ.curve.length)


@dataclass(frozen=True)
class PoincareEstimate:
    shooting: float
    variational: float
    derivative: float
    offsets: tuple[float, ...]


def poincare_log_derivative(
    germ: SurfaceGerm, rtol: float = 1e-10
) -> PoincareEstimate:
    """ln π'(0) 的两个估计.

    打靶: 以 h ∈ {1e−3, 5e−4}·v_max 做中心差分, 再 Richardson 外推.
    变分: −∮ R_v/Q ds.
    """

    variational = variational_log_derivative(germ)
    # NOTE: 回归映射放大 e^|Λ| 倍时按比例缩小偏移, 保证积分不离开条带
    scale = min(1.0, 100.0 * math.exp(-abs(variational)))
    h1, h2 = (scale * fraction * germ.v_max for fraction in SHOOTING_OFFSETS)
    traces = integrate_principal_lines(germ, [h1, -h1, h2, -h2], rtol)
    ends = [trace.v_end for trace in traces]
    d1 = (ends[0] - ends[1]) / (2 * h1)
    d2 = (ends[2] - ends[3]) / (2 * h2)
    derivative = (4 * d2 - d1) / 3
    if derivative <= 0:
        raise Mismatch(f"回归映射的导数 {derivative:.6g} 不为正", derivative=derivative)

    estimate = PoincareEstimate(math.log(derivative), variational, derivative, (h1, h2))
    logger.debug(
        f"ln π'(0): 打靶 {estimate.shooting:.12g}, 变分 {estimate.variational:.12g}"
    )
    return estimate


def cycle_family(germ: SurfaceGerm) -> Literal["minimal", "maximal", "mixed"]:
    """曲线沿 t 的法曲率 −k sinθ 是较小还是较大的主曲率."""

    cycle = cycle_curvatures(germ.curve, germ.theta, germ.profiles)
    if np.all(cycle.k1 < cycle.k2):
        return "minimal"
    if np.all(cycle.k1 > cycle.k2):
        return "maximal"
    return "mixed"


@dataclass(frozen=True)
class CrossValidation:
    confirmed: bool
    verdict: Verdict
    sign: int
    shooting: float
    variational: float
    tolerance: float
    family: str
    offsets: tuple[float, ...] = ()

    def to_dict(self) -> dict[str, object]:
        return {
            "confirmed": self.confirmed,
            "verdict": self.verdict.value,
            "sign": self.sign,
            "log_pi_prime_shooting": self.shooting,
            "log_pi_prime_variational": self.variational,
            "tolerance": self.tolerance,
            "family": self.family,
        }


def cross_validate(
    germ: SurfaceGerm,
    report: HyperbolicityReport,
    threshold: float = 1e-6,
    abs_tol: float = 1e-4,
    rel_tol: float = 1e-3,
) -> CrossValidation:
    """比较实测的 ln π'(0) 与 Λ.

    实测结果总是 ln π'(0) = −Λ, 记录的 `sign` 为 −1 (Λ 为零时为 0).
    """

    estimate = poincare_log_derivative(germ)
    value = report.lambda_
    tolerance = max(abs_tol, rel_tol * abs(value))

    if abs(estimate.shooting - estimate.variational) > tolerance:
        raise Mismatch(
            f"打靶 {estimate.shooting:.9g} 与变分 {estimate.variational:.9g} 不一致",
            shooting=estimate.shooting,
            variational=estimate.variational,
            tolerance=tolerance,
        )
    if abs(abs(estimate.shooting) - abs(value)) > tolerance:
        raise Mismatch(
            f"|ln π'(0)| = {abs(estimate.shooting):.9g} 与 |Λ| = {abs(value):.9g} 不一致",
            shooting=estimate.shooting,
            lambda_=value,
            tolerance=tolerance,
        )

    sign = 0
    if abs(value) > tolerance and abs(estimate.shooting) > tolerance:
        sign = int(np.sign(estimate.shooting * value))

    measured = (
        Verdict.HYPERBOLIC
        if abs(estimate.shooting) > threshold
        else Verdict.NON_HYPERBOLIC
    )
    claimed = report.verdict is Verdict.HYPERBOLIC
    confirmed = (measured is Verdict.HYPERBOLIC) == claimed
    family = cycle_family(germ)
    logger.info(
        f"回归映射: ln π'(0) = {estimate.shooting:.9g}, Λ = {value:.9g}, "
        f"符号 {sign:+d}, 主曲率族 {family}"
    )
    return CrossValidation(
        confirmed,
        measured,
        sign,
        estimate.shooting,
        estimate.variational,
        tolerance,
        family,
        estimate.offsets,
    )
