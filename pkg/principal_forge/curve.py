from __future__ import annotations

import math
from abc import ABC, abstractmethod
from dataclasses import field, dataclass
from collections.abc import Mapping, Sequence
from typing import Any, ClassVar, NamedTuple

import numpy as np
from loguru import logger
from scipy.special import comb
from scipy.optimize import bisect
from numpy.typing import NDArray, ArrayLike
from scipy.interpolate import BSpline, PchipInterpolator, make_interp_spline

from .quadrature import grid, periodic_trapezoid, spectral_derivative
from .exception import (
    NotClosed,
    InvalidParams,
    NoSignChange,
    UnknownFamily,
    TooFewSamples,
    CurvatureVanishes,
)

__all__ = (
    "TWO_PI",
    "Parametrization",
    "Circle",
    "Ellipse",
    "SphericalCurve",
    "TorusCurve",
    "SampledCurve",
    "FAMILIES",
    "ArcLengthMap",
    "CurveJet",
    "FrenetFrame",
    "FrenetCurve",
    "TorsionSummary",
    "ingest_samples",
    "ingest_analytic",
    "frenet_at",
    "total_torsion",
    "frenet_residual",
    "scan_total_torsion",
    "quantized_brackets",
    "calibrate_total_torsion",
)

TWO_PI = 2.0 * math.pi
MIN_SAMPLES = 16
CURVATURE_FLOOR = 1e-6
BUMP_CONCENTRATION = 8.0


def _dot(a: NDArray, b: NDArray) -> NDArray:
    return np.einsum("...i,...i->...", a, b)


def _harmonic(omega: float, phase: float, u: NDArray, order: int) -> NDArray:
    """cos(ωu + φ) 的 `order` 阶导数."""

    return omega**order * np.cos(omega * u + phase + order * math.pi / 2)


def _bump(u: NDArray, kappa: float) -> NDArray:
    """exp(κ(cos u − 1)) 及其前三阶导数."""

    sin, cos = np.sin(u), np.cos(u)
    g = np.exp(kappa * (cos - 1))
    return np.stack(
        [
            g,
            -kappa * sin * g,
            (kappa**2 * sin**2 - kappa * cos) * g,
            (-(kappa**3) * sin**3 + 3 * kappa**2 * sin * cos + kappa * sin) * g,
        ]
    )


class Parametrization(ABC):
    """2π 周期的闭曲线参数化, 提供到三阶的导数."""

    name: ClassVar[str]

    @abstractmethod
    def derivatives(self, u: NDArray) -> NDArray:
        """返回形状为 (4, len(u), 3) 的 c, c', c'', c'''."""

        raise NotImplementedError

    @property
    def params(self) -> dict[str, float]:
        return {}

    @classmethod
    def from_params(cls, params: Mapping[str, float]) -> Parametrization:
        raise NotImplementedError


def _require(condition: bool, family: str, message: str, **params: Any) -> None:
    if not condition:
        raise InvalidParams(f"{family}: {message}", family=family, params=params)


@dataclass(frozen=True)
class Circle(Parametrization):
    name: ClassVar[str] = "circle"

    r: float = 1.0

    def derivatives(self, u: NDArray) -> NDArray:
        out = np.zeros((4, *u.shape, 3))
        for j in range(4):
            out[j, ..., 0] = self.r * _harmonic(1.0, 0.0, u, j)
            out[j, ..., 1] = self.r * _harmonic(1.0, -math.pi / 2, u, j)
        return out

    @property
    def params(self) -> dict[str, float]:
        return {"r": self.r}

    @classmethod
    def from_params(cls, params: Mapping[str, float]) -> Circle:
        r = float(params.get("r", 1.0))
        _require(r > 0, cls.name, "半径必须为正", r=r)
        return cls(r)


@dataclass(frozen=True)
class Ellipse(Parametrization):
    name: ClassVar[str] = "ellipse"

    a: float = 2.0
    b: float = 1.0

    def derivatives(self, u: NDArray) -> NDArray:
        out = np.zeros((4, *u.shape, 3))
        for j in range(4):
            out[j, ..., 0] = self.a * _harmonic(1.0, 0.0, u, j)
            out[j, ..., 1] = self.b * _harmonic(1.0, -math.pi / 2, u, j)
        return out

    @property
    def params(self) -> dict[str, float]:
        return {"a": self.a, "b": self.b}

    @classmethod
    def from_params(cls, params: Mapping[str, float]) -> Ellipse:
        a, b = float(params.get("a", 2.0)), float(params.get("b", 1.0))
        _require(a > 0 and b > 0, cls.name, "半轴必须为正", a=a, b=b)
        return cls(a, b)


@dataclass(frozen=True)
class SphericalCurve(Parametrization):
    """单位球面上的曲线 p/|p|, p = (cos u, sin u, a·cos 2u)."""

    name: ClassVar[str] = "spherical"

    a: float = 0.3

    def derivatives(self, u: NDArray) -> NDArray:
        p = np.zeros((4, *u.shape, 3))
        for j in range(4):
            p[j, ..., 0] = _harmonic(1.0, 0.0, u, j)
            p[j, ..., 1] = _harmonic(1.0, -math.pi / 2, u, j)
            p[j, ..., 2] = self.a * _harmonic(2.0, 0.0, u, j)

        # g = p·p 及其导数, w = g^(-1/2)
        g0 = _dot(p[0], p[0])
        g1 = 2 * _dot(p[0], p[1])
        g2 = 2 * (_dot(p[1], p[1]) + _dot(p[0], p[2]))
        g3 = 2 * (3 * _dot(p[1], p[2]) + _dot(p[0], p[3]))

        w = np.empty((4, *u.shape))
        w[0] = g0**-0.5
        w[1] = -0.5 * g0**-1.5 * g1
        w[2] = 0.75 * g0**-2.5 * g1**2 - 0.5 * g0**-1.5 * g2
        w[3] = (
            -1.875 * g0**-3.5 * g1**3
            + 2.25 * g0**-2.5 * g1 * g2
            - 0.5 * g0**-1.5 * g3
        )

        out = np.zeros_like(p)
        for n in range(4):
            for j in range(n + 1):
                out[n] += comb(n, j) * p[j] * w[n - j][..., None]
        return out

    @property
    def params(self) -> dict[str, float]:
        return {"a": self.a}

    @classmethod
    def from_params(cls, params: Mapping[str, float]) -> SphericalCurve:
        a = float(params.get("a", 0.3))
        _require(abs(a) <= 1, cls.name, "要求 |a| ≤ 1", a=a)
        return cls(a)


@dataclass(frozen=True)
class TorusCurve(Parametrization):
    """环面 (R, r) 上绕中轴 p 圈, 绕管 q 圈的曲线.

    `bump` 不为零时在 u = 0 附近沿中轴方向叠加高度为 `bump` 的局部隆起, 曲线不再有
    绕中轴的旋转对称.
    """

    name: ClassVar[str] = "torus_curve"

    p: int = 2
    q: int = 3
    R: float = 2.0
    r: float = 0.5
    bump: float = 0.0

    def derivatives(self, u: NDArray) -> NDArray:
        rho = np.stack([self.r * _harmonic(self.q, 0.0, u, j) for j in range(4)])
        rho[0] += self.R
        cos_p = np.stack([_harmonic(self.p, 0.0, u, j) for j in range(4)])
        sin_p = np.stack([_harmonic(self.p, -math.pi / 2, u, j) for j in range(4)])

        out = np.zeros((4, *u.shape, 3))
        for n in range(4):
            for j in range(n + 1):
                out[n, ..., 0] += comb(n, j) * rho[j] * cos_p[n - j]
                out[n, ..., 1] += comb(n, j) * rho[j] * sin_p[n - j]
            out[n, ..., 2] = self.r * _harmonic(self.q, -math.pi / 2, u, n)
        if self.bump:
            out[..., 2] += self.bump * _bump(u, BUMP_CONCENTRATION)
        return out

    @property
    def params(self) -> dict[str, float]:
        return {"p": self.p, "q": self.q, "R": self.R, "r": self.r, "bump": self.bump}

    @classmethod
    def from_params(cls, params: Mapping[str, float]) -> TorusCurve:
        p, q = params.get("p", 2), params.get("q", 3)
        R, r = float(params.get("R", 2.0)), float(params.get("r", 0.5))
        bump = float(params.get("bump", 0.0))
        _require(
            float(p).is_integer() and float(q).is_integer() and p >= 1 and q >= 1,
            cls.name,
            "p, q 必须为正整数",
            p=p,
            q=q,
        )
        _require(math.gcd(int(p), int(q)) == 1, cls.name, "p, q 必须互素", p=p, q=q)
        _require(0 < r < R, cls.name, "要求 0 < r < R", R=R, r=r)
        _require(math.isfinite(bump), cls.name, "隆起高度必须有限", bump=bump)
        return cls(int(p), int(q), R, r, bump)


class SampledCurve(Parametrization):
    """过采样点的五次周期样条, 参数为按弦长比例缩放到 [0, 2π) 的累积弦长."""

    name: ClassVar[str] = "samples"

    def __init__(self, points: NDArray) -> None:
        closed = np.concatenate([points, points[:1]])
        chords = np.linalg.norm(np.diff(closed, axis=0), axis=1)
        knots = np.concatenate([[0.0], np.cumsum(chords)])
        knots *= TWO_PI / knots[-1]
        self.points = points
        self.spline: BSpline = make_interp_spline(
            knots, closed, k=5, bc_type="periodic"
        )

    def derivatives(self, u: NDArray) -> NDArray:
        u = np.mod(u, TWO_PI)
        return np.stack([self.spline(u, nu) for nu in range(4)])


FAMILIES: dict[str, type[Parametrization]] = {
    cls.name: cls for cls in (Circle, Ellipse, SphericalCurve, TorusCurve)
}


class ArcLengthMap:
    """s(u) = ∫₀ᵘ |c'|, 以速度的 Fourier 级数精确积分.

    逆映射用单调三次插值给初值, 再做 Newton 迭代.
    """

    def __init__(self, speed: NDArray) -> None:
        m = speed.shape[0]
        coeffs = np.fft.rfft(speed) / m
        self.rate = float(coeffs[0].real)
        self.length = TWO_PI * self.rate

        modes = np.arange(1, (m - 1) // 2 + 1)
        antider = 2.0 * coeffs[modes] / (1j * modes)
        significant = np.nonzero(np.abs(antider) > 1e-17 * self.length)[0]
        keep = significant[-1] + 1 if significant.size else 0
        self._modes = modes[:keep].astype(float)
        self._coeffs = antider[:keep]
        self._offset = float(self._coeffs.sum().real)

        u = np.linspace(0.0, TWO_PI, m + 1)
        self._guess = PchipInterpolator(self(u), u)

    def __call__(self, u: ArrayLike) -> NDArray:
        u = np.asarray(u, dtype=float)
        flat = u.reshape(-1)
        out = self.rate * flat - self._offset
        for start in range(0, flat.size, 512):
            chunk = flat[start : start + 512]
            phase = np.exp(1j * np.multiply.outer(chunk, self._modes))
            out[start : start + 512] += (phase @ self._coeffs).real
        return out.reshape(u.shape)

    def inverse(self, s: ArrayLike, parametrization: Parametrization) -> NDArray:
        s = np.asarray(s, dtype=float)
        turns = np.floor(s / self.length)
        rest = s - turns * self.length
        u = self._guess(rest)
        for _ in range(20):
            speed = np.linalg.norm(parametrization.derivatives(u)[1], axis=-1)
            step = (self(u) - rest) / speed
            u = u - step
            if np.max(np.abs(step), initial=0.0) <= 1e-14:
                break
        return u + turns * TWO_PI


class CurveJet(NamedTuple):
    position: NDArray
    tangent: NDArray
    normal: NDArray
    binormal: NDArray
    curvature: NDArray
    curvature_slope: NDArray
    torsion: NDArray


class FrenetFrame(NamedTuple):
    tangent: NDArray
    normal: NDArray
    binormal: NDArray
    curvature: float
    torsion: float


def _frenet_apparatus(d: NDArray) -> CurveJet:
    d1, d2, d3 = d[1], d[2], d[3]
    speed = np.linalg.norm(d1, axis=-1)
    cross = np.cross(d1, d2)
    w = np.linalg.norm(cross, axis=-1)
    if np.any(w == 0):
        raise CurvatureVanishes("曲率在某点为零, 不是 Frenet 曲线")

    curvature = w / speed**3
    torsion = _dot(cross, d3) / w**2
    dk_du = _dot(cross, np.cross(d1, d3)) / (w * speed**3) - 3 * w * _dot(
        d1, d2
    ) / speed**5

    tangent = d1 / speed[..., None]
    binormal = cross / w[..., None]
    normal = np.cross(binormal, tangent)
    return CurveJet(
        d[0], tangent, normal, binormal, curvature, dk_du / speed, torsion
    )


def _readonly(*arrays: NDArray) -> None:
    for array in arrays:
        array.setflags(write=False)


@dataclass(frozen=True)
class FrenetCurve:
    """按弧长均匀采样的闭合 Frenet 曲线.

    网格 s_i = i·L/N, 不含 s = L. 所有数组只读, 可在线程间共享.
    """

    source: dict[str, Any]
    samples: NDArray
    parameter: NDArray
    position: NDArray
    tangent: NDArray
    normal: NDArray
    binormal: NDArray
    curvature: NDArray
    curvature_slope: NDArray
    torsion: NDArray
    length: float
    parametrization: Parametrization = field(repr=False)
    arclength: ArcLengthMap = field(repr=False)

    @property
    def resolution(self) -> int:
        return self.samples.shape[0]

    @property
    def spacing(self) -> float:
        return self.length / self.resolution

    def parameter_at(self, s: ArrayLike) -> NDArray:
        return self.arclength.inverse(s, self.parametrization)

    def local(self, s: ArrayLike) -> CurveJet:
        """任意 s 处的位置, 标架, k, k' 和 τ, s 不必落在 [0, L) 内."""

        s = np.asarray(s, dtype=float)
        u = self.parameter_at(s.reshape(-1))
        jet = _frenet_apparatus(self.parametrization.derivatives(u))
        return CurveJet(*(value.reshape(s.shape + value.shape[1:]) for value in jet))

    def arc_length_residual(self) -> float:
        """max |dc/ds| − 1, dc/ds 由网格位置的谱导数给出."""

        velocity = spectral_derivative(self.position, self.length)
        return float(np.max(np.abs(np.linalg.norm(velocity, axis=-1) - 1.0)))


def _build(
    parametrization: Parametrization, resolution: int, source: dict[str, Any]
) -> FrenetCurve:
    fine = max(4 * resolution, 1024)
    u_fine = TWO_PI * np.arange(fine) / fine
    speed = np.linalg.norm(parametrization.derivatives(u_fine)[1], axis=-1)
    arclength = ArcLengthMap(speed)
    length = arclength.length

    samples = grid(length, resolution)
    parameter = arclength.inverse(samples, parametrization)
    jet = _frenet_apparatus(parametrization.derivatives(parameter))

    floor = CURVATURE_FLOOR / length
    if jet.curvature.min() < floor:
        index = int(np.argmin(jet.curvature))
        raise CurvatureVanishes(
            f"最小曲率 {jet.curvature[index]:.3e} 低于阈值 {floor:.3e}",
            s=float(samples[index]),
            curvature=float(jet.curvature[index]),
        )

    flips = _dot(jet.binormal, np.roll(jet.binormal, -1, axis=0)) < 0
    if np.any(flips):
        index = int(np.argmax(flips))
        raise CurvatureVanishes(
            f"副法向量在 s = {samples[index]:.6g} 附近翻转, 曲线存在拐点",
            s=float(samples[index]),
        )

    arrays = (samples, parameter, *jet)
    _readonly(*arrays)
    logger.debug(
        f"曲线 {source} 长度 L = {length:.12g}, k ∈ "
        f"[{jet.curvature.min():.6g}, {jet.curvature.max():.6g}]"
    )
    return FrenetCurve(
        source,
        samples,
        parameter,
        *jet,
        length,
        parametrization=parametrization,
        arclength=arclength,
    )


def ingest_samples(
    points: ArrayLike,
    closed: bool = True,
    tol: float = 1e-9,
    resolution: int | None = None,
) -> FrenetCurve:
    """从采样点构造曲线.

    参数:
        points: 依次排列的三维点
        closed: 为真时最后一个点应与第一个点重合 (误差不超过 `tol`), 并被去掉;
            为假时视为不重复端点的周期序列
        tol: 闭合容差
        resolution: 弧长网格点数, 默认与去重后的采样点数相同
    """

    points = np.asarray(points, dtype=float)
    if points.ndim != 2 or points.shape[1] != 3:
        raise TooFewSamples("采样点必须是 (n, 3) 的数组", shape=list(points.shape))
    if points.shape[0] < MIN_SAMPLES:
        raise TooFewSamples(
            f"至少需要 {MIN_SAMPLES} 个采样点, 实际只有 {points.shape[0]} 个",
            count=int(points.shape[0]),
        )

    if closed:
        gap = float(np.linalg.norm(points[-1] - points[0]))
        if gap > tol:
            raise NotClosed(f"首尾距离 {gap:.3e} 超过容差 {tol:.3e}", gap=gap, tol=tol)
        points = points[:-1]

    if np.any(np.linalg.norm(np.diff(points, axis=0), axis=1) == 0):
        raise TooFewSamples("存在重复的相邻采样点")

    count = points.shape[0]
    return _build(
        SampledCurve(points),
        max(resolution or count, MIN_SAMPLES),
        {"kind": "samples", "count": count},
    )


def ingest_analytic(
    family: str, params: Mapping[str, float] | None = None, resolution: int = 512
) -> FrenetCurve:
    """从内置曲线族构造曲线, 导数精确.

    参数:
        family: circle, ellipse, spherical 或 torus_curve
        params: 曲线族参数, 未给出的取默认值
        resolution: 弧长网格点数, 至少 64
    """

    if family not in FAMILIES:
        raise UnknownFamily(
            f'未知的曲线族 "{family}", 可选: {", ".join(FAMILIES)}', family=family
        )
    if resolution < 64:
        raise InvalidParams(f"分辨率 {resolution} 小于 64", resolution=resolution)

    parametrization = FAMILIES[family].from_params(params or {})
    return _build(
        parametrization,
        resolution,
        {
            "kind": "family",
            "family": family,
            "params": parametrization.params,
            "resolution": resolution,
        },
    )


def frenet_at(curve: FrenetCurve, s: float) -> FrenetFrame:
    jet = curve.local(np.array([s]))
    return FrenetFrame(
        jet.tangent[0],
        jet.normal[0],
        jet.binormal[0],
        float(jet.curvature[0]),
        float(jet.torsion[0]),
    )


@dataclass(frozen=True)
class TorsionSummary:
    total: float
    m: int
    residual: float


def total_torsion(curve: FrenetCurve) -> TorsionSummary:
    total = periodic_trapezoid(curve.torsion, curve.length)
    m = round(total / TWO_PI)
    return TorsionSummary(total, m, abs(total - TWO_PI * m))


def frenet_residual(curve: FrenetCurve) -> float:
    """二阶中心差分的标架导数与 Frenet 方程右端之差的最大模."""

    h = curve.spacing

    def diff(x: NDArray) -> NDArray:
        return (np.roll(x, -1, axis=0) - np.roll(x, 1, axis=0)) / (2 * h)

    k = curve.curvature[:, None]
    tau = curve.torsion[:, None]
    t, n, b = curve.tangent, curve.normal, curve.binormal
    residuals = (
        diff(t) - k * n,
        diff(n) + k * t - tau * b,
        diff(b) + tau * n,
    )
    return float(max(np.linalg.norm(r, axis=-1).max() for r in residuals))


def _torsion_at(
    family: str, params: Mapping[str, float], resolution: int
) -> TorsionSummary:
    return total_torsion(ingest_analytic(family, params, resolution))


def scan_total_torsion(
    family: str,
    params: Mapping[str, float],
    name: str,
    low: float,
    high: float,
    count: int = 11,
    resolution: int = 512,
) -> list[tuple[float, float | None]]:
    """在区间上等距采样总挠率, 不合法的参数 (如出现拐点) 记为 None."""

    results: list[tuple[float, float | None]] = []
    for value in np.linspace(low, high, count):
        try:
            summary = _torsion_at(family, {**params, name: float(value)}, resolution)
        except (InvalidParams, CurvatureVanishes) as e:
            logger.debug(f"{name} = {value:.6g}: {e.message}")
            results.append((float(value), None))
        else:
            results.append((float(value), summary.total))
    return results


def quantized_brackets(
    scan: Sequence[tuple[float, float | None]],
) -> list[tuple[float, float, int]]:
    """从扫描结果中找出 T − 2πm 连续变号的子区间.

    相邻两点的总挠率之差超过 π 时视为跳变 (两点之间有拐点), 不作为候选.
    """

    brackets: list[tuple[float, float, int]] = []
    for (x0, t0), (x1, t1) in zip(scan, scan[1:]):
        if t0 is None or t1 is None or abs(t1 - t0) >= math.pi:
            continue
        lo, hi = sorted((t0 / TWO_PI, t1 / TWO_PI))
        brackets.extend((x0, x1, m) for m in range(math.ceil(lo), math.floor(hi) + 1))
    return brackets


def calibrate_total_torsion(
    family: str,
    params: Mapping[str, float],
    free_param: tuple[str, float, float],
    target_m: int,
    resolution: int = 512,
    tol: float = 1e-10,
    accept: float = 1e-8,
) -> dict[str, float]:
    """二分一个参数使总挠率为 2π·`target_m`.

    参数:
        family: 曲线族
        params: 其余参数
        free_param: (参数名, 下界, 上界)
        target_m: 目标整数
        resolution: 计算总挠率时的分辨率
        tol: 当前参数已经量子化时直接返回的阈值
        accept: 二分结果的残差上限
    """

    name, low, high = free_param
    params = dict(params)

    # NOTE: params 中缺少的参数按曲线族的默认值计算
    try:
        current = _torsion_at(family, params, resolution)
    except (InvalidParams, CurvatureVanishes):
        pass
    else:
        if abs(current.total - TWO_PI * target_m) <= tol:
            return params

    def residual(value: float) -> float:
        try:
            summary = _torsion_at(family, {**params, name: value}, resolution)
        except (InvalidParams, CurvatureVanishes) as e:
            raise NoSignChange(
                f"{name} = {value:.12g} 处曲线不合法: {e.message}", **e.details
            ) from e
        return summary.total - TWO_PI * target_m

    f_low, f_high = residual(low), residual(high)
    if f_low * f_high > 0:
        raise NoSignChange(
            f"{name} ∈ [{low}, {high}] 上 T − 2π·{target_m} 不变号",
            low=f_low,
            high=f_high,
        )

    root = bisect(residual, low, high, xtol=1e-14, maxiter=200)
    result = {**params, name: float(root)}
    final = abs(residual(root))
    if final > accept:
        raise NoSignChange(
            f"二分收敛到总挠率的跳变点 {name} = {root:.12g}, 残差 {final:.3e}",
            root=float(root),
            residual=final,
        )

    logger.info(f"校准 {family}: {name} = {root:.12g}, 残差 {final:.3e}")
    return result
