from __future__ import annotations

import math
from functools import cached_property
from dataclasses import field, replace, dataclass
from typing import Any, Optional, NamedTuple

import numpy as np
from loguru import logger
from scipy.optimize import bisect
from scipy.interpolate import BSpline
from numpy.typing import NDArray, ArrayLike

from .curve import FrenetCurve
from .theta import ThetaField
from .quadrature import grid, periodic_spline, spectral_derivative
from .exception import (
    OutOfStrip,
    SeamMismatch,
    IdenticallyZero,
    DegenerateMetric,
)

__all__ = (
    "Profile",
    "TransverseJet",
    "TransverseProfile",
    "HarmonicTransverseProfile",
    "GermProfiles",
    "CycleCurvatures",
    "SurfaceGerm",
    "SurfaceJet",
    "FundamentalForms",
    "PrincipalDirections",
    "SeriesResidual",
    "StripMesh",
    "default_profiles",
    "zero_a_profiles",
    "random_profiles",
    "cycle_curvatures",
    "build_germ",
    "surface_jet",
    "evaluate_germ",
    "forms_from_jet",
    "fundamental_forms",
    "principal_directions",
    "principal_line_defect",
    "forms_series_check",
    "umbilic_gap",
    "umbilic_roots_of",
    "umbilic_roots",
    "build_mesh",
)

STRIP_FRACTION = 0.2


@dataclass(frozen=True)
class Profile:
    """L 周期的一元函数: 网格值, 网格上的导数, 以及用于网格外求值的五次样条."""

    values: NDArray
    slope: NDArray
    length: float
    spline: BSpline = field(repr=False)
    mode: str = "grid"

    @classmethod
    def from_grid(
        cls,
        values: ArrayLike,
        length: float,
        slope: ArrayLike | None = None,
        mode: str = "grid",
    ) -> Profile:
        values = np.asarray(values, dtype=float)
        slope = (
            spectral_derivative(values, length)
            if slope is None
            else np.asarray(slope, dtype=float)
        )
        values.setflags(write=False)
        slope.setflags(write=False)
        return cls(values, slope, length, periodic_spline(values, length), mode)

    @classmethod
    def zero(cls, n: int, length: float) -> Profile:
        return cls.from_grid(np.zeros(n), length, np.zeros(n), mode="zero")

    def __call__(self, s: ArrayLike, nu: int = 0) -> NDArray:
        return self.spline(np.mod(np.asarray(s, dtype=float), self.length), nu)

    def combine(self, other: Profile, weight: float) -> Profile:
        return Profile.from_grid(
            self.values + weight * other.values,
            self.length,
            self.slope + weight * other.slope,
            mode=f"{self.mode}+eps*{other.mode}",
        )


class TransverseJet(NamedTuple):
    value: NDArray
    ds: NDArray
    dss: NDArray
    dv: NDArray
    dvv: NDArray
    dsv: NDArray


class TransverseProfile:
    """C(s, v), 默认恒为零."""

    mode = "zero"

    def jet(self, s: NDArray, v: NDArray) -> TransverseJet:
        zero = np.zeros(np.broadcast(s, v).shape)
        return TransverseJet(zero, zero, zero, zero, zero, zero)

    def describe(self) -> dict[str, Any]:
        return {"mode": self.mode}


class HarmonicTransverseProfile(TransverseProfile):
    """C(s, v) = v·Σ γⱼ cos(2πjs/L + φⱼ)."""

    mode = "harmonic"

    def __init__(
        self, length: float, amplitudes: ArrayLike, phases: ArrayLike
    ) -> None:
        self.length = length
        self.amplitudes = np.asarray(amplitudes, dtype=float)
        self.phases = np.asarray(phases, dtype=float)
        self.omegas = 2 * math.pi * np.arange(1, self.amplitudes.size + 1) / length

    def _harmonics(self, s: NDArray, order: int) -> NDArray:
        angle = np.multiply.outer(s, self.omegas) + self.phases + order * math.pi / 2
        return (self.amplitudes * self.omegas**order * np.cos(angle)).sum(axis=-1)

    def jet(self, s: NDArray, v: NDArray) -> TransverseJet:
        g0, g1, g2 = (self._harmonics(s, order) for order in range(3))
        return TransverseJet(v * g0, v * g1, v * g2, g0, np.zeros_like(g0), g1)

    def describe(self) -> dict[str, Any]:
        return {
            "mode": self.mode,
            "amplitudes": self.amplitudes.tolist(),
            "phases": self.phases.tolist(),
        }


@dataclass(frozen=True)
class GermProfiles:
    """曲面芽的自由函数: h = ½(A + εa)v² + ⅙Bv³ + v⁴C."""

    A: Profile
    B: Profile
    C: TransverseProfile
    eps: float
    a: Profile
    seed: Optional[int] = None

    @cached_property
    def effective(self) -> Profile:
        """A + εa, 即曲线上第二个主曲率 k₂."""

        return self.A if self.eps == 0 else self.A.combine(self.a, self.eps)

    def describe(self) -> dict[str, Any]:
        return {
            "A": self.A.mode,
            "B": self.B.mode,
            "C": self.C.describe(),
            "eps": self.eps,
            "seed": self.seed,
        }


def default_profiles(curve: FrenetCurve, theta: ThetaField) -> GermProfiles:
    """A = (1 − sinθ)k, B = C = 0, ε = 0, a = (k sinθ)'.

    此时 A + k sinθ = k > 0, 曲线上没有脐点.
    """

    k, dk, tau = curve.curvature, curve.curvature_slope, curve.torsion
    sin, cos = np.sin(theta.values), np.cos(theta.values)

    A = Profile.from_grid(
        (1 - sin) * k, curve.length, k * tau * cos + (1 - sin) * dk, mode="default"
    )
    a = Profile.from_grid(dk * sin - k * tau * cos, curve.length, mode="(k sin)'")
    B = Profile.zero(curve.resolution, curve.length)
    return GermProfiles(A, B, TransverseProfile(), 0.0, a)


def zero_a_profiles(profiles: GermProfiles) -> GermProfiles:
    """A ≡ 0, 对应直纹面的情形."""

    return replace(profiles, A=Profile.zero(profiles.A.values.size, profiles.A.length))


def random_profiles(
    profiles: GermProfiles,
    curve: FrenetCurve,
    seed: int = 0,
    b: bool = True,
    c: bool = True,
    modes: int = 3,
) -> GermProfiles:
    """随机的光滑周期 B 和 C(s, v) = v·(有界周期函数), 不影响 v = 0 处的数据.

    参数:
        profiles: 原始 profile
        curve: 曲线, 用于确定幅值的尺度
        seed: 随机数种子
        b: 是否替换 B
        c: 是否替换 C
        modes: 谐波个数
    """

    rng = np.random.default_rng(seed)
    scale = float(np.max(curve.curvature))
    length = curve.length
    changes: dict[str, Any] = {"seed": seed}

    if b:
        amplitudes = 0.5 * scale**2 * rng.uniform(-1, 1, modes)
        phases = rng.uniform(0, 2 * math.pi, modes)
        omegas = 2 * math.pi * np.arange(1, modes + 1) / length
        angle = np.multiply.outer(curve.samples, omegas) + phases
        changes["B"] = Profile.from_grid(
            (amplitudes * np.cos(angle)).sum(axis=-1),
            length,
            -(amplitudes * omegas * np.sin(angle)).sum(axis=-1),
            mode="random",
        )

    if c:
        changes["C"] = HarmonicTransverseProfile(
            length,
            0.5 * scale**4 * rng.uniform(-1, 1, modes),
            rng.uniform(0, 2 * math.pi, modes),
        )

    return replace(profiles, **changes)


class CycleCurvatures(NamedTuple):
    """曲线上两个主曲率 k₁ = −k sinθ, k₂ = A + εa 及其弧长导数 (网格值)."""

    k1: NDArray
    k2: NDArray
    dk1: NDArray
    dk2: NDArray

    @property
    def gap(self) -> NDArray:
        return self.k2 - self.k1


def cycle_curvatures(
    curve: FrenetCurve, theta: ThetaField, profiles: GermProfiles
) -> CycleCurvatures:
    k, dk, tau = curve.curvature, curve.curvature_slope, curve.torsion
    sin, cos = np.sin(theta.values), np.cos(theta.values)
    effective = profiles.effective
    return CycleCurvatures(
        -k * sin,
        effective.values,
        -(dk * sin - k * tau * cos),
        effective.slope,
    )


@dataclass(frozen=True)
class SurfaceGerm:
    """α(s, v) = c(s) + v·(N∧T)(s) + h(s, v)·N(s), |v| ≤ v_max."""

    curve: FrenetCurve
    theta: ThetaField
    profiles: GermProfiles
    v_max: float


def build_germ(
    curve: FrenetCurve,
    theta: ThetaField,
    profiles: GermProfiles | None = None,
    v_max: float | None = None,
) -> SurfaceGerm:
    if profiles is None:
        profiles = default_profiles(curve, theta)
    if v_max is None:
        v_max = STRIP_FRACTION / float(np.max(curve.curvature))
    return SurfaceGerm(curve, theta, profiles, v_max)


class SurfaceJet(NamedTuple):
    point: NDArray
    ds: NDArray
    dv: NDArray
    dss: NDArray
    dsv: NDArray
    dvv: NDArray


def surface_jet(germ: SurfaceGerm, s: ArrayLike, v: ArrayLike) -> SurfaceJet:
    """α 及其到二阶的偏导数, 全部由 Frenet 方程闭式求导得到."""

    s, v = np.broadcast_arrays(np.asarray(s, dtype=float), np.asarray(v, dtype=float))
    shape = s.shape
    s, v = s.reshape(-1), v.reshape(-1)

    jet = germ.curve.local(s)
    theta = germ.theta(s)
    sin, cos = np.sin(theta), np.cos(theta)
    k, dk, tau = jet.curvature, jet.curvature_slope, jet.torsion

    def vec(x: NDArray) -> NDArray:
        return x[:, None]

    t = jet.tangent
    W = vec(cos) * jet.normal + vec(sin) * jet.binormal
    N = vec(cos) * jet.binormal - vec(sin) * jet.normal
    kg, kn = k * cos, -k * sin
    dkg = dk * cos + k * tau * sin
    dkn = -dk * sin + k * tau * cos

    profiles = germ.profiles
    effective = profiles.effective
    A0, A1, A2 = effective(s), effective(s, 1), effective(s, 2)
    B0, B1, B2 = profiles.B(s), profiles.B(s, 1), profiles.B(s, 2)
    C = profiles.C.jet(s, v)

    v2, v3, v4 = v**2, v**3, v**4
    h = 0.5 * A0 * v2 + B0 * v3 / 6 + v4 * C.value
    h_s = 0.5 * A1 * v2 + B1 * v3 / 6 + v4 * C.ds
    h_ss = 0.5 * A2 * v2 + B2 * v3 / 6 + v4 * C.dss
    h_v = A0 * v + 0.5 * B0 * v2 + 4 * v3 * C.value + v4 * C.dv
    h_vv = A0 + B0 * v + 12 * v2 * C.value + 8 * v3 * C.dv + v4 * C.dvv
    h_sv = A1 * v + 0.5 * B1 * v2 + 4 * v3 * C.ds + v4 * C.dsv

    lam = 1 - v * kg - h * kn
    lam_s = -v * dkg - h_s * kn - h * dkn
    lam_v = -kg - h_v * kn

    point = jet.position + vec(v) * W + vec(h) * N
    ds = vec(lam) * t + vec(h_s) * N
    dv = W + vec(h_v) * N
    dss = vec(lam_s - h_s * kn) * t + vec(lam * kg) * W + vec(lam * kn + h_ss) * N
    dsv = vec(lam_v) * t + vec(h_sv) * N
    dvv = vec(h_vv) * N

    return SurfaceJet(
        *(x.reshape(shape + (3,)) for x in (point, ds, dv, dss, dsv, dvv))
    )


def _check_strip(germ: SurfaceGerm, v: ArrayLike) -> None:
    v = np.asarray(v, dtype=float)
    if np.any(np.abs(v) > germ.v_max * (1 + 1e-12)):
        worst = float(np.max(np.abs(v)))
        raise OutOfStrip(
            f"|v| = {worst:.6g} 超出条带半宽 {germ.v_max:.6g}",
            v=worst,
            v_max=germ.v_max,
        )


def evaluate_germ(germ: SurfaceGerm, s: ArrayLike, v: ArrayLike) -> NDArray:
    _check_strip(germ, v)
    return surface_jet(germ, s, v).point


def _dot(a: NDArray, b: NDArray) -> NDArray:
    return np.einsum("...i,...i->...", a, b)


@dataclass(frozen=True)
class FundamentalForms:
    E: NDArray
    F: NDArray
    G: NDArray
    e: NDArray
    f: NDArray
    g: NDArray

    @property
    def discriminant(self) -> NDArray:
        return self.E * self.G - self.F**2

    @property
    def mean_curvature(self) -> NDArray:
        return (self.e * self.G - 2 * self.f * self.F + self.g * self.E) / (
            2 * self.discriminant
        )

    @property
    def gauss_curvature(self) -> NDArray:
        return (self.e * self.g - self.f**2) / self.discriminant

    @property
    def principal_curvatures(self) -> tuple[NDArray, NDArray]:
        """(k₁, k₂), k₁ ≤ k₂."""

        H = self.mean_curvature
        root = np.sqrt(np.maximum(H**2 - self.gauss_curvature, 0.0))
        return H - root, H + root


def forms_from_jet(jet: SurfaceJet) -> FundamentalForms:
    E, F, G = _dot(jet.ds, jet.ds), _dot(jet.ds, jet.dv), _dot(jet.dv, jet.dv)
    discriminant = E * G - F**2
    if np.any(discriminant <= 0):
        raise DegenerateMetric(
            f"第一基本形式退化, min(EG − F²) = {np.min(discriminant):.3e}"
        )

    cross = np.cross(jet.ds, jet.dv)
    root = np.sqrt(discriminant)
    return FundamentalForms(
        E,
        F,
        G,
        _dot(cross, jet.dss) / root,
        _dot(cross, jet.dsv) / root,
        _dot(cross, jet.dvv) / root,
    )


def fundamental_forms(
    germ: SurfaceGerm, s: ArrayLike, v: ArrayLike
) -> FundamentalForms:
    """(E, F, G, e, f, g), 法向取 α_s × α_v 的方向, 在曲线上即 N."""

    _check_strip(germ, v)
    return forms_from_jet(surface_jet(germ, s, v))


class PrincipalDirections(NamedTuple):
    k1: NDArray
    k2: NDArray
    d1: NDArray
    d2: NDArray


def _eigendirection(
    forms: FundamentalForms, jet: SurfaceJet, curvature: NDArray
) -> NDArray:
    p1, q1 = forms.e - curvature * forms.E, forms.f - curvature * forms.F
    p2, q2 = forms.f - curvature * forms.F, forms.g - curvature * forms.G
    first = np.hypot(p1, q1) >= np.hypot(p2, q2)
    du = np.where(first, -q1, -q2)
    dv = np.where(first, p1, p2)
    direction = du[..., None] * jet.ds + dv[..., None] * jet.dv
    norm = np.linalg.norm(direction, axis=-1, keepdims=True)
    return direction / np.where(norm == 0, 1.0, norm)


def principal_directions(
    germ: SurfaceGerm, s: ArrayLike, v: ArrayLike
) -> PrincipalDirections:
    """(II − kI)w = 0 的两个特征方向, 以三维单位向量给出."""

    _check_strip(germ, v)
    jet = surface_jet(germ, s, v)
    forms = forms_from_jet(jet)
    k1, k2 = forms.principal_curvatures
    return PrincipalDirections(
        k1, k2, _eigendirection(forms, jet, k1), _eigendirection(forms, jet, k2)
    )


def principal_line_defect(germ: SurfaceGerm, s: ArrayLike | None = None) -> float:
    """曲线上与 t 对应的主方向在 ∂/∂v 上的最大分量."""

    if s is None:
        s = germ.curve.samples
    s = np.asarray(s, dtype=float)
    directions = principal_directions(germ, s, np.zeros_like(s))
    jet = surface_jet(germ, s, np.zeros_like(s))
    forms = forms_from_jet(jet)
    along = forms.e / forms.E
    d = np.where(
        (np.abs(directions.k1 - along) <= np.abs(directions.k2 - along))[..., None],
        directions.d1,
        directions.d2,
    )
    return float(np.max(np.abs(_dot(d, jet.dv))))


@dataclass(frozen=True)
class SeriesResidual:
    """v = 0 处基本形式的值与 v 方向斜率相对展开式的残差."""

    s: NDArray
    values: dict[str, NDArray]
    slopes: dict[str, NDArray]

    def max(self) -> float:
        residuals = (*self.values.values(), *self.slopes.values())
        return float(max(np.max(np.abs(r)) for r in residuals))


def forms_series_check(germ: SurfaceGerm, s: ArrayLike) -> SeriesResidual:
    """用四阶中心差分求 ∂/∂v 并与展开式系数比较.

    E_v = −2k cosθ, e_v = k cosθ(k sinθ − Â), f_v = Â', g_v = B, F_v = G_v = 0,
    其中 Â = A + εa. 另外检查主曲率方程系数 Q = Eg − Ge 的斜率
    B − kÂcosθ − ½k² sin2θ.
    """

    s = np.atleast_1d(np.asarray(s, dtype=float))
    delta = 1e-3 * germ.v_max
    offsets = (-2, -1, 0, 1, 2)
    forms = [fundamental_forms(germ, s, np.full_like(s, i * delta)) for i in offsets]

    def slope(name: str) -> NDArray:
        m2, m1, _, p1, p2 = (getattr(f, name) for f in forms)
        return (-p2 + 8 * p1 - 8 * m1 + m2) / (12 * delta)

    def q(f: FundamentalForms) -> NDArray:
        return f.E * f.g - f.G * f.e

    at = forms[2]
    jet = germ.curve.local(s)
    k = jet.curvature
    theta = germ.theta(s)
    sin, cos = np.sin(theta), np.cos(theta)
    effective = germ.profiles.effective
    A, dA, B = effective(s), effective(s, 1), germ.profiles.B(s)

    values = {
        "E": at.E - 1,
        "F": at.F,
        "G": at.G - 1,
        "e": at.e + k * sin,
        "f": at.f,
        "g": at.g - A,
    }
    q_slope = (-q(forms[4]) + 8 * q(forms[3]) - 8 * q(forms[1]) + q(forms[0])) / (
        12 * delta
    )
    slopes = {
        "E": slope("E") + 2 * k * cos,
        "F": slope("F"),
        "G": slope("G"),
        "e": slope("e") - k * cos * (k * sin - A),
        "f": slope("f") - dA,
        "g": slope("g") - B,
        "Q": q_slope - (B - k * A * cos - 0.5 * k**2 * np.sin(2 * theta)),
    }
    return SeriesResidual(s, values, slopes)


def umbilic_gap(
    curve: FrenetCurve,
    theta: ThetaField,
    profiles: GermProfiles,
    s: ArrayLike | None = None,
) -> NDArray:
    """k₂ − k₁ = A + εa + k sinθ, 零点即曲线上的脐点. `s` 为空时返回网格值."""

    if s is None:
        return profiles.effective.values + curve.curvature * np.sin(theta.values)
    s = np.asarray(s, dtype=float)
    return profiles.effective(s) + curve.local(s).curvature * np.sin(theta(s))


def umbilic_roots_of(
    curve: FrenetCurve,
    theta: ThetaField,
    profiles: GermProfiles,
    xtol: float = 1e-10,
) -> list[float]:
    """扫描网格上的变号再二分, 包括 s_{N−1} 到 L 的最后一段."""

    gap = umbilic_gap(curve, theta, profiles)
    scale = max(float(np.max(curve.curvature)), 1.0)
    if np.max(np.abs(gap)) <= 1e-12 * scale:
        raise IdenticallyZero("整条曲线都是脐点, 构造无效")

    def func(s: float) -> float:
        return float(umbilic_gap(curve, theta, profiles, np.array([s]))[0])

    samples = curve.samples
    roots: list[float] = []
    for i in range(samples.size):
        if gap[i] == 0:
            roots.append(float(samples[i]))
            continue
        j = (i + 1) % samples.size
        if gap[i] * gap[j] >= 0:
            continue

        a = float(samples[i])
        b = float(samples[j]) if j else curve.length
        fa, fb = func(a), func(b)
        if fa * fb < 0:
            root = bisect(func, a, b, xtol=xtol)
        else:
            root = a if abs(fa) <= abs(fb) else b
        roots.append(float(root) % curve.length)

    if roots:
        logger.debug(f"曲线上的脐点: {roots}")
    return roots


def umbilic_roots(germ: SurfaceGerm) -> list[float]:
    return umbilic_roots_of(germ.curve, germ.theta, germ.profiles)


@dataclass(frozen=True)
class StripMesh:
    """(s, v) 结构网格, 接缝处第 ns−1 行与第 0 行相连, 面的顶点下标从 0 开始."""

    vertices: NDArray
    faces: NDArray
    resolution: tuple[int, int]
    v: NDArray
    seam_gap: float
    min_area_element: float

    def euler_characteristic(self) -> int:
        edges = np.concatenate(
            [self.faces[:, [i, (i + 1) % 4]] for i in range(4)], axis=0
        )
        edges = np.unique(np.sort(edges, axis=1), axis=0)
        return len(self.vertices) - len(edges) + len(self.faces)


def build_mesh(
    germ: SurfaceGerm,
    resolution_s: int = 256,
    resolution_v: int = 9,
    seam_tol: float = 1e-6,
) -> StripMesh:
    """在条带上生成四边形网格.

    参数:
        germ: 曲面芽
        resolution_s: 沿曲线的点数
        resolution_v: 横向点数, 奇数时中间一行恰为 v = 0
        seam_tol: 接缝处允许的最大距离
    """

    ns, nv = resolution_s, resolution_v
    if ns < 3 or nv < 2:
        raise ValueError(f"网格分辨率过小: {ns} × {nv}")

    s = grid(germ.curve.length, ns)
    v = germ.v_max * np.linspace(-1.0, 1.0, nv)
    if nv % 2:
        v[nv // 2] = 0.0

    S, V = np.meshgrid(s, v, indexing="ij")
    jet = surface_jet(germ, S, V)
    area = np.linalg.norm(np.cross(jet.ds, jet.dv), axis=-1)
    min_area = float(area.min())
    if min_area < 1e-6:
        raise DegenerateMetric(f"条带上 |α_s × α_v| 最小为 {min_area:.3e}")

    seam = surface_jet(germ, np.full(nv, germ.curve.length), v).point
    seam_gap = float(np.max(np.linalg.norm(seam - jet.point[0], axis=-1)))
    if seam_gap > seam_tol:
        raise SeamMismatch(
            f"接缝处的最大距离 {seam_gap:.3e} 超过 {seam_tol:.1e}, 总挠率未量子化",
            seam_gap=seam_gap,
        )

    i = np.arange(ns)[:, None]
    j = np.arange(nv - 1)[None, :]
    i2 = (i + 1) % ns
    faces = np.stack(
        np.broadcast_arrays(i * nv + j, i2 * nv + j, i2 * nv + j + 1, i * nv + j + 1),
        axis=-1,
    ).reshape(-1, 4)

    logger.debug(f"网格 {ns} × {nv}, 接缝距离 {seam_gap:.3e}")
    return StripMesh(jet.point.reshape(-1, 3), faces, (ns, nv), v, seam_gap, min_area)
