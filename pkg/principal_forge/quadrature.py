"""闭合回路上的积分与插值.

所有函数都假定输入是周期为 `length` 的均匀网格 s_i = i·length/n 上的采样值,
最后一个点不与第一个点重复.
"""

from __future__ import annotations

import numpy as np
from numpy.typing import NDArray, ArrayLike
from scipy.interpolate import BSpline, make_interp_spline

__all__ = (
    "periodic_trapezoid",
    "cumulative_periodic",
    "spectral_derivative",
    "periodic_spline",
    "grid",
)


def grid(length: float, n: int) -> NDArray[np.float64]:
    return length * np.arange(n) / n


def periodic_trapezoid(values: ArrayLike, length: float) -> float:
    """周期梯形公式, 对光滑周期函数谱精度收敛.

    参数:
        values: 网格上的被积函数值
        length: 周期
    """

    return float(length * np.mean(np.asarray(values, dtype=float)))


def _wavenumbers(n: int, length: float, ndim: int = 1) -> NDArray[np.float64]:
    omega = 2.0 * np.pi * np.fft.rfftfreq(n, d=length / n)
    return omega.reshape((-1,) + (1,) * (ndim - 1))


def cumulative_periodic(values: ArrayLike, length: float) -> NDArray[np.float64]:
    """谱方法计算 ∫₀^{s_i} f, 包含平均值带来的线性增长.

    参数:
        values: 网格上的被积函数值
        length: 周期
    """

    values = np.asarray(values, dtype=float)
    n = values.shape[0]
    coeffs = np.fft.rfft(values, axis=0)
    mean = coeffs[0].real / n

    omega = _wavenumbers(n, length, values.ndim)
    coeffs[0] = 0.0
    coeffs[1:] /= 1j * omega[1:]
    # NOTE: 偶数点数时 Nyquist 模态没有一致的原函数
    if n % 2 == 0:
        coeffs[-1] = 0.0

    periodic = np.fft.irfft(coeffs, n, axis=0)
    return mean * grid(length, n) + periodic - periodic[0]


def spectral_derivative(
    values: ArrayLike, length: float, order: int = 1
) -> NDArray[np.float64]:
    values = np.asarray(values, dtype=float)
    n = values.shape[0]
    coeffs = np.fft.rfft(values, axis=0)
    coeffs *= (1j * _wavenumbers(n, length, values.ndim)) ** order
    if n % 2 == 0 and order % 2:
        coeffs[-1] = 0.0
    return np.fft.irfft(coeffs, n, axis=0)


def periodic_spline(values: ArrayLike, length: float, k: int = 5) -> BSpline:
    """在均匀网格上构造周期插值样条, 调用时需先把 s 对 `length` 取模.

    参数:
        values: 网格上的值, 可以是 (n,) 或 (n, d)
        length: 周期
        k: 样条阶数, 默认五次 (三阶导数连续)
    """

    values = np.asarray(values, dtype=float)
    n = values.shape[0]
    knots = np.linspace(0.0, length, n + 1)
    closed = np.concatenate([values, values[:1]], axis=0)
    return make_interp_spline(knots, closed, k=k, bc_type="periodic")
