from __future__ import annotations

import math

import pytest
from click.testing import CliRunner

from principal_forge.utils import init_logger
from principal_forge.germ import default_profiles
from principal_forge.exception import NoSignChange
from principal_forge.theta import ThetaField, solve_theta
from principal_forge.hyperbolicity import characteristic_exponent
from principal_forge.curve import (
    FrenetCurve,
    ingest_analytic,
    quantized_brackets,
    scan_total_torsion,
    calibrate_total_torsion,
)

TORUS_FAMILY = {"p": 1, "q": 8, "r": 0.4}
SKEW_FAMILY = {**TORUS_FAMILY, "bump": 0.5}
TORUS_RESOLUTION = 1024


@pytest.fixture(scope="session")
def circle() -> FrenetCurve:
    return ingest_analytic("circle", {"r": 1.0})


@pytest.fixture(scope="session")
def ellipse() -> FrenetCurve:
    return ingest_analytic("ellipse", {"a": 2.0, "b": 1.0})


@pytest.fixture(scope="session")
def spherical() -> FrenetCurve:
    return ingest_analytic("spherical", {"a": 0.3})


@pytest.fixture(scope="session")
def knot() -> FrenetCurve:
    """(2, 3) 环面结, 总挠率没有量子化."""

    return ingest_analytic("torus_curve", {"p": 2, "q": 3, "R": 2.0, "r": 0.5})


def calibrate_winding(family: dict[str, float]) -> dict[str, float]:
    """在 R ∈ [1.5, 4] 上把环面曲线校准到第一个非零的缠绕数."""

    scan = scan_total_torsion(
        "torus_curve", family, "R", 1.5, 4.0, resolution=TORUS_RESOLUTION
    )
    for low, high, m in quantized_brackets(scan):
        if m == 0:
            continue
        try:
            return calibrate_total_torsion(
                "torus_curve", family, ("R", low, high), m, TORUS_RESOLUTION
            )
        except NoSignChange:
            continue
    pytest.fail("R ∈ [1.5, 4] 上没有可校准的区间")


@pytest.fixture(scope="session")
def torus_params() -> dict[str, float]:
    return calibrate_winding(TORUS_FAMILY)


@pytest.fixture(scope="session")
def torus(torus_params: dict[str, float]) -> FrenetCurve:
    return ingest_analytic("torus_curve", torus_params, TORUS_RESOLUTION)


@pytest.fixture(scope="session")
def torus_theta(torus: FrenetCurve) -> ThetaField:
    return solve_theta(torus, 0.3)


@pytest.fixture(scope="session")
def skew_params() -> dict[str, float]:
    return calibrate_winding(SKEW_FAMILY)


@pytest.fixture(scope="session")
def skew(skew_params: dict[str, float]) -> FrenetCurve:
    """带局部隆起的环面曲线, 没有旋转对称, 默认 A 下的 Λ 不为零."""

    return ingest_analytic("torus_curve", skew_params, TORUS_RESOLUTION)


@pytest.fixture(scope="session")
def skew_theta0(skew: FrenetCurve) -> float:
    """默认 A 下 |Λ| 最大的 θ₀.

    θ 只平移 θ₀, 所以 Λ(θ₀) = Λ(0)·cosθ₀ + Λ(π/2)·sinθ₀.
    """

    def exponent(theta0: float) -> float:
        theta = solve_theta(skew, theta0)
        return characteristic_exponent(skew, theta, default_profiles(skew, theta))

    return math.atan2(exponent(math.pi / 2), exponent(0.0))


@pytest.fixture
def runner():
    yield CliRunner()
    # NOTE: CliRunner 结束后会关闭它替换的 stderr
    init_logger("DEBUG")
