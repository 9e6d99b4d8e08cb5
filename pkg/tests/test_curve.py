import math

import numpy as np
import pytest
from scipy.special import ellipe
from scipy.spatial.transform import Rotation

from principal_forge.curve import (
    TWO_PI,
    FrenetCurve,
    frenet_at,
    total_torsion,
    ingest_samples,
    ingest_analytic,
    frenet_residual,
    quantized_brackets,
    calibrate_total_torsion,
)
from principal_forge.exception import (
    NotClosed,
    NoSignChange,
    InvalidParams,
    TooFewSamples,
    UnknownFamily,
    CurvatureVanishes,
)


def test_circle_apparatus():
    curve = ingest_analytic("circle", {"r": 2.0}, 256)

    assert curve.length == pytest.approx(4 * math.pi, abs=1e-12)
    np.testing.assert_allclose(curve.curvature, 0.5, atol=1e-12)
    np.testing.assert_allclose(curve.torsion, 0.0, atol=1e-12)
    np.testing.assert_allclose(
        np.linalg.norm(curve.position, axis=-1), 2.0, atol=1e-12
    )
    assert total_torsion(curve).m == 0


def test_ellipse_length_matches_complete_elliptic_integral(ellipse: FrenetCurve):
    expected = 4 * 2.0 * ellipe(1 - (1.0 / 2.0) ** 2)

    assert ellipse.length == pytest.approx(expected, abs=1e-10)
    assert ellipse.curvature.min() == pytest.approx(0.25, abs=1e-12)
    assert ellipse.curvature.max() == pytest.approx(2.0, abs=1e-12)
    assert ellipse.arc_length_residual() < 1e-9


def test_grid_is_uniform_in_arc_length(ellipse: FrenetCurve):
    np.testing.assert_allclose(
        ellipse.arclength(ellipse.parameter), ellipse.samples, atol=1e-12
    )
    assert ellipse.samples[0] == 0.0
    assert ellipse.samples[-1] < ellipse.length


def test_spherical_curve_is_quantized(spherical: FrenetCurve):
    np.testing.assert_allclose(
        np.linalg.norm(spherical.position, axis=-1), 1.0, atol=1e-12
    )
    summary = total_torsion(spherical)
    assert summary.m == 0
    assert summary.residual <= 1e-6


def test_frenet_frame_is_orthonormal(spherical: FrenetCurve):
    frame = frenet_at(spherical, 1.234)
    basis = np.stack([frame.tangent, frame.normal, frame.binormal])

    np.testing.assert_allclose(basis @ basis.T, np.eye(3), atol=1e-12)
    assert np.linalg.det(basis) == pytest.approx(1.0, abs=1e-12)
    assert frame.curvature > 0


def test_local_jet_agrees_with_grid(spherical: FrenetCurve):
    index = 37
    jet = spherical.local(spherical.samples[index : index + 1])

    np.testing.assert_allclose(jet.position[0], spherical.position[index], atol=1e-12)
    assert jet.torsion[0] == pytest.approx(spherical.torsion[index], abs=1e-10)

    wrapped = spherical.local(np.array([spherical.length + 0.5, 0.5]))
    np.testing.assert_allclose(wrapped.position[0], wrapped.position[1], atol=1e-10)


def test_frenet_residual_converges_quadratically():
    coarse = frenet_residual(ingest_analytic("ellipse", {"a": 2.0, "b": 1.0}, 256))
    fine = frenet_residual(ingest_analytic("ellipse", {"a": 2.0, "b": 1.0}, 512))

    assert coarse / fine == pytest.approx(4.0, rel=0.1)


def test_ingest_closed_samples_of_circle():
    t = np.linspace(0.0, TWO_PI, 201)
    points = np.stack([np.cos(t), np.sin(t), np.zeros_like(t)], axis=-1)

    curve = ingest_samples(points)

    assert curve.source == {"kind": "samples", "count": 200}
    assert curve.length == pytest.approx(TWO_PI, abs=1e-6)
    np.testing.assert_allclose(curve.curvature, 1.0, atol=1e-4)
    np.testing.assert_allclose(curve.torsion, 0.0, atol=1e-12)


def test_ingest_open_sequence_with_resolution():
    t = TWO_PI * np.arange(128) / 128
    points = np.stack([2 * np.cos(t), np.sin(t), np.zeros_like(t)], axis=-1)

    curve = ingest_samples(points, closed=False, resolution=256)

    assert curve.resolution == 256
    assert curve.length == pytest.approx(4 * 2.0 * ellipe(0.75), rel=1e-5)


def test_ingest_samples_of_circle_of_radius_two():
    t = TWO_PI * np.arange(256) / 256
    points = np.stack([2 * np.cos(t), 2 * np.sin(t), np.zeros_like(t)], axis=-1)

    curve = ingest_samples(points, closed=False)

    assert curve.length == pytest.approx(4 * math.pi, rel=1e-6)
    np.testing.assert_allclose(curve.curvature, 0.5, atol=1e-4)
    np.testing.assert_allclose(curve.torsion, 0.0, atol=1e-12)


def test_ingest_samples_of_ellipse_matches_vertex_curvature():
    t = TWO_PI * np.arange(256) / 256
    points = np.stack([2 * np.cos(t), np.sin(t), np.zeros_like(t)], axis=-1)

    curve = ingest_samples(points, closed=False)

    # t = 0 处 k = a/b²
    np.testing.assert_allclose(curve.position[0], [2.0, 0.0, 0.0], atol=1e-12)
    assert curve.curvature[0] == pytest.approx(2.0, rel=1e-3)
    assert curve.curvature.min() == pytest.approx(0.25, rel=1e-3)


def test_total_torsion_is_invariant_under_rigid_motion():
    points = ingest_analytic("torus_curve", {"p": 2, "q": 3}, 256).position
    rotation = Rotation.from_euler("zyx", [0.3, -1.1, 2.0]).as_matrix()
    moved = points @ rotation.T + np.array([1.5, -2.0, 0.25])

    original = total_torsion(ingest_samples(points, closed=False))
    transformed = total_torsion(ingest_samples(moved, closed=False))

    assert transformed.total == pytest.approx(original.total, abs=1e-9)
    assert transformed.m == original.m


@pytest.mark.parametrize(
    ("points", "closed", "error"),
    [
        (np.zeros((10, 3)), True, TooFewSamples),
        (np.zeros((32, 2)), True, TooFewSamples),
        (
            np.stack(
                [np.cos(np.arange(32)), np.sin(np.arange(32)), np.zeros(32)], axis=-1
            ),
            True,
            NotClosed,
        ),
        (np.repeat(np.eye(3), 8, axis=0), False, TooFewSamples),
    ],
)
def test_ingest_samples_rejects(points, closed: bool, error: type):
    with pytest.raises(error) as info:
        ingest_samples(points, closed=closed)
    assert info.value.exit_code == 3


def test_figure_eight_has_an_inflection():
    t = TWO_PI * np.arange(400) / 400
    points = np.stack([np.cos(t), np.sin(2 * t), np.zeros_like(t)], axis=-1)

    with pytest.raises(CurvatureVanishes):
        ingest_samples(points, closed=False)


@pytest.mark.parametrize(
    ("family", "params", "error"),
    [
        ("trefoil", {}, UnknownFamily),
        ("ellipse", {"a": -1.0}, InvalidParams),
        ("circle", {"r": 0.0}, InvalidParams),
        ("spherical", {"a": 1.5}, InvalidParams),
        ("torus_curve", {"p": 2, "q": 4}, InvalidParams),
        ("torus_curve", {"R": 1.0, "r": 2.0}, InvalidParams),
        ("torus_curve", {"bump": math.inf}, InvalidParams),
    ],
)
def test_ingest_analytic_rejects(family: str, params: dict, error: type):
    with pytest.raises(error):
        ingest_analytic(family, params)


def test_resolution_floor():
    with pytest.raises(InvalidParams):
        ingest_analytic("circle", resolution=32)


def test_uncalibrated_torus_knot_is_not_quantized(knot: FrenetCurve):
    assert total_torsion(knot).residual > 1e-6


def test_calibrated_torus_curve(torus: FrenetCurve, torus_params: dict):
    summary = total_torsion(torus)

    assert summary.m != 0
    assert summary.residual <= 1e-8
    assert 1.5 <= torus_params["R"] <= 4.0
    assert torus_params["r"] == 0.4


def test_calibration_returns_quantized_params_unchanged(torus_params: dict):
    params = calibrate_total_torsion(
        "torus_curve",
        torus_params,
        ("R", 1.5, 4.0),
        total_torsion(ingest_analytic("torus_curve", torus_params, 1024)).m,
        1024,
    )
    assert params == torus_params


def test_calibrated_asymmetric_torus_curve(skew: FrenetCurve, skew_params: dict):
    summary = total_torsion(skew)

    assert summary.m != 0
    assert summary.residual <= 1e-8
    assert skew.source["params"]["bump"] == skew_params["bump"] == 0.5


def test_calibration_keeps_planar_params_without_free_param():
    params = {"b": 1.0}

    assert calibrate_total_torsion("ellipse", params, ("a", 1.5, 3.0), 0) == params


def test_calibration_without_sign_change():
    with pytest.raises(NoSignChange) as info:
        calibrate_total_torsion(
            "torus_curve", {"p": 1, "q": 8, "r": 0.4}, ("R", 1.5, 1.6), 100
        )
    assert info.value.exit_code == 3


def test_quantized_brackets_skip_jumps_and_gaps():
    scan = [
        (0.0, 0.9 * TWO_PI),
        (1.0, 1.1 * TWO_PI),
        (2.0, None),
        (3.0, 1.2 * TWO_PI),
        (4.0, 1.2 * TWO_PI + 4.0),
    ]
    assert quantized_brackets(scan) == [(0.0, 1.0, 1)]
