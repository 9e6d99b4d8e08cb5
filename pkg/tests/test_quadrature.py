import math

import numpy as np
import pytest

from principal_forge.quadrature import (
    grid,
    periodic_spline,
    periodic_trapezoid,
    cumulative_periodic,
    spectral_derivative,
)


@pytest.mark.parametrize("length", [2 * math.pi, 3.7])
def test_periodic_trapezoid_is_exact_for_trigonometric_polynomials(length: float):
    s = grid(length, 64)
    omega = 2 * math.pi / length
    values = np.cos(3 * omega * s) ** 2 + np.sin(omega * s)
    assert periodic_trapezoid(values, length) == pytest.approx(length / 2, abs=1e-13)


def test_cumulative_periodic_keeps_the_mean_drift():
    length = 5.0
    s = grid(length, 128)
    omega = 2 * math.pi / length
    values = 0.5 + np.cos(2 * omega * s)
    expected = 0.5 * s + np.sin(2 * omega * s) / (2 * omega)
    np.testing.assert_allclose(
        cumulative_periodic(values, length), expected, atol=1e-12
    )


def test_spectral_derivative_of_vector_samples():
    length = 2 * math.pi
    s = grid(length, 64)
    points = np.stack([np.cos(s), np.sin(2 * s), np.cos(3 * s)], axis=-1)
    expected = np.stack([-np.sin(s), 2 * np.cos(2 * s), -3 * np.sin(3 * s)], axis=-1)
    np.testing.assert_allclose(
        spectral_derivative(points, length), expected, atol=1e-11
    )

    second = spectral_derivative(points[:, 2], length, order=2)
    np.testing.assert_allclose(second, -9 * np.cos(3 * s), atol=1e-10)


def test_periodic_spline_interpolates_and_wraps():
    length = 2.0
    s = grid(length, 128)
    values = np.sin(math.pi * s)
    spline = periodic_spline(values, length)

    np.testing.assert_allclose(spline(s), values, atol=1e-12)
    assert float(spline(length)) == pytest.approx(float(spline(0.0)), abs=1e-12)

    fine = np.linspace(0.0, length, 1001)
    np.testing.assert_allclose(spline(fine), np.sin(math.pi * fine), atol=1e-7)
    np.testing.assert_allclose(
        spline(fine, 1), math.pi * np.cos(math.pi * fine), atol=1e-5
    )
