import math

import numpy as np
import pytest

from principal_forge.curve import FrenetCurve
from principal_forge.quadrature import grid
from principal_forge.theta import ThetaField, solve_theta
from principal_forge.exception import OutOfStrip, IdenticallyZero
from principal_forge.germ import (
    build_mesh,
    build_germ,
    surface_jet,
    umbilic_roots,
    evaluate_germ,
    zero_a_profiles,
    random_profiles,
    cycle_curvatures,
    default_profiles,
    umbilic_roots_of,
    fundamental_forms,
    forms_series_check,
    principal_line_defect,
)


@pytest.fixture(scope="module")
def spherical_theta(spherical: FrenetCurve) -> ThetaField:
    return solve_theta(spherical, 0.4)


def test_default_profiles_keep_curvatures_apart(
    spherical: FrenetCurve, spherical_theta: ThetaField
):
    profiles = default_profiles(spherical, spherical_theta)
    cycle = cycle_curvatures(spherical, spherical_theta, profiles)

    np.testing.assert_allclose(cycle.gap, spherical.curvature, atol=1e-12)
    assert profiles.eps == 0.0
    assert profiles.describe()["C"] == {"mode": "zero"}


def test_germ_contains_the_curve(spherical: FrenetCurve, spherical_theta: ThetaField):
    germ = build_germ(spherical, spherical_theta)
    s = spherical.samples

    np.testing.assert_allclose(
        evaluate_germ(germ, s, np.zeros_like(s)), spherical.position, atol=1e-12
    )
    assert germ.v_max == pytest.approx(0.2 / spherical.curvature.max())


def test_forms_on_the_curve(spherical: FrenetCurve, spherical_theta: ThetaField):
    germ = build_germ(spherical, spherical_theta)
    s = spherical.samples[::16]
    forms = fundamental_forms(germ, s, np.zeros_like(s))

    k = spherical.curvature[::16]
    sin = np.sin(spherical_theta.values[::16])
    A = germ.profiles.A.values[::16]

    np.testing.assert_allclose(forms.E, 1.0, atol=1e-12)
    np.testing.assert_allclose(forms.F, 0.0, atol=1e-12)
    np.testing.assert_allclose(forms.G, 1.0, atol=1e-12)
    np.testing.assert_allclose(forms.gauss_curvature, -k * sin * A, atol=1e-9)

    k1, k2 = forms.principal_curvatures
    np.testing.assert_allclose(k1, np.minimum(-k * sin, A), atol=1e-9)
    np.testing.assert_allclose(k2, np.maximum(-k * sin, A), atol=1e-9)


@pytest.mark.parametrize("randomized", [False, True])
def test_forms_match_series_expansion(
    spherical: FrenetCurve, spherical_theta: ThetaField, randomized: bool
):
    profiles = default_profiles(spherical, spherical_theta)
    if randomized:
        profiles = random_profiles(profiles, spherical, seed=7)
    germ = build_germ(spherical, spherical_theta, profiles)

    residual = forms_series_check(germ, spherical.samples[::8])

    assert set(residual.slopes) == {"E", "F", "G", "e", "f", "g", "Q"}
    assert residual.max() < 1e-6


@pytest.mark.parametrize("name", ["spherical", "torus"])
def test_curve_is_a_principal_line(request, name: str):
    curve = request.getfixturevalue(name)
    germ = build_germ(curve, solve_theta(curve, 0.3))
    assert principal_line_defect(germ) < 1e-9


def test_random_profiles_leave_the_curve_alone(
    spherical: FrenetCurve, spherical_theta: ThetaField
):
    profiles = default_profiles(spherical, spherical_theta)
    randomized = random_profiles(profiles, spherical, seed=3)

    assert randomized.describe()["seed"] == 3
    assert randomized.describe()["C"]["mode"] == "harmonic"
    assert random_profiles(profiles, spherical, seed=3).describe() == (
        randomized.describe()
    )
    assert random_profiles(profiles, spherical, seed=4).describe() != (
        randomized.describe()
    )

    before = cycle_curvatures(spherical, spherical_theta, profiles)
    after = cycle_curvatures(spherical, spherical_theta, randomized)
    np.testing.assert_allclose(after.k2, before.k2)

    s = spherical.samples
    germ = build_germ(spherical, spherical_theta, randomized)
    np.testing.assert_allclose(
        surface_jet(germ, s, np.zeros_like(s)).point, spherical.position, atol=1e-12
    )


def test_umbilic_roots(spherical: FrenetCurve):
    theta = solve_theta(spherical, 0.0)
    profiles = default_profiles(spherical, theta)

    assert umbilic_roots(build_germ(spherical, theta, profiles)) == []

    ruled = zero_a_profiles(profiles)
    roots = umbilic_roots_of(spherical, theta, ruled)
    assert 0.0 in roots
    for root in roots:
        assert 0 <= root < spherical.length
        value = spherical.local(np.array([root])).curvature[0] * math.sin(
            float(theta(root))
        )
        assert value == pytest.approx(0.0, abs=1e-8)


def test_whole_curve_umbilic(ellipse: FrenetCurve):
    theta = solve_theta(ellipse, 0.0)
    profiles = zero_a_profiles(default_profiles(ellipse, theta))

    with pytest.raises(IdenticallyZero) as info:
        umbilic_roots_of(ellipse, theta, profiles)
    assert info.value.exit_code == 6


def test_strip_bounds(spherical: FrenetCurve, spherical_theta: ThetaField):
    germ = build_germ(spherical, spherical_theta)

    with pytest.raises(OutOfStrip) as info:
        evaluate_germ(germ, [0.0], [1.5 * germ.v_max])
    assert info.value.exit_code == 9
    assert evaluate_germ(germ, [0.0], [germ.v_max]).shape == (1, 3)


def test_mesh_is_an_annulus(spherical: FrenetCurve, spherical_theta: ThetaField):
    germ = build_germ(spherical, spherical_theta)
    mesh = build_mesh(germ, 64, 5)

    assert mesh.vertices.shape == (64 * 5, 3)
    assert mesh.faces.shape == (64 * 4, 4)
    assert mesh.euler_characteristic() == 0
    assert mesh.seam_gap < 1e-9
    assert mesh.min_area_element > 0.5

    centre = mesh.vertices.reshape(64, 5, 3)[:, 2]
    np.testing.assert_allclose(
        centre, spherical.local(grid(spherical.length, 64)).position, atol=1e-10
    )


def test_mesh_closes_on_winding_curve(torus: FrenetCurve, torus_theta: ThetaField):
    mesh = build_mesh(build_germ(torus, torus_theta), 128, 3)

    assert mesh.seam_gap < 1e-6
    assert mesh.euler_characteristic() == 0


def test_mesh_resolution_floor(spherical: FrenetCurve, spherical_theta: ThetaField):
    with pytest.raises(ValueError):
        build_mesh(build_germ(spherical, spherical_theta), 2, 5)
