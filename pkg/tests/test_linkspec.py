import math

import numpy as np
import pytest
from numpy.testing import assert_allclose
from pydantic import ValidationError

from errors import DomainError
from linkspec import build_spectrum, eigenfunction, link_quadrature, sphere_multiplicity, weyl_check
from schemas import CircleLink, CustomLink, SphereLink


def test_circle_levels(circle):
    spectrum = build_spectrum(circle, 2, 4)
    assert_allclose(spectrum.mu2, [0, 1, 4, 9])
    assert list(spectrum.multiplicity) == [1, 2, 2, 2]
    assert spectrum.volume == pytest.approx(2 * math.pi)
    assert_allclose(spectrum.nu_levels, [0, 1, 2, 3])
    assert spectrum.mode_count == 7


def test_short_circle_scales_eigenvalues():
    spectrum = build_spectrum(CircleLink(circumference=math.pi), 2, 3)
    assert_allclose(spectrum.mu2, [0, 4, 16])


def test_sphere_levels(sphere):
    spectrum = build_spectrum(sphere, 3, 4)
    assert_allclose(spectrum.mu2, [0, 2, 6, 12])
    assert list(spectrum.multiplicity) == [1, 3, 5, 7]
    assert spectrum.volume == pytest.approx(4 * math.pi)
    assert_allclose(spectrum.nu_levels, [0.5, 1.5, 2.5, 3.5])


def test_three_sphere_multiplicities():
    assert [sphere_multiplicity(l, 3) for l in range(4)] == [1, 4, 9, 16]
    spectrum = build_spectrum(SphereLink(dim=3), 4, 3)
    assert spectrum.volume == pytest.approx(2 * math.pi**2)
    assert_allclose(spectrum.nu_levels, [1, 2, 3])


def test_flattened_modes(sphere):
    spectrum = build_spectrum(sphere, 3, 3)
    assert spectrum.mode_count == 9
    assert spectrum.nu(0) == 0.5
    assert spectrum.nu(3) == 1.5
    assert spectrum.nu(4) == 2.5
    with pytest.raises(DomainError):
        spectrum.nu(9)


def test_geometry_mismatch(circle, sphere):
    with pytest.raises(DomainError):
        build_spectrum(circle, 3, 4)
    with pytest.raises(DomainError):
        build_spectrum(sphere, 4, 4)
    with pytest.raises(DomainError):
        build_spectrum(sphere, 3, 0)


def test_custom_ladder():
    link = CustomLink(levels=[(0.0, 1), (2.0, 3), (6.0, 5)], volume=4 * math.pi)
    spectrum = build_spectrum(link, 3, 5)
    assert spectrum.levels == 3
    assert_allclose(spectrum.nu_levels, [0.5, 1.5, 2.5])


@pytest.mark.parametrize(
    "levels",
    [
        [(1.0, 1)],
        [(0.0, 1), (3.0, 2), (2.0, 1)],
        [(0.0, 2)],
        [(0.0, 1), (1.0, 0)],
    ],
)
def test_custom_ladder_validation(levels):
    with pytest.raises(ValidationError):
        CustomLink(levels=levels, volume=1.0)


def test_circle_eigenfunctions_are_orthonormal(circle):
    points, weights = link_quadrature(circle, 16)
    basis = np.array([eigenfunction(circle, j, points) for j in range(7)])
    assert_allclose((basis * weights) @ basis.T, np.eye(7), atol=1e-12)


def test_sphere_harmonics_are_orthonormal(sphere):
    points, weights = link_quadrature(sphere, 12)
    basis = np.array([eigenfunction(sphere, j, points) for j in range(16)])
    assert_allclose((basis * weights) @ basis.T, np.eye(16), atol=1e-12)


def test_addition_theorem(sphere):
    point = np.array([0.7, 1.1])
    for ell in range(6):
        total = sum(eigenfunction(sphere, j, point) ** 2 for j in range(ell * ell, (ell + 1) ** 2))
        assert total == pytest.approx((2 * ell + 1) / (4 * math.pi), rel=1e-12)


def test_eigenfunction_shape_errors(sphere):
    with pytest.raises(DomainError):
        eigenfunction(sphere, 0, np.array([0.1, 0.2, 0.3]))
    with pytest.raises(DomainError):
        eigenfunction(SphereLink(dim=3), 0, np.zeros((1, 3)))


def test_weyl_exponent(sphere):
    assert weyl_check(build_spectrum(sphere, 3, 60)) == pytest.approx(0.5, abs=0.05)
    assert weyl_check(build_spectrum(CircleLink(), 2, 60)) == pytest.approx(1.0, abs=0.05)


def test_weyl_needs_enough_levels(sphere):
    with pytest.raises(DomainError):
        weyl_check(build_spectrum(sphere, 3, 10))
