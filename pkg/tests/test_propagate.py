import math

import mpmath
import numpy as np
import pytest
from numpy.testing import assert_allclose

from errors import DomainError, QuadratureToleranceError
from freeres import ModeFunction, build_grid
from linkspec import build_spectrum, link_quadrature
from potentials import load_potential
from propagate import (
    ModePropagator,
    cone_free_kernel,
    euclidean_free_kernel,
    full_cone_propagate,
    gaussian_bump,
    heat_quadrature_check,
    mode_propagate,
    resolvable_band,
    s_operator_entry,
    s_operator_limit,
    s_operator_norm,
    weber_apply,
    weber_mode_kernel,
)
from schemas import CustomLink, PropagatorRequest

from conftest import relative_gap

R_OUT = np.linspace(0.1, 10.0, 16)


@pytest.mark.parametrize("nu", [0.5, 2.0])
def test_propagator_matches_weber(propagation_grid, bump, nu):
    propagator = ModePropagator(propagation_grid, nu, bump, r_out=R_OUT)
    for t in (0.5, 2.0):
        assert relative_gap(propagator.evaluate(t), weber_apply(3, nu, t, R_OUT, bump)) < 1e-6


def test_finer_oscillation_panels_agree(propagation_grid, bump):
    coarse = ModePropagator(propagation_grid, 1.5, bump, r_out=R_OUT).evaluate(2.0)
    fine = ModePropagator(propagation_grid, 1.5, bump, r_out=R_OUT, oscillation_fraction=0.5).evaluate(2.0)
    assert relative_gap(coarse, fine) < 1e-7


def test_backward_evolution_is_conjugate(propagation_grid, bump):
    propagator = ModePropagator(propagation_grid, 0.5, bump, r_out=R_OUT)
    assert_allclose(propagator.evaluate(-1.0), np.conj(propagator.evaluate(1.0)), rtol=1e-12)


def test_propagator_arguments(propagation_grid, bump):
    propagator = ModePropagator(propagation_grid, 0.5, bump, r_out=R_OUT)
    with pytest.raises(DomainError):
        propagator.evaluate(0.0)
    with pytest.raises(DomainError):
        ModePropagator(propagation_grid, 0.5, bump, tolerance=0.1)
    with pytest.raises(QuadratureToleranceError):
        ModePropagator(propagation_grid, 0.5, bump, r_out=R_OUT, lam_cap=1.0)


def test_mode_propagate_on_grid(propagation_grid, bump):
    result = mode_propagate(PropagatorRequest(t=1.0, nu=0.5), bump)
    assert isinstance(result, ModeFunction)
    assert relative_gap(result.values, weber_apply(3, 0.5, 1.0, propagation_grid.nodes, bump)) < 1e-6


def test_zero_potential_propagates_freely(propagation_grid, bump):
    zero = load_potential("zero", grid=propagation_grid)
    free = mode_propagate(PropagatorRequest(t=1.0, nu=0.5), bump, R_OUT)
    same = mode_propagate(PropagatorRequest(t=1.0, nu=0.5, potential=zero), bump, R_OUT)
    assert_allclose(same, free)


@pytest.mark.slow
def test_perturbed_propagation_is_linear_in_weak_coupling(propagation_grid, bump):
    r_out = np.linspace(0.5, 6.0, 8)
    free = ModePropagator(propagation_grid, 0.5, bump, r_out=r_out).evaluate(1.0)

    def shift(a):
        v = load_potential("gaussian", a=a, w=1.0, sigma=3.0, grid=propagation_grid)
        return np.linalg.norm(ModePropagator(propagation_grid, 0.5, bump, v, r_out).evaluate(1.0) - free)

    assert shift(0.1) / shift(0.05) == pytest.approx(2.0, rel=0.1)


def test_weber_kernel_is_the_continued_heat_kernel():
    n, nu, t, r1, r2 = 3, 1.5, 0.7, 1.2, 2.1
    s = -1j * t
    delta = 0.5 * (n - 2)
    expected = (
        (1 / (2 * s)) * (r1 * r2) ** (-delta) * mpmath.exp(-(r1**2 + r2**2) / (4 * s)) * mpmath.besseli(nu, r1 * r2 / (2 * s))
    )
    assert complex(weber_mode_kernel(n, nu, t, r1, r2)) == pytest.approx(complex(expected), rel=1e-12)


def test_weber_kernel_domain():
    with pytest.raises(DomainError):
        weber_mode_kernel(3, 0.5, 0.0, 1.0, 1.0)
    with pytest.raises(DomainError):
        weber_mode_kernel(3, 0.5, 1.0, 0.0, 1.0)


@pytest.mark.parametrize("n, nu, s, r1, r2", [(3, 0.5, 0.5, 1.0, 2.0), (3, 3.5, 0.5, 1.0, 2.0), (2, 0.0, 0.3, 0.5, 1.5)])
def test_heat_kernel_closed_form(n, nu, s, r1, r2):
    assert heat_quadrature_check(n, nu, s, r1, r2) < 1e-8


def test_mode_sum_recovers_euclidean_kernel(sphere):
    spectrum = build_spectrum(sphere, 3, 40)
    theta = np.array([0.7, 1.1])
    for r1, r2 in ((1.0, 1.5), (0.3, 1.85)):
        cone = cone_free_kernel(spectrum, 1.0, r1, r2, theta, theta)
        flat = complex(euclidean_free_kernel(3, 1.0, abs(r1 - r2)))
        assert abs(cone - flat) <= 1e-10 * abs(flat)


def test_s_operator_limit(circle, sphere):
    circle_spectrum = build_spectrum(circle, 2, 40)
    assert s_operator_limit(circle_spectrum) == pytest.approx(1 / (2 * math.pi))
    value, tail = s_operator_entry(1e-3, circle_spectrum, 0.3, 0.3)
    assert abs(value - s_operator_limit(circle_spectrum)) <= 1e-3 * (1 + 1e-6) * abs(s_operator_limit(circle_spectrum))
    assert 0.0 <= tail < 1e-12

    sphere_spectrum = build_spectrum(sphere, 3, 30)
    limit = s_operator_limit(sphere_spectrum)
    assert abs(limit) == pytest.approx(2**-0.5 / (math.gamma(1.5) * 4 * math.pi))
    theta = np.array([0.7, 1.1])
    value, _ = s_operator_entry(1e-3, sphere_spectrum, theta, theta)
    assert abs(value - limit) <= 1e-3 * (1 + 1e-6) * abs(limit)


def test_s_operator_norm_is_bounded(circle, sphere):
    for spectrum in (build_spectrum(circle, 2, 20), build_spectrum(sphere, 3, 20)):
        assert max(s_operator_norm(x, spectrum) for x in np.logspace(-3, 3, 13)) <= 1.0


def test_s_operator_needs_eigenfunctions():
    spectrum = build_spectrum(CustomLink(levels=[(0.0, 1), (2.0, 3)], volume=4 * math.pi), 3, 2)
    with pytest.raises(DomainError):
        s_operator_entry(0.1, spectrum, 0.0, 0.0)


def test_radial_data_stays_radial(propagation_grid, bump, sphere):
    spectrum = build_spectrum(sphere, 3, 2)
    theta = np.stack([np.linspace(0.1, 3.0, 5), np.zeros(5)], axis=-1)
    field = full_cone_propagate(spectrum, 1.0, {0: bump}, theta, R_OUT)
    assert_allclose(field.values, np.repeat(field.values[:, :1], 5, axis=1), rtol=1e-14)
    expected = weber_apply(3, 0.5, 1.0, R_OUT, bump) / math.sqrt(4 * math.pi)
    assert_allclose(field.values[:, 0], expected, rtol=1e-12)
    frame = field.to_frame()
    assert list(frame.columns) == ["r", "theta", "re", "im"]
    assert len(frame) == R_OUT.size * 5


def test_cone_propagation_needs_data(sphere):
    with pytest.raises(DomainError):
        full_cone_propagate(build_spectrum(sphere, 3, 2), 1.0, {}, np.zeros((1, 2)))


def test_gaussian_bump_is_truncated():
    profile = gaussian_bump(3.0, 0.5)
    assert_allclose(profile(np.array([3.0, 3.5, 6.5])), [1.0, math.exp(-1.0), 0.0])


class _AliasedAmplitude(ModePropagator):
    """Decays like exp(-lambda^2) until a growing floor takes over, as an aliased projection does."""

    floor = 1e-12

    def amplitude(self, lams):
        lams = np.asarray(lams, dtype=float)
        profile = np.exp(-(lams**2)) + self.floor * lams**6
        return np.repeat(profile[:, None], self.r_out.size, axis=1).astype(complex)


class _FlatAmplitude(_AliasedAmplitude):
    floor = 0.0

    def amplitude(self, lams):
        return np.ones((np.size(lams), self.r_out.size), dtype=complex)


def test_resolvable_band(propagation_grid):
    assert resolvable_band(propagation_grid, 7.2) == pytest.approx(math.pi * 16 / 3.0)
    assert resolvable_band(build_grid(3, 12.0, 512), 7.2) == pytest.approx(math.pi * 16)
    assert resolvable_band(propagation_grid, 0.01) > resolvable_band(propagation_grid, 7.2)


def test_aliased_tail_is_cut_at_its_trough(propagation_grid, bump):
    propagator = _AliasedAmplitude(propagation_grid, 0.5, bump, r_out=R_OUT, lam_cap=8.0)
    assert 4.0 < propagator.panels[-1].hi < 5.0
    assert propagator.tolerance < propagator.tail_estimate < 1e-6
    assert np.all(np.isfinite(propagator.evaluate(1.0)))


def test_unresolved_amplitude_raises_at_the_cap(propagation_grid, bump):
    with pytest.raises(QuadratureToleranceError):
        _FlatAmplitude(propagation_grid, 0.5, bump, r_out=R_OUT, lam_cap=2.0)


def test_free_data_stays_inside_the_band(propagation_grid, bump):
    propagator = ModePropagator(propagation_grid, 0.5, bump, r_out=R_OUT)
    assert propagator.tail_estimate == 0.0
    assert propagator.panels[-1].hi < propagator.band


@pytest.mark.slow
def test_perturbed_propagation_on_a_coarse_grid_finishes(propagation_grid, bump):
    gaussian = load_potential("gaussian", a=0.5, w=1.0, sigma=3.0, grid=propagation_grid)
    coarse = ModePropagator(propagation_grid, 0.5, bump, gaussian, R_OUT)
    assert coarse.panels[-1].hi <= coarse.band
    assert coarse.tail_estimate < 1e-4

    fine_grid = build_grid(3, 12.0, 512)
    fine_data = ModeFunction.from_function(fine_grid, gaussian_bump(3.0, 0.7))
    fine_potential = load_potential("gaussian", a=0.5, w=1.0, sigma=3.0, grid=fine_grid)
    fine = ModePropagator(fine_grid, 0.5, fine_data, fine_potential, R_OUT, tolerance=1e-6)
    assert relative_gap(coarse.evaluate(1.0), fine.evaluate(1.0)) < 1e-3


@pytest.mark.parametrize("nu", [0.5, 2.5])
@pytest.mark.parametrize("t", [0.25, 0.5])
def test_free_mode_evolution_is_an_isometry(nu, t):
    grid = build_grid(3, 12.0, 512)
    f = ModeFunction.from_function(grid, gaussian_bump(3.0, 0.7))
    u = mode_propagate(PropagatorRequest(t=t, nu=nu), f)
    assert u.norm() == pytest.approx(f.norm(), rel=1e-7)


@pytest.mark.parametrize("t", [0.25, 0.5])
def test_full_cone_evolution_conserves_the_norm(sphere, circle, t):
    for link, n, order in ((sphere, 3, 8), (circle, 2, 16)):
        spectrum = build_spectrum(link, n, 4)
        grid = build_grid(n, 12.0, 512)
        coefficients = {j: ModeFunction.from_function(grid, gaussian_bump(2.5 + 0.5 * j, 0.7)) for j in range(3)}
        points, weights = link_quadrature(link, order)
        field = full_cone_propagate(spectrum, t, coefficients, points)
        expected = math.sqrt(sum(f.norm() ** 2 for f in coefficients.values()))
        assert field.l2_norm(grid.weights, weights) == pytest.approx(expected, rel=1e-7)
