import math

import numpy as np
import pytest
from numpy.testing import assert_allclose

from errors import DomainError
from freeres import (
    ModeFunction,
    apply_kernel,
    build_grid,
    free_kernel,
    free_kernel_rows,
    green_residual,
    identity_kernel,
    im_free_kernel,
    mollifier,
    plancherel_defect,
    spectral_density,
    static_kernel,
    weighted_operator,
)
from linkspec import build_spectrum
from propagate import gaussian_bump

from conftest import relative_gap


def test_grid_integrates_the_measure():
    for n in (2, 3, 4):
        grid = build_grid(n, 10.0, 128)
        assert grid.weights.sum() == pytest.approx(10.0**n / n, rel=1e-13)
        assert np.all(np.diff(grid.nodes) > 0)
        assert grid.nodes[0] > 0 and grid.nodes[-1] < 10.0


def test_uniform_grid():
    grid = build_grid(3, 5.0, 64, scheme="uniform")
    assert_allclose(grid.edges, np.linspace(0, 5, 5))
    assert grid.size == 64


def test_grid_rejects_bad_parameters():
    with pytest.raises(DomainError):
        build_grid(3, 10.0, 8)
    with pytest.raises(DomainError):
        build_grid(3, -1.0, 64)
    with pytest.raises(DomainError):
        build_grid(3, 10.0, 64, scheme="chebyshev")


def test_refined_grid_doubles_nodes(small_grid):
    finer = small_grid.refined()
    assert finer.size == 2 * small_grid.size
    assert finer.r_max == small_grid.r_max


def test_outgoing_kernel_closed_form(small_grid):
    lam = 1.3
    kernel = free_kernel(small_grid, 0.5, lam, "+").values
    r = small_grid.nodes
    lo, hi = np.minimum.outer(r, r), np.maximum.outer(r, r)
    expected = np.sin(lam * lo) * np.exp(1j * lam * hi) / (lam * np.outer(r, r))
    assert relative_gap(kernel, expected) < 1e-12


def test_kernel_is_symmetric(small_grid):
    values = free_kernel(small_grid, 2.5, 3.0, "+").values
    assert_allclose(values, values.T, rtol=1e-14)


def test_imaginary_part_is_the_jump(small_grid):
    plus = free_kernel(small_grid, 1.5, 2.0, "+").values
    minus = free_kernel(small_grid, 1.5, 2.0, "-").values
    im = im_free_kernel(small_grid, 1.5, 2.0).values
    assert relative_gap((plus - minus) / 2j, im) < 1e-12
    assert_allclose(plus, np.conj(minus), rtol=1e-14)


def test_negative_lambda_reflection(small_grid):
    for k in (0, 1):
        lhs = free_kernel(small_grid, 1.5, -2.0, "+", k).values
        rhs = (-1) ** k * free_kernel(small_grid, 1.5, 2.0, "-", k).values
        assert_allclose(lhs, rhs, rtol=1e-14)
    im_neg = im_free_kernel(small_grid, 1.5, -2.0).values
    assert_allclose(im_neg, -im_free_kernel(small_grid, 1.5, 2.0).values, rtol=1e-14)


def test_kernel_rejects_threshold_and_high_derivatives(small_grid):
    with pytest.raises(DomainError):
        free_kernel(small_grid, 0.5, 0.0)
    with pytest.raises(DomainError):
        free_kernel(small_grid, 0.5, 1.0, k=9)
    with pytest.raises(DomainError):
        free_kernel(small_grid, 0.5, 1.0, sign="im")


@pytest.mark.parametrize("k", [1, 2])
def test_lambda_derivative_by_finite_difference(small_grid, k):
    lam, h = 2.0, 1e-4
    exact = free_kernel(small_grid, 1.5, lam, "+", k).values
    upper = free_kernel(small_grid, 1.5, lam + h, "+", k - 1).values
    below = free_kernel(small_grid, 1.5, lam - h, "+", k - 1).values
    assert relative_gap((upper - below) / (2 * h), exact) < 1e-6


def test_rows_agree_with_matrix(small_grid):
    rows = free_kernel_rows(small_grid, 2.5, 1.7, small_grid.nodes[::16])
    assert_allclose(rows, free_kernel(small_grid, 2.5, 1.7).values[::16], rtol=1e-13)


def test_fast_application_matches_dense(small_grid):
    f = ModeFunction.from_function(small_grid, gaussian_bump(3.0, 0.7))
    kernel = free_kernel(small_grid, 1.5, 2.0, "+")
    fast = apply_kernel(kernel, f, "fast").values
    dense = apply_kernel(kernel, f, "dense").values
    assert relative_gap(fast, dense) < 1e-12


def test_identity_kernel_reproduces_data(small_grid):
    f = ModeFunction.from_function(small_grid, gaussian_bump(3.0, 0.7))
    assert_allclose(apply_kernel(identity_kernel(small_grid), f).values, f.values, rtol=1e-13)


def test_application_requires_matching_grid(small_grid):
    other = build_grid(3, 10.0, 256)
    f = ModeFunction.from_function(other, gaussian_bump(3.0, 0.7))
    with pytest.raises(DomainError):
        apply_kernel(free_kernel(small_grid, 0.5, 1.0), f)


def test_static_kernel(small_grid):
    r = small_grid.nodes
    values = static_kernel(small_grid, 0.5).values
    assert_allclose(values, 1.0 / np.maximum.outer(r, r), rtol=1e-13)
    small_lambda = free_kernel(small_grid, 0.5, 1e-6).values
    assert relative_gap(small_lambda, values) < 1e-5
    with pytest.raises(DomainError):
        static_kernel(build_grid(2, 10.0, 64), 0.0)


def test_weighted_operator_scaling(small_grid):
    values = np.ones((small_grid.size, small_grid.size))
    weighted = weighted_operator(values, small_grid, 1.0, 2.0)
    expected = np.outer(small_grid.rho**-1 * small_grid.sqrt_weights, small_grid.rho**-2 * small_grid.sqrt_weights)
    assert_allclose(weighted, expected, rtol=1e-14)


def test_spectral_density_shares_levels(small_grid, sphere):
    spectrum = build_spectrum(sphere, 3, 3)
    densities = spectral_density(small_grid, spectrum, 2.0, [1, 2, 3, 0])
    assert densities[0] is densities[1] is densities[2]
    assert densities[3].nu == 0.5
    expected = im_free_kernel(small_grid, 1.5, 2.0).values * 2.0 / math.pi
    assert_allclose(densities[0].values, expected, rtol=1e-14)
    with pytest.raises(DomainError):
        spectral_density(small_grid, spectrum, -1.0, [0])


def test_plancherel(propagation_grid, bump, sphere):
    spectrum = build_spectrum(sphere, 3, 2)
    assert plancherel_defect(propagation_grid, spectrum, 0, bump) < 1e-3
    assert plancherel_defect(propagation_grid, spectrum, 2, bump) < 1e-3


def test_mollifier_support():
    r = np.array([0.5, 1.0, 2.5, 4.0, 5.0])
    values = mollifier(r, 1.0, 4.0)
    assert values[0] == values[1] == values[3] == values[4] == 0.0
    assert values[2] == pytest.approx(math.exp(-1.0))


@pytest.mark.parametrize("n, nu", [(2, 0.0), (2, 1.0), (3, 0.5), (3, 2.5), (4, 1.0), (4, 3.0)])
@pytest.mark.parametrize("lam", [0.5, 2.0, 10.0])
def test_green_residual(n, nu, lam):
    assert green_residual(n, nu, lam) < 1e-3


def test_green_residual_support_must_avoid_origin():
    with pytest.raises(DomainError):
        green_residual(3, 0.5, 1.0, support=(0.2, 2.0))


def test_split_sums_on_a_midpoint_grid():
    grid = build_grid(3, 5.0, 200, "uniform", order=1)
    assert_allclose(np.diff(grid.nodes), 0.025)
    kernel = free_kernel(grid, 1.5, 2.0)
    f = ModeFunction.from_function(grid, lambda r: mollifier(r, 1.0, 4.0))
    fast = apply_kernel(kernel, f, "fast").values
    dense = apply_kernel(kernel, f, "dense").values
    assert_allclose(fast, dense, rtol=1e-12, atol=1e-14 * np.abs(dense).max())


def test_green_residual_shrinks_with_the_mesh():
    assert green_residual(3, 1.5, 2.0, step=0.01) < green_residual(3, 1.5, 2.0, step=0.03) < 1e-2
