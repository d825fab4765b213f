"""
linkspec.py

Spectral data of the link (X, h) of the cone C(X):

- `build_spectrum`: eigenvalue levels mu^2, multiplicities, volume and shifted Bessel orders
  nu = sqrt(mu^2 + ((n-2)/2)^2) for circles, round spheres and custom ladders.
- `eigenfunction`: L^2-normalized eigenfunctions of the circle and of S^1, S^2 (real harmonics).
- `link_quadrature`: native quadrature on the built-in links.
- `weyl_check`: fitted growth exponent of mu_j against the flattened mode index j.

Modes are flattened: each level is repeated according to its multiplicity and indexed from j = 0.
`j_max` counts distinct levels.
"""

# -------------------- IMPORTS --------------------
# Standard Library
import math
import logging
from dataclasses import dataclass
from functools import cached_property

# Third-Party Libraries
import numpy as np
from scipy import special

# Internal Modules
from errors import DomainError
from schemas import CircleLink, CustomLink, LinkSpec, SphereLink
from utils import gauss_legendre, loglog_fit

logger = logging.getLogger(__name__)


# -------------------- SPECTRUM --------------------
@dataclass(frozen=True, eq=False)
class LinkSpectrum:
    n: int
    link: LinkSpec
    mu2: np.ndarray
    multiplicity: np.ndarray
    volume: float

    @property
    def delta(self) -> float:
        """(n - 2) / 2, the smallest admissible order."""
        return 0.5 * (self.n - 2)

    @property
    def levels(self) -> int:
        return int(self.mu2.size)

    @cached_property
    def nu_levels(self) -> np.ndarray:
        return np.sqrt(self.mu2 + self.delta**2)

    @cached_property
    def mode_level(self) -> np.ndarray:
        return np.repeat(np.arange(self.levels), self.multiplicity)

    @property
    def mode_count(self) -> int:
        return int(self.multiplicity.sum())

    @property
    def mode_mu2(self) -> np.ndarray:
        return self.mu2[self.mode_level]

    @property
    def mode_nu(self) -> np.ndarray:
        return self.nu_levels[self.mode_level]

    def nu(self, j: int) -> float:
        """Bessel order of flattened mode j."""
        if not 0 <= j < self.mode_count:
            raise DomainError(f"mode index {j} outside [0, {self.mode_count})")
        return float(self.mode_nu[j])


def sphere_multiplicity(ell: int, d: int) -> int:
    """Dimension of degree-ell spherical harmonics on S^d."""
    if ell == 0:
        return 1
    return (2 * ell + d - 1) * math.factorial(ell + d - 2) // (math.factorial(ell) * math.factorial(d - 1))


def sphere_volume(d: int) -> float:
    return 2.0 * math.pi ** (0.5 * (d + 1)) / math.gamma(0.5 * (d + 1))


def build_spectrum(link: LinkSpec, n: int, j_max: int) -> LinkSpectrum:
    """
    Build the first `j_max` eigenvalue levels of the link Laplacian.

    Args:
        link (LinkSpec): Circle, unit sphere or custom ladder.
        n (int): Cone dimension (n >= 2).
        j_max (int): Number of distinct levels to keep.

    Returns:
        LinkSpectrum: Immutable spectral data.
    """
    if n < 2:
        raise DomainError("cone dimension n must be >= 2")
    if j_max < 1:
        raise DomainError("j_max must be >= 1")

    if isinstance(link, CircleLink):
        if n != 2:
            raise DomainError("invalid geometry: a circle link requires n = 2")
        k = np.arange(j_max)
        mu2 = (2.0 * math.pi * k / link.circumference) ** 2
        mult = np.where(k == 0, 1, 2)
        volume = link.circumference
    elif isinstance(link, SphereLink):
        if n != link.dim + 1:
            raise DomainError(f"invalid geometry: S^{link.dim} requires n = {link.dim + 1}")
        ell = np.arange(j_max)
        mu2 = (ell * (ell + link.dim - 1)).astype(float)
        mult = np.array([sphere_multiplicity(int(l), link.dim) for l in ell])
        volume = sphere_volume(link.dim)
    elif isinstance(link, CustomLink):
        levels = link.levels[:j_max]
        if len(levels) < j_max:
            logger.warning("custom spectrum has %d levels, fewer than j_max=%d", len(levels), j_max)
        mu2 = np.array([level[0] for level in levels], dtype=float)
        mult = np.array([level[1] for level in levels], dtype=int)
        volume = link.volume
    else:
        raise DomainError(f"unsupported link {link!r}")

    mu2.setflags(write=False)
    mult = np.asarray(mult, dtype=int)
    mult.setflags(write=False)
    return LinkSpectrum(n=n, link=link, mu2=mu2, multiplicity=mult, volume=float(volume))


# -------------------- EIGENFUNCTIONS --------------------
def _fourier_mode(j: int, theta: np.ndarray, length: float) -> np.ndarray:
    if j == 0:
        return np.full(theta.shape, 1.0 / math.sqrt(length))
    k = (j + 1) // 2
    phase = 2.0 * math.pi * k * theta / length
    wave = np.cos(phase) if j % 2 == 1 else np.sin(phase)
    return math.sqrt(2.0 / length) * wave


def _real_harmonic(j: int, theta: np.ndarray) -> np.ndarray:
    """Real spherical harmonic; flattened j -> (ell, m=0, then cos/sin pairs for m=1..ell)."""
    ell = math.isqrt(j)
    offset = j - ell * ell
    m = (offset + 1) // 2
    polar, azimuth = theta[..., 0], theta[..., 1]
    norm = math.sqrt((2 * ell + 1) / (4.0 * math.pi) * math.exp(special.gammaln(ell - m + 1) - special.gammaln(ell + m + 1)))
    radial = norm * special.lpmv(m, ell, np.cos(polar))
    if m == 0:
        return radial
    angular = np.cos(m * azimuth) if offset % 2 == 1 else np.sin(m * azimuth)
    return math.sqrt(2.0) * radial * angular


def eigenfunction(link: LinkSpec, j: int, theta) -> np.ndarray:
    """
    L^2-normalized eigenfunction phi_j evaluated at link points.

    Circle points are angles in [0, L); S^2 points carry a trailing axis (polar, azimuth).
    Eigenfunctions are real, so conj(phi_j) = phi_j.
    """
    if j < 0:
        raise DomainError("mode index must be >= 0")
    theta = np.asarray(theta, dtype=float)
    if isinstance(link, CircleLink):
        return _fourier_mode(j, theta, link.circumference)
    if isinstance(link, SphereLink) and link.dim == 1:
        return _fourier_mode(j, theta, 2.0 * math.pi)
    if isinstance(link, SphereLink) and link.dim == 2:
        if theta.shape[-1:] != (2,):
            raise DomainError("S^2 points need a trailing (polar, azimuth) axis")
        return _real_harmonic(j, theta)
    raise DomainError(f"eigenfunctions are not available for {link!r}")


def link_quadrature(link: LinkSpec, order: int) -> tuple[np.ndarray, np.ndarray]:
    """Points and weights integrating products of low-order eigenfunctions exactly."""
    if isinstance(link, CircleLink) or (isinstance(link, SphereLink) and link.dim == 1):
        length = link.circumference if isinstance(link, CircleLink) else 2.0 * math.pi
        points = length * np.arange(order) / order
        return points, np.full(order, length / order)
    if isinstance(link, SphereLink) and link.dim == 2:
        x, w = gauss_legendre(order)
        azimuth = 2.0 * math.pi * np.arange(2 * order) / (2 * order)
        polar = np.arccos(x)
        points = np.stack(np.meshgrid(polar, azimuth, indexing="ij"), axis=-1).reshape(-1, 2)
        weights = np.outer(w, np.full(azimuth.size, 2.0 * math.pi / azimuth.size)).ravel()
        return points, weights
    raise DomainError(f"no native quadrature for {link!r}")


# -------------------- WEYL LAW --------------------
def weyl_check(spectrum: LinkSpectrum) -> float:
    """Fitted exponent of mu_j against j over the upper half of the flattened modes."""
    if spectrum.levels < 50:
        raise DomainError("weyl_check needs at least 50 eigenvalue levels")
    mu = np.sqrt(spectrum.mode_mu2[1:])
    index = np.arange(1, spectrum.mode_count)
    upper = index >= spectrum.mode_count // 2
    fit = loglog_fit(index[upper], mu[upper])
    logger.debug("Weyl fit: slope %.4f, residual %.2e", fit.slope, fit.residual)
    return fit.slope
