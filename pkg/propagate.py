"""
propagate.py

Schrodinger evolution e^{itH} P_c on one mode of the cone and on the full cone.

Functionality includes:
- Weber's closed form for the free mode kernel and its heat-kernel counterpart.
- `ModePropagator`: the spectral amplitude A(lambda; r) = x(r) <x, f> is sampled once on
  resolvent-scale lambda panels; each time t then integrates e^{it lambda^2} A lambda over
  sub-panels no wider than a fraction of pi / (2 |t| lambda) using barycentric interpolation.
- The S(x) operator on the link: truncated sum, x -> 0 limit and uniform norm.
- Mode-summed cone kernels, the Euclidean closed form and full-cone reconstruction.

Convention: u(t, r) = int_0^inf e^{it lambda^2} (2/pi) [Im K_V(lambda) W f](r) lambda dlambda,
which for V = 0 is the Weber kernel (i/2t)(r1 r2)^{-(n-2)/2} e^{(r1^2+r2^2)/(4it)} i^nu J_nu(r1 r2/2t).
"""

# -------------------- IMPORTS --------------------
# Standard Library
import math
import logging
from dataclasses import dataclass
from typing import Callable, Dict, List, Optional, Tuple

# Third-Party Libraries
import numpy as np
import pandas as pd
from scipy import integrate, special
from scipy.interpolate import BarycentricInterpolator

# Internal Modules
from errors import DomainError, NearResonanceError, QuadratureToleranceError
from freeres import ModeFunction, RadialGrid, mollifier
from linkspec import LinkSpectrum, build_spectrum, eigenfunction
from perturbres import RESONANCE_THRESHOLD, distorted_wave, distorted_wave_rows, fredholm_indicator
from schemas import CustomLink, DataConfig, PotentialSpec, PropagatorRequest
from specfun import i_power, radial_factor, scaled_values
from utils import composite_gauss, gauss_legendre, run_parallel

logger = logging.getLogger(__name__)

PANEL_ORDER = 16
QUIET_PANELS = 2
DEFAULT_LAMBDA_CAP = 400.0
BAND_FRACTION = 0.5
TAIL_LEVELS = 200


# -------------------- DATA --------------------
def gaussian_bump(center: float, width: float) -> Callable[[np.ndarray], np.ndarray]:
    """exp(-((r - center)/width)^2), truncated at six widths."""

    def profile(r: np.ndarray) -> np.ndarray:
        z = (np.asarray(r, dtype=float) - center) / width
        return np.where(np.abs(z) <= 6.0, np.exp(-z * z), 0.0)

    return profile


def mollifier_data(center: float, width: float) -> Callable[[np.ndarray], np.ndarray]:
    """C-infinity bump supported on [center - 2 width, center + 2 width]."""
    return lambda r: mollifier(r, center - 2.0 * width, center + 2.0 * width)


def make_data(config: DataConfig) -> Callable[[np.ndarray], np.ndarray]:
    if config.family == "gaussian_bump":
        return gaussian_bump(config.center, config.width)
    return mollifier_data(config.center, config.width)


def mode_frame(r: np.ndarray, values: np.ndarray) -> pd.DataFrame:
    return pd.DataFrame({"r": r, "re": np.real(values), "im": np.imag(values)})


# -------------------- CLOSED FORMS --------------------
def weber_mode_kernel(n: int, nu: float, t: float, r1, r2) -> np.ndarray:
    """Free mode kernel of e^{itH} at time t > 0 (without the link eigenfunctions)."""
    if t <= 0:
        raise DomainError("Weber's closed form is evaluated at t > 0")
    r1 = np.asarray(r1, dtype=float)
    r2 = np.asarray(r2, dtype=float)
    if np.any(r1 <= 0) or np.any(r2 <= 0):
        raise DomainError("radii must be positive")
    delta = 0.5 * (n - 2)
    x = r1 * r2 / (2.0 * t)
    bessel_part = (2.0 * t) ** (-delta) * scaled_values("J", nu, x, -delta)
    phase = np.exp((r1**2 + r2**2) / (4j * t))
    return (0.5j / t) * phase * i_power(nu) * bessel_part


def weber_apply(n: int, nu: float, t: float, r_out: np.ndarray, f: ModeFunction) -> np.ndarray:
    """(K_t f)(r) = sum_b K_t(r, s_b) w_b f(s_b) with the Weber kernel."""
    kernel = weber_mode_kernel(n, nu, t, np.asarray(r_out, dtype=float)[:, None], f.grid.nodes[None, :])
    return kernel @ (f.grid.weights * f.values)


def heat_mode_kernel(n: int, nu: float, s: float, r1, r2) -> np.ndarray:
    """int_0^inf e^{-s lambda^2} (r1 r2)^{-(n-2)/2} J_nu(lambda r1) J_nu(lambda r2) lambda dlambda."""
    if s <= 0:
        raise DomainError("heat parameter must be positive")
    r1 = np.asarray(r1, dtype=float)
    r2 = np.asarray(r2, dtype=float)
    delta = 0.5 * (n - 2)
    return (
        (0.5 / s)
        * (r1 * r2) ** (-delta)
        * np.exp(-((r1 - r2) ** 2) / (4.0 * s))
        * special.ive(nu, r1 * r2 / (2.0 * s))
    )


def heat_quadrature_check(n: int, nu: float, s: float, r1: float, r2: float) -> float:
    """Relative gap between `heat_mode_kernel` and adaptive quadrature of the defining integral."""
    delta = 0.5 * (n - 2)
    integrand = lambda lam: math.exp(-s * lam * lam) * special.jv(nu, lam * r1) * special.jv(nu, lam * r2) * lam
    upper = math.sqrt(45.0 / s)
    value, _ = integrate.quad(integrand, 0.0, upper, limit=500, epsabs=0.0, epsrel=1e-13)
    value *= (r1 * r2) ** (-delta)
    exact = float(heat_mode_kernel(n, nu, s, r1, r2))
    return abs(value - exact) / abs(exact)


def euclidean_free_kernel(n: int, t: float, distance) -> np.ndarray:
    """Kernel of e^{-it Delta} on R^n: i^{n/2} (4 pi t)^{-n/2} e^{-i |x-y|^2 / (4t)}."""
    if t <= 0:
        raise DomainError("t must be positive")
    d = np.asarray(distance, dtype=float)
    return i_power(0.5 * n) * (4.0 * math.pi * t) ** (-0.5 * n) * np.exp(-1j * d * d / (4.0 * t))


# -------------------- MODE PROPAGATOR --------------------
@dataclass(frozen=True)
class _Panel:
    lo: float
    hi: float
    nodes: np.ndarray
    values: np.ndarray
    interpolant: BarycentricInterpolator


def _reach(nodes: np.ndarray, values: np.ndarray) -> float:
    magnitude = np.abs(values)
    if not np.any(magnitude > 0):
        return 0.0
    return float(nodes[magnitude > 1e-14 * magnitude.max()].max())


def resolvable_band(grid: RadialGrid, support: float) -> float:
    """
    Largest lambda at which grid projections over (0, support] are still trusted.

    Half the Nyquist rate pi * order / width of the widest panel meeting the support.
    """
    edges = grid.edges
    widths = np.diff(edges)[edges[:-1] < max(support, edges[1])]
    return float(BAND_FRACTION * math.pi * grid.order / widths.max())


class ModePropagator:
    """
    Time-independent spectral amplitude of one mode, reusable for many t.

    Args:
        grid (RadialGrid): Radial grid carrying the data.
        nu (float): Bessel order of the mode.
        f (ModeFunction): Initial data.
        potential (PotentialSpec, optional): None or zero for free evolution.
        r_out (np.ndarray, optional): Output radii, default the grid nodes.
        tolerance (float): Relative size of lambda * A below which the spectrum is cut.
        gauss_order (int): Gauss points per oscillation sub-panel.
        oscillation_fraction (float): Sub-panel width as a fraction of pi / (2 |t| lambda).
        lam_cap (float): Largest lambda sampled; the grid's resolvable band lowers it further.

    Beyond the resolvable band the grid projection aliases and lambda * A grows again. If the
    amplitude has not dropped below `tolerance` by then, the spectrum is cut at the smallest
    panel after the peak; the cut is accepted when that tail is below sqrt(tolerance) and
    recorded in `tail_estimate`, otherwise QuadratureToleranceError is raised.
    """

    def __init__(
        self,
        grid: RadialGrid,
        nu: float,
        f: ModeFunction,
        potential: Optional[PotentialSpec] = None,
        r_out: Optional[np.ndarray] = None,
        tolerance: float = 1e-8,
        gauss_order: int = PANEL_ORDER,
        oscillation_fraction: float = 1.0,
        lam_cap: float = DEFAULT_LAMBDA_CAP,
    ) -> None:
        if not 0 < tolerance <= 1e-2:
            raise DomainError("quadrature tolerance must lie in (0, 1e-2]")
        self.grid = grid
        self.nu = nu
        self.f = f
        self.potential = None if potential is None or potential.is_zero else potential
        self.r_out = grid.nodes if r_out is None else np.asarray(r_out, dtype=float)
        self.tolerance = tolerance
        self.gauss_order = gauss_order
        self.oscillation_fraction = oscillation_fraction

        support = _reach(grid.nodes, f.values)
        if self.potential is not None:
            support = max(support, _reach(grid.nodes, self.potential(grid.nodes)))
        self.band = resolvable_band(grid, support)
        self.step = min(0.25, 2.0 / max(float(self.r_out.max()), support))
        self.tail_estimate = 0.0
        self.panels = self._sample(min(lam_cap, self.band))
        logger.debug(
            "mode nu=%g: %d amplitude panels of width %.3g up to lambda=%.3g (band %.3g)",
            nu, len(self.panels), self.step, self.panels[-1].hi, self.band,
        )

    def amplitude(self, lams: np.ndarray) -> np.ndarray:
        """A(lambda; r_out) with shape (len(lams), len(r_out))."""
        lams = np.asarray(lams, dtype=float)
        wf = self.grid.weights * self.f.values
        if self.potential is None:
            delta = self.grid.delta
            on_grid = radial_factor("J", self.nu, lams[:, None], self.grid.nodes[None, :], 0, delta)
            out = radial_factor("J", self.nu, lams[:, None], self.r_out[None, :], 0, delta)
            return out * (on_grid @ wf)[:, None]
        indicator = fredholm_indicator(self.grid, self.nu, float(lams[0]), self.potential)
        if indicator < RESONANCE_THRESHOLD:
            raise NearResonanceError(float(lams[0]), indicator, RESONANCE_THRESHOLD)
        rows = []
        for lam in lams:
            x = distorted_wave(self.grid, self.nu, lam, self.potential, check=False)[0]
            projection = np.conj(x) @ wf
            rows.append(distorted_wave_rows(self.grid, self.nu, lam, self.potential, x, self.r_out) * projection)
        return np.array(rows)

    def _sample(self, lam_cap: float) -> List[_Panel]:
        x, _ = gauss_legendre(PANEL_ORDER)
        panels: List[_Panel] = []
        sizes: List[float] = []
        peak = 0.0
        quiet = 0
        lo = 0.0
        while quiet < QUIET_PANELS:
            hi = lo + self.step
            if hi > lam_cap:
                return self._cut(panels, sizes, peak, lo)
            nodes = 0.5 * (lo + hi) + 0.5 * (hi - lo) * x
            values = self.amplitude(nodes)
            size = float(np.max(np.abs(values) * nodes[:, None])) if values.size else 0.0
            peak = max(peak, size)
            quiet = quiet + 1 if size <= self.tolerance * peak else 0
            panels.append(_Panel(lo, hi, nodes, values, BarycentricInterpolator(nodes, values)))
            sizes.append(size)
            lo = hi
        return panels

    def _cut(self, panels: List[_Panel], sizes: List[float], peak: float, lam: float) -> List[_Panel]:
        if not panels or peak == 0.0:
            raise QuadratureToleranceError(math.inf, self.tolerance, lam)
        after_peak = int(np.argmax(sizes))
        trough = after_peak + int(np.argmin(sizes[after_peak:]))
        tail = sizes[trough] / peak
        if tail > math.sqrt(self.tolerance):
            raise QuadratureToleranceError(tail, self.tolerance, lam)
        logger.warning(
            "mode nu=%g: amplitude tail %.2e above tolerance %.1e at lambda=%.3g; spectrum cut at %.3g",
            self.nu, tail, self.tolerance, lam, panels[trough].hi,
        )
        self.tail_estimate = tail
        return panels[: trough + 1]

    def evaluate(self, t: float) -> np.ndarray:
        """u(t, r_out); negative t gives the backward evolution."""
        if t == 0:
            raise DomainError("t = 0 is the identity; request t != 0")
        total = np.zeros(self.r_out.size, dtype=complex)
        for panel in self.panels:
            width = self.oscillation_fraction * math.pi / (2.0 * abs(t) * panel.hi)
            pieces = max(1, math.ceil((panel.hi - panel.lo) / width))
            if pieces == 1 and self.gauss_order == PANEL_ORDER:
                nodes, values = panel.nodes, panel.values
                _, w = gauss_legendre(PANEL_ORDER)
                weights = 0.5 * (panel.hi - panel.lo) * w
            else:
                nodes, weights = composite_gauss(np.linspace(panel.lo, panel.hi, pieces + 1), self.gauss_order)
                values = panel.interpolant(nodes)
            total += (weights * nodes * np.exp(1j * t * nodes**2)) @ values
        return total


def mode_propagate(req: PropagatorRequest, f: ModeFunction, r_out: Optional[np.ndarray] = None):
    """
    e^{itH} P_c on one mode.

    Returns a ModeFunction on the data grid when `r_out` is None, otherwise the values at `r_out`.
    """
    propagator = ModePropagator(f.grid, req.nu, f, req.potential, r_out, req.tolerance)
    values = propagator.evaluate(req.t)
    if r_out is None:
        return ModeFunction(f.grid, values)
    return values


# -------------------- S OPERATOR --------------------
def _level_mask(spectrum: LinkSpectrum, j_max: Optional[int]) -> np.ndarray:
    levels = spectrum.levels if j_max is None else min(j_max, spectrum.levels)
    return spectrum.mode_level < levels


def s_operator_entry(
    x: float,
    spectrum: LinkSpectrum,
    theta1,
    theta2,
    j_max: Optional[int] = None,
) -> Tuple[complex, float]:
    """
    Truncated S(x, theta1, theta2) = x^{-(n-2)/2} sum_j i^{nu_j} J_nu_j(x) phi_j(theta1) phi_j(theta2),
    with a bound on the omitted levels from |J_nu(x)| <= (x/2)^nu / Gamma(nu + 1) and
    sum over a level of |phi_j|^2 = multiplicity / vol.
    """
    if x <= 0:
        raise DomainError("S(x) is evaluated at x > 0")
    if isinstance(spectrum.link, CustomLink):
        raise DomainError("S(x) needs eigenfunctions; custom links only carry eigenvalues")
    delta = spectrum.delta
    keep = np.flatnonzero(_level_mask(spectrum, j_max))
    value = 0.0j
    for j in keep:
        nu = float(spectrum.mode_nu[j])
        radial = scaled_values("J", nu, x, -delta)
        angular = eigenfunction(spectrum.link, int(j), theta1) * eigenfunction(spectrum.link, int(j), theta2)
        value += complex(i_power(nu) * radial * angular)

    used = int(spectrum.mode_level[keep].max()) + 1
    extended = build_spectrum(spectrum.link, spectrum.n, used + TAIL_LEVELS)
    nus = extended.nu_levels[used:]
    logs = nus * math.log(0.5 * x) - special.gammaln(nus + 1.0) - delta * math.log(x)
    tail = float(np.sum(np.exp(logs) * extended.multiplicity[used:]) / extended.volume)
    return value, tail


def s_operator_limit(spectrum: LinkSpectrum) -> complex:
    """x -> 0 limit of S(x, theta, theta'): (i/2)^{(n-2)/2} / (Gamma(n/2) vol)."""
    delta = spectrum.delta
    return complex(i_power(delta) * 2.0 ** (-delta) / (math.gamma(0.5 * spectrum.n) * spectrum.volume))


def s_operator_norm(x: float, spectrum: LinkSpectrum, j_max: Optional[int] = None) -> float:
    """L^2(X) -> L^2(X) norm of the truncated S(x): max over levels of x^{-(n-2)/2} |J_nu(x)|."""
    levels = spectrum.levels if j_max is None else min(j_max, spectrum.levels)
    nus = spectrum.nu_levels[:levels]
    return float(max(abs(scaled_values("J", float(nu), x, -spectrum.delta)) for nu in nus))


# -------------------- FULL CONE --------------------
def cone_free_kernel(
    spectrum: LinkSpectrum,
    t: float,
    r1: float,
    r2: float,
    theta1,
    theta2,
    j_max: Optional[int] = None,
) -> complex:
    """sum_j K_t^{Weber}(nu_j; r1, r2) phi_j(theta1) phi_j(theta2) over the first j_max levels."""
    levels = spectrum.levels if j_max is None else min(j_max, spectrum.levels)
    total = 0.0j
    for level in range(levels):
        modes = np.flatnonzero(spectrum.mode_level == level)
        angular = sum(
            float(eigenfunction(spectrum.link, int(j), theta1) * eigenfunction(spectrum.link, int(j), theta2)) for j in modes
        )
        total += complex(weber_mode_kernel(spectrum.n, float(spectrum.nu_levels[level]), t, r1, r2)) * angular
    return total


@dataclass(frozen=True)
class ConeField:
    """u(t, r, theta) on an (r, theta) product grid; rows are radii."""

    t: float
    r: np.ndarray
    theta: np.ndarray
    values: np.ndarray

    def l2_norm(self, r_weights: np.ndarray, theta_weights: np.ndarray) -> float:
        return float(np.sqrt(np.sum(r_weights[:, None] * theta_weights[None, :] * np.abs(self.values) ** 2)))

    def to_frame(self) -> pd.DataFrame:
        angle = self.theta if self.theta.ndim == 1 else self.theta[:, 0]
        return pd.DataFrame(
            {
                "r": np.repeat(self.r, angle.size),
                "theta": np.tile(angle, self.r.size),
                "re": self.values.real.ravel(),
                "im": self.values.imag.ravel(),
            }
        )


def full_cone_propagate(
    spectrum: LinkSpectrum,
    t: float,
    coefficients: Dict[int, ModeFunction],
    theta: np.ndarray,
    r_out: Optional[np.ndarray] = None,
    potential: Optional[PotentialSpec] = None,
    tolerance: float = 1e-8,
    jobs: Optional[int] = None,
) -> ConeField:
    """
    sum_j (e^{itH} P_c f_j)(r) phi_j(theta) for data given by its mode coefficients.

    The free evolution uses Weber's closed form; otherwise each mode gets its own `ModePropagator`.
    """
    if not coefficients:
        raise DomainError("no mode coefficients given")
    grid = next(iter(coefficients.values())).grid
    r_out = grid.nodes if r_out is None else np.asarray(r_out, dtype=float)
    theta = np.asarray(theta, dtype=float)
    modes = sorted(coefficients)
    free = potential is None or potential.is_zero

    def evolve(j: int) -> np.ndarray:
        nu = spectrum.nu(j)
        if free:
            return weber_apply(spectrum.n, nu, t, r_out, coefficients[j])
        return ModePropagator(grid, nu, coefficients[j], potential, r_out, tolerance).evaluate(t)

    radial = run_parallel(evolve, modes, jobs)
    values = np.zeros((r_out.size, theta.shape[0]), dtype=complex)
    for j, u in zip(modes, radial):
        values += u[:, None] * eigenfunction(spectrum.link, j, theta)[None, :]
    logger.info("propagated %d mode(s) to t=%g on %d x %d points", len(modes), t, r_out.size, theta.shape[0])
    return ConeField(t, r_out, theta, values)
