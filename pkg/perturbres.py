"""
perturbres.py

Perturbed radial resolvents for H = -Delta + V on one mode.

Functionality includes:
- Nystrom solve K_V = (I + K_0 D W)^{-1} K_0 with a recorded solve residual.
- The finite Birman-Schwinger expansion and its sandwiched remainder.
- Fredholm indicators: smallest singular value of I + rho^sigma V R_0 rho^{-sigma} per lambda,
  dip flags confirmed on a refined grid, and the Neumann threshold M_V.
- Distorted waves x = (I + K_0 D W)^{-1} a and Im K_V = (pi/2) x conj(x)^T.
- Zero-energy determinant and coupling search with the static kernel.
- Jost solutions by Picard iteration of the Volterra equation, the modified Wronskian and
  negative eigenvalues of the discretized radial operator.

D is the diagonal of V at the grid nodes and W the quadrature weights (r^{n-1} included).
"""

# -------------------- IMPORTS --------------------
# Standard Library
import math
import logging
from dataclasses import dataclass
from typing import Callable, List, Optional, Sequence, Tuple

# Third-Party Libraries
import numpy as np
import pandas as pd
from scipy import linalg, optimize
from scipy.integrate import cumulative_trapezoid

# Internal Modules
from errors import DomainError, JostConvergenceError, NearResonanceError
from freeres import (
    KernelMatrix,
    RadialGrid,
    free_kernel,
    free_kernel_rows,
    im_factors,
    im_free_kernel,
    static_kernel,
    weighted_operator,
)
from schemas import PotentialSpec
from utils import run_parallel

logger = logging.getLogger(__name__)

RESONANCE_THRESHOLD = 1e-6
CONFIRM_THRESHOLD = 1e-3
JOST_MAX_ITER = 64
JOST_TOLERANCE = 1e-9


# -------------------- HELPERS --------------------
def _coupling(grid: RadialGrid, potential: PotentialSpec) -> np.ndarray:
    """D W as a vector."""
    return potential(grid.nodes) * grid.weights


def fredholm_indicator(
    grid: RadialGrid,
    nu: float,
    lam: float,
    potential: PotentialSpec,
    sign: str = "+",
    kernel: Optional[KernelMatrix] = None,
) -> float:
    """Smallest singular value of I + rho^sigma V R_0(lambda +- i0) rho^{-sigma}, symmetrized with sqrt(W)."""
    if potential.is_zero:
        return 1.0
    k0 = kernel if kernel is not None else free_kernel(grid, nu, lam, sign)
    sigma = potential.sigma
    v = potential(grid.nodes)
    inner = v[:, None] * weighted_operator(k0.values, grid, -sigma, sigma)
    return float(linalg.svdvals(np.eye(grid.size) + inner)[-1])


# -------------------- DIRECT SOLVE --------------------
def perturbed_kernel(
    grid: RadialGrid,
    nu: float,
    lam: float,
    sign: str,
    potential: PotentialSpec,
    threshold: float = RESONANCE_THRESHOLD,
) -> KernelMatrix:
    """
    Kernel of R_V(lambda +- i0) on one mode.

    Args:
        grid (RadialGrid): Radial grid.
        nu (float): Bessel order.
        lam (float): Nonzero real spectral parameter.
        sign (str): "+" or "-".
        potential (PotentialSpec): Real radial potential.
        threshold (float): Fredholm indicator below which the solve is refused.

    Returns:
        KernelMatrix: K_V with the relative solve residual in `residual`.

    Raises:
        NearResonanceError: If I + V R_0 is numerically singular at lambda.
    """
    k0 = free_kernel(grid, nu, lam, sign)
    if potential.is_zero:
        return KernelMatrix(nu, lam, sign, k0.values, grid, residual=0.0, factors=k0.factors)
    indicator = fredholm_indicator(grid, nu, lam, potential, sign, k0)
    if indicator < threshold:
        raise NearResonanceError(lam, indicator, threshold)
    system = np.eye(grid.size) + k0.values * _coupling(grid, potential)[None, :]
    values = linalg.solve(system, k0.values)
    residual = float(np.linalg.norm(system @ values - k0.values) / np.linalg.norm(k0.values))
    logger.debug("perturbed kernel nu=%g lambda=%g%s: indicator %.3e, residual %.2e", nu, lam, sign, indicator, residual)
    return KernelMatrix(nu, lam, sign, values, grid, residual=residual)


def birman_schwinger(
    grid: RadialGrid,
    nu: float,
    lam: float,
    sign: str,
    potential: PotentialSpec,
    m: int,
) -> Tuple[KernelMatrix, KernelMatrix]:
    """
    sum_{l<2M} R_0 (-V R_0)^l and [R_0 V]^M R_V [V R_0]^M as kernels.

    Kernel composition carries W between factors: (A o B)(a, b) = sum_c A(a, c) w_c B(c, b).
    """
    if m < math.ceil(grid.n / 4):
        raise DomainError(f"Birman-Schwinger order M={m} is below ceil(n/4)")
    k0 = free_kernel(grid, nu, lam, sign).values
    kv = perturbed_kernel(grid, nu, lam, sign, potential).values
    dw = _coupling(grid, potential)

    series = np.zeros_like(k0)
    term = k0.copy()
    for _ in range(2 * m):
        series += term
        term = -(term * dw[None, :]) @ k0

    left = np.linalg.matrix_power(k0 * dw[None, :], m)
    right = np.linalg.matrix_power(dw[:, None] * k0, m)
    remainder = left @ kv @ right
    return (
        KernelMatrix(nu, lam, sign, series, grid),
        KernelMatrix(nu, lam, sign, remainder, grid),
    )


# -------------------- FREDHOLM SCANS --------------------
@dataclass(frozen=True)
class FredholmReport:
    lam: np.ndarray
    smin: np.ndarray
    flags: List[str]

    @property
    def healthy(self) -> bool:
        return all(flag == "ok" for flag in self.flags)

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame({"lambda": self.lam, "smin": self.smin, "flag": self.flags})


def fredholm_scan(
    grid: RadialGrid,
    nu: float,
    potential: PotentialSpec,
    lam_grid: Sequence[float],
    sign: str = "+",
    threshold: float = RESONANCE_THRESHOLD,
    confirm: bool = True,
    jobs: Optional[int] = None,
) -> FredholmReport:
    """
    Indicator per lambda. A value below `threshold` is a "dip"; a dip that stays below 1e-3 on a
    grid with twice the nodes is labelled "resonance".
    """
    lams = np.asarray(lam_grid, dtype=float)
    if np.any(lams <= 0) or np.any(np.diff(lams) <= 0):
        raise DomainError("Fredholm scans need positive, increasing lambda samples")
    smin = np.array(run_parallel(lambda lam: fredholm_indicator(grid, nu, lam, potential, sign), lams, jobs))
    flags = []
    fine = grid.refined() if confirm and np.any(smin < threshold) else None
    for lam, value in zip(lams, smin):
        if value >= threshold:
            flags.append("ok")
            continue
        flag = "dip"
        if fine is not None and fredholm_indicator(fine, nu, lam, potential, sign) < CONFIRM_THRESHOLD:
            flag = "resonance"
        logger.warning("Fredholm indicator %.2e at lambda=%g flagged %s", value, lam, flag)
        flags.append(flag)
    return FredholmReport(lams, smin, flags)


def neumann_threshold(
    grid: RadialGrid,
    nu: float,
    potential: PotentialSpec,
    lam_grid: Sequence[float],
    sign: str = "+",
) -> float:
    """
    Smallest sampled lambda from which ||rho^{2 sigma} V||_inf ||rho^{-sigma} R_0 rho^{-sigma}|| <= 1/2
    holds at every larger sample; inf when the bound never settles.
    """
    sigma = potential.sigma
    vmax = float(np.max(np.abs(potential(grid.nodes)) * grid.rho ** (2.0 * sigma)))
    lams = np.asarray(lam_grid, dtype=float)
    products = np.array(
        [vmax * linalg.svdvals(weighted_operator(free_kernel(grid, nu, lam, sign).values, grid, sigma, sigma))[0] for lam in lams]
    )
    good = products <= 0.5
    if not good[-1]:
        return math.inf
    bad = np.flatnonzero(~good)
    start = 0 if bad.size == 0 else bad[-1] + 1
    return float(lams[start])


# -------------------- DISTORTED WAVES --------------------
def distorted_wave(
    grid: RadialGrid,
    nu: float,
    lam: float,
    potential: PotentialSpec,
    k: int = 0,
    threshold: float = RESONANCE_THRESHOLD,
    check: bool = True,
) -> List[np.ndarray]:
    """[x, dx/dlambda, ...] up to order k <= 1, x = (I + K_0(+i0) D W)^{-1} a, a = r^{-(n-2)/2} J_nu(lambda r)."""
    if lam <= 0:
        raise DomainError("distorted waves are built at lambda > 0")
    if k > 1:
        raise DomainError("perturbed lambda-derivatives are available for k <= 1")
    factors = im_factors(grid.nodes, nu, lam, k, grid.delta)
    if potential.is_zero:
        return [f.astype(complex) for f in factors]
    k0 = free_kernel(grid, nu, lam, "+")
    if check:
        indicator = fredholm_indicator(grid, nu, lam, potential, "+", k0)
        if indicator < threshold:
            raise NearResonanceError(lam, indicator, threshold)
    dw = _coupling(grid, potential)
    lu = linalg.lu_factor(np.eye(grid.size) + k0.values * dw[None, :])
    x = linalg.lu_solve(lu, factors[0].astype(complex))
    waves = [x]
    if k == 1:
        dk0 = free_kernel(grid, nu, lam, "+", k=1).values
        waves.append(linalg.lu_solve(lu, factors[1] - dk0 @ (dw * x)))
    return waves


def distorted_wave_rows(
    grid: RadialGrid,
    nu: float,
    lam: float,
    potential: PotentialSpec,
    x: np.ndarray,
    r_out: np.ndarray,
) -> np.ndarray:
    """x(r) off the grid: a(r) - sum_s K_0(+i0; r, s) D W x."""
    a = im_factors(np.asarray(r_out, dtype=float), nu, lam, 0, grid.delta)[0]
    if potential.is_zero:
        return a.astype(complex)
    return a - free_kernel_rows(grid, nu, lam, r_out, "+") @ (_coupling(grid, potential) * x)


def perturbed_im_kernel(grid: RadialGrid, nu: float, lam: float, potential: PotentialSpec, k: int = 0) -> KernelMatrix:
    """d^k/dlambda^k Im R_V(lambda + i0) for k <= 1; odd in lambda."""
    if lam == 0:
        raise DomainError("lambda = 0 is not on the continuous spectrum")
    if potential.is_zero:
        return im_free_kernel(grid, nu, lam, k)
    if lam < 0:
        mirrored = perturbed_im_kernel(grid, nu, -lam, potential, k)
        return KernelMatrix(nu, lam, "im", (-1) ** (k + 1) * mirrored.values, grid, k)
    waves = distorted_wave(grid, nu, lam, potential, k)
    if k == 0:
        values = np.real(np.outer(waves[0], np.conj(waves[0])))
    else:
        values = np.real(np.outer(waves[1], np.conj(waves[0])) + np.outer(waves[0], np.conj(waves[1])))
    return KernelMatrix(nu, lam, "im", 0.5 * math.pi * values, grid, k)


# -------------------- ZERO ENERGY --------------------
def zero_energy_determinant(grid: RadialGrid, nu: float, potential: PotentialSpec) -> float:
    """det(I + G D W) with G the static kernel; changes sign where a zero-energy state appears."""
    g = static_kernel(grid, nu).values
    sign, logdet = np.linalg.slogdet(np.eye(grid.size) + g * _coupling(grid, potential)[None, :])
    return float(sign * math.exp(logdet))


def zero_energy_indicator(grid: RadialGrid, nu: float, potential: PotentialSpec) -> float:
    """Smallest singular value of the rho-weighted I + V G."""
    if potential.is_zero:
        return 1.0
    return fredholm_indicator(grid, nu, 0.0, potential, kernel=static_kernel(grid, nu))


def find_zero_energy_coupling(
    grid: RadialGrid,
    nu: float,
    family: Callable[[float], PotentialSpec],
    a_max: float,
    count: int = 60,
) -> Optional[float]:
    """
    Smallest coupling a in (0, a_max] at which det(I + G D_{V_a} W) vanishes.

    Scans `count` equally spaced couplings and refines the first sign change with Brent's method.
    Returns None if no sign change is found.
    """
    det = lambda a: zero_energy_determinant(grid, nu, family(a))
    couplings = np.linspace(a_max / count, a_max, count)
    previous_a, previous = 0.0, 1.0
    for a in couplings:
        value = det(a)
        if np.sign(value) != np.sign(previous):
            root = optimize.brentq(det, previous_a, a, xtol=1e-10)
            logger.info("zero-energy coupling found at a=%.8g", root)
            return float(root)
        previous_a, previous = a, value
    return None


# -------------------- JOST SOLUTIONS --------------------
@dataclass(frozen=True)
class JostPair:
    """u_+- and their r-derivatives on a grid descending from R_max."""

    n: int
    lam: float
    r: np.ndarray
    u_plus: np.ndarray
    u_minus: np.ndarray
    du_plus: np.ndarray
    du_minus: np.ndarray
    iterations: int

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(
            {
                "r": self.r,
                "re_uplus": self.u_plus.real,
                "im_uplus": self.u_plus.imag,
                "re_uminus": self.u_minus.real,
                "im_uminus": self.u_minus.imag,
            }
        )


def jost_rmax(potential: PotentialSpec, tolerance: float = 1e-10) -> float:
    """R with A (1+R)^{1-2 sigma} / (2 sigma - 1) below `tolerance`."""
    if potential.is_zero:
        return 10.0
    exponent = 2.0 * potential.sigma - 1.0
    return max(1.0, (potential.bound / (exponent * tolerance)) ** (1.0 / exponent) - 1.0)


def jost_grid(r_max: float, step: float = 1e-3, r_min: float = 0.05) -> np.ndarray:
    """Uniform grid descending from r_max to r_min."""
    count = int(math.ceil((r_max - r_min) / step)) + 1
    return np.linspace(r_max, r_min, count)


def _tail_integrals(lam: float, r: np.ndarray, g: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """(int_r^R cos(lambda s) g ds, int_r^R sin(lambda s) g ds) on a descending grid."""
    c = -cumulative_trapezoid(np.cos(lam * r) * g, r, initial=0.0)
    s = -cumulative_trapezoid(np.sin(lam * r) * g, r, initial=0.0)
    return c, s


def _jost_branch(lam, r, vtot, sign, tolerance, max_iter):
    free = np.exp(sign * 1j * lam * r)
    w = free.copy()
    defect = math.inf
    for iteration in range(1, max_iter + 1):
        c, s = _tail_integrals(lam, r, vtot * w)
        update = free - (np.sin(lam * r) * c - np.cos(lam * r) * s) / lam
        defect = float(np.max(np.abs(update - w)) / np.max(np.abs(update)))
        w = update
        if defect <= tolerance:
            c, s = _tail_integrals(lam, r, vtot * w)
            dw = sign * 1j * lam * free - (np.cos(lam * r) * c + np.sin(lam * r) * s)
            return w, dw, iteration
    raise JostConvergenceError(max_iter, defect)


def jost_solutions(
    n: int,
    lam: float,
    potential: PotentialSpec,
    r_grid: np.ndarray,
    nu: Optional[float] = None,
    tolerance: float = JOST_TOLERANCE,
    max_iter: int = JOST_MAX_ITER,
) -> JostPair:
    """
    Jost solutions u_+- ~ e^{+-i lambda r} r^{-(n-1)/2} at R_max.

    With w = r^{(n-1)/2} u the Volterra equation reads
    w(r) = e^{+-i lambda r} - int_r^R sin(lambda (r - s)) / lambda (V(s) + c(s)) w(s) ds,
    where c = (nu^2 - 1/4)/s^2 is included when `nu` is given. Tail integrals use the trapezoid rule.
    """
    if lam <= 0:
        raise DomainError("Jost solutions are built at lambda > 0")
    r = np.asarray(r_grid, dtype=float)
    if r.size < 2 or np.any(np.diff(r) >= 0) or r[-1] <= 0:
        raise DomainError("the Jost grid must be positive and strictly descending")
    vtot = potential(r)
    if nu is not None:
        vtot = vtot + (nu * nu - 0.25) / r**2

    w_plus, dw_plus, it_plus = _jost_branch(lam, r, vtot, +1, tolerance, max_iter)
    w_minus, dw_minus, it_minus = _jost_branch(lam, r, vtot, -1, tolerance, max_iter)
    logger.debug("Jost iteration at lambda=%g converged in %d/%d steps", lam, it_plus, it_minus)

    power = 0.5 * (n - 1)
    scale = r ** (-power)
    u_plus, u_minus = scale * w_plus, scale * w_minus
    du_plus = scale * (dw_plus - power * w_plus / r)
    du_minus = scale * (dw_minus - power * w_minus / r)
    return JostPair(n, lam, r, u_plus, u_minus, du_plus, du_minus, max(it_plus, it_minus))


def modified_wronskian(pair: JostPair) -> np.ndarray:
    """r^{n-1}(u_+ u_-' - u_+' u_-); equals -2 i lambda for V = 0 and is constant in r."""
    return pair.r ** (pair.n - 1) * (pair.u_plus * pair.du_minus - pair.du_plus * pair.u_minus)


# -------------------- BOUND STATES --------------------
def negative_eigenvalues(n: int, nu: float, potential: PotentialSpec, r_max: float = 40.0, count: int = 4000) -> np.ndarray:
    """
    Negative eigenvalues of -w'' + ((nu^2 - 1/4)/r^2 + V) w on (0, r_max), Dirichlet ends,
    second-order finite differences. These are excluded by P_c and reported for awareness.
    """
    h = r_max / (count + 1)
    r = h * np.arange(1, count + 1)
    diagonal = 2.0 / h**2 + (nu * nu - 0.25) / r**2 + potential(r)
    off = np.full(count - 1, -1.0 / h**2)
    lower = float(diagonal.min()) - 2.0 / h**2 - 1.0
    if lower >= 0:
        return np.empty(0)
    values = linalg.eigh_tridiagonal(diagonal, off, eigvals_only=True, select="v", select_range=(lower, 0.0))
    if values.size:
        logger.info("radial operator nu=%g has %d negative eigenvalue(s); P_c removes them", nu, values.size)
    return np.sort(values)
