"""
verify.py

Numerical verification harness for the resolvent, spectral-measure and dispersive estimates.

- `NormScan` / `DecayReport` / `ScalarCheck`: report types with log-log fits, pass/fail and CSV frames.
- LAP, low-frequency Im, L^{q,sigma} slice and weighted pointwise scans in lambda.
- Dispersive decay fits in t for one mode and for the free cone in L^1(L^2) -> L^inf(L^2).
- Integration-by-parts bookkeeping and finite-difference checks of lambda-derivatives.

Exponents are always fitted over a regime, never compared pointwise against constants.
"""

# -------------------- IMPORTS --------------------
# Standard Library
import math
import logging
from dataclasses import dataclass
from functools import cached_property
from typing import Callable, Dict, List, Literal, Optional, Tuple

# Third-Party Libraries
import numpy as np
import pandas as pd
from scipy import linalg

# Internal Modules
from errors import DomainError, NearResonanceError
from freeres import KernelMatrix, ModeFunction, RadialGrid, free_kernel, im_factors, im_free_kernel, weighted_operator
from linkspec import LinkSpectrum
from perturbres import RESONANCE_THRESHOLD, perturbed_im_kernel, perturbed_kernel, zero_energy_indicator
from propagate import ModePropagator, weber_apply
from schemas import CutoffSpec, PotentialSpec, ToleranceConfig
from specfun import MAX_DERIVATIVE
from utils import LogLogFit, composite_gauss, loglog_fit, run_parallel

logger = logging.getLogger(__name__)

Comparison = Literal["match", "upper"]
DEFAULT_TOLERANCES = ToleranceConfig()


# -------------------- REPORT TYPES --------------------
@dataclass
class NormScan:
    """Measured norms against a claimed power law in the sample variable."""

    name: str
    x: np.ndarray
    values: np.ndarray
    claim: float
    tolerance: float
    comparison: Comparison = "match"
    residual_limit: float = DEFAULT_TOLERANCES.residual

    def _fit_mask(self) -> np.ndarray:
        return np.ones(self.x.size, dtype=bool)

    @cached_property
    def fit(self) -> LogLogFit:
        mask = self._fit_mask()
        return loglog_fit(self.x[mask], self.values[mask])

    @property
    def passed(self) -> bool:
        if self.comparison == "upper":
            return self.fit.slope <= self.claim + self.tolerance
        return abs(self.fit.slope - self.claim) <= self.tolerance and self.fit.residual < self.residual_limit

    def summary_line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        return f"{status} {self.name} {self.fit.slope:.4f} {self.claim:.4f} {self.tolerance:g}"

    def to_frame(self) -> pd.DataFrame:
        fitted = 10.0**self.fit.intercept * self.x**self.fit.slope
        return pd.DataFrame({"x": self.x, "value": self.values, "claim": self.claim, "fit": fitted})


@dataclass
class DecayReport(NormScan):
    """Weighted sup norms of u(t) against t; the fit uses the largest decade of t."""

    data_norm: float = 1.0
    n: int = 3

    def _fit_mask(self) -> np.ndarray:
        mask = self.x >= self.x.max() / 10.0
        return mask if mask.sum() >= 3 else np.ones(self.x.size, dtype=bool)

    @property
    def constants(self) -> np.ndarray:
        """C(t) = norm * t^{n/2} / data norm."""
        return self.values * self.x ** (0.5 * self.n) / self.data_norm


@dataclass
class ScalarCheck:
    """An oracle or identity defect compared against a threshold."""

    name: str
    value: float
    threshold: float

    @property
    def passed(self) -> bool:
        return bool(np.isfinite(self.value)) and self.value <= self.threshold

    def summary_line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        return f"{status} {self.name} {self.value:.3e} 0 {self.threshold:g}"

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame({"x": [0.0], "value": [self.value], "claim": [self.threshold], "fit": [self.value]})


# -------------------- CLAIMS --------------------
def theorem_alpha(n: int) -> float:
    """Smallest admissible weight exponent 2 ceil(n/4)(n-2) - (n-1)/2 + 2 (treated as inclusive)."""
    return 2 * math.ceil(n / 4) * (n - 2) - 0.5 * (n - 1) + 2.0


def ibp_order(n: int) -> int:
    return 2 * math.ceil(n / 4) * (n - 2) + 2


def log_samples(lo: float, hi: float, count: int) -> np.ndarray:
    if not 0 < lo < hi:
        raise DomainError("sample range must satisfy 0 < lo < hi")
    return np.geomspace(lo, hi, count)


# -------------------- OPERATOR NORMS --------------------
def weighted_opnorm(kernel: KernelMatrix, sigma_out: float, sigma_in: float) -> float:
    """Discrete L^{2,sigma_in} -> L^{2,-sigma_out} norm (largest singular value)."""
    return float(linalg.svdvals(weighted_operator(kernel.values, kernel.grid, sigma_out, sigma_in))[0])


def _is_free(potential: Optional[PotentialSpec]) -> bool:
    return potential is None or potential.is_zero


def _check_zero_energy(grid: RadialGrid, nu: float, potential: PotentialSpec) -> None:
    if nu <= 0:
        return
    indicator = zero_energy_indicator(grid, nu, potential)
    if indicator < RESONANCE_THRESHOLD:
        raise NearResonanceError(0.0, indicator, RESONANCE_THRESHOLD)
    logger.debug("zero-energy indicator %.3e", indicator)


def lap_scan(
    grid: RadialGrid,
    nu: float,
    sigma: float,
    k: int = 0,
    lam_range: Tuple[float, float] = (1.0, 100.0),
    count: int = 24,
    potential: Optional[PotentialSpec] = None,
    tolerance: float = 0.1,
    jobs: Optional[int] = None,
    residual_limit: float = DEFAULT_TOLERANCES.residual,
    name: str = "lap",
) -> NormScan:
    """||d^k R(lambda + i0)||_{L^{2,sigma} -> L^{2,-sigma}} over high lambda; claim slope -1."""
    if sigma <= 0.5 + k:
        raise DomainError(f"the LAP scan needs sigma > 1/2 + k, got sigma={sigma}, k={k}")
    if not _is_free(potential) and k > 0:
        raise DomainError("perturbed LAP scans are available for k = 0")
    lams = log_samples(*lam_range, count)

    def measure(lam: float) -> float:
        if _is_free(potential):
            kernel = free_kernel(grid, nu, lam, "+", k)
        else:
            kernel = perturbed_kernel(grid, nu, lam, "+", potential)
        return weighted_opnorm(kernel, sigma, sigma)

    values = np.array(run_parallel(measure, lams, jobs))
    return NormScan(name, lams, values, claim=-1.0, tolerance=tolerance, residual_limit=residual_limit)


def im_lowfreq_scan(
    grid: RadialGrid,
    nu: float,
    sigma: float,
    k: int = 0,
    lam_range: Tuple[float, float] = (1e-3, 1e-1),
    count: int = 16,
    potential: Optional[PotentialSpec] = None,
    tolerance: float = 0.15,
    jobs: Optional[int] = None,
    residual_limit: float = DEFAULT_TOLERANCES.residual,
    name: str = "im_lowfreq",
) -> NormScan:
    """||d^k Im R(lambda + i0)||_{L^{2,sigma} -> L^{2,-sigma}} at low lambda; claim n - 2 - k."""
    n = grid.n
    if sigma <= 0.5 * n + k:
        raise DomainError(f"the low-frequency scan needs sigma > n/2 + k, got sigma={sigma}")
    if not _is_free(potential):
        _check_zero_energy(grid, nu, potential)
    lams = log_samples(*lam_range, count)

    def measure(lam: float) -> float:
        if _is_free(potential):
            kernel = im_free_kernel(grid, nu, lam, k)
        else:
            kernel = perturbed_im_kernel(grid, nu, lam, potential, k)
        return weighted_opnorm(kernel, sigma, sigma)

    values = np.array(run_parallel(measure, lams, jobs))
    return NormScan(name, lams, values, claim=float(n - 2 - k), tolerance=tolerance, residual_limit=residual_limit)


def lq_claim(n: int, q: float, k: int, imaginary: bool, high: bool) -> float:
    if imaginary:
        return n - 2 - k + (max(-n / q, k - 0.5 * (n - 1)) if high else 0.0)
    return n - 2 - k + max(0.0, k - 0.5 * (n - 1)) if high else float(-k)


def lq_slice_scan(
    grid: RadialGrid,
    nu: float,
    sigma: float,
    q: float,
    k: int = 0,
    lam_range: Tuple[float, float] = (1.0, 100.0),
    count: int = 16,
    imaginary: bool = True,
    tolerance: float = 0.2,
    jobs: Optional[int] = None,
    residual_limit: float = DEFAULT_TOLERANCES.residual,
    name: str = "lq_slice",
) -> NormScan:
    """
    sup_r (1 + lambda r)^{(n-1)/2 - k} ||K(r, .)||_{L^{q,-sigma}} per lambda, where K is d^k Im R_0
    or d^k R_0(+i0); the regime (low/high) follows the sample range.
    """
    n = grid.n
    if q < 1 or sigma <= n / q + k:
        raise DomainError(f"invalid (q, sigma) = ({q}, {sigma}) for k={k}: need q >= 1 and sigma > n/q + k")
    if not imaginary and n > 2 and q > n / (n - 2):
        raise DomainError(f"resolvent slices need q <= n/(n-2) = {n / (n - 2):g}")
    high = lam_range[0] >= 1.0
    lams = log_samples(*lam_range, count)
    weight = grid.weights * grid.rho ** (-q * sigma)

    def measure(lam: float) -> float:
        kernel = im_free_kernel(grid, nu, lam, k) if imaginary else free_kernel(grid, nu, lam, "+", k)
        slices = (np.abs(kernel.values) ** q @ weight) ** (1.0 / q)
        envelope = (1.0 + lam * grid.nodes) ** (k - 0.5 * (n - 1))
        return float(np.max(slices / envelope))

    values = np.array(run_parallel(measure, lams, jobs))
    claim = lq_claim(n, q, k, imaginary, high)
    return NormScan(name, lams, values, claim=claim, tolerance=tolerance, residual_limit=residual_limit)


def pointwise_bound_scan(
    grid: RadialGrid,
    nu: float,
    potential: Optional[PotentialSpec],
    alpha: float,
    k: int = 0,
    lam_range: Tuple[float, float] = (1e-3, 1e-1),
    count: int = 16,
    tolerance: float = 0.2,
    jobs: Optional[int] = None,
    residual_limit: float = DEFAULT_TOLERANCES.residual,
    name: str = "pointwise",
) -> NormScan:
    """
    sup_{r,s} rho(r)^{-alpha} |d^k Im K_V(lambda; r, s)| rho(s)^{-alpha}.

    Low lambda is compared with n - 2 - k; high lambda only has to stay below
    2 ceil(n/4)(n-2) - 1.
    """
    n = grid.n
    if alpha < max(k - 0.5 * (n - 1), 0.0):
        raise DomainError(f"alpha={alpha} is below max(k - (n-1)/2, 0)")
    if not _is_free(potential) and potential.sigma <= 4 * math.ceil(n / 4) - 2 + k:
        raise DomainError("the potential decays too slowly for the weighted pointwise bound")
    high = lam_range[0] >= 1.0
    lams = log_samples(*lam_range, count)
    weight = grid.rho ** (-alpha)

    def measure(lam: float) -> float:
        if _is_free(potential):
            kernel = im_free_kernel(grid, nu, lam, k)
        else:
            kernel = perturbed_im_kernel(grid, nu, lam, potential, k)
        return float(np.max(np.abs(weight[:, None] * kernel.values * weight[None, :])))

    values = np.array(run_parallel(measure, lams, jobs))
    if high:
        claim, comparison = float(2 * math.ceil(n / 4) * (n - 2) - 1), "upper"
    else:
        claim, comparison = float(n - 2 - k), "match"
    return NormScan(name, lams, values, claim, tolerance, comparison, residual_limit)


# -------------------- DECAY IN TIME --------------------
def decay_fit(
    spectrum: LinkSpectrum,
    j: int,
    f: ModeFunction,
    t_range: Tuple[float, float] = (10.0, 100.0),
    count: int = 12,
    potential: Optional[PotentialSpec] = None,
    alpha: float = 0.0,
    r_out: Optional[np.ndarray] = None,
    tolerance: Optional[float] = None,
    quadrature: float = 1e-8,
    jobs: Optional[int] = None,
    residual_limit: float = DEFAULT_TOLERANCES.residual,
    name: str = "decay",
) -> DecayReport:
    """
    sup_r rho^{-alpha} |e^{itH} P_c f_j| against t.

    Odd n is compared with -n/2 (two-sided); even n only has to decay at least like t^{-(n-1)/2}.
    """
    n = spectrum.n
    nu = spectrum.nu(j)
    r_out = np.geomspace(0.01, 10.0, 24) if r_out is None else np.asarray(r_out, dtype=float)
    times = log_samples(*t_range, count)
    weight = (1.0 + r_out) ** (-alpha)

    if _is_free(potential):
        evolve = lambda t: weber_apply(n, nu, t, r_out, f)
    else:
        _check_zero_energy(f.grid, nu, potential)
        propagator = ModePropagator(f.grid, nu, f, potential, r_out, quadrature)
        evolve = propagator.evaluate

    norms = np.array([float(np.max(weight * np.abs(u))) for u in run_parallel(evolve, times, jobs)])
    data_norm = f.weighted_l1(alpha)
    if n % 2 == 1:
        claim, comparison, tol = -0.5 * n, "match", 0.1 if tolerance is None else tolerance
    else:
        claim, comparison, tol = -0.5 * (n - 1), "upper", 0.05 if tolerance is None else tolerance
    report = DecayReport(name, times, norms, claim, tol, comparison, residual_limit, data_norm=data_norm, n=n)
    logger.info("%s: slope %.4f (claim %.2f)", name, report.fit.slope, claim)
    return report


def free_l1l2_linf_l2(
    spectrum: LinkSpectrum,
    coefficients: Dict[int, ModeFunction],
    t_range: Tuple[float, float] = (10.0, 100.0),
    count: int = 12,
    tolerance: float = 0.1,
    jobs: Optional[int] = None,
    residual_limit: float = DEFAULT_TOLERANCES.residual,
    name: str = "free_l1l2",
) -> DecayReport:
    """
    sup_r ||u(t, r, .)||_{L^2(X)} for free evolution, via Parseval over the given modes.
    Radii follow the dispersive front: r = t xi with xi in (0, 4], plus a fixed small-r set.
    """
    n = spectrum.n
    grid = next(iter(coefficients.values())).grid
    times = log_samples(*t_range, count)
    near = np.geomspace(0.01, 1.0, 8)
    xi = np.geomspace(0.05, 4.0, 48)

    def measure(t: float) -> float:
        r_out = np.concatenate((near, t * xi))
        energy = np.zeros(r_out.size)
        for j, f in coefficients.items():
            energy += np.abs(weber_apply(n, spectrum.nu(j), t, r_out, f)) ** 2
        return float(np.sqrt(energy.max()))

    norms = np.array(run_parallel(measure, times, jobs))
    pointwise = np.sqrt(sum(np.abs(f.values) ** 2 for f in coefficients.values()))
    data_norm = float(np.sum(grid.weights * pointwise))
    return DecayReport(name, times, norms, -0.5 * n, tolerance, "match", residual_limit, data_norm=data_norm, n=n)


# -------------------- INTEGRATION BY PARTS --------------------
def ibp_max_order(n: int, nu: float, free: bool) -> int:
    """
    Largest number of integrations by parts the low-frequency end supports.

    Free kernels behave like lambda^{2 nu} at 0, so every boundary term vanishes while
    order < nu + 1; perturbed kernels carry one lambda-derivative and (n-1)/2 orders of decay.
    """
    if free:
        return min(MAX_DERIVATIVE, math.ceil(nu + 1.0) - 1)
    return min(1, int((n - 1) // 2))


def ibp_terms(order: int) -> Dict[Tuple[int, int], int]:
    """
    Expansion of T^order (lambda F), T h = -d/dlambda (h / lambda), as {(p, j): c} meaning
    sum c lambda^{-p} F^{(j)}.
    """
    terms = {(-1, 0): 1}
    for _ in range(order):
        expanded: Dict[Tuple[int, int], int] = {}
        for (p, j), c in terms.items():
            p += 1
            if p:
                expanded[(p + 1, j)] = expanded.get((p + 1, j), 0) + p * c
            expanded[(p, j + 1)] = expanded.get((p, j + 1), 0) - c
        terms = {key: c for key, c in expanded.items() if c}
    return terms


def _pair_derivatives(grid, nu, lam, potential, a, b, order) -> List[float]:
    """Im K and its lambda-derivatives up to `order` at the grid pair (a, b)."""
    if not _is_free(potential):
        return [perturbed_im_kernel(grid, nu, lam, potential, m).values[a, b] for m in range(order + 1)]
    factors = im_factors(grid.nodes[[a, b]], nu, lam, order, grid.delta)
    return [
        0.5 * math.pi * sum(math.comb(m, i) * factors[i][0] * factors[m - i][1] for i in range(m + 1))
        for m in range(order + 1)
    ]


def ibp_consistency(
    grid: RadialGrid,
    nu: float,
    t: float,
    order: int,
    potential: Optional[PotentialSpec] = None,
    pair: Optional[Tuple[int, int]] = None,
    alpha: float = 0.0,
    cutoff: CutoffSpec = CutoffSpec(),
    panels: int = 64,
) -> float:
    """
    Relative gap between the low-frequency integral of e^{it lambda^2} lambda chi(lambda) g(lambda)
    and its form after `order` integrations by parts with (1/(2it lambda)) d/dlambda, where
    g = rho^{-alpha} Im K_V(lambda; r, s) rho^{-alpha}. Both sides are taken over [-1, 1].
    """
    if order < 0:
        raise DomainError("integration-by-parts order must be >= 0")
    limit = ibp_max_order(grid.n, nu, _is_free(potential))
    if order > limit:
        raise DomainError(f"order {order} exceeds the {limit} low-frequency derivatives available at nu={nu}")
    if order == 0:
        return 0.0
    if pair is None:
        pair = (int(np.argmin(np.abs(grid.nodes - 1.0))), int(np.argmin(np.abs(grid.nodes - 2.0))))
    a, b = pair
    scale = (grid.rho[a] * grid.rho[b]) ** (-alpha)
    lams, weights = composite_gauss(np.linspace(0.0, 1.0, panels + 1), 16)
    g = np.array([_pair_derivatives(grid, nu, lam, potential, a, b, order) for lam in lams]).T * scale
    chi = [cutoff.derivative(lams, m) for m in range(order + 1)]
    product = [sum(math.comb(j, i) * chi[i] * g[j - i] for i in range(j + 1)) for j in range(order + 1)]
    integrand = sum(c * lams ** (-p) * product[j] for (p, j), c in ibp_terms(order).items())
    phase = np.exp(1j * t * lams**2)
    before = 2.0 * np.sum(weights * phase * lams * chi[0] * g[0])
    after = 2.0 * (-0.5j / t) ** order * np.sum(weights * phase * integrand)
    defect = float(abs(before - after) / abs(before))
    logger.debug("IBP order %d at t=%g: defect %.2e", order, t, defect)
    return defect


# -------------------- DERIVATIVE CHECKS --------------------
def derivative_spot_check(
    grid: RadialGrid,
    nu: float,
    k: int,
    lam_range: Tuple[float, float],
    potential: Optional[PotentialSpec] = None,
    imaginary: bool = True,
    count: int = 20,
    seed: int = 0,
    threshold: float = 1e-6,
    name: str = "derivative",
) -> ScalarCheck:
    """Analytic d^k kernels against Richardson-extrapolated central differences of order k-1."""
    if k < 1:
        raise DomainError("derivative checks need k >= 1")
    if not _is_free(potential) and (k > 1 or not imaginary):
        raise DomainError("perturbed derivatives are checked for Im K_V with k = 1")

    def kernel(lam: float, order: int) -> np.ndarray:
        if not _is_free(potential):
            return perturbed_im_kernel(grid, nu, lam, potential, order).values
        if imaginary:
            return im_free_kernel(grid, nu, lam, order).values
        return free_kernel(grid, nu, lam, "+", order).values

    rng = np.random.default_rng(seed)
    lams = 10.0 ** rng.uniform(math.log10(lam_range[0]), math.log10(lam_range[1]), count)
    worst = 0.0
    for lam in lams:
        h = min(1e-4 * lam, 0.05 / grid.r_max)
        central = lambda step: (kernel(lam + step, k - 1) - kernel(lam - step, k - 1)) / (2.0 * step)
        estimate = (4.0 * central(0.5 * h) - central(h)) / 3.0
        exact = kernel(lam, k)
        worst = max(worst, float(np.max(np.abs(estimate - exact)) / np.max(np.abs(exact))))
    return ScalarCheck(name, worst, threshold)


def refinement_delta(
    make_scan: Callable[[RadialGrid], NormScan],
    grid: RadialGrid,
    limit: float = 0.02,
    name: str = "refinement",
) -> ScalarCheck:
    """Change of a fitted exponent when the grid node count doubles."""
    coarse = make_scan(grid).fit.slope
    fine = make_scan(grid.refined()).fit.slope
    return ScalarCheck(name, abs(fine - coarse), limit)
