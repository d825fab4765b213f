"""
freeres.py

Free radial resolvent kernels on a truncated half-line grid.

- `build_grid`: composite Gauss-Legendre panels, geometrically refined toward r = 0, with
  weights that already contain the measure factor r^{n-1}.
- `free_kernel`: R_0(lambda +- i0; r, s) = (+-pi i / 2)(rs)^{-(n-2)/2} J_nu(lambda r_<) H_nu(lambda r_>)
  and its lambda-derivatives; negative lambda through R_0(lambda + i0) = R_0(-lambda - i0).
- `im_free_kernel`: (pi/2)(rs)^{-(n-2)/2} J_nu(lambda r) J_nu(lambda s) and its derivatives.
- `apply_kernel`: u(r_a) = sum_b K(a, b) f(s_b) w_b, with an O(N) prefix-sum path.
- `spectral_density`: (lambda/pi) Im R_0 per mode.
- `green_residual`, `plancherel_defect`: independent correctness checks.

Kernel convention: an operator with kernel K acts as (K f)(r_a) = sum_b K(a, b) w_b f(s_b),
so the identity operator has kernel diag(1 / w).
"""

# -------------------- IMPORTS --------------------
# Standard Library
import math
import logging
from dataclasses import dataclass, field
from typing import Callable, Dict, Iterable, List, Literal, Optional, Sequence

# Third-Party Libraries
import numpy as np

# Internal Modules
from errors import DomainError
from linkspec import LinkSpectrum
from specfun import MAX_DERIVATIVE, radial_factor
from utils import composite_gauss, rho

logger = logging.getLogger(__name__)

KernelSign = Literal["+", "-", "im", "density", "static", "identity"]

GEOMETRIC_LEVELS = 8


# -------------------- TYPES --------------------
@dataclass(frozen=True, eq=False)
class RadialGrid:
    """Quadrature for integral_0^{r_max} g(r) r^{n-1} dr."""

    n: int
    nodes: np.ndarray
    weights: np.ndarray
    edges: np.ndarray
    r_max: float
    order: int
    scheme: str

    @property
    def size(self) -> int:
        return int(self.nodes.size)

    @property
    def delta(self) -> float:
        return 0.5 * (self.n - 2)

    @property
    def rho(self) -> np.ndarray:
        return rho(self.nodes)

    @property
    def sqrt_weights(self) -> np.ndarray:
        return np.sqrt(self.weights)

    def refined(self, factor: int = 2) -> "RadialGrid":
        return build_grid(self.n, self.r_max, self.size * factor, self.scheme, self.order)

    def same_as(self, other: "RadialGrid") -> bool:
        return self is other or (
            self.n == other.n and self.size == other.size and np.array_equal(self.nodes, other.nodes)
        )


@dataclass(frozen=True, eq=False)
class KernelMatrix:
    """Kernel sampled on grid x grid at fixed (nu, lambda); entry (a, b) = K(r_a, s_b)."""

    nu: float
    lam: float
    sign: KernelSign
    values: np.ndarray
    grid: RadialGrid
    k: int = 0
    residual: Optional[float] = None
    factors: Optional[tuple] = field(default=None, repr=False)


@dataclass(frozen=True, eq=False)
class ModeFunction:
    """Radial profile f_j sampled on the grid nodes."""

    grid: RadialGrid
    values: np.ndarray

    @classmethod
    def from_function(cls, grid: RadialGrid, func: Callable[[np.ndarray], np.ndarray]) -> "ModeFunction":
        return cls(grid, np.asarray(func(grid.nodes), dtype=complex))

    def norm(self) -> float:
        """L^2(r^{n-1} dr) norm."""
        return float(np.sqrt(np.sum(self.grid.weights * np.abs(self.values) ** 2)))

    def weighted_l1(self, alpha: float = 0.0) -> float:
        """||rho^alpha f||_{L^1(r^{n-1} dr)}."""
        return float(np.sum(self.grid.weights * self.grid.rho**alpha * np.abs(self.values)))

    def __add__(self, other: "ModeFunction") -> "ModeFunction":
        _require_same_grid(self.grid, other.grid)
        return ModeFunction(self.grid, self.values + other.values)

    def __rmul__(self, scalar: complex) -> "ModeFunction":
        return ModeFunction(self.grid, scalar * self.values)


def _require_same_grid(a: RadialGrid, b: RadialGrid) -> None:
    if not a.same_as(b):
        raise DomainError("kernel and mode function live on different grids")


# -------------------- GRID --------------------
def build_grid(n: int, r_max: float, count: int, scheme: str = "geometric", order: int = 16) -> RadialGrid:
    """
    Composite Gauss-Legendre grid on (0, r_max].

    With the geometric scheme the first uniform panel [0, h] is split into panels with
    ratio 2 so the r^nu behaviour near the origin is resolved.
    """
    if r_max <= 0:
        raise DomainError("r_max must be positive")
    if count < 16:
        raise DomainError("a radial grid needs at least 16 nodes")
    if n < 2:
        raise DomainError("cone dimension n must be >= 2")
    panels = math.ceil(count / order)
    if scheme == "geometric":
        levels = min(GEOMETRIC_LEVELS, panels // 2)
        h = r_max / (panels - levels)
        inner = h * 2.0 ** -np.arange(levels, -1, -1)
        outer = h * np.arange(2, panels - levels + 1)
        edges = np.concatenate(([0.0], inner, outer))
        edges[-1] = r_max
    elif scheme == "uniform":
        edges = np.linspace(0.0, r_max, panels + 1)
    else:
        raise DomainError(f"unknown grid scheme {scheme!r}")
    nodes, base = composite_gauss(edges, order)
    weights = base * nodes ** (n - 1)
    for array in (nodes, weights, edges):
        array.setflags(write=False)
    logger.debug("grid n=%d r_max=%g: %d panels, %d nodes", n, r_max, edges.size - 1, nodes.size)
    return RadialGrid(n=n, nodes=nodes, weights=weights, edges=edges, r_max=float(r_max), order=order, scheme=scheme)


# -------------------- FREE KERNELS --------------------
def _prefactor(sign: str) -> complex:
    return 0.5j * math.pi if sign == "+" else -0.5j * math.pi


def _hankel(sign: str) -> str:
    return "H1" if sign == "+" else "H2"


def _check_kernel_args(nu: float, lam: float, k: int) -> None:
    if lam == 0:
        raise DomainError("lambda = 0 is not on the continuous spectrum")
    if nu < 0:
        raise DomainError("Bessel order must be >= 0")
    if not 0 <= k <= MAX_DERIVATIVE:
        raise DomainError(f"derivative order must lie in [0, {MAX_DERIVATIVE}]")


def _split_factors(grid_nodes: np.ndarray, nu: float, lam: float, sign: str, k: int, delta: float):
    jf = [radial_factor("J", nu, lam, grid_nodes, m, delta) for m in range(k + 1)]
    hf = [radial_factor(_hankel(sign), nu, lam, grid_nodes, m, delta) for m in range(k + 1)]
    return jf, hf


def free_kernel(grid: RadialGrid, nu: float, lam: float, sign: str = "+", k: int = 0) -> KernelMatrix:
    """
    d^k/dlambda^k R_0(lambda +- i0; r_a, s_b) on the grid.

    Args:
        grid (RadialGrid): Radial grid (nodes increasing).
        nu (float): Bessel order of the mode.
        lam (float): Nonzero real spectral parameter.
        sign (str): "+" for the outgoing, "-" for the incoming boundary value.
        k (int): lambda-derivative order, at most 8.

    Returns:
        KernelMatrix: Dense complex symmetric matrix.
    """
    _check_kernel_args(nu, lam, k)
    if sign not in ("+", "-"):
        raise DomainError(f"sign must be '+' or '-', got {sign!r}")
    if lam < 0:
        mirrored = free_kernel(grid, nu, -lam, "-" if sign == "+" else "+", k)
        return KernelMatrix(nu, lam, sign, (-1) ** k * mirrored.values, grid, k)

    jf, hf = _split_factors(grid.nodes, nu, lam, sign, k, grid.delta)
    index = np.arange(grid.size)
    lo = np.minimum.outer(index, index)
    hi = np.maximum.outer(index, index)
    values = np.zeros((grid.size, grid.size), dtype=complex)
    for m in range(k + 1):
        values += math.comb(k, m) * jf[m][lo] * hf[k - m][hi]
    pref = _prefactor(sign)
    values *= pref
    factors = (jf[0], hf[0], pref) if k == 0 else None
    return KernelMatrix(nu, lam, sign, values, grid, k, factors=factors)


def free_kernel_rows(grid: RadialGrid, nu: float, lam: float, r_out: np.ndarray, sign: str = "+") -> np.ndarray:
    """R_0(lambda +- i0; r, s_b) for arbitrary r (rows) against the grid nodes (columns), lambda > 0."""
    _check_kernel_args(nu, lam, 0)
    r_out = np.asarray(r_out, dtype=float)
    lo = np.minimum.outer(r_out, grid.nodes)
    hi = np.maximum.outer(r_out, grid.nodes)
    return _prefactor(sign) * radial_factor("J", nu, lam, lo, 0, grid.delta) * radial_factor(
        _hankel(sign), nu, lam, hi, 0, grid.delta
    )


def im_factors(grid_nodes: np.ndarray, nu: float, lam: float, k: int, delta: float) -> List[np.ndarray]:
    """A_m = d^m/dlambda^m [r^{-delta} J_nu(lambda r)] for m = 0..k (lambda > 0)."""
    return [radial_factor("J", nu, lam, grid_nodes, m, delta) for m in range(k + 1)]


def im_free_kernel(grid: RadialGrid, nu: float, lam: float, k: int = 0) -> KernelMatrix:
    """d^k/dlambda^k Im R_0(lambda + i0); real, symmetric, odd in lambda."""
    _check_kernel_args(nu, lam, k)
    if lam < 0:
        mirrored = im_free_kernel(grid, nu, -lam, k)
        return KernelMatrix(nu, lam, "im", (-1) ** (k + 1) * mirrored.values, grid, k)
    factors = im_factors(grid.nodes, nu, lam, k, grid.delta)
    values = np.zeros((grid.size, grid.size))
    for m in range(k + 1):
        values += math.comb(k, m) * np.outer(factors[m], factors[k - m])
    values *= 0.5 * math.pi
    return KernelMatrix(nu, lam, "im", values, grid, k)


def identity_kernel(grid: RadialGrid) -> KernelMatrix:
    return KernelMatrix(0.0, 0.0, "identity", np.diag(1.0 / grid.weights).astype(complex), grid)


def static_kernel(grid: RadialGrid, nu: float) -> KernelMatrix:
    """lambda -> 0 limit of R_0: (rs)^{-(n-2)/2} (r_< / r_>)^nu / (2 nu), nu > 0."""
    if nu <= 0:
        raise DomainError("the zero-energy kernel needs nu > 0")
    r = grid.nodes
    below = r ** (nu - grid.delta)
    above = r ** (-nu - grid.delta)
    index = np.arange(grid.size)
    values = below[np.minimum.outer(index, index)] * above[np.maximum.outer(index, index)] / (2.0 * nu)
    return KernelMatrix(nu, 0.0, "static", values, grid)


# -------------------- APPLICATION --------------------
def apply_kernel(kernel: KernelMatrix, f: ModeFunction, method: str = "fast") -> ModeFunction:
    """
    u(r_a) = sum_b K(a, b) f(s_b) w_b.

    The fast path uses the split structure of k = 0 outgoing/incoming kernels: prefix sums of
    J-weighted data below the diagonal and suffix sums of H-weighted data above it.
    """
    _require_same_grid(kernel.grid, f.grid)
    wf = f.grid.weights * f.values
    if method == "fast" and kernel.factors is not None:
        jv, hv, pref = kernel.factors
        below = np.cumsum(jv * wf)
        above = np.cumsum((hv * wf)[::-1])[::-1]
        above = np.concatenate((above[1:], [0.0]))
        return ModeFunction(f.grid, pref * (hv * below + jv * above))
    if method not in ("fast", "dense"):
        raise DomainError(f"unknown application method {method!r}")
    return ModeFunction(f.grid, kernel.values @ wf)


def weighted_operator(values: np.ndarray, grid: RadialGrid, sigma_out: float, sigma_in: float) -> np.ndarray:
    """diag(rho^{-sigma_out} sqrt(w)) K diag(rho^{-sigma_in} sqrt(w)): the L^{2,sigma_in} -> L^{2,-sigma_out} matrix."""
    left = grid.rho ** (-sigma_out) * grid.sqrt_weights
    right = grid.rho ** (-sigma_in) * grid.sqrt_weights
    return left[:, None] * values * right[None, :]


# -------------------- SPECTRAL DENSITY --------------------
def spectral_density(grid: RadialGrid, spectrum: LinkSpectrum, lam: float, j_set: Iterable[int]) -> List[KernelMatrix]:
    """(lambda / pi) Im R_0(lambda + i0) for each flattened mode in `j_set`; modes sharing nu share work."""
    if lam <= 0:
        raise DomainError("the spectral density is sampled at lambda > 0")
    if spectrum.n != grid.n:
        raise DomainError("grid and link spectrum disagree on the cone dimension")
    cache: Dict[float, KernelMatrix] = {}
    densities = []
    for j in j_set:
        nu = spectrum.nu(j)
        if nu not in cache:
            im = im_free_kernel(grid, nu, lam)
            cache[nu] = KernelMatrix(nu, lam, "density", im.values * (lam / math.pi), grid)
        densities.append(cache[nu])
    return densities


def plancherel_defect(
    grid: RadialGrid,
    spectrum: LinkSpectrum,
    j: int,
    f: ModeFunction,
    lam_max: float = 24.0,
    panels: int = 96,
) -> float:
    """Relative defect of f = integral over the real line of dPi(lambda) f, folded onto lambda > 0."""
    _require_same_grid(grid, f.grid)
    edges = np.linspace(0.0, lam_max, panels + 1)
    lams, weights = composite_gauss(edges, 16)
    wf = grid.weights * f.values
    total = np.zeros(grid.size, dtype=complex)
    for lam, weight in zip(lams, weights):
        density = spectral_density(grid, spectrum, lam, [j])[0]
        total += 2.0 * weight * (density.values @ wf)
    return ModeFunction(grid, total - f.values).norm() / f.norm()


# -------------------- GREEN'S IDENTITY --------------------
def mollifier(r: np.ndarray, lo: float, hi: float) -> np.ndarray:
    """C-infinity bump exp(-1/(1-y^2)) on (lo, hi), y the affine coordinate on [-1, 1]."""
    y = (2.0 * np.asarray(r, dtype=float) - (lo + hi)) / (hi - lo)
    out = np.zeros_like(y)
    inside = np.abs(y) < 1
    out[inside] = np.exp(-1.0 / (1.0 - y[inside] ** 2))
    return out


def green_residual(
    n: int,
    nu: float,
    lam: float,
    support: Sequence[float] = (1.0, 4.0),
    f: Optional[Callable[[np.ndarray], np.ndarray]] = None,
    step: Optional[float] = None,
) -> float:
    """
    ||(L + lambda^2)(R_0 f) + f|| / ||f|| on interior mesh points, where
    L = d^2/dr^2 + (n-1)/r d/dr - mu^2/r^2 and mu^2 = nu^2 - ((n-2)/2)^2.

    R_0 f is `apply_kernel` of the outgoing kernel on a uniform one-point-per-panel grid, where
    the split sums are trapezoidal rules with an even error expansion in the spacing; one
    Richardson step against the grid three times finer removes the h^2 term. L is applied by
    fourth-order central differences on the coarse nodes.
    """
    lo, hi = support
    if lo <= 0.5:
        raise DomainError("the test support must stay away from r = 0")
    if f is None:
        f = lambda r: mollifier(r, lo, hi)
    delta = 0.5 * (n - 2)
    mu2 = nu * nu - delta * delta
    h = step if step is not None else min(0.01, 0.1 / abs(lam))
    count = math.ceil((hi + 0.5) / h) + 3

    def outgoing(refine: int) -> ModeFunction:
        grid = build_grid(n, count * h, refine * count, "uniform", order=1)
        return apply_kernel(free_kernel(grid, nu, lam, "+"), ModeFunction.from_function(grid, f), "fast")

    coarse = outgoing(1)
    u = (9.0 * outgoing(3).values[1::3] - coarse.values) / 8.0
    r = coarse.grid.nodes

    d2 = (-u[4:] + 16 * u[3:-1] - 30 * u[2:-2] + 16 * u[1:-3] - u[:-4]) / (12 * h * h)
    d1 = (-u[4:] + 8 * u[3:-1] - 8 * u[1:-3] + u[:-4]) / (12 * h)
    ri = r[2:-2]
    inside = (ri >= lo - 0.5) & (ri <= hi + 0.5)
    source = f(ri)
    residual = d2 + (n - 1) / ri * d1 - mu2 / ri**2 * u[2:-2] + lam**2 * u[2:-2] + source
    value = float(np.linalg.norm(residual[inside]) / np.linalg.norm(source[inside]))
    logger.debug("Green residual n=%d nu=%g lambda=%g: %.2e", n, nu, lam, value)
    return value

