"""
suite.py

Defines and registers the verification cells run by `cli verify`.

Each cell is a named, self-contained experiment with fixed geometry that returns one or more
reports (`NormScan`, `DecayReport` or `ScalarCheck`):
- weber_oracle, euclidean_recovery, green_residual, wronskian
- lap, im_lowfreq, birman_schwinger
- decay_odd, decay_even, s_operator, jost_fredholm, free_l1l2
- pointwise, lq, ibp, weyl, plancherel, derivatives

Tolerances come from the experiment config (`tol.*`); geometry is part of the cell.
"""

# -------------------- IMPORTS --------------------
# Standard Library
import math
import logging
from typing import Callable, Dict, List, Union

# Third-Party Libraries
import numpy as np

# Internal Modules
from errors import BesselOverflowError, ConfigurationError
from freeres import ModeFunction, RadialGrid, build_grid, green_residual, plancherel_defect
from linkspec import build_spectrum, weyl_check
from perturbres import (
    birman_schwinger,
    fredholm_indicator,
    jost_grid,
    jost_rmax,
    jost_solutions,
    modified_wronskian,
    neumann_threshold,
    perturbed_kernel,
)
from potentials import load_potential
from propagate import (
    ModePropagator,
    cone_free_kernel,
    euclidean_free_kernel,
    gaussian_bump,
    heat_quadrature_check,
    s_operator_entry,
    s_operator_limit,
    s_operator_norm,
    weber_apply,
)
from schemas import CircleLink, ExperimentConfig, SphereLink
from specfun import wronskian_check
from oracle import REFERENCE_ORDERS
from verify import (
    DecayReport,
    NormScan,
    ScalarCheck,
    decay_fit,
    derivative_spot_check,
    free_l1l2_linf_l2,
    ibp_consistency,
    ibp_max_order,
    ibp_order,
    im_lowfreq_scan,
    lap_scan,
    lq_slice_scan,
    pointwise_bound_scan,
    refinement_delta,
    theorem_alpha,
)

logger = logging.getLogger(__name__)

Report = Union[NormScan, DecayReport, ScalarCheck]
Cell = Callable[[ExperimentConfig, int], List[Report]]

CIRCLE = CircleLink()
SPHERE = SphereLink(dim=2)
GLOBE = SphereLink(dim=3)
PROPAGATION_GRID = (12.0, 512)
LAP_GRID = (10.0, 1024)
LOWFREQ_GRID = (40.0, 512)
S_LIMIT_TOLERANCE = 1e-3 * (1.0 + 1e-6)
SPOT_CHECKS = 20
IBP_TIMES = (1.0, 5.0)


def _links(n: int):
    return {2: CIRCLE, 3: SPHERE, 4: GLOBE}[n]


def _bump_data(grid) -> ModeFunction:
    return ModeFunction.from_function(grid, gaussian_bump(3.0, 0.7))


def _relative_gap(values: np.ndarray, reference: np.ndarray) -> float:
    return float(np.max(np.abs(values - reference)) / np.max(np.abs(reference)))


# -------------------- ORACLE CELLS --------------------
def weber_oracle(config: ExperimentConfig, seed: int) -> List[Report]:
    """Spectral-measure propagation against Weber's closed form on 64 radii in [0.1, 10]."""
    grid = build_grid(3, *PROPAGATION_GRID)
    f = _bump_data(grid)
    r_out = np.linspace(0.1, 10.0, 64)
    worst = 0.0
    for nu in (0.5, 1.0, 1.5, 2.0, 3.5):
        propagator = ModePropagator(grid, nu, f, None, r_out, config.tol.quadrature)
        for t in (0.5, 1.0, 2.0, 5.0):
            worst = max(worst, _relative_gap(propagator.evaluate(t), weber_apply(3, nu, t, r_out, f)))
    return [ScalarCheck("weber_oracle", worst, 1e-6)]


def euclidean_recovery(config: ExperimentConfig, seed: int) -> List[Report]:
    """Mode-summed free kernel over S^2 at coincident angles against the R^3 kernel."""
    spectrum = build_spectrum(SPHERE, 3, 40)
    theta = np.array([0.7, 1.1])
    r1 = np.linspace(0.3, 1.9, 10)
    r2 = 2.0 - 0.5 * r1
    worst = 0.0
    for a, b in zip(r1, r2):
        cone = cone_free_kernel(spectrum, 1.0, a, b, theta, theta)
        flat = complex(euclidean_free_kernel(3, 1.0, abs(a - b)))
        worst = max(worst, abs(cone - flat) / abs(flat))
    return [ScalarCheck("euclidean_recovery", worst, 1e-3)]


def green_residuals(config: ExperimentConfig, seed: int) -> List[Report]:
    """(L + lambda^2) K_0 f + f on interior nodes for the first three orders of n = 2, 3, 4."""
    worst = 0.0
    for n in (2, 3, 4):
        spectrum = build_spectrum(_links(n), n, 3)
        for nu in spectrum.nu_levels:
            for lam in (0.5, 2.0, 10.0):
                worst = max(worst, green_residual(n, float(nu), lam))
    return [ScalarCheck("green_residual", worst, 1e-3)]


def wronskians(config: ExperimentConfig, seed: int) -> List[Report]:
    """H1/J Wronskian against -2i/(pi x) over the reference orders and x in [1e-3, 1e3]."""
    x = np.logspace(-3.0, 3.0, 61)
    worst = 0.0
    skipped = 0
    for nu in REFERENCE_ORDERS:
        for point in x:
            try:
                identity = -2j / (math.pi * point)
                worst = max(worst, abs(complex(wronskian_check(nu, point)) - identity) / abs(identity))
            except BesselOverflowError:
                skipped += 1
    if skipped:
        logger.info("wronskian: %d (nu, x) points overflow and were skipped", skipped)
    return [ScalarCheck("wronskian", worst, 1e-8)]


# -------------------- RESOLVENT CELLS --------------------
def _refinement(config: ExperimentConfig, make_scan: Callable[[RadialGrid], NormScan], grid, name: str) -> List[Report]:
    """Slope change under grid doubling; only run when `verify.refine` is set."""
    if not config.verify.refine:
        return []
    return [refinement_delta(make_scan, grid, name=name)]


def lap(config: ExperimentConfig, seed: int) -> List[Report]:
    grid = build_grid(3, *LAP_GRID)
    tol, residual = config.tol.slope, config.tol.residual
    reports: List[Report] = [
        lap_scan(grid, nu, 1.0, 0, (1.0, 100.0), 12, None, tol, 1, residual, name=f"lap_free_nu{nu:g}") for nu in (0.5, 1.5)
    ]
    gaussian = load_potential("gaussian", a=0.5, w=1.0, sigma=3.0, grid=grid)
    reports.append(lap_scan(grid, 0.5, 1.0, 0, (1.0, 100.0), 12, gaussian, tol, 1, residual, name="lap_gaussian"))
    coarse = build_grid(3, 10.0, 512)
    for potential, name in ((None, "lap_refinement"), (gaussian, "lap_gaussian_refinement")):
        scan = lambda g, v=potential: lap_scan(g, 0.5, 1.0, 0, (1.0, 10.0), 8, v, tol, 1, residual)
        reports.extend(_refinement(config, scan, coarse, name))
    return reports


def im_lowfreq(config: ExperimentConfig, seed: int) -> List[Report]:
    """Free and perturbed low-frequency exponents for (n, k) = (3, 0), (3, 1), (4, 0)."""
    tol, residual = config.tol.lowfreq, config.tol.residual
    reports: List[Report] = []
    for n, k in ((3, 0), (3, 1), (4, 0)):
        grid = build_grid(n, *LOWFREQ_GRID)
        nu = build_spectrum(_links(n), n, 1).nu(0)
        gaussian = load_potential("gaussian", a=0.5, w=1.0, sigma=3.0, grid=grid)
        for potential, label in ((None, "im_lowfreq"), (gaussian, "im_lowfreq_gaussian")):
            reports.append(
                im_lowfreq_scan(grid, nu, 3.0, k, (1e-3, 1e-1), 12, potential, tol, 1, residual, name=f"{label}_n{n}_k{k}")
            )
    coarse = build_grid(3, 40.0, 256)
    gaussian = load_potential("gaussian", a=0.5, w=1.0, sigma=3.0, grid=coarse)
    scan = lambda g: im_lowfreq_scan(g, 0.5, 3.0, 0, (1e-3, 1e-1), 12, gaussian, tol, 1, residual)
    reports.extend(_refinement(config, scan, coarse, "im_lowfreq_gaussian_refinement"))
    return reports


def birman_schwinger_cell(config: ExperimentConfig, seed: int) -> List[Report]:
    """Finite series plus sandwiched remainder against the direct solve, M = ceil(n/4) and one more."""
    grid = build_grid(3, 20.0, 256)
    potentials = (
        load_potential("gaussian", a=0.5, w=1.0, sigma=3.0, grid=grid),
        load_potential("polywell", a=0.5, sigma=3.0, grid=grid),
    )
    m0 = math.ceil(grid.n / 4)
    worst = 0.0
    for potential in potentials:
        for lam in (0.1, 1.0, 10.0):
            direct = perturbed_kernel(grid, 0.5, lam, "+", potential).values
            for m in (m0, m0 + 1):
                series, remainder = birman_schwinger(grid, 0.5, lam, "+", potential, m)
                worst = max(worst, _relative_gap(series.values + remainder.values, direct))
    return [ScalarCheck("birman_schwinger", worst, 1e-8)]


# -------------------- DISPERSIVE CELLS --------------------
def _decay_cell(config: ExperimentConfig, link, n: int, label: str, potentials) -> List[Report]:
    spectrum = build_spectrum(link, n, 1)
    grid = build_grid(n, *PROPAGATION_GRID)
    f = _bump_data(grid)
    alpha = config.weights.alpha if config.weights.alpha is not None else theorem_alpha(n)
    tol = config.tol.slope if n % 2 else 0.05
    reports: List[Report] = []
    for potential in potentials:
        v = None if potential is None else load_potential(*potential, grid=grid)
        name = f"{label}_{'free' if v is None else v.name}"
        reports.append(
            decay_fit(
                spectrum, 0, f, (10.0, 100.0), 12, v, alpha, None, tol, config.tol.quadrature, 1, config.tol.residual, name=name
            )
        )
    return reports


def decay_odd(config: ExperimentConfig, seed: int) -> List[Report]:
    return _decay_cell(config, SPHERE, 3, "decay_odd", (None, ("gaussian", 0.2, 1.0, 2.0, 3.0)))


def decay_even(config: ExperimentConfig, seed: int) -> List[Report]:
    return _decay_cell(config, CIRCLE, 2, "decay_even", (None,))


def s_operator(config: ExperimentConfig, seed: int) -> List[Report]:
    """S(x) at coincident angles: the x -> 0 limit, the error exponent and the uniform norm."""
    reports: List[Report] = []
    cases = ((CIRCLE, 2, 40, 0.3), (SPHERE, 3, 30, np.array([0.7, 1.1])))
    for link, n, levels, theta in cases:
        spectrum = build_spectrum(link, n, levels)
        limit = s_operator_limit(spectrum)
        value, _ = s_operator_entry(1e-3, spectrum, theta, theta)
        reports.append(ScalarCheck(f"s_limit_n{n}", abs(value - limit) / abs(limit), S_LIMIT_TOLERANCE))

        x = np.geomspace(1e-3, 1e-1, 12)
        errors = np.array([abs(s_operator_entry(point, spectrum, theta, theta)[0] - limit) for point in x])
        claim = min(2.0, float(spectrum.nu_levels[1]) - spectrum.delta)
        reports.append(NormScan(f"s_exponent_n{n}", x, errors, claim, 0.2, residual_limit=config.tol.residual))

        norms = [s_operator_norm(point, spectrum) for point in np.logspace(-3.0, 3.0, 25)]
        reports.append(ScalarCheck(f"s_norm_n{n}", max(norms), 1.0))
    return reports


def jost_fredholm(config: ExperimentConfig, seed: int) -> List[Report]:
    """Modified Wronskian constancy, the trivial indicator for V = 0 and the Neumann regime."""
    gaussian = load_potential("gaussian", a=0.5, w=1.0, sigma=3.0)
    pair = jost_solutions(3, 1.0, gaussian, jost_grid(jost_rmax(gaussian), step=5e-4))
    wronskian = modified_wronskian(pair)
    constancy = float(np.max(np.abs(wronskian - wronskian[0])) / abs(wronskian[0]))

    grid = build_grid(3, 20.0, 256)
    zero = load_potential("zero", grid=grid)
    trivial = max(abs(fredholm_indicator(grid, 0.5, lam, zero) - 1.0) for lam in (0.1, 1.0, 10.0))

    weak = load_potential("polywell", a=0.05, sigma=2.0, grid=grid)
    lams = np.geomspace(0.5, 50.0, 16)
    threshold = neumann_threshold(grid, 0.5, weak, lams)
    above = lams[lams >= threshold]
    smallest = min((fredholm_indicator(grid, 0.5, lam, weak) for lam in above), default=-math.inf)
    return [
        ScalarCheck("jost_wronskian", constancy, 1e-6),
        ScalarCheck("fredholm_free", trivial, 1e-12),
        ScalarCheck("neumann_indicator_gap", 1.0 - smallest, 0.5),
    ]


def free_l1l2(config: ExperimentConfig, seed: int) -> List[Report]:
    reports: List[Report] = []
    for link, n, modes in ((CIRCLE, 2, 5), (SPHERE, 3, 4)):
        spectrum = build_spectrum(link, n, 3)
        grid = build_grid(n, *PROPAGATION_GRID)
        coefficients = {
            j: ModeFunction.from_function(grid, gaussian_bump(2.0 + 0.5 * j, 0.7)) for j in range(modes)
        }
        reports.append(
            free_l1l2_linf_l2(
                spectrum, coefficients, (10.0, 100.0), 12, config.tol.slope, 1, config.tol.residual, name=f"free_l1l2_n{n}"
            )
        )
    return reports


# -------------------- SUPPLEMENTARY CELLS --------------------
def pointwise(config: ExperimentConfig, seed: int) -> List[Report]:
    grid = build_grid(3, *LOWFREQ_GRID)
    tol, residual = config.tol.lq, config.tol.residual
    steep = load_potential("gaussian", a=0.5, w=1.0, sigma=4.0, grid=grid)
    return [
        pointwise_bound_scan(grid, 0.5, None, theorem_alpha(3), 0, (1e-3, 1e-1), 12, tol, 1, residual, name="pointwise_free"),
        pointwise_bound_scan(grid, 0.5, steep, 2.0, 1, (1e-3, 1e-1), 12, tol, 1, residual, name="pointwise_gaussian_k1"),
    ]


def lq(config: ExperimentConfig, seed: int) -> List[Report]:
    tol, residual = config.tol.lq, config.tol.residual
    high = lq_slice_scan(build_grid(3, *LAP_GRID), 0.5, 2.0, 2.0, 0, (1.0, 100.0), 12, True, tol, 1, residual, "lq_im_high")
    low = lq_slice_scan(build_grid(2, *LOWFREQ_GRID), 0.0, 3.0, 2.0, 1, (1e-3, 1e-1), 12, False, tol, 1, residual, "lq_res_low")
    return [high, low]


def ibp(config: ExperimentConfig, seed: int) -> List[Report]:
    """Repeated integration by parts on the low-frequency piece, up to the order each kernel allows."""
    grid = build_grid(3, 10.0, 128)
    gaussian = load_potential("gaussian", a=0.5, w=1.0, sigma=3.0, grid=grid)
    reports: List[Report] = []
    for nu, potential in ((0.5, None), (1.5, None), (3.5, None), (1.5, gaussian)):
        top = min(ibp_order(grid.n), ibp_max_order(grid.n, nu, potential is None))
        worst = max(ibp_consistency(grid, nu, t, order, potential) for order in range(1, top + 1) for t in IBP_TIMES)
        label = "free" if potential is None else potential.name
        reports.append(ScalarCheck(f"ibp_{label}_nu{nu:g}_order{top}", worst, 1e-6))
    return reports


def weyl(config: ExperimentConfig, seed: int) -> List[Report]:
    slope = weyl_check(build_spectrum(SPHERE, 3, 60))
    return [ScalarCheck("weyl", abs(slope - 0.5), 0.05)]


def plancherel(config: ExperimentConfig, seed: int) -> List[Report]:
    """Spectral density integrated over lambda recovers the data; also Weber's real-time-free form."""
    spectrum = build_spectrum(SPHERE, 3, 2)
    grid = build_grid(3, 12.0, 256)
    f = ModeFunction.from_function(grid, gaussian_bump(3.0, 0.7))
    defect = max(plancherel_defect(grid, spectrum, j, f) for j in (0, 1))
    heat = max(heat_quadrature_check(3, nu, 0.5, 1.0, 2.0) for nu in (0.5, 1.5, 3.5))
    return [ScalarCheck("plancherel", defect, 1e-3), ScalarCheck("heat_kernel", heat, 1e-8)]


def derivatives(config: ExperimentConfig, seed: int) -> List[Report]:
    """Analytic lambda-derivatives against extrapolated differences at seeded random lambda."""
    grid = build_grid(3, 10.0, 128)
    gaussian = load_potential("gaussian", a=0.5, w=1.0, sigma=3.0, grid=grid)
    tol = config.tol.derivative
    return [
        derivative_spot_check(grid, 0.5, 1, (0.5, 5.0), None, True, SPOT_CHECKS, seed, tol, "derivative_im_k1"),
        derivative_spot_check(grid, 1.5, 2, (0.5, 5.0), None, False, SPOT_CHECKS, seed, tol, "derivative_res_k2"),
        derivative_spot_check(grid, 0.5, 1, (0.5, 5.0), gaussian, True, SPOT_CHECKS, seed, tol, "derivative_perturbed_k1"),
    ]


# -------------------- REGISTRY --------------------
def get_suite_members() -> List[Dict[str, object]]:
    """
    Returns the registered verification cells in run order.

    Each dictionary includes:
    - name (str): The cell name accepted by `verify.checks`.
    - description (str): What the cell measures.
    - run (Cell): Callable taking (config, seed) and returning a list of reports.
    """
    return [
        {"name": "weber_oracle", "description": "Mode propagator against Weber's closed form.", "run": weber_oracle},
        {"name": "euclidean_recovery", "description": "S^2 cone kernel against the R^3 kernel.", "run": euclidean_recovery},
        {"name": "green_residual", "description": "Radial Green's identity residual.", "run": green_residuals},
        {"name": "wronskian", "description": "Bessel J/Y Wronskian over the test grid.", "run": wronskians},
        {"name": "lap", "description": "Limiting absorption slope -1 at high lambda.", "run": lap},
        {"name": "im_lowfreq", "description": "Low-frequency exponent n-2-k of Im R.", "run": im_lowfreq},
        {"name": "birman_schwinger", "description": "Finite expansion plus remainder equals R_V.", "run": birman_schwinger_cell},
        {"name": "decay_odd", "description": "t^{-3/2} decay on the cone over S^2.", "run": decay_odd},
        {"name": "decay_even", "description": "Decay on the cone over the circle.", "run": decay_even},
        {"name": "s_operator", "description": "S(x) limit, error exponent and norm bound.", "run": s_operator},
        {"name": "jost_fredholm", "description": "Jost Wronskian and Fredholm indicators.", "run": jost_fredholm},
        {"name": "free_l1l2", "description": "Free L^1(L^2) -> L^inf(L^2) decay.", "run": free_l1l2},
        {"name": "pointwise", "description": "Weighted pointwise bounds on Im K_V.", "run": pointwise},
        {"name": "lq", "description": "L^{q,sigma} slice exponents.", "run": lq},
        {"name": "ibp", "description": "Integration-by-parts bookkeeping.", "run": ibp},
        {"name": "weyl", "description": "Weyl growth of the S^2 spectrum.", "run": weyl},
        {"name": "plancherel", "description": "Spectral-density completeness and heat kernel.", "run": plancherel},
        {"name": "derivatives", "description": "Analytic lambda-derivatives against differences.", "run": derivatives},
    ]


def select_members(checks: List[str]) -> List[Dict[str, object]]:
    """Filter the registry by `verify.checks`; "all" keeps every cell."""
    members = get_suite_members()
    if "all" in checks:
        return members
    known = {member["name"] for member in members}
    unknown = [check for check in checks if check not in known]
    if unknown:
        raise ConfigurationError(f"unknown verification checks {unknown}; choose from {sorted(known)}")
    return [member for member in members if member["name"] in checks]
