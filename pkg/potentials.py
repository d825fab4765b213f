"""
potentials.py

Built-in radial potential families and their certified decay envelopes.

- zero:      V = 0
- gaussian:  V(r) = a exp(-(r/w)^2)
- polywell:  V(r) = -a (1+r)^{-2 sigma}
- bump:      V(r) = a * mollifier on [r0 - w, r0 + w]

Every potential carries (sigma, A) with |V(r)| (1+r)^{2 sigma} <= A, checked by sampling the
grid nodes and a 10x oversampled uniform mesh.
"""

# -------------------- IMPORTS --------------------
# Standard Library
import logging
from typing import Callable, Optional

# Third-Party Libraries
import numpy as np

# Internal Modules
from errors import DomainError
from freeres import RadialGrid, mollifier
from schemas import PotentialConfig, PotentialSpec
from utils import rho

logger = logging.getLogger(__name__)

FAMILIES = ("zero", "gaussian", "polywell", "bump")
DEFAULT_REACH = 40.0


def certify_bound(
    evaluator: Callable[[np.ndarray], np.ndarray],
    sigma: float,
    nodes: Optional[np.ndarray] = None,
    reach: float = DEFAULT_REACH,
    oversample: int = 10,
) -> float:
    """Sampled sup of |V(r)| (1+r)^{2 sigma} over the nodes and a 10x finer uniform mesh."""
    if nodes is None:
        nodes = np.linspace(0.0, reach, 1001)
    nodes = np.asarray(nodes, dtype=float)
    fine = np.linspace(0.0, max(reach, float(nodes.max())), oversample * nodes.size + 1)
    samples = np.concatenate((nodes, fine))
    envelope = np.abs(evaluator(samples)) * rho(samples) ** (2.0 * sigma)
    if not np.all(np.isfinite(envelope)):
        raise DomainError("potential envelope is not finite on the sampled range")
    return float(envelope.max()) * (1.0 + 1e-12)


def load_potential(
    family: str,
    a: float = 0.5,
    w: float = 1.0,
    r0: float = 2.0,
    sigma: float = 3.0,
    grid: Optional[RadialGrid] = None,
) -> PotentialSpec:
    """Build a named potential family with its certified envelope."""
    if family == "zero":
        evaluator = lambda r: np.zeros_like(r)
        params = {}
    elif family == "gaussian":
        if w <= 0:
            raise DomainError("gaussian width must be positive")
        evaluator = lambda r: a * np.exp(-((r / w) ** 2))
        params = {"a": a, "w": w}
    elif family == "polywell":
        evaluator = lambda r: -a * rho(r) ** (-2.0 * sigma)
        params = {"a": a}
    elif family == "bump":
        evaluator = lambda r: a * mollifier(r, r0 - w, r0 + w)
        params = {"a": a, "r0": r0, "w": w}
    else:
        raise DomainError(f"unknown potential family {family!r}; choose from {FAMILIES}")

    nodes = grid.nodes if grid is not None else None
    reach = grid.r_max if grid is not None else DEFAULT_REACH
    bound = 0.0 if family == "zero" or a == 0 else certify_bound(evaluator, sigma, nodes, reach)
    logger.debug("potential %s%s: sigma=%g, A=%.3e", family, params, sigma, bound)
    return PotentialSpec(name=family, params=params, sigma=sigma, bound=bound, evaluator=evaluator)


def potential_from_config(config: PotentialConfig, grid: Optional[RadialGrid] = None) -> PotentialSpec:
    return load_potential(config.family, config.a, config.w, config.r0, config.sigma, grid)


def scaled(potential: PotentialSpec, factor: float) -> PotentialSpec:
    """factor * V with the envelope constant scaled accordingly."""
    base = potential.evaluator
    params = {**potential.params, "scale": factor}
    return PotentialSpec(
        name=potential.name,
        params=params,
        sigma=potential.sigma,
        bound=abs(factor) * potential.bound,
        evaluator=lambda r: factor * base(r),
    )
