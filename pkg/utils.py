"""
utils.py

Numerical and orchestration helpers shared across the package:
- Gauss-Legendre rules (single and composite panels).
- Log-log exponent fits with residual and 95% confidence half-width.
- Config hashing for CSV provenance headers.
- `run_parallel`: ordered fan-out of independent work items over a bounded thread pool.
"""

# -------------------- IMPORTS --------------------
# Standard Library
import os
import asyncio
import hashlib
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, Iterable, List, Sequence, TypeVar

# Third-Party Libraries
import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy import stats

# Async Utilities
from asgiref.sync import sync_to_async

logger = logging.getLogger(__name__)

T = TypeVar("T")
R = TypeVar("R")


# -------------------- QUADRATURE --------------------
@lru_cache(maxsize=32)
def gauss_legendre(order: int) -> tuple[np.ndarray, np.ndarray]:
    """Gauss-Legendre nodes and weights on [-1, 1]."""
    nodes, weights = leggauss(order)
    nodes.setflags(write=False)
    weights.setflags(write=False)
    return nodes, weights


def composite_gauss(edges: Sequence[float], order: int) -> tuple[np.ndarray, np.ndarray]:
    """
    Composite Gauss-Legendre rule on consecutive panels.

    Args:
        edges (Sequence[float]): Increasing panel boundaries.
        order (int): Points per panel.

    Returns:
        tuple[np.ndarray, np.ndarray]: Nodes (increasing) and weights for plain dx.
    """
    edges = np.asarray(edges, dtype=float)
    x, w = gauss_legendre(order)
    half = 0.5 * np.diff(edges)
    mid = 0.5 * (edges[1:] + edges[:-1])
    nodes = (mid[:, None] + half[:, None] * x[None, :]).ravel()
    weights = (half[:, None] * w[None, :]).ravel()
    return nodes, weights


def rho(r: np.ndarray) -> np.ndarray:
    """Weight function rho(r) = 1 + r."""
    return 1.0 + np.asarray(r, dtype=float)


# -------------------- FITS --------------------
@dataclass(frozen=True)
class LogLogFit:
    slope: float
    intercept: float
    residual: float
    ci95: float
    points: int


def loglog_fit(x: Sequence[float], y: Sequence[float]) -> LogLogFit:
    """
    Least-squares fit of log10(y) against log10(x).

    The residual is the RMS deviation of the data from the fitted line in log10 units;
    `ci95` is the 95% confidence half-width of the slope.
    """
    lx = np.log10(np.asarray(x, dtype=float))
    ly = np.log10(np.asarray(y, dtype=float))
    if lx.size < 3:
        raise ValueError("a log-log fit needs at least three samples")
    result = stats.linregress(lx, ly)
    resid = ly - (result.intercept + result.slope * lx)
    rms = float(np.sqrt(np.mean(resid**2)))
    half_width = float(stats.t.ppf(0.975, lx.size - 2) * result.stderr)
    return LogLogFit(float(result.slope), float(result.intercept), rms, half_width, int(lx.size))


# -------------------- PROVENANCE --------------------
def config_hash(payload: str) -> str:
    """Short SHA-256 digest of a canonical config serialization."""
    return hashlib.sha256(payload.encode("utf-8")).hexdigest()[:16]


# -------------------- PARALLEL FAN-OUT --------------------
def default_jobs() -> int:
    return max(1, int(os.environ.get("CONE_JOBS", "1")))


async def _gather_ordered(func: Callable[[T], R], items: List[T], jobs: int) -> List[R]:
    with ThreadPoolExecutor(max_workers=jobs) as executor:
        worker = sync_to_async(func, thread_sensitive=False, executor=executor)
        return await asyncio.gather(*[worker(item) for item in items])


def run_parallel(func: Callable[[T], R], items: Iterable[T], jobs: int | None = None) -> List[R]:
    """
    Apply `func` to every item, concurrently when `jobs > 1`.

    Results come back in input order, so downstream reductions are deterministic.
    """
    items = list(items)
    jobs = default_jobs() if jobs is None else max(1, int(jobs))
    if jobs == 1 or len(items) <= 1:
        return [func(item) for item in items]
    logger.debug("fanning out %d items over %d workers", len(items), jobs)
    return asyncio.run(_gather_ordered(func, items, min(jobs, len(items))))
