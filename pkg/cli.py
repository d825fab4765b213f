"""
cli.py

Command-line entry point for the cone resolvent and propagator toolkit.
This file loads environment settings and the experiment config, runs one subcommand,
writes CSV reports and translates library exceptions into exit codes.

Subcommands:
- spectrum:  link eigenvalue levels, multiplicities and Bessel orders
- resolvent: free/perturbed kernels, Birman-Schwinger defect and a Fredholm scan
- propagate: one-mode or full-cone Schrodinger evolution at time.t
- verify:    the registered verification cells (see suite.py)
- selftest:  Bessel oracle table, Wronskian grid, grid-weight exactness and versions

Exit codes: 0 pass, 1 verification failure, 2 configuration error, 3 numerical failure.

Run `python cli.py verify --config configs/default.conf --jobs 4`.
"""

# -------------------- IMPORTS --------------------
# Standard Library
import os
import sys
import math
import logging
import argparse
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Dict, List, Optional, Sequence

# Third-Party Libraries
import numpy as np
import pandas as pd
from pydantic import ValidationError

# Environment & Configuration
from dotenv import load_dotenv

# Internal Modules
from check_versions import EXPECTED_VERSIONS, format_versions, installed_versions
from data_loader import kernel_frame, load_config, load_link, load_reference_table, write_csv
from errors import BesselOverflowError, ConfigurationError, DomainError, NumericalFailure
from freeres import ModeFunction, build_grid, free_kernel
from linkspec import LinkSpectrum, build_spectrum, weyl_check
from oracle import build_reference_table, reference_triples
from perturbres import (
    birman_schwinger,
    fredholm_scan,
    negative_eigenvalues,
    neumann_threshold,
    perturbed_kernel,
    zero_energy_indicator,
)
from potentials import potential_from_config
from propagate import ModePropagator, full_cone_propagate, make_data, mode_frame, weber_apply
from schemas import CircleLink, ExperimentConfig, SphereLink
from specfun import bessel
from suite import select_members, wronskians
from utils import config_hash, default_jobs, run_parallel
from verify import ScalarCheck

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_FAIL = 1
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3
LOG_FORMAT = "%(asctime)s %(levelname)s %(name)s: %(message)s"
REFERENCE_TABLE = Path(__file__).resolve().parent / "data" / "bessel_reference.txt"


@dataclass(frozen=True)
class RunContext:
    config: ExperimentConfig
    out: Path
    jobs: int
    seed: int
    digest: str


# -------------------- SHARED SETUP --------------------
def _mode_setup(config: ExperimentConfig):
    """Spectrum, Bessel order of `mode.j`, radial grid and potential from the config."""
    spectrum = build_spectrum(load_link(config.link), config.n, config.link.jmax)
    nu = spectrum.nu(config.mode.j)
    g = config.grid
    grid = build_grid(config.n, g.rmax, g.n, g.scheme, g.order)
    potential = potential_from_config(config.potential, grid)
    logger.info("mode j=%d (nu=%.6g) on %d nodes up to r=%g, potential %s", config.mode.j, nu, grid.size, g.rmax, potential.name)
    return spectrum, nu, grid, potential


def _theta_grid(spectrum: LinkSpectrum, count: int) -> np.ndarray:
    link = spectrum.link
    if isinstance(link, CircleLink):
        return np.linspace(0.0, link.circumference, count, endpoint=False)
    if isinstance(link, SphereLink) and link.dim == 1:
        return np.linspace(0.0, 2.0 * math.pi, count, endpoint=False)
    if isinstance(link, SphereLink) and link.dim == 2:
        # meridian at azimuth 0
        return np.stack((np.linspace(0.0, math.pi, count), np.zeros(count)), axis=-1)
    raise DomainError(f"full-cone output needs link eigenfunctions; not available for {link!r}")


def _relative_gap(values: np.ndarray, reference: np.ndarray) -> float:
    return float(np.max(np.abs(values - reference)) / np.max(np.abs(reference)))


# -------------------- COMMANDS --------------------
def cmd_spectrum(ctx: RunContext) -> int:
    config = ctx.config
    spectrum = build_spectrum(load_link(config.link), config.n, config.link.jmax)
    frame = pd.DataFrame(
        {
            "level": np.arange(spectrum.levels),
            "mu2": spectrum.mu2,
            "multiplicity": spectrum.multiplicity,
            "nu": spectrum.nu_levels,
        }
    )
    write_csv(frame, ctx.out / "spectrum.csv", ctx.digest)
    print(frame.to_string(index=False))
    print(f"volume {spectrum.volume:.17e}")
    if spectrum.levels >= 50:
        print(f"weyl_slope {weyl_check(spectrum):.6f}")
    return EXIT_OK


def cmd_resolvent(ctx: RunContext) -> int:
    config = ctx.config
    _, nu, grid, potential = _mode_setup(config)
    lam, sign = config.resolvent.lam, config.resolvent.sign
    free = free_kernel(grid, nu, lam, sign)
    write_csv(kernel_frame(grid.nodes, free.values), ctx.out / "kernel_free.csv", ctx.digest)
    if potential.is_zero:
        print("potential is zero: the perturbed kernel is the free kernel")
        return EXIT_OK

    perturbed = perturbed_kernel(grid, nu, lam, sign, potential, config.tol.resonance)
    write_csv(kernel_frame(grid.nodes, perturbed.values), ctx.out / "kernel_perturbed.csv", ctx.digest)
    print(f"solve_residual {perturbed.residual:.3e}")

    m = config.resolvent.m or math.ceil(config.n / 4)
    series, remainder = birman_schwinger(grid, nu, lam, sign, potential, m)
    print(f"birman_schwinger M={m} defect {_relative_gap(series.values + remainder.values, perturbed.values):.3e}")

    scan = config.scan
    lams = np.geomspace(scan.lambda_min, scan.lambda_max, scan.count)
    report = fredholm_scan(grid, nu, potential, lams, sign, config.tol.resonance, jobs=ctx.jobs)
    write_csv(report.to_frame(), ctx.out / "fredholm.csv", ctx.digest)
    for value, smin, flag in zip(report.lam, report.smin, report.flags):
        if flag != "ok":
            print(f"{flag} lambda={value:.6g} smin={smin:.3e}")
    print(f"fredholm_min {float(report.smin.min()):.3e}")
    print(f"neumann_threshold {neumann_threshold(grid, nu, potential, lams, sign):.6g}")
    if nu > 0:
        print(f"zero_energy_indicator {zero_energy_indicator(grid, nu, potential):.3e}")
    print(f"negative_eigenvalues {negative_eigenvalues(config.n, nu, potential).size}")
    return EXIT_OK


def cmd_propagate(ctx: RunContext) -> int:
    config = ctx.config
    spectrum, nu, grid, potential = _mode_setup(config)
    f = ModeFunction.from_function(grid, make_data(config.data))
    t = config.time.t

    if config.propagate.kind == "cone":
        theta = _theta_grid(spectrum, config.propagate.theta_count)
        field = full_cone_propagate(
            spectrum, t, {config.mode.j: f}, theta, None, potential, config.tol.quadrature, ctx.jobs
        )
        write_csv(field.to_frame(), ctx.out / "propagate_cone.csv", ctx.digest)
        spread = float(np.max(np.abs(field.values - field.values[:, :1])))
        print(f"theta_spread {spread:.3e}")
        return EXIT_OK

    propagator = ModePropagator(grid, nu, f, potential, None, config.tol.quadrature)
    u = propagator.evaluate(t)
    write_csv(mode_frame(grid.nodes, u), ctx.out / "propagate_mode.csv", ctx.digest)
    ratio = math.sqrt(float(np.sum(grid.weights * np.abs(u) ** 2)) / float(np.sum(grid.weights * np.abs(f.values) ** 2)))
    print(f"unitarity_defect {abs(ratio - 1.0):.3e}")
    if potential.is_zero:
        print(f"weber_defect {_relative_gap(u, weber_apply(config.n, nu, t, grid.nodes, f)):.3e}")
    return EXIT_OK


def cmd_verify(ctx: RunContext) -> int:
    members = select_members(ctx.config.verify.checks)
    logger.info("running %d verification cell(s) with %d worker(s)", len(members), ctx.jobs)
    results = run_parallel(lambda member: member["run"](ctx.config, ctx.seed), members, ctx.jobs)
    failed = 0
    for reports in results:
        for report in reports:
            write_csv(report.to_frame(), ctx.out / "verify" / f"{report.name}.csv", ctx.digest)
            print(report.summary_line())
            failed += 0 if report.passed else 1
    if failed:
        logger.error("%d verification report(s) failed", failed)
        return EXIT_FAIL
    return EXIT_OK


# -------------------- SELF TEST --------------------
def _oracle_defect() -> ScalarCheck:
    """scipy-backed Bessel values against the committed 50-digit table (rebuilt with mpmath when absent)."""
    if REFERENCE_TABLE.is_file():
        table = load_reference_table(REFERENCE_TABLE)
        records = zip(table["kind"], table["nu"], table["x"], table["value"])
    else:
        logger.info("no reference table at %s; evaluating the oracle lattice with mpmath", REFERENCE_TABLE)
        records = ((kind, nu, x, complex(re, im)) for kind, nu, x, re, im in build_reference_table(reference_triples()))
    worst = 0.0
    for kind, nu, x, reference in records:
        if nu > 100.0 or x < 1e-8:
            continue
        try:
            value = complex(bessel(kind, float(nu), float(x)))
        except BesselOverflowError:
            continue
        scale = abs(reference)
        if kind in ("J", "Y") and x > nu:
            # oscillatory region: measure against the modulus envelope
            scale = max(scale, 0.5 * math.sqrt(2.0 / (math.pi * x)))
        worst = max(worst, abs(value - reference) / scale)
    return ScalarCheck("bessel_oracle", worst, 1e-10)


def _grid_weight_defect(ctx: RunContext) -> ScalarCheck:
    """Composite Gauss weights integrate r^{n-1} and r^{n+1} exactly on (0, r_max]."""
    g = ctx.config.grid
    worst = 0.0
    for n in (2, 3, 4):
        grid = build_grid(n, g.rmax, g.n, g.scheme, g.order)
        for power in (0, 2):
            exact = g.rmax ** (n + power) / (n + power)
            worst = max(worst, abs(float(np.sum(grid.weights * grid.nodes**power)) - exact) / exact)
    return ScalarCheck("grid_weights", worst, 1e-12)


def _half_integer_defect() -> ScalarCheck:
    x = np.logspace(-3.0, 2.0, 41)
    envelope = np.sqrt(2.0 / (math.pi * x))
    closed = (envelope * np.sin(x), envelope * (np.sin(x) / x - np.cos(x)))
    worst = max(
        float(np.max(np.abs(bessel("J", nu, x) - form) / np.maximum(np.abs(form), envelope * np.minimum(1.0, x))))
        for nu, form in zip((0.5, 1.5), closed)
    )
    return ScalarCheck("half_integer", worst, 1e-10)


def cmd_selftest(ctx: RunContext) -> int:
    checks: List[ScalarCheck] = [
        _oracle_defect(),
        *wronskians(ctx.config, ctx.seed),
        _half_integer_defect(),
        _grid_weight_defect(ctx),
    ]
    versions = installed_versions(EXPECTED_VERSIONS)
    for pkg, (installed, required) in versions.items():
        if installed != required:
            logger.warning("%s: installed %s, pinned %s", pkg, installed, required)
    print(format_versions(versions))
    failed = 0
    for check in checks:
        print(check.summary_line())
        failed += 0 if check.passed else 1
    write_csv(pd.concat([check.to_frame().assign(name=check.name) for check in checks]), ctx.out / "selftest.csv", ctx.digest)
    return EXIT_FAIL if failed else EXIT_OK


COMMANDS: Dict[str, Callable[[RunContext], int]] = {
    "spectrum": cmd_spectrum,
    "resolvent": cmd_resolvent,
    "propagate": cmd_propagate,
    "verify": cmd_verify,
    "selftest": cmd_selftest,
}


# -------------------- ENTRY POINT --------------------
def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", default=None, help="key=value experiment config (defaults when omitted)")
    common.add_argument("--out", default=None, help="output directory (overrides output.dir and CONE_OUT)")
    common.add_argument("--jobs", type=int, default=None, help="worker threads (default CONE_JOBS or 1)")
    common.add_argument("--seed", type=int, default=0, help="seed for randomized spot checks")
    common.add_argument("--verbose", action="store_true", help="debug logging")

    parser = argparse.ArgumentParser(prog="cone", description="Resolvents and Schrodinger propagators on product cones.")
    commands = parser.add_subparsers(dest="command", required=True)
    for name, func in COMMANDS.items():
        commands.add_parser(name, parents=[common], help=func.__name__.replace("cmd_", ""))
    return parser


def _output_dir(args: argparse.Namespace, config: ExperimentConfig) -> Path:
    if args.out:
        return Path(args.out)
    if "output" in config.model_fields_set:
        return Path(config.output.dir)
    return Path(os.getenv("CONE_OUT", config.output.dir))


def main(argv: Optional[Sequence[str]] = None) -> int:
    load_dotenv()
    args = build_parser().parse_args(argv)
    level_name = "DEBUG" if args.verbose else os.getenv("CONE_LOG_LEVEL", "INFO")
    logging.basicConfig(level=getattr(logging, level_name.upper(), logging.INFO), format=LOG_FORMAT, stream=sys.stderr)

    try:
        config = load_config(args.config)
        if args.seed < 0:
            raise ConfigurationError("--seed must be a non-negative integer")
        jobs = default_jobs() if args.jobs is None else args.jobs
        if jobs < 1:
            raise ConfigurationError("--jobs must be >= 1")
        ctx = RunContext(config, _output_dir(args, config), jobs, args.seed, config_hash(config.model_dump_json()))
        return COMMANDS[args.command](ctx)
    except (ConfigurationError, DomainError, ValidationError) as exc:
        logger.error("configuration error: %s", exc)
        return EXIT_CONFIG
    except NumericalFailure as exc:
        logger.error("numerical failure: %s", exc)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
