"""
oracle.py

High-precision reference values for the Bessel family, computed with mpmath at 50 digits.

- `reference_value`: a single (kind, nu, x) value as a Python complex.
- `reference_triples`: the deterministic (kind, nu, x) lattice covering the validated range.
- `build_reference_table`: records `(kind, nu, x, re, im)` ready for `data_loader.write_reference_table`.

Run `python oracle.py --out data/bessel_reference.txt` to regenerate the reference table.
"""

# -------------------- IMPORTS --------------------
# Standard Library
import argparse
import logging
from typing import Iterable, List, Tuple

# Third-Party Libraries
import mpmath
import numpy as np

logger = logging.getLogger(__name__)

Record = Tuple[str, float, float, float, float]

REFERENCE_DPS = 50
REFERENCE_ORDERS = (0.0, 1.0 / 3.0, 0.5, 1.0, 2.0, 2.5, 3.7, 7.0, 33.25, 100.0)
REFERENCE_KINDS = ("J", "Y", "H1", "H2", "I")

_MP_FUNCTIONS = {
    "J": mpmath.besselj,
    "Y": mpmath.bessely,
    "H1": mpmath.hankel1,
    "H2": mpmath.hankel2,
    "I": mpmath.besseli,
}


# -------------------- SINGLE VALUES --------------------
def reference_value(kind: str, nu: float, x: float, dps: int = REFERENCE_DPS) -> complex:
    """C_nu(x) at `dps` significant digits, rounded to a Python complex."""
    with mpmath.workdps(dps):
        value = _MP_FUNCTIONS[kind](mpmath.mpf(nu), mpmath.mpf(x))
        return complex(mpmath.re(value), mpmath.im(value))


def reference_derivative(kind: str, nu: float, x: float, dps: int = REFERENCE_DPS) -> complex:
    """d/dx C_nu(x) by mpmath's high-precision numerical differentiation."""
    with mpmath.workdps(dps):
        f = lambda s: _MP_FUNCTIONS[kind](mpmath.mpf(nu), s)
        value = mpmath.diff(f, mpmath.mpf(x))
        return complex(mpmath.re(value), mpmath.im(value))


# -------------------- TABLES --------------------
def reference_triples(points_per_decade: int = 1) -> List[Tuple[str, float, float]]:
    """Deterministic lattice of (kind, nu, x) over x in [1e-8, 1e3]."""
    xs = np.logspace(-8, 3, 11 * points_per_decade + 1)
    triples = []
    for kind in REFERENCE_KINDS:
        for nu in REFERENCE_ORDERS:
            for x in xs:
                if kind == "I" and x > 500.0:
                    continue
                triples.append((kind, float(nu), float(x)))
    return triples


def build_reference_table(triples: Iterable[Tuple[str, float, float]]) -> List[Record]:
    """Evaluate every triple, dropping values outside the double-precision range."""
    records = []
    for kind, nu, x in triples:
        value = reference_value(kind, nu, x)
        magnitude = abs(value)
        if magnitude == 0.0 or not (1e-290 < magnitude < 1e290):
            continue
        records.append((kind, nu, x, value.real, value.imag))
    logger.info("built %d reference records", len(records))
    return records


# -------------------- ENTRY POINT --------------------
if __name__ == "__main__":
    from data_loader import write_reference_table

    parser = argparse.ArgumentParser(description="Regenerate the Bessel reference table.")
    parser.add_argument("--out", default="data/bessel_reference.txt")
    parser.add_argument("--density", type=int, default=1, help="points per decade in x")
    args = parser.parse_args()

    logging.basicConfig(level=logging.INFO)
    write_reference_table(build_reference_table(reference_triples(args.density)), args.out)
