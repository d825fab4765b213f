"""
errors.py

Exception hierarchy shared by the numerical modules and the command-line entry point.

- `DomainError`: a precondition of an operation is violated (bad order, argument, grid, link...).
- `ConfigurationError`: an experiment configuration cannot be loaded or is inconsistent.
- `NumericalFailure`: a computation could not be carried out to the requested accuracy
  (overflow, near-resonance, Picard non-convergence, quadrature tolerance).

The CLI maps `ConfigurationError` to exit code 2 and `NumericalFailure` to exit code 3.
"""

# -------------------- BASE --------------------
class ConeError(Exception):
    """Root of every error raised by this package."""


class DomainError(ConeError, ValueError):
    """Raised when inputs fall outside the domain of an operation."""


class ConfigurationError(ConeError):
    """Raised when an experiment configuration is invalid."""


# -------------------- NUMERICAL FAILURES --------------------
class NumericalFailure(ConeError):
    """A computation failed to reach its accuracy contract."""


class BesselOverflowError(NumericalFailure):
    """|C_nu(x)| exceeds the representable floating-point range."""

    def __init__(self, kind: str, nu: float, x: float) -> None:
        super().__init__(f"{kind}_{nu:g}({x:g}) overflows double precision")
        self.kind = kind
        self.nu = nu
        self.x = x


class NearResonanceError(NumericalFailure):
    """I + V R_0 is numerically singular at the requested spectral parameter."""

    def __init__(self, lam: float, indicator: float, threshold: float) -> None:
        super().__init__(
            f"Fredholm indicator {indicator:.3e} below threshold {threshold:.1e} "
            f"at lambda={lam:g} (possible resonance)"
        )
        self.lam = lam
        self.indicator = indicator
        self.threshold = threshold


class JostConvergenceError(NumericalFailure):
    """Picard iteration for the Jost solutions did not contract."""

    def __init__(self, iterations: int, defect: float) -> None:
        super().__init__(f"Jost iteration stalled after {iterations} steps, last defect {defect:.3e}")
        self.iterations = iterations
        self.defect = defect


class QuadratureToleranceError(NumericalFailure):
    """The oscillatory lambda-quadrature could not meet its tolerance."""

    def __init__(self, estimate: float, tolerance: float, lam_end: float) -> None:
        super().__init__(
            f"tail estimate {estimate:.3e} above tolerance {tolerance:.1e} at lambda={lam_end:g}"
        )
        self.estimate = estimate
        self.tolerance = tolerance
        self.lam_end = lam_end
