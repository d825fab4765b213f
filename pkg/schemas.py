"""
schemas.py

Pydantic v2 models validating the inputs of the numerical modules and the experiment
configuration read by the CLI.

- Bessel requests and link descriptions (circle, unit sphere, custom spectrum).
- Radial potentials with their certified decay envelope.
- The smooth low/high frequency cutoff and propagation requests.
- `ExperimentConfig`: the sectioned `key=value` experiment file, unknown keys rejected.
"""

# -------------------- IMPORTS --------------------
# Standard Library
import math
from typing import Annotated, Callable, Dict, List, Literal, Optional, Tuple, Union

# Third-Party Libraries
import numpy as np
from numpy.polynomial import Polynomial
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

# -------------------- SPECIAL FUNCTIONS --------------------
BesselKind = Literal["J", "Y", "H1", "H2", "I"]


class ScaledBesselRequest(BaseModel):
    """A request for x^p * C_nu(x)."""

    model_config = ConfigDict(frozen=True)

    nu: float = Field(..., ge=0.0, description="Real order nu >= 0.")
    x: float = Field(..., ge=0.0, description="Real argument; x = 0 is allowed for kind J only.")
    power_shift: float = Field(default=0.0, description="Exponent p multiplying the Bessel value.")


# -------------------- LINKS --------------------
class CircleLink(BaseModel):
    """Circle of circumference L (cone dimension 2)."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    kind: Literal["circle"] = "circle"
    circumference: float = Field(default=2.0 * math.pi, gt=0.0, description="Circumference L.")


class SphereLink(BaseModel):
    """Round unit sphere S^d (cone dimension d + 1)."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    kind: Literal["sphere"] = "sphere"
    dim: int = Field(default=2, ge=1, description="Sphere dimension d.")


class CustomLink(BaseModel):
    """User-supplied eigenvalue ladder (mu^2, multiplicity) with the link volume."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    kind: Literal["custom"] = "custom"
    levels: List[Tuple[float, int]] = Field(..., min_length=1, description="(mu^2, multiplicity) pairs.")
    volume: float = Field(..., gt=0.0, description="Riemannian volume of the link.")

    @field_validator("levels")
    @classmethod
    def _check_ladder(cls, levels: List[Tuple[float, int]]) -> List[Tuple[float, int]]:
        mu2 = [level[0] for level in levels]
        if any(value < 0 for value in mu2):
            raise ValueError("custom eigenvalues mu^2 must be non-negative")
        if any(b < a for a, b in zip(mu2, mu2[1:])):
            raise ValueError("custom eigenvalues must be nondecreasing")
        if any(level[1] < 1 for level in levels):
            raise ValueError("multiplicities must be >= 1")
        if mu2[0] != 0.0 or levels[0][1] != 1:
            raise ValueError("a connected link starts with mu^2 = 0 of multiplicity 1")
        return levels


LinkSpec = Annotated[Union[CircleLink, SphereLink, CustomLink], Field(discriminator="kind")]


# -------------------- POTENTIALS --------------------
class PotentialSpec(BaseModel):
    """Real radial potential V with |V(r)| (1+r)^{2 sigma} <= bound on the sampled range."""

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    name: str = Field(..., description="Built-in family name or a free label.")
    params: Dict[str, float] = Field(default_factory=dict, description="Family parameters.")
    sigma: float = Field(..., gt=0.5, description="Decay exponent sigma > 1/2.")
    bound: float = Field(..., ge=0.0, description="Certified envelope constant A.")
    evaluator: Callable[[np.ndarray], np.ndarray] = Field(..., exclude=True, repr=False)

    def __call__(self, r: np.ndarray) -> np.ndarray:
        return np.asarray(self.evaluator(np.asarray(r, dtype=float)), dtype=float)

    @property
    def is_zero(self) -> bool:
        return self.bound == 0.0


# -------------------- CUTOFF --------------------
MAX_CUTOFF_DERIVATIVE = 8
EXP_CUT = 700.0


def _psi(x: np.ndarray, order: int) -> np.ndarray:
    """d^order/dx^order exp(-1/x) for x > 0 (0 otherwise), as P_order(1/x) exp(-1/x)."""
    out = np.zeros_like(x)
    pos = x > 0
    u = np.minimum(1.0 / x[pos], EXP_CUT)
    poly = Polynomial([1.0])
    for _ in range(order):
        poly = Polynomial([0.0, 0.0, 1.0]) * (poly - poly.deriv())
    out[pos] = np.where(u < EXP_CUT, poly(u) * np.exp(-u), 0.0)
    return out


class CutoffSpec(BaseModel):
    """
    Smooth even cutoff chi: 1 on [-1/2, 1/2], 0 outside [-1, 1], built from exp(-1/x),
    together with the high-frequency cutoff R >= 1 used as chi(lambda / R).
    """

    model_config = ConfigDict(frozen=True, extra="forbid")

    high_cutoff: float = Field(default=1.0, ge=1.0, description="High-frequency cutoff R.")

    def chi(self, x: np.ndarray) -> np.ndarray:
        return self.derivative(x, 0)

    def derivative(self, x: np.ndarray, order: int) -> np.ndarray:
        """d^order/dx^order chi(x), from Leibniz's rule on a = q (a + b) with a = psi(y), b = psi(1 - y)."""
        if not 0 <= order <= MAX_CUTOFF_DERIVATIVE:
            raise ValueError(f"cutoff derivatives are available up to order {MAX_CUTOFF_DERIVATIVE}")
        x = np.asarray(x, dtype=float)
        y = 2.0 * (1.0 - np.abs(x))
        a = [_psi(y, m) for m in range(order + 1)]
        d = [a[m] + (-1) ** m * _psi(1.0 - y, m) for m in range(order + 1)]
        q: List[np.ndarray] = []
        for m in range(order + 1):
            rest = sum((math.comb(m, i) * q[i] * d[m - i] for i in range(m)), np.zeros_like(y))
            q.append((a[m] - rest) / d[0])
        return (-2.0 * np.sign(x)) ** order * q[order]


class PropagatorRequest(BaseModel):
    """One mode propagation e^{itH} P_c E_j at time t."""

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    t: float = Field(..., gt=0.0, description="Time t > 0.")
    nu: float = Field(..., ge=0.0, description="Bessel order of the mode.")
    potential: Optional[PotentialSpec] = Field(default=None, description="None propagates freely.")
    alpha: float = Field(default=0.0, ge=0.0, description="Weight exponent for rho^{-alpha} norms.")
    tolerance: float = Field(default=1e-8, gt=0.0, le=1e-2, description="Quadrature tolerance.")
    cutoff: CutoffSpec = Field(default_factory=CutoffSpec)


# -------------------- EXPERIMENT CONFIG --------------------
class _Section(BaseModel):
    model_config = ConfigDict(extra="forbid")


class LinkConfig(_Section):
    kind: Literal["circle", "sphere", "custom"] = "sphere"
    circumference: float = Field(default=2.0 * math.pi, gt=0.0)
    dim: int = Field(default=2, ge=1)
    file: Optional[str] = Field(default=None, description="Custom spectrum file.")
    volume: Optional[float] = Field(default=None, gt=0.0, description="Overrides the file's volume.")
    jmax: int = Field(default=30, ge=1, description="Number of distinct eigenvalue levels.")


class GridConfig(_Section):
    rmax: float = Field(default=40.0, gt=0.0)
    n: int = Field(default=512, ge=16)
    order: int = Field(default=16, ge=2)
    scheme: Literal["geometric", "uniform"] = "geometric"


class PotentialConfig(_Section):
    family: Literal["zero", "gaussian", "polywell", "bump"] = "zero"
    a: float = 0.5
    w: float = Field(default=1.0, gt=0.0)
    r0: float = Field(default=2.0, ge=0.0)
    sigma: float = Field(default=3.0, gt=0.5)


class ModeConfig(_Section):
    j: int = Field(default=0, ge=0)


class ScanConfig(_Section):
    lambda_min: float = Field(default=1.0, gt=0.0)
    lambda_max: float = Field(default=100.0, gt=0.0)
    count: int = Field(default=24, ge=3)
    k: int = Field(default=0, ge=0, le=8)
    q: float = Field(default=2.0, ge=1.0)
    imaginary: bool = True

    @model_validator(mode="after")
    def _ordered(self) -> "ScanConfig":
        if self.lambda_max <= self.lambda_min:
            raise ValueError("scan.lambda_max must exceed scan.lambda_min")
        return self


class TimeConfig(_Section):
    t_min: float = Field(default=10.0, gt=0.0)
    t_max: float = Field(default=100.0, gt=0.0)
    count: int = Field(default=12, ge=3)
    t: float = Field(default=1.0, gt=0.0)

    @model_validator(mode="after")
    def _ordered(self) -> "TimeConfig":
        if self.t_max <= self.t_min:
            raise ValueError("time.t_max must exceed time.t_min")
        return self


class WeightConfig(_Section):
    alpha: Optional[float] = Field(default=None, ge=0.0)
    sigma: float = Field(default=1.0, ge=0.0)


class DataConfig(_Section):
    family: Literal["gaussian_bump", "mollifier"] = "gaussian_bump"
    center: float = Field(default=3.0, ge=0.0)
    width: float = Field(default=0.7, gt=0.0)


class ResolventConfig(_Section):
    model_config = ConfigDict(extra="forbid", populate_by_name=True)

    lam: float = Field(default=1.0, alias="lambda")
    sign: Literal["+", "-"] = "+"
    m: Optional[int] = Field(default=None, ge=1)

    @field_validator("lam")
    @classmethod
    def _nonzero(cls, value: float) -> float:
        if value == 0.0:
            raise ValueError("resolvent.lambda must be nonzero")
        return value


class PropagateConfig(_Section):
    kind: Literal["mode", "cone"] = "mode"
    theta_count: int = Field(default=8, ge=1)


class ToleranceConfig(_Section):
    quadrature: float = Field(default=1e-8, gt=0.0, le=1e-2)
    slope: float = Field(default=0.1, gt=0.0)
    lowfreq: float = Field(default=0.15, gt=0.0)
    lq: float = Field(default=0.2, gt=0.0)
    residual: float = Field(default=0.05, gt=0.0)
    resonance: float = Field(default=1e-6, gt=0.0)
    derivative: float = Field(default=1e-6, gt=0.0)


class VerifyConfig(_Section):
    checks: List[str] = Field(default_factory=lambda: ["all"])
    refine: bool = False

    @field_validator("checks", mode="before")
    @classmethod
    def _split(cls, value):
        if isinstance(value, str):
            return [item.strip() for item in value.split(",") if item.strip()]
        return value


class OutputConfig(_Section):
    dir: str = "out"


class ExperimentConfig(_Section):
    """Validated experiment configuration; every section rejects unknown keys."""

    n: int = Field(default=3, ge=2, description="Cone dimension.")
    link: LinkConfig = Field(default_factory=LinkConfig)
    grid: GridConfig = Field(default_factory=GridConfig)
    potential: PotentialConfig = Field(default_factory=PotentialConfig)
    mode: ModeConfig = Field(default_factory=ModeConfig)
    scan: ScanConfig = Field(default_factory=ScanConfig)
    time: TimeConfig = Field(default_factory=TimeConfig)
    weights: WeightConfig = Field(default_factory=WeightConfig)
    data: DataConfig = Field(default_factory=DataConfig)
    resolvent: ResolventConfig = Field(default_factory=ResolventConfig)
    propagate: PropagateConfig = Field(default_factory=PropagateConfig)
    tol: ToleranceConfig = Field(default_factory=ToleranceConfig)
    verify: VerifyConfig = Field(default_factory=VerifyConfig)
    output: OutputConfig = Field(default_factory=OutputConfig)

    @model_validator(mode="after")
    def _geometry(self) -> "ExperimentConfig":
        if self.link.kind == "circle" and self.n != 2:
            raise ValueError("a circle link requires n = 2")
        if self.link.kind == "sphere" and self.n != self.link.dim + 1:
            raise ValueError("a unit sphere S^d link requires n = d + 1")
        if self.link.kind == "custom" and self.link.file is None:
            raise ValueError("link.file is required for a custom link")
        return self
