"""
specfun.py

Bessel-family evaluation for real order nu >= 0 and real argument x > 0.

- `bessel`: J, Y, H1 = J + iY, H2 = J - iY and I, backed by scipy.special.
- `scaled_bessel` / `scaled_values`: x^p C_nu(x) without intermediate under/overflow; for J
  the small-argument branch is a power series carried in log form, so x^p J_nu(x) stays
  finite down to x = 0 whenever p >= -nu.
- `bessel_dlambda`: d^k/dlambda^k C_nu(lambda r) as an exact combination of shifted orders.
- `wronskian_check`: H1 J' - H1' J, which equals -2i/(pi x).
"""

# -------------------- IMPORTS --------------------
# Standard Library
import math
import logging
from typing import Union

# Third-Party Libraries
import numpy as np
from scipy import special

# Internal Modules
from errors import BesselOverflowError, DomainError
from schemas import BesselKind, ScaledBesselRequest

logger = logging.getLogger(__name__)

ArrayLike = Union[float, np.ndarray]

# -------------------- CONSTANTS --------------------
NU_MAX = 200.0
X_MAX = 1.0e6
MAX_DERIVATIVE = 8
SERIES_LIMIT = 2.0
SERIES_TERMS = 40

KINDS = ("J", "Y", "H1", "H2", "I")


# -------------------- VALIDATION --------------------
def _check(kind: str, nu: float, x: np.ndarray, nu_max: float, x_max: float, allow_zero: bool = False) -> None:
    if kind not in KINDS:
        raise DomainError(f"unknown Bessel kind {kind!r}")
    if nu < 0:
        raise DomainError(f"order must be >= 0, got {nu}")
    if nu > nu_max:
        raise DomainError(f"order {nu} exceeds nu_max={nu_max}")
    if np.any(x < 0) or (not allow_zero and np.any(x == 0)):
        raise DomainError("argument must be > 0")
    if np.any(x > x_max):
        raise DomainError(f"argument exceeds x_max={x_max:g}")


def _finite_or_raise(kind: str, nu: float, x: np.ndarray, values: np.ndarray) -> np.ndarray:
    bad = ~np.isfinite(values)
    if np.any(bad):
        first = float(np.broadcast_to(x, values.shape)[bad].flat[0])
        raise BesselOverflowError(kind, nu, first)
    return values


# -------------------- CORE EVALUATION --------------------
def _raw(kind: str, order: float, x: np.ndarray) -> np.ndarray:
    """C_order(x) for any real order (negative orders arise inside recurrences)."""
    with np.errstate(all="ignore"):
        if kind == "J":
            values = special.jv(order, x)
        elif kind == "Y":
            values = special.yv(order, x)
        elif kind == "H1":
            values = special.jv(order, x) + 1j * special.yv(order, x)
        elif kind == "H2":
            values = special.jv(order, x) - 1j * special.yv(order, x)
        else:
            values = special.iv(order, x)
    return _finite_or_raise(kind, order, x, np.asarray(values))


def _scaled_j_series(order: float, x: np.ndarray, p: float) -> np.ndarray:
    """x^p J_order(x) from the ascending series, evaluated in log-scaled form."""
    if order < 0 and float(order).is_integer():
        m = int(-order)
        return (-1) ** m * _scaled_j_series(float(m), x, p)

    z = -0.25 * x * x
    term = np.ones_like(x)
    total = np.ones_like(x)
    for k in range(1, SERIES_TERMS):
        term = term * z / (k * (order + k))
        total = total + term

    exponent = order + p
    log_coef = -order * math.log(2.0) - special.gammaln(order + 1.0)
    sign = special.gammasgn(order + 1.0)
    out = np.empty_like(x)
    zero = x == 0
    if np.any(zero):
        if abs(exponent) < 1e-14:
            out[zero] = sign * math.exp(log_coef)
        elif exponent > 0:
            out[zero] = 0.0
        else:
            raise DomainError(f"x^{p} J_{order}(x) is unbounded at x = 0")
    pos = ~zero
    with np.errstate(over="ignore", under="ignore"):
        out[pos] = sign * np.exp(exponent * np.log(x[pos]) + log_coef) * total[pos]
    return _finite_or_raise("J", order, x, out)


def scaled_values(kind: str, order: float, x: ArrayLike, p: float = 0.0) -> np.ndarray:
    """
    Vectorized x^p C_order(x) without range checks on the order.

    Args:
        kind (str): One of J, Y, H1, H2, I.
        order (float): Real order; negative values are accepted for recurrence terms.
        x (ArrayLike): Arguments (x = 0 only for kind J).
        p (float): Power shift.

    Returns:
        np.ndarray: Values with the broadcast shape of x.
    """
    x = np.asarray(x, dtype=float)
    if kind == "J":
        flat = np.atleast_1d(x).ravel()
        out = np.empty(flat.shape, dtype=float)
        small = flat <= SERIES_LIMIT
        if np.any(small):
            out[small] = _scaled_j_series(order, flat[small], p)
        if np.any(~small):
            big = flat[~small]
            out[~small] = _raw("J", order, big) * big**p
        return out.reshape(x.shape)
    if np.any(x <= 0):
        raise DomainError(f"{kind} kernels are singular at x = 0")
    with np.errstate(over="ignore"):
        values = _raw(kind, order, x) * x**p
    return _finite_or_raise(kind, order, x, values)


# -------------------- PUBLIC OPERATIONS --------------------
def bessel(kind: BesselKind, nu: float, x: ArrayLike, *, nu_max: float = NU_MAX, x_max: float = X_MAX):
    """
    Evaluate C_nu(x) for C in {J, Y, H1, H2, I}.

    Returns real values for J, Y and I, complex values for the Hankel functions.
    Raises `DomainError` for x <= 0 or nu < 0 and `BesselOverflowError` when the value is not
    representable (Y_nu at tiny x).
    """
    arr = np.asarray(x, dtype=float)
    _check(kind, nu, arr, nu_max, x_max)
    return _raw(kind, nu, arr)[()]


def i_power(nu: ArrayLike) -> np.ndarray:
    """Principal branch i^nu = exp(i pi nu / 2)."""
    return np.exp(0.5j * np.pi * np.asarray(nu, dtype=float))


def scaled_bessel(req: ScaledBesselRequest, kind: BesselKind, *, nu_max: float = NU_MAX, x_max: float = X_MAX) -> complex:
    """x^p C_nu(x) for a single request; the x -> 0 limit of x^p J_nu(x) is taken analytically."""
    arr = np.asarray(req.x, dtype=float)
    _check(kind, req.nu, arr, nu_max, x_max, allow_zero=(kind == "J"))
    return complex(scaled_values(kind, req.nu, arr, req.power_shift)[()])


def bessel_derivative(kind: BesselKind, nu: float, x: ArrayLike) -> np.ndarray:
    """C'_nu(x) = (C_{nu-1}(x) - C_{nu+1}(x)) / 2; I'_nu = (I_{nu-1} + I_{nu+1}) / 2."""
    arr = np.asarray(x, dtype=float)
    _check(kind, nu, arr, NU_MAX + 1, X_MAX)
    if kind == "I":
        return 0.5 * (_raw("I", nu - 1.0, arr) + _raw("I", nu + 1.0, arr))
    return 0.5 * (_raw(kind, nu - 1.0, arr) - _raw(kind, nu + 1.0, arr))


def derivative_orders(nu: float, k: int) -> list[tuple[float, float]]:
    """(coefficient, order) pairs with C^{(k)} = sum coefficient * C_order."""
    return [((-1) ** i * math.comb(k, i) / 2.0**k, nu - k + 2 * i) for i in range(k + 1)]


def bessel_dlambda(kind: BesselKind, nu: float, lam: float, r: ArrayLike, k: int) -> np.ndarray:
    """
    k-th lambda-derivative of C_nu(lambda r).

    Uses r^k 2^{-k} sum_i (-1)^i binom(k, i) C_{nu-k+2i}(lambda r): an exact linear combination,
    no finite differences. Only defined for J/Y/H1/H2.
    """
    if kind == "I":
        raise DomainError("lambda-derivatives are provided for oscillatory kinds only")
    if not 0 <= k <= MAX_DERIVATIVE:
        raise DomainError(f"derivative order must lie in [0, {MAX_DERIVATIVE}], got {k}")
    r = np.asarray(r, dtype=float)
    x = lam * r
    _check(kind, nu, x, NU_MAX, X_MAX)
    total = 0.0
    for coefficient, order in derivative_orders(nu, k):
        total = total + coefficient * _raw(kind, order, x)
    return (r**k * total)[()]


def radial_factor(kind: BesselKind, nu: float, lam: float, r: np.ndarray, m: int, delta: float) -> np.ndarray:
    """
    d^m/dlambda^m [r^{-delta} C_nu(lambda r)] = r^{m-delta} C_nu^{(m)}(lambda r), lambda > 0.

    For J the power r^{m-delta} is fused into the series so the factor stays finite as r -> 0
    whenever nu >= delta.
    """
    r = np.asarray(r, dtype=float)
    x = lam * r
    total = 0.0
    if kind == "J":
        for coefficient, order in derivative_orders(nu, m):
            total = total + coefficient * scaled_values("J", order, x, m - delta)
        return lam ** (delta - m) * total
    for coefficient, order in derivative_orders(nu, m):
        total = total + coefficient * _raw(kind, order, x)
    return r ** (m - delta) * total


def wronskian_check(nu: float, x: ArrayLike) -> np.ndarray:
    """H1_nu(x) J'_nu(x) - H1'_nu(x) J_nu(x); the identity value is -2i/(pi x)."""
    arr = np.asarray(x, dtype=float)
    _check("H1", nu, arr, NU_MAX, X_MAX)
    j = _raw("J", nu, arr)
    h = _raw("H1", nu, arr)
    dj = 0.5 * (_raw("J", nu - 1.0, arr) - _raw("J", nu + 1.0, arr))
    dh = 0.5 * (_raw("H1", nu - 1.0, arr) - _raw("H1", nu + 1.0, arr))
    return (h * dj - dh * j)[()]
