"""Gaussian moment functionals and the feasibility frontier of the
rank-one-deformed GOE interaction ensemble.

Everything here is closed-form scalar math: the three functionals

    d(x) = E (Z + x)_+^2,   f(x) = E (Z + x)_+ / sqrt(d(x)),
    g(x) = E Z (Z + x)_+ / sqrt(d(x)),       Z ~ N(0, 1),

the fixed point c = (alpha/kappa) f(c), the positive-cone spectral edge
lambda_plus(alpha, kappa) = alpha f(c)^2 + 2 kappa g(c), the curve
{lambda_plus = 1} in the (kappa, alpha) plane, and the chaining upper
bound evaluated at a suboptimal shift.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

from scipy import special

__all__ = [
    "EnsembleParams",
    "FrontierPoint",
    "NoRootError",
    "gauss_d",
    "gauss_f",
    "gauss_g",
    "solve_c",
    "lambda_plus",
    "frontier_curve",
    "sudakov_bound",
]

_SQRT_2PI = math.sqrt(2.0 * math.pi)
_LOG_2PI = math.log(2.0 * math.pi)
# below this the direct CDF formulas lose too many digits; switch to the
# scaled-Mills form, and below -37 to the asymptotic series (ndtr itself
# goes subnormal near -38)
_MILLS_CUT = -4.0
_SERIES_CUT = -37.0

BISECTION_TOL = 1e-12


class NoRootError(RuntimeError):
    """A bracketed root search found no sign change."""


@dataclass(frozen=True)
class EnsembleParams:
    """Deformed GOE ensemble: kappa/sqrt(n) * W + alpha/n * ones."""

    kappa: float
    alpha: float

    def __post_init__(self) -> None:
        if not (self.kappa > 0.0) or not math.isfinite(self.kappa):
            raise ValueError(f"kappa must be positive and finite, got {self.kappa}")
        if not math.isfinite(self.alpha):
            raise ValueError(f"alpha must be finite, got {self.alpha}")


@dataclass(frozen=True)
class FrontierPoint:
    alpha: float
    kappa: float
    lambda_plus: float
    c: float


def _norm_pdf(x: float) -> float:
    return math.exp(-0.5 * x * x) / _SQRT_2PI


def _mills(t: float) -> float:
    # Phi(-t)/phi(t) for t > 0, cancellation-free via erfcx
    return math.sqrt(math.pi / 2.0) * special.erfcx(t / math.sqrt(2.0))


def _dfg(x: float) -> tuple[float, float, float, float]:
    """Return (d, f, g, sqrt_d) at x, stable over the whole real line."""
    x = float(x)
    if not math.isfinite(x):
        raise ValueError(f"x must be finite, got {x}")
    if x >= _MILLS_CUT:
        pdf = _norm_pdf(x)
        cdf = special.ndtr(x)
        d = (1.0 + x * x) * cdf + x * pdf
        sqrt_d = math.sqrt(d)
        ez = pdf + x * cdf  # E (Z + x)_+
        return d, ez / sqrt_d, cdf / sqrt_d, sqrt_d
    t = -x
    if x >= _SERIES_CUT:
        m = _mills(t)
        core = (1.0 + t * t) * m - t  # d / phi(t)
        pos = 1.0 - t * m  # E (Z + x)_+ / phi(t)
        pdf = _norm_pdf(t)
        sqrt_pdf = math.exp(-0.25 * t * t - 0.25 * _LOG_2PI)
        sqrt_core = math.sqrt(core)
        d = pdf * core
        return d, sqrt_pdf * pos / sqrt_core, sqrt_pdf * m / sqrt_core, sqrt_pdf * sqrt_core
    # deep left tail: d ~ phi(t) 2/t^3, relative accuracy ~1/t^6
    q = 1.0 / (t * t)
    core_ser = 1.0 + q * (-6.0 + q * (45.0 - 420.0 * q))
    pos_ser = 1.0 + q * (-3.0 + q * (15.0 - 105.0 * q))
    cdf_ser = 1.0 + q * (-1.0 + q * (3.0 - 15.0 * q))
    log_pdf = -0.5 * t * t - 0.5 * _LOG_2PI
    d = math.exp(log_pdf + math.log(2.0 * core_ser) - 3.0 * math.log(t))
    sqrt_half_pdf = math.exp(0.5 * (log_pdf - math.log(2.0)))
    sqrt_core = math.sqrt(core_ser)
    f = sqrt_half_pdf * pos_ser / (math.sqrt(t) * sqrt_core)
    g = sqrt_half_pdf * math.sqrt(t) * cdf_ser / sqrt_core
    return d, f, g, math.sqrt(d)


def gauss_d(x: float) -> float:
    """Second moment of the shifted positive part, E (Z + x)_+^2."""
    return _dfg(x)[0]


def gauss_f(x: float) -> float:
    """E (Z + x)_+ / sqrt(d(x)); strictly increasing from 0 to 1."""
    return _dfg(x)[1]


def gauss_g(x: float) -> float:
    """E Z (Z + x)_+ / sqrt(d(x)); positive, unimodal, g(0) = sqrt(2)/2."""
    return _dfg(x)[2]


def _bisect(fn, lo: float, hi: float, tol: float = BISECTION_TOL, max_iter: int = 200) -> float:
    flo = fn(lo)
    fhi = fn(hi)
    if flo == 0.0:
        return lo
    if fhi == 0.0:
        return hi
    if (flo > 0.0) == (fhi > 0.0):
        raise NoRootError(f"no sign change on [{lo}, {hi}]: f(lo)={flo}, f(hi)={fhi}")
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        fmid = fn(mid)
        if fmid == 0.0:
            return mid
        if (fmid > 0.0) == (flo > 0.0):
            lo, flo = mid, fmid
        else:
            hi = mid
        if hi - lo <= tol:
            break
    return 0.5 * (lo + hi)


def solve_c(params: EnsembleParams) -> float:
    """Unique root of c = (alpha/kappa) f(c).

    Sign of c matches sign of alpha; |c| <= |alpha|/kappa since 0 < f < 1.
    """
    if params.alpha == 0.0:
        return 0.0
    ratio = params.alpha / params.kappa
    r = abs(ratio)

    def fixed_point_gap(x: float) -> float:
        return x - ratio * gauss_f(x)

    return _bisect(fixed_point_gap, -r - 1.0, r + 1.0)


def lambda_plus(params: EnsembleParams) -> FrontierPoint:
    """Limiting max of u'Au over the nonnegative unit sphere for the ensemble."""
    c = solve_c(params)
    _, f, g, _ = _dfg(c)
    value = params.alpha * f * f + 2.0 * params.kappa * g
    return FrontierPoint(alpha=params.alpha, kappa=params.kappa, lambda_plus=value, c=c)


_KAPPA_MAX = 1.0 / math.sqrt(2.0)

ALPHA_BRACKET = (-50.0, 50.0)


def frontier_curve(kappa_grid) -> list[FrontierPoint]:
    """For each kappa in (0, 1/sqrt(2)), the alpha with lambda_plus = 1.

    Inverts in alpha at fixed kappa by bisection on [-50, 50]; raises
    NoRootError if the bracket does not straddle the level set.
    """
    points = []
    for kappa in kappa_grid:
        kappa = float(kappa)
        if not (0.0 < kappa < _KAPPA_MAX):
            raise ValueError(f"kappa must lie in (0, 1/sqrt(2)), got {kappa}")

        def gap(alpha: float) -> float:
            return lambda_plus(EnsembleParams(kappa=kappa, alpha=alpha)).lambda_plus - 1.0

        alpha_star = _bisect(gap, ALPHA_BRACKET[0], ALPHA_BRACKET[1])
        points.append(lambda_plus(EnsembleParams(kappa=kappa, alpha=alpha_star)))
    return points


def sudakov_bound(s: float, params: EnsembleParams) -> float:
    """Chaining bound alpha*s^2 - 2*c*s + 2*sqrt(d(c)) at the shift c with f(c) = s.

    Only defined at kappa = 1 (the reduced scale); never falls below
    lambda_plus(alpha, 1), with equality at the optimal s.
    """
    if abs(params.kappa - 1.0) > 1e-12:
        raise ValueError(f"sudakov_bound requires kappa = 1, got {params.kappa}")
    if not (0.0 < s < 1.0):
        raise ValueError(f"s must lie in (0, 1), got {s}")

    lo, hi = -60.0, 60.0
    while gauss_f(hi) < s:
        hi *= 2.0
        if hi > 1e9:
            raise NoRootError(f"failed to bracket f = {s}")

    c_tilde = _bisect(lambda x: gauss_f(x) - s, lo, hi)
    _, f, _, sqrt_d = _dfg(c_tilde)
    return params.alpha * f * f - 2.0 * c_tilde * f + 2.0 * sqrt_d
