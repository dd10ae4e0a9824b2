"""Invariant Gibbs measure of the truncated Lotka-Volterra diffusion.

The unnormalized density on the open orthant is exp(H(x)/T) with

    H(x) = 1/2 x'(Sigma - I)x + <1, x> + (phi - T) sum_i log x_i,

normalizable iff lambda_plus_max(Sigma) < 1 (and T < phi).  Multiplying by
beta = 1/T splits the density exactly into an interaction part

    H_n(x) = (beta/2) x' Sigma x

and a product of single-site base measures

    mu_beta(dx1) = x1^{phi beta - 1} exp(-beta x1^2/2 + beta x1) dx1,

which is what every estimator here leans on: quadrature oracles integrate
against mu_beta-weighted tensor grids, thermodynamic integration couples
H_n on top of mu_beta^(x)n, and the external-field reduction replaces the
rank-one part of Sigma by a linear tilt folded into nu_{beta,h}.

Provides small-n quadrature partition functions, random-walk Metropolis
sampling in log coordinates, thermodynamic-integration free energies with
disorder averaging, and generator-based stationarity residuals.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from functools import cached_property, lru_cache
from typing import Sequence

import numpy as np
from scipy import integrate
from scipy.special import logsumexp, roots_jacobi, roots_legendre

from lvglass.randmat import InteractionMatrix, is_realizable, lambda_plus_max
from lvglass.sde import ModelParams

__all__ = [
    "MCMCError",
    "QuadratureConvergenceError",
    "TiltedBaseMeasure",
    "Domain",
    "GibbsTarget",
    "FreeEnergyEstimate",
    "SampleSet",
    "BumpField",
    "PlateauBump",
    "hamiltonian",
    "interaction_hamiltonian",
    "mu_beta_density",
    "mu_beta_measure",
    "external_field_measure",
    "quadrature_log_z",
    "mcmc_sample",
    "gelman_rubin",
    "log_z_thermo",
    "free_energy_disorder_avg",
    "generator_residual",
]

ENVELOPE_LOG_DROP = 80.0
LOG_Z_REL_TOL = 1e-9
MIN_ACCEPTANCE = 0.01


class MCMCError(RuntimeError):
    """Chain failed to mix (acceptance rate collapsed)."""


class QuadratureConvergenceError(RuntimeError):
    """Order doubling did not stabilize the integral."""


# ---------------------------------------------------------------------------
# single-site base measures


@dataclass(frozen=True)
class TiltedBaseMeasure:
    """Measure x^(phi*beta - 1) exp(-beta x^2/2 + tilt * x) dx on (0, inf).

    tilt = beta reproduces mu_beta; tilt = beta * (1 + alpha * h) is the
    external-field measure nu_{beta,h}.
    """

    beta: float
    phi: float
    tilt: float

    def __post_init__(self) -> None:
        if not (self.beta > 0 and math.isfinite(self.beta)):
            raise ValueError("beta must be positive and finite")
        if self.phi * self.beta <= 1.0:
            raise ValueError("requires phi * beta > 1")
        if not math.isfinite(self.tilt):
            raise ValueError("tilt must be finite")

    @property
    def power(self) -> float:
        return self.phi * self.beta - 1.0

    def log_density(self, x):
        x = np.asarray(x, dtype=float)
        with np.errstate(divide="ignore"):
            return self.power * np.log(x) - 0.5 * self.beta * x * x + self.tilt * x

    def density(self, x):
        x = np.asarray(x, dtype=float)
        out = np.where(x > 0, np.exp(self.log_density(np.where(x > 0, x, 1.0))), 0.0)
        if out.ndim == 0:
            return float(out)
        return out

    def _cutoff(self, upper: float | None) -> float:
        u = _envelope_cutoff(self.power, self.beta, self.tilt)
        if upper is not None:
            u = min(u, float(upper))
        return u

    def _peak(self) -> float:
        return _envelope_peak(self.power, self.beta, self.tilt)

    def mass(self, upper: float | None = None) -> float:
        u = self._cutoff(upper)
        pk = min(self._peak(), u)
        val, _ = integrate.quad(
            lambda x: float(np.exp(self.log_density(x))),
            0.0,
            u,
            points=[pk],
            limit=200,
            epsabs=1e-14,
            epsrel=1e-12,
        )
        return val

    def log_mass(self, upper: float | None = None) -> float:
        return math.log(self.mass(upper))

    def log_mass_jacobi(self, n_nodes: int = 200, upper: float | None = None) -> float:
        """Same integral by a Gauss-Jacobi rule; independent cross-check."""
        u = self._cutoff(upper)
        x, logw = _jacobi_axis_points(n_nodes, self.power, u)
        smooth = -0.5 * self.beta * x * x + self.tilt * x
        return float(logsumexp(logw + smooth))

    def moment(self, order: float, upper: float | None = None) -> float:
        """Normalized moment E[x^order] under the measure truncated at upper."""
        u = self._cutoff(upper)
        pk = min(self._peak(), u)
        num, _ = integrate.quad(
            lambda x: float(np.exp(self.log_density(x) + order * math.log(x))),
            0.0,
            u,
            points=[pk],
            limit=200,
            epsabs=1e-14,
            epsrel=1e-12,
        )
        return num / self.mass(upper)

    def mean(self, upper: float | None = None) -> float:
        return self.moment(1.0, upper)


def mu_beta_measure(params: ModelParams) -> TiltedBaseMeasure:
    return TiltedBaseMeasure(beta=params.beta, phi=params.phi, tilt=params.beta)


def external_field_measure(params: ModelParams, h: float) -> TiltedBaseMeasure:
    """Tilted measure nu_{beta,h} of the rank-one linearization.

    With alpha = 0 (or h = 0) this is mu_beta exactly.
    """
    if not math.isfinite(h):
        raise ValueError("h must be finite")
    alpha = params.ensemble_alpha
    return TiltedBaseMeasure(
        beta=params.beta, phi=params.phi, tilt=params.beta * (1.0 + alpha * h)
    )


def mu_beta_density(x1, params: ModelParams):
    """Unnormalized single-site density; 0 at x1 = 0, rejects negative x1."""
    x = np.asarray(x1, dtype=float)
    if np.any(x < 0):
        raise ValueError("x1 must be nonnegative")
    return mu_beta_measure(params).density(x1)


# ---------------------------------------------------------------------------
# Hamiltonians


def hamiltonian(x, params: ModelParams) -> float:
    """H(x) = 1/2 x'(Sigma-I)x + <1,x> + (phi-T) sum log x_i for x > 0."""
    if params.phi <= params.temperature:
        raise ValueError("requires T < phi")
    xv = np.asarray(x, dtype=float)
    if xv.shape != (params.n,):
        raise ValueError(f"x must have shape ({params.n},)")
    if np.any(xv <= 0):
        raise ValueError("x must be positive entrywise")
    sig = params.interaction
    quad = 0.5 * (xv @ sig @ xv - xv @ xv)
    return float(
        quad + xv.sum() + (params.phi - params.temperature) * np.log(xv).sum()
    )


def interaction_hamiltonian(x, params: ModelParams) -> float:
    """H_n(x) = (beta/2) x' Sigma x, the coupling part of beta*H."""
    xv = np.asarray(x, dtype=float)
    if xv.shape != (params.n,):
        raise ValueError(f"x must have shape ({params.n},)")
    return float(0.5 * params.beta * (xv @ params.interaction @ xv))


# ---------------------------------------------------------------------------
# integration domains


@dataclass(frozen=True)
class Domain:
    """Orthant, box [0,a]^n, or nonnegative ball of radius A*sqrt(n)."""

    kind: str
    extent: float | None = None

    _KINDS = ("orthant", "box", "ball")

    def __post_init__(self) -> None:
        if self.kind not in self._KINDS:
            raise ValueError(f"kind must be one of {self._KINDS}")
        if self.kind == "orthant":
            if self.extent is not None:
                raise ValueError("orthant takes no extent")
        else:
            if self.extent is None or not (self.extent > 0 and math.isfinite(self.extent)):
                raise ValueError("box/ball require a positive finite extent")

    @classmethod
    def orthant(cls) -> "Domain":
        return cls("orthant")

    @classmethod
    def box(cls, a: float) -> "Domain":
        return cls("box", float(a))

    @classmethod
    def ball(cls, radius_scale: float) -> "Domain":
        return cls("ball", float(radius_scale))

    def radius(self, n: int) -> float:
        if self.kind != "ball":
            raise ValueError("radius only defined for ball domains")
        return self.extent * math.sqrt(n)

    def contains(self, x: np.ndarray) -> np.ndarray:
        """Vectorized membership for points of shape (..., n)."""
        x = np.asarray(x, dtype=float)
        ok = np.all(x >= 0, axis=-1)
        if self.kind == "box":
            ok &= np.all(x <= self.extent, axis=-1)
        elif self.kind == "ball":
            r = self.extent * math.sqrt(x.shape[-1])
            ok &= np.einsum("...i,...i->...", x, x) <= r * r
        return ok


# ---------------------------------------------------------------------------
# the target distribution


@dataclass(frozen=True)
class GibbsTarget:
    """Unnormalized target exp(H/T) restricted to a domain.

    With external_field = h the rank-one alpha-part of Sigma is replaced by
    the linear tilt of nu_{beta,h} (only meaningful when the interaction
    carries ensemble information; a plain array has alpha = 0).
    """

    params: ModelParams
    domain: Domain = field(default_factory=Domain.orthant)
    external_field: float | None = None

    def __post_init__(self) -> None:
        if self.params.phi <= self.params.temperature:
            raise ValueError("Gibbs measure requires T < phi")
        if self.external_field is not None and not math.isfinite(self.external_field):
            raise ValueError("external_field must be finite")
        if self.domain.kind == "orthant" and self.lambda_plus_max >= 1.0:
            raise ValueError(
                "non-normalizable on the orthant: lambda_plus_max(Sigma) >= 1"
            )

    def scaled(self, t: float) -> "GibbsTarget":
        """Copy with the interaction scaled by t in [0, 1].

        lambda_plus_max is positively homogeneous, so the scaled bound is
        t * lambda_plus_max of self and normalizability is inherited; the
        exact oracle is not rerun (it enumerates 2^n supports, which would
        otherwise dominate every coupling-schedule node at large n).
        """
        if self.external_field is not None:
            raise ValueError("scaled copies expect a standard target")
        if not 0.0 <= t <= 1.0:
            raise ValueError(f"interaction scale must lie in [0, 1], got {t}")
        params = self.params
        params_t = ModelParams(
            n=params.n,
            sigma=None if t == 0.0 else t * params.interaction,
            phi=params.phi,
            temperature=params.temperature,
        )
        copy = object.__new__(type(self))
        object.__setattr__(copy, "params", params_t)
        object.__setattr__(copy, "domain", self.domain)
        object.__setattr__(copy, "external_field", None)
        copy.__dict__["lambda_plus_max"] = t * self.lambda_plus_max
        return copy

    @cached_property
    def interaction_effective(self) -> np.ndarray:
        """Quadratic coupling actually entering the density."""
        sig = self.params.interaction
        if self.external_field is None:
            return sig
        n = self.params.n
        alpha = self.params.ensemble_alpha
        return sig - (alpha / n) * np.ones((n, n))

    @cached_property
    def tilt(self) -> float:
        beta = self.params.beta
        if self.external_field is None:
            return beta
        return beta * (1.0 + self.params.ensemble_alpha * self.external_field)

    @cached_property
    def lambda_plus_max(self) -> float:
        a = self.interaction_effective
        if not np.any(a):
            return 0.0
        return lambda_plus_max(a)

    @property
    def power(self) -> float:
        return self.params.phi * self.params.beta - 1.0

    def base_measure(self) -> TiltedBaseMeasure:
        return TiltedBaseMeasure(self.params.beta, self.params.phi, self.tilt)

    def log_density(self, x) -> np.ndarray | float:
        """log of the unnormalized density wrt Lebesgue, batched over rows."""
        x = np.asarray(x, dtype=float)
        single = x.ndim == 1
        pts = x[None, :] if single else x
        beta = self.params.beta
        a = self.interaction_effective
        quad = 0.5 * beta * np.einsum("mi,ij,mj->m", pts, a, pts)
        with np.errstate(divide="ignore", invalid="ignore"):
            site = (
                self.power * np.log(pts)
                - 0.5 * beta * pts * pts
                + self.tilt * pts
            ).sum(axis=1)
        out = quad + site
        return float(out[0]) if single else out

    def log_density_smooth(self, x) -> np.ndarray:
        """log_density minus the power-law factor (folded into Jacobi weights)."""
        x = np.asarray(x, dtype=float)
        pts = x if x.ndim == 2 else x[None, :]
        beta = self.params.beta
        quad = 0.5 * beta * np.einsum("mi,ij,mj->m", pts, self.interaction_effective, pts)
        site = (-0.5 * beta * pts * pts + self.tilt * pts).sum(axis=1)
        return quad + site


# ---------------------------------------------------------------------------
# quadrature partition functions


def _envelope_peak(p: float, q2: float, tilt: float) -> float:
    # maximizer of p log x - (q2/2) x^2 + tilt x over x > 0
    return (tilt + math.sqrt(tilt * tilt + 4.0 * q2 * p)) / (2.0 * q2)


def _envelope_cutoff(p: float, q2: float, tilt: float, drop: float = ENVELOPE_LOG_DROP) -> float:
    """Upper limit where the log-envelope has fallen `drop` below its peak."""

    def logenv(x: float) -> float:
        return p * math.log(x) - 0.5 * q2 * x * x + tilt * x

    xs = _envelope_peak(p, q2, tilt)
    target = logenv(xs) - drop
    hi = xs + math.sqrt(2.0 * drop / q2) + abs(tilt) / q2 + 10.0
    while logenv(hi) > target:
        hi *= 2.0
    lo = xs
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if logenv(mid) > target:
            lo = mid
        else:
            hi = mid
        if hi - lo < 1e-9 * max(1.0, hi):
            break
    return hi


@lru_cache(maxsize=64)
def _jacobi_rule(n_nodes: int, power: float):
    t, w = roots_jacobi(n_nodes, 0.0, power)
    return t, np.log(w)


def _jacobi_axis_points(n_nodes: int, power: float, upper: float):
    """Nodes and log-weights: int_0^upper x^power g(x) dx = sum exp(lw) g(x).

    The x^power factor lives in the weights, so callers supply only the
    smooth remainder g.
    """
    t, logw = _jacobi_rule(n_nodes, power)
    x = 0.5 * upper * (t + 1.0)
    lw = logw + (power + 1.0) * math.log(0.5 * upper)
    return x, lw


def _jacobi_scaled(n_nodes: int, power: float, uppers: np.ndarray):
    """Per-row rescaled rule: uppers (m,) -> nodes (m, Q), log-weights (m, Q)."""
    t, logw = _jacobi_rule(n_nodes, power)
    u = uppers[:, None]
    x = 0.5 * u * (t + 1.0)
    lw = logw + (power + 1.0) * np.log(0.5 * u)
    return x, lw


def _per_axis_cutoff(target: GibbsTarget) -> float:
    margin = 1.0 - target.lambda_plus_max
    if target.domain.kind != "orthant":
        # finite domains are always integrable; fall back to a unit margin
        margin = max(margin, 1.0)
    if margin <= 1e-9:
        raise ValueError("interaction too close to the realizability boundary")
    return _envelope_cutoff(target.power, target.params.beta * margin, target.tilt)


def _log_z_fixed_order(target: GibbsTarget, q: int) -> float:
    n = target.params.n
    p = target.power
    dom = target.domain
    u_env = _per_axis_cutoff(target)

    if dom.kind in ("orthant", "box"):
        u = u_env if dom.kind == "orthant" else min(u_env, dom.extent)
        x1, lw1 = _jacobi_axis_points(q, p, u)
        if n == 1:
            return float(logsumexp(lw1 + target.log_density_smooth(x1[:, None])))
        if n == 2:
            xx1, xx2 = np.meshgrid(x1, x1, indexing="ij")
            pts = np.column_stack([xx1.ravel(), xx2.ravel()])
            lw = (lw1[:, None] + lw1[None, :]).ravel()
            return float(logsumexp(lw + target.log_density_smooth(pts)))
        # n == 3: chunk over the first axis to bound memory
        xx2, xx3 = np.meshgrid(x1, x1, indexing="ij")
        slab = np.column_stack([np.empty(q * q), xx2.ravel(), xx3.ravel()])
        lw23 = (lw1[:, None] + lw1[None, :]).ravel()
        parts = np.empty(q)
        for i in range(q):
            slab[:, 0] = x1[i]
            parts[i] = logsumexp(lw1[i] + lw23 + target.log_density_smooth(slab))
        return float(logsumexp(parts))

    # ball: nested rule, inner bounds shrink with the outer coordinates
    r = dom.radius(n)
    u1 = min(u_env, r)
    x1, lw1 = _jacobi_axis_points(q, p, u1)
    if n == 1:
        return float(logsumexp(lw1 + target.log_density_smooth(x1[:, None])))
    if n == 2:
        b2 = np.minimum(np.sqrt(np.maximum(r * r - x1 * x1, 0.0)), u_env)
        x2, lw2 = _jacobi_scaled(q, p, b2)
        pts = np.column_stack([np.repeat(x1, q), x2.ravel()])
        lw = (lw1[:, None] + lw2).ravel()
        return float(logsumexp(lw + target.log_density_smooth(pts)))
    parts = []
    for i in range(q):
        rem = r * r - x1[i] * x1[i]
        if rem <= 0:
            continue
        b2 = min(math.sqrt(rem), u_env)
        x2, lw2 = _jacobi_axis_points(q, p, b2)
        b3 = np.minimum(np.sqrt(np.maximum(rem - x2 * x2, 0.0)), u_env)
        good = b3 > 0
        x3, lw3 = _jacobi_scaled(q, p, b3[good])
        pts = np.column_stack(
            [
                np.full(good.sum() * q, x1[i]),
                np.repeat(x2[good], q),
                x3.ravel(),
            ]
        )
        lw = (lw1[i] + lw2[good, None] + lw3).ravel()
        parts.append(logsumexp(lw + target.log_density_smooth(pts)))
    return float(logsumexp(np.array(parts)))


def quadrature_log_z(target: GibbsTarget, grid_size: int = 48) -> float:
    """log Z by tensor Gauss-Jacobi with order doubling, n <= 3 only."""
    n = target.params.n
    if n > 3:
        raise ValueError("quadrature_log_z supports n <= 3")
    if target.domain.kind == "orthant" and target.lambda_plus_max >= 1.0:
        raise ValueError("divergent integral: lambda_plus_max(Sigma) >= 1")
    if grid_size < 4:
        raise ValueError("grid_size must be at least 4")
    cap = {1: 3072, 2: 1536, 3: 384}[n]
    q = int(grid_size)
    prev = _log_z_fixed_order(target, q)
    while q < cap:
        q = min(2 * q, cap)
        cur = _log_z_fixed_order(target, q)
        if abs(cur - prev) <= LOG_Z_REL_TOL * max(1.0, abs(cur)):
            return cur
        prev = cur
    raise QuadratureConvergenceError(
        f"log Z quadrature did not stabilize by order {cap}"
    )


# ---------------------------------------------------------------------------
# Metropolis sampling in log coordinates


@dataclass(frozen=True)
class SampleSet:
    """Post burn-in states of one or more Metropolis chains."""

    samples: np.ndarray  # (n_chains, kept, n)
    acceptance_rates: np.ndarray  # (n_chains,)
    proposal_scale: float
    seed: int
    burn_in: int

    def pooled(self) -> np.ndarray:
        c, k, n = self.samples.shape
        return self.samples.reshape(c * k, n)

    @property
    def final_states(self) -> np.ndarray:
        return self.samples[:, -1, :]


def _default_start(target: GibbsTarget) -> np.ndarray:
    n = target.params.n
    dom = target.domain
    if dom.kind == "box":
        return np.full(n, 0.5 * dom.extent)
    if dom.kind == "ball":
        return np.full(n, min(1.0, 0.5 * dom.extent))
    return np.ones(n)


def mcmc_sample(
    target: GibbsTarget,
    chain_length: int,
    seed: int,
    *,
    n_chains: int = 1,
    burn_in: int | None = None,
    x0: np.ndarray | None = None,
    adapt_window: int = 50,
) -> SampleSet:
    """Random-walk Metropolis on y = log x; the Jacobian keeps x positive.

    The proposal scale adapts toward a 0.3 acceptance rate during burn-in
    and is frozen afterwards.  Domain constraints are enforced by rejection.
    Raises MCMCError if the frozen-phase acceptance rate drops below 1%.
    """
    if chain_length < 1:
        raise ValueError("chain_length must be positive")
    if n_chains < 1:
        raise ValueError("n_chains must be positive")
    n = target.params.n
    if burn_in is None:
        burn_in = max(500, chain_length // 5)
    rng = np.random.default_rng(seed)

    if x0 is None:
        x0 = _default_start(target)
    x0 = np.asarray(x0, dtype=float)
    if x0.ndim == 1:
        x0 = np.broadcast_to(x0, (n_chains, n)).copy()
    if x0.shape != (n_chains, n) or np.any(x0 <= 0):
        raise ValueError("x0 must be positive with shape (n,) or (n_chains, n)")
    if not np.all(target.domain.contains(x0)):
        raise ValueError("x0 outside the target domain")

    y = np.log(x0)
    logp = target.log_density(np.exp(y)) + y.sum(axis=1)
    scale = 0.5
    kept = np.empty((n_chains, chain_length, n))
    accepted = np.zeros(n_chains, dtype=np.int64)
    window_acc = 0
    window_n = 0

    total = burn_in + chain_length
    for step in range(total):
        prop = y + scale * rng.standard_normal((n_chains, n))
        xprop = np.exp(prop)
        logq = np.where(
            target.domain.contains(xprop),
            target.log_density(xprop) + prop.sum(axis=1),
            -np.inf,
        )
        accept = np.log(rng.random(n_chains)) < logq - logp
        y[accept] = prop[accept]
        logp[accept] = logq[accept]
        if step < burn_in:
            window_acc += int(accept.sum())
            window_n += n_chains
            if window_n >= adapt_window * n_chains:
                rate = window_acc / window_n
                scale *= math.exp((rate - 0.3) / math.sqrt(1.0 + step / adapt_window))
                scale = min(max(scale, 1e-4), 20.0)
                window_acc = 0
                window_n = 0
        else:
            accepted += accept
            kept[:, step - burn_in, :] = np.exp(y)

    rates = accepted / chain_length
    if np.mean(rates) < MIN_ACCEPTANCE:
        raise MCMCError(
            f"acceptance rate {np.mean(rates):.4f} below {MIN_ACCEPTANCE} after adaptation"
        )
    return SampleSet(
        samples=kept,
        acceptance_rates=rates,
        proposal_scale=scale,
        seed=seed,
        burn_in=burn_in,
    )


def gelman_rubin(chain_values: np.ndarray) -> float:
    """Potential scale reduction factor for per-chain scalar series (m, k)."""
    v = np.asarray(chain_values, dtype=float)
    if v.ndim != 2 or v.shape[0] < 2:
        raise ValueError("need at least two chains of scalar values")
    m, k = v.shape
    means = v.mean(axis=1)
    w = v.var(axis=1, ddof=1).mean()
    b = k * means.var(ddof=1)
    var_plus = (k - 1) / k * w + b / k
    return math.sqrt(var_plus / w)


# ---------------------------------------------------------------------------
# thermodynamic integration


@dataclass(frozen=True)
class FreeEnergyEstimate:
    """Per-site log partition function with Monte-Carlo provenance."""

    n: int
    value: float
    std_error: float
    replicas: int
    schedule: tuple
    seeds: tuple
    truncation_frequency: float = 0.0

    def __post_init__(self) -> None:
        if not math.isfinite(self.value):
            raise ValueError("value must be finite")
        if not (self.std_error > 0):
            raise ValueError("std_error must be positive")

    @property
    def log_z(self) -> float:
        return self.n * self.value


def _batch_se(series: np.ndarray, n_batches: int = 20) -> float:
    """Batch-means standard error of the grand mean over (chains, steps)."""
    c, k = series.shape
    nb = min(n_batches, k)
    usable = (k // nb) * nb
    batches = series[:, :usable].reshape(c, nb, usable // nb).mean(axis=2)
    flat = batches.reshape(-1)
    if flat.size < 2:
        return float("inf")
    return float(flat.std(ddof=1) / math.sqrt(flat.size))


def _trapezoid_weights(t: np.ndarray) -> np.ndarray:
    w = np.zeros_like(t)
    dt = np.diff(t)
    w[:-1] += 0.5 * dt
    w[1:] += 0.5 * dt
    return w


def _coupled_target(target: GibbsTarget, t: float) -> GibbsTarget:
    return target.scaled(t)


def _mean_coupling_at(
    target: GibbsTarget,
    t: float,
    chain_length: int,
    n_chains: int,
    burn_in: int,
    seed: int,
    x0: np.ndarray | None,
) -> tuple[float, float, np.ndarray]:
    tgt = _coupled_target(target, t)
    ss = mcmc_sample(
        tgt,
        chain_length,
        seed,
        n_chains=n_chains,
        burn_in=burn_in,
        x0=x0,
    )
    beta = target.params.beta
    sig = target.params.interaction
    c, k, n = ss.samples.shape
    flat = ss.samples.reshape(c * k, n)
    hn = 0.5 * beta * np.einsum("mi,ij,mj->m", flat, sig, flat)
    series = hn.reshape(c, k)
    return float(series.mean()), _batch_se(series), ss.final_states


def log_z_thermo(
    target: GibbsTarget,
    t_grid: Sequence[float] | None = None,
    *,
    chain_length: int = 4000,
    n_chains: int = 2,
    burn_in: int | None = None,
    seed: int = 0,
    refine: bool = True,
) -> FreeEnergyEstimate:
    """Thermodynamic integration of the coupling H_t = t * H_n over mu_beta^n.

    log Z(1) = n * log mass(mu_beta) + int_0^1 <H_n>_t dt.  The reference
    mass is 1-d quadrature (no sampling error); each <H_n>_t is a Metropolis
    average with a batch-means error bar; chains warm-start from the previous
    t-node.  Midpoints are inserted once where the integrand bends sharply.
    """
    if target.external_field is not None:
        raise ValueError("thermodynamic integration expects a standard target")
    params = target.params
    if t_grid is None:
        t = np.linspace(0.0, 1.0, 21)
    else:
        t = np.asarray(sorted(float(v) for v in t_grid), dtype=float)
        if t[0] != 0.0 or t[-1] != 1.0 or t.size < 2:
            raise ValueError("t_grid must cover [0, 1]")
    if burn_in is None:
        burn_in = max(500, chain_length // 5)

    means: dict[float, tuple[float, float]] = {}
    x0 = None
    for j, tj in enumerate(t):
        m, se, x0 = _mean_coupling_at(
            target, float(tj), chain_length, n_chains, burn_in, seed + j, x0
        )
        means[float(tj)] = (m, se)

    if refine and t.size >= 3:
        mvals = np.array([means[float(v)][0] for v in t])
        ses = np.array([means[float(v)][1] for v in t])
        curv = np.abs(np.diff(mvals, 2))
        noise = 5.0 * np.sqrt(ses[:-2] ** 2 + 4 * ses[1:-1] ** 2 + ses[2:] ** 2)
        bad = np.nonzero(curv > noise)[0]
        inserts = set()
        for i in bad[:8]:
            inserts.add(0.5 * (t[i] + t[i + 1]))
            inserts.add(0.5 * (t[i + 1] + t[i + 2]))
        for j, tm in enumerate(sorted(inserts)):
            if tm in means:
                continue
            m, se, _ = _mean_coupling_at(
                target, tm, chain_length, n_chains, burn_in, seed + 1000 + j, None
            )
            means[tm] = (m, se)
        t = np.array(sorted(means.keys()))

    mvals = np.array([means[float(v)][0] for v in t])
    ses = np.array([means[float(v)][1] for v in t])
    w = _trapezoid_weights(t)
    log_mass = mu_beta_measure(params).log_mass(
        upper=target.domain.extent if target.domain.kind == "box" else None
    )
    if target.domain.kind == "ball":
        raise ValueError("thermodynamic integration not supported on ball domains")
    total = params.n * log_mass + float(w @ mvals)
    var = float(w * w @ (ses * ses))
    return FreeEnergyEstimate(
        n=params.n,
        value=total / params.n,
        std_error=max(math.sqrt(var) / params.n, 1e-15),
        replicas=1,
        schedule=tuple(float(v) for v in t),
        seeds=(seed,),
    )


# ---------------------------------------------------------------------------
# disorder average


def _replica_free_energy(args) -> tuple[float, float, bool]:
    (n, kappa, alpha, phi, temperature, eps_sigma, sigma_seed, chain_seed,
     chain_length, n_chains, t_grid) = args
    from lvglass.frontier import EnsembleParams

    ens = EnsembleParams(kappa=kappa, alpha=alpha)
    sig = InteractionMatrix.sample(n, ens, seed=sigma_seed)
    params = ModelParams(n=n, sigma=None, phi=phi, temperature=temperature)
    if not is_realizable(sig.entries, eps_sigma):
        # truncated draw: Sigma set to zero, the product measure is exact
        value = mu_beta_measure(params).log_mass()
        return value, 0.0, True
    params = ModelParams(n=n, sigma=sig, phi=phi, temperature=temperature)
    est = log_z_thermo(
        GibbsTarget(params=params),
        t_grid,
        chain_length=chain_length,
        n_chains=n_chains,
        seed=chain_seed,
    )
    return est.value, est.std_error, False


def free_energy_disorder_avg(
    n: int,
    ensemble,
    params: ModelParams,
    replicas: int,
    eps_sigma: float | None = None,
    *,
    seed: int = 0,
    jobs: int = 1,
    chain_length: int = 4000,
    n_chains: int = 2,
    t_grid: Sequence[float] | None = None,
) -> FreeEnergyEstimate:
    """Average per-site log Z over disorder draws of the deformed ensemble.

    Draws failing the realizability margin enter with the interaction zeroed
    (not discarded); the frequency of that branch is reported.
    """
    from lvglass.frontier import lambda_plus as _lambda_plus

    if replicas < 1:
        raise ValueError("replicas must be positive")
    if params.n != n:
        raise ValueError("params.n must match n")
    limit = _lambda_plus(ensemble).lambda_plus
    if limit >= 1.0:
        raise ValueError("ensemble outside the realizability frontier")
    if eps_sigma is None:
        eps_sigma = 0.5 * (1.0 - limit)

    grid = tuple(t_grid) if t_grid is not None else None
    tasks = [
        (
            n, ensemble.kappa, ensemble.alpha, params.phi, params.temperature,
            eps_sigma, seed + r, seed + 10_000 + r, chain_length, n_chains, grid,
        )
        for r in range(replicas)
    ]
    if jobs > 1 and replicas > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_replica_free_energy, tasks))
    else:
        results = [_replica_free_energy(a) for a in tasks]

    values = np.array([r[0] for r in results])
    ses = np.array([r[1] for r in results])
    truncated = sum(1 for r in results if r[2])

    value = float(values.mean())
    if replicas == 1:
        se = float(ses[0]) if ses[0] > 0 else 1e-15
    else:
        se = float(values.std(ddof=1) / math.sqrt(replicas))
        se = max(se, 1e-15)
    schedule = grid if grid is not None else tuple(np.linspace(0.0, 1.0, 21))
    return FreeEnergyEstimate(
        n=n,
        value=value,
        std_error=se,
        replicas=replicas,
        schedule=schedule,
        seeds=tuple(seed + r for r in range(replicas)),
        truncation_frequency=truncated / replicas,
    )


# ---------------------------------------------------------------------------
# generator stationarity


@dataclass(frozen=True)
class BumpField:
    """Radial C-infinity bump exp(-1/(1-v)), v = |x-c|^2/r^2, zero for v >= 1."""

    center: tuple
    radius: float

    def __post_init__(self) -> None:
        if self.radius <= 0:
            raise ValueError("radius must be positive")

    def _v(self, x: np.ndarray) -> np.ndarray:
        c = np.asarray(self.center, dtype=float)
        d = x - c
        return np.einsum("...i,...i->...", d, d) / (self.radius**2)

    def support_box(self) -> tuple[np.ndarray, np.ndarray]:
        c = np.asarray(self.center, dtype=float)
        return np.maximum(c - self.radius, 0.0), c + self.radius

    def value(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        v = self._v(x)
        inside = v < 1.0
        out = np.zeros_like(v)
        vs = np.where(inside, v, 0.0)
        out[inside] = np.exp(-1.0 / (1.0 - vs))[inside]
        return out

    def _chi_derivs(self, v: np.ndarray):
        # chi(v) = exp(-1/(1-v)); chi' = -chi/(1-v)^2; chi'' = chi (2v-1)/(1-v)^4
        u = 1.0 - v
        chi = np.exp(-1.0 / u)
        c1 = -chi / (u * u)
        c2 = chi * (2.0 * v - 1.0) / (u**4)
        return c1, c2

    def gradient(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        v = self._v(x)
        inside = v < 1.0 - 1e-12
        g = np.zeros_like(x)
        if np.any(inside):
            c1, _ = self._chi_derivs(v[inside])
            d = x[inside] - np.asarray(self.center, dtype=float)
            g[inside] = c1[..., None] * 2.0 * d / (self.radius**2)
        return g

    def hessian(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        v = self._v(x)
        n = x.shape[-1]
        h = np.zeros(x.shape + (n,))
        inside = v < 1.0 - 1e-12
        if np.any(inside):
            c1, c2 = self._chi_derivs(v[inside])
            d = x[inside] - np.asarray(self.center, dtype=float)
            r2 = self.radius**2
            h[inside] = (
                c2[..., None, None] * 4.0 * d[..., :, None] * d[..., None, :] / (r2 * r2)
                + c1[..., None, None] * 2.0 * np.eye(n) / r2
            )
        return h


@dataclass(frozen=True)
class PlateauBump:
    """C-infinity bump equal to 1 inside radius w*r, zero outside radius r.

    psi(v) = A/(A+B) with A = eta(1-v), B = eta(v-w^2), eta(s) = exp(-1/s);
    all derivatives vanish identically on the plateau.
    """

    center: tuple
    radius: float
    plateau: float = 0.5  # w, fraction of the radius that stays flat

    _BAND = 1e-8

    def __post_init__(self) -> None:
        if self.radius <= 0:
            raise ValueError("radius must be positive")
        if not (0.0 < self.plateau < 1.0):
            raise ValueError("plateau fraction must lie in (0, 1)")

    def _v(self, x: np.ndarray) -> np.ndarray:
        c = np.asarray(self.center, dtype=float)
        d = x - c
        return np.einsum("...i,...i->...", d, d) / (self.radius**2)

    def support_box(self) -> tuple[np.ndarray, np.ndarray]:
        c = np.asarray(self.center, dtype=float)
        return np.maximum(c - self.radius, 0.0), c + self.radius

    def _psi_derivs(self, v: np.ndarray):
        w2 = self.plateau**2
        u = 1.0 - v
        s = v - w2
        a = np.exp(-1.0 / u)
        b = np.exp(-1.0 / s)
        da = -a / (u * u)
        db = b / (s * s)
        d2a = a * (1.0 / u**4 - 2.0 / u**3)
        d2b = b * (1.0 / s**4 - 2.0 / s**3)
        denom = a + b
        psi = a / denom
        p1 = (da * b - a * db) / denom**2
        p2 = ((d2a * b - a * d2b) * denom - 2.0 * (da * b - a * db) * (da + db)) / denom**3
        return psi, p1, p2

    def _regions(self, v: np.ndarray):
        w2 = self.plateau**2
        flat = v <= w2 + self._BAND
        outside = v >= 1.0 - self._BAND
        mid = ~(flat | outside)
        return flat, mid

    def value(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        v = self._v(x)
        flat, mid = self._regions(v)
        out = np.zeros_like(v)
        out[flat] = 1.0
        if np.any(mid):
            out[mid] = self._psi_derivs(v[mid])[0]
        return out

    def gradient(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        v = self._v(x)
        _, mid = self._regions(v)
        g = np.zeros_like(x)
        if np.any(mid):
            _, p1, _ = self._psi_derivs(v[mid])
            d = x[mid] - np.asarray(self.center, dtype=float)
            g[mid] = p1[..., None] * 2.0 * d / (self.radius**2)
        return g

    def hessian(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        v = self._v(x)
        n = x.shape[-1]
        h = np.zeros(x.shape + (n,))
        _, mid = self._regions(v)
        if np.any(mid):
            _, p1, p2 = self._psi_derivs(v[mid])
            d = x[mid] - np.asarray(self.center, dtype=float)
            r2 = self.radius**2
            h[mid] = (
                p2[..., None, None] * 4.0 * d[..., :, None] * d[..., None, :] / (r2 * r2)
                + p1[..., None, None] * 2.0 * np.eye(n) / r2
            )
        return h


def apply_generator(test_fn, x: np.ndarray, params: ModelParams) -> np.ndarray:
    """A phi(x) = <grad, x(1 + (Sigma-I)x) + phi_imm> + T sum_i x_i d2_ii."""
    x = np.asarray(x, dtype=float)
    pts = x if x.ndim == 2 else x[None, :]
    sig = params.interaction
    drift = pts * (1.0 + pts @ sig.T - pts) + params.phi
    grad = test_fn.gradient(pts)
    hess = test_fn.hessian(pts)
    diag2 = np.einsum("...ii->...i", hess)
    out = np.einsum("mi,mi->m", grad, drift) + params.temperature * np.einsum(
        "mi,mi->m", pts, diag2
    )
    return out if x.ndim == 2 else float(out[0])


def generator_residual(
    test_fn,
    target: GibbsTarget,
    grid_size: int | None = None,
) -> float:
    """Quadrature of A(test_fn) against the normalized Gibbs density.

    Exactly zero in the continuum by stationarity; the return value measures
    quadrature plus normalization error.  Supports n <= 2.
    """
    if target.external_field is not None:
        raise ValueError("stationarity check expects a standard target")
    n = target.params.n
    if n > 2:
        raise ValueError("generator_residual supports n <= 2")
    lo, hi = test_fn.support_box()
    lo = np.broadcast_to(np.asarray(lo, dtype=float), (n,))
    hi = np.broadcast_to(np.asarray(hi, dtype=float), (n,))
    if np.any(hi <= lo):
        raise ValueError("empty test-function support")
    q = grid_size if grid_size is not None else (400 if n == 1 else 200)
    log_z = quadrature_log_z(target)

    t, w = roots_legendre(q)
    axes = []
    for i in range(n):
        x = 0.5 * (hi[i] - lo[i]) * (t + 1.0) + lo[i]
        axes.append((x, w * 0.5 * (hi[i] - lo[i])))
    if n == 1:
        pts = axes[0][0][:, None]
        weights = axes[0][1]
    else:
        xx1, xx2 = np.meshgrid(axes[0][0], axes[1][0], indexing="ij")
        pts = np.column_stack([xx1.ravel(), xx2.ravel()])
        weights = np.outer(axes[0][1], axes[1][1]).ravel()

    dens = np.exp(target.log_density(pts) - log_z)
    vals = apply_generator(test_fn, pts, target.params)
    return float(np.sum(weights * vals * dens))
