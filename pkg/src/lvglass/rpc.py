"""Ruelle cascades and Monte-Carlo verification of the nested recursion.

A cascade with levels lambda_0 < ... < lambda_{K-1} attaches to every tree
node at depth k the ranked atoms of a Poisson process with intensity
lambda_k u^{-lambda_k - 1} du, sampled as u_j = T_j^{-1/lambda_k} from
exponential partial sums T_j.  Leaf weights are path products, normalized
over all retained leaves; the mass lost to keeping only the top N atoms
per node is estimated from the (N+1)-th partial sum and surfaced, since
the truncation bias of E log sum v_i e^(...) is one-sided and has no
closed-form bound to check against.

verify_prpc draws (cascade, tree Gaussians) replicas, evaluates
log sum_i v_i exp(leaf at the path's Gaussian sum), and studentizes the
gap to the deterministic recursion value.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.interpolate import CubicSpline
from scipy.special import logsumexp

from lvglass.parisi import (
    MuBetaLeaf,
    ParisiArgs,
    ParisiMeasure,
    recursion_x0,
)

__all__ = [
    "CascadeSample",
    "TreeGaussians",
    "PrpcReport",
    "sample_cascade",
    "sample_tree_gaussians",
    "q_leaf",
    "y_leaf",
    "q_values",
    "y_values",
    "verify_prpc",
    "truncation_gap",
]

MIN_BRANCHING = 100
MAX_LEAVES = 1_000_000
SPLINE_THRESHOLD = 10_000
SPLINE_POINTS = 4000


@dataclass(frozen=True)
class CascadeSample:
    """Top-N truncation of a Ruelle cascade, weights normalized globally."""

    lambdas: tuple
    n_branch: int
    log_weights: np.ndarray
    retained_mass_estimate: float
    seed: int | None

    @property
    def levels(self) -> int:
        return len(self.lambdas)

    @property
    def weights(self) -> np.ndarray:
        return np.exp(self.log_weights)

    def leaf_weight(self, path) -> float:
        return float(np.exp(self.log_weights[tuple(path)]))


@dataclass(frozen=True)
class TreeGaussians:
    """One standard normal per tree node; level k holds an (N,)*k array."""

    levels: tuple

    def node(self, path) -> float:
        k = len(path)
        return float(self.levels[k - 1][tuple(path)])


def _validate_lambdas(lambdas) -> np.ndarray:
    lam = np.asarray(lambdas, dtype=float)
    if lam.ndim != 1 or lam.size < 1:
        raise ValueError("lambdas must be a nonempty 1-d sequence")
    if not (np.all(lam > 0) and np.all(lam < 1) and np.all(np.diff(lam) > 0)):
        raise ValueError("lambdas must be strictly increasing inside (0, 1)")
    return lam


def _ranked_atom_logs(rng, lam: float, shape: tuple) -> tuple:
    """log of the N largest atoms per node plus the tail-mass estimate."""
    n = shape[-1]
    gaps = rng.exponential(size=shape[:-1] + (n + 1,))
    t = np.cumsum(gaps, axis=-1)
    log_atoms = -np.log(t[..., :n]) / lam
    # E sum_{j>N} T_j^{-1/lam} ~ integral_{T_{N+1}}^inf t^{-1/lam} dt
    tail = lam / (1.0 - lam) * t[..., n] ** ((lam - 1.0) / lam)
    retained = np.exp(logsumexp(log_atoms, axis=-1))
    fraction = retained / (retained + tail)
    return log_atoms, float(np.mean(fraction))


def _atom_levels(rng, lam: np.ndarray, n_branch: int) -> tuple:
    """Per-level ranked log-atoms plus the overall retained-mass estimate."""
    levels = []
    retained = 1.0
    for k in range(lam.size):
        shape = (n_branch,) * (k + 1)
        log_atoms, fraction = _ranked_atom_logs(rng, lam[k], shape)
        levels.append(log_atoms)
        retained *= fraction
    return levels, retained


def _path_log_weights(levels, keep: int | None = None) -> np.ndarray:
    """Normalized leaf log-weights; keep restricts to the top atoms per node."""
    logw = np.zeros(())
    for log_atoms in levels:
        if keep is not None:
            log_atoms = log_atoms[(slice(None, keep),) * log_atoms.ndim]
        logw = logw[..., None] + log_atoms
    return logw - logsumexp(logw)


def _sample_cascade(rng, lam: np.ndarray, n_branch: int,
                    seed) -> CascadeSample:
    levels, retained = _atom_levels(rng, lam, n_branch)
    return CascadeSample(
        lambdas=tuple(float(v) for v in lam),
        n_branch=n_branch,
        log_weights=_path_log_weights(levels),
        retained_mass_estimate=retained,
        seed=seed,
    )


def sample_cascade(lambdas, n_branch: int, seed: int) -> CascadeSample:
    """Ranked Poisson atoms per node, leaf weights as normalized products."""
    lam = _validate_lambdas(lambdas)
    if n_branch < MIN_BRANCHING:
        raise ValueError(f"need a branching cap of at least {MIN_BRANCHING}")
    if n_branch**lam.size > MAX_LEAVES:
        raise ValueError(f"refusing more than {MAX_LEAVES} leaves")
    return _sample_cascade(np.random.default_rng(seed), lam, n_branch, seed)


def _sample_tree_gaussians(rng, k_levels: int, n_branch: int) -> TreeGaussians:
    return TreeGaussians(levels=tuple(
        rng.standard_normal((n_branch,) * (k + 1)) for k in range(k_levels)
    ))


def sample_tree_gaussians(k_levels: int, n_branch: int,
                          seed: int) -> TreeGaussians:
    return _sample_tree_gaussians(np.random.default_rng(seed), k_levels,
                                  n_branch)


def _tree_sum(gaussians: TreeGaussians, coeffs: np.ndarray) -> np.ndarray:
    """sum_k coeffs[k] * z_(path prefix of length k), over all leaves."""
    k_levels = len(gaussians.levels)
    out = np.zeros((1,) * k_levels)
    for k, z in enumerate(gaussians.levels):
        shape = z.shape + (1,) * (k_levels - 1 - k)
        out = out + coeffs[k] * z.reshape(shape)
    return out


def _increment_coeffs(zeta, beta: float, kappa: float, kind: str) -> np.ndarray:
    if isinstance(zeta, ParisiMeasure):
        b = np.asarray(zeta.atoms)
    else:
        _, b = zeta
        b = np.asarray(b, dtype=float)
    if kind == "q":
        return beta * kappa * np.sqrt(np.diff(b))
    return beta * kappa / math.sqrt(2.0) * np.sqrt(np.diff(b**2))


def q_values(gaussians: TreeGaussians, zeta, beta: float,
             kappa: float) -> np.ndarray:
    """All-leaf Gaussian field with covariance xi'(b at the path overlap)."""
    return _tree_sum(gaussians, _increment_coeffs(zeta, beta, kappa, "q"))


def y_values(gaussians: TreeGaussians, zeta, beta: float,
             kappa: float) -> np.ndarray:
    """All-leaf Gaussian field with covariance theta(b at the path overlap)."""
    return _tree_sum(gaussians, _increment_coeffs(zeta, beta, kappa, "y"))


def _path_sum(path, gaussians: TreeGaussians, coeffs: np.ndarray) -> float:
    if len(path) != len(gaussians.levels):
        raise ValueError("path length must equal the number of levels")
    total = 0.0
    for k in range(len(path)):
        total += coeffs[k] * gaussians.node(path[: k + 1])
    return float(total)


def q_leaf(path, gaussians: TreeGaussians, zeta, beta: float,
           kappa: float) -> float:
    return _path_sum(path, gaussians, _increment_coeffs(zeta, beta, kappa, "q"))


def y_leaf(path, gaussians: TreeGaussians, zeta, beta: float,
           kappa: float) -> float:
    return _path_sum(path, gaussians, _increment_coeffs(zeta, beta, kappa, "y"))


@dataclass(frozen=True)
class PrpcReport:
    mc_estimate: float
    recursion_value: float
    std_error: float
    z_score: float
    n_branch: int
    replicas: int
    seed: int
    mean_retained_mass: float

    def as_tuple(self) -> tuple:
        return self.mc_estimate, self.recursion_value, self.z_score


def _leaf_values_for(leaf, s: np.ndarray) -> np.ndarray:
    if s.size <= SPLINE_THRESHOLD:
        return leaf.value(s)
    lo, hi = float(s.min()), float(s.max())
    pad = 1e-9 + 1e-3 * (hi - lo)
    grid = np.linspace(lo - pad, hi + pad, SPLINE_POINTS)
    spline = CubicSpline(grid, leaf.value(grid))
    return spline(s)


def verify_prpc(zeta: ParisiMeasure, args: ParisiArgs, n_branch: int,
                replicas: int, *, seed: int = 0, leaf=None) -> PrpcReport:
    """Studentized gap between the cascade Monte Carlo and the recursion.

    Replica r draws its cascade and tree Gaussians from a stream seeded
    seed + r, so replicas are independent and the run is reproducible.
    """
    if zeta.levels > 2:
        raise ValueError("leaf enumeration is affordable only for K <= 2")
    if replicas < 2:
        raise ValueError("need at least two replicas for a standard error")
    lam = _validate_lambdas(zeta.lambdas)
    if n_branch < MIN_BRANCHING:
        raise ValueError(f"need a branching cap of at least {MIN_BRANCHING}")
    if n_branch**lam.size > MAX_LEAVES:
        raise ValueError(f"refusing more than {MAX_LEAVES} leaves")

    model = args.model
    if leaf is None:
        s_scale = model.beta * model.kappa * math.sqrt(zeta.d_max)
        leaf = MuBetaLeaf.build(args.a, model, args.gamma,
                                s_max=6.0 * s_scale)
    rec = recursion_x0(zeta, args, leaf=leaf)

    coeffs = _increment_coeffs(zeta, model.beta, model.kappa, "q")
    tilt0 = model.beta * model.alpha * args.h
    values = np.empty(replicas)
    retained = np.empty(replicas)
    for r in range(replicas):
        rng = np.random.default_rng(seed + r)
        levels, retained[r] = _atom_levels(rng, lam, n_branch)
        gz = _sample_tree_gaussians(rng, zeta.levels, n_branch)
        s = _tree_sum(gz, coeffs) + tilt0
        leaf_vals = _leaf_values_for(leaf, s)
        values[r] = logsumexp(_path_log_weights(levels) + leaf_vals)

    mc = float(np.mean(values))
    se = float(np.std(values, ddof=1) / math.sqrt(replicas))
    se = max(se, 1e-15)
    return PrpcReport(
        mc_estimate=mc,
        recursion_value=float(rec),
        std_error=se,
        z_score=(mc - rec) / se,
        n_branch=n_branch,
        replicas=replicas,
        seed=seed,
        mean_retained_mass=float(np.mean(retained)),
    )


def truncation_gap(zeta: ParisiMeasure, args: ParisiArgs, n_branch: int,
                   replicas: int, *, seed: int = 0,
                   leaf=None) -> tuple[float, float, float]:
    """Effect of halving the branching cap, on matched draws.

    Each replica evaluates the cascade average at cap n_branch and again
    restricted to the top n_branch//2 atoms per node (the exact nested
    truncation of the same sample), so the returned gap isolates the
    truncation bias from replica noise.  Returns (gap, full-estimate
    standard error, full estimate).
    """
    if zeta.levels > 2:
        raise ValueError("leaf enumeration is affordable only for K <= 2")
    lam = _validate_lambdas(zeta.lambdas)
    half = n_branch // 2
    if half < MIN_BRANCHING:
        raise ValueError("halved cap would fall below the minimum branching")

    model = args.model
    if leaf is None:
        s_scale = model.beta * model.kappa * math.sqrt(zeta.d_max)
        leaf = MuBetaLeaf.build(args.a, model, args.gamma,
                                s_max=6.0 * s_scale)
    coeffs = _increment_coeffs(zeta, model.beta, model.kappa, "q")
    tilt0 = model.beta * model.alpha * args.h
    full = np.empty(replicas)
    gaps = np.empty(replicas)
    for r in range(replicas):
        rng = np.random.default_rng(seed + r)
        levels, _ = _atom_levels(rng, lam, n_branch)
        gz = _sample_tree_gaussians(rng, zeta.levels, n_branch)
        s = _tree_sum(gz, coeffs) + tilt0
        leaf_vals = _leaf_values_for(leaf, s)
        full[r] = logsumexp(_path_log_weights(levels) + leaf_vals)
        sub = (slice(None, half),) * zeta.levels
        coarse = logsumexp(_path_log_weights(levels, keep=half)
                           + leaf_vals[sub])
        gaps[r] = full[r] - coarse

    se = max(float(np.std(full, ddof=1) / math.sqrt(replicas)), 1e-15)
    return float(np.mean(gaps)), se, float(np.mean(full))
