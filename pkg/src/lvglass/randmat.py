"""Deformed GOE sampling and the maximum of the quadratic form over the
nonnegative unit sphere.

lambda_plus_max(A) = max { u'Au : u >= 0, |u| = 1 }.  The exact solver
enumerates candidate supports (any maximizer restricted to its support is
a nonnegative eigenvector of the principal submatrix, with the off-support
entries of Au nonpositive); the heuristic runs a projected power iteration
on the shifted matrix and is a certified lower bound.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .frontier import EnsembleParams

__all__ = [
    "InteractionMatrix",
    "HeuristicResult",
    "sample_goe",
    "operator_norm",
    "lambda_plus_max_exact",
    "lambda_plus_max_heuristic",
    "lambda_plus_max",
    "is_realizable",
    "truncate_interaction",
]

EXACT_MAX_N = 20
SYMMETRY_TOL = 1e-12
KKT_TOL = 1e-10


def sample_goe(n: int, seed: int) -> np.ndarray:
    """GOE draw (M + M') / sqrt(2): off-diagonal variance 1, diagonal 2."""
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    rng = np.random.default_rng(seed)
    m = rng.standard_normal((n, n))
    return (m + m.T) / math.sqrt(2.0)


@dataclass(frozen=True)
class InteractionMatrix:
    """Sigma = kappa/sqrt(n) * W + alpha/n * ones, W a GOE draw."""

    n: int
    entries: np.ndarray
    ensemble: EnsembleParams
    seed: int

    @classmethod
    def sample(cls, n: int, ensemble: EnsembleParams, seed: int) -> "InteractionMatrix":
        w = sample_goe(n, seed)
        entries = (ensemble.kappa / math.sqrt(n)) * w + (ensemble.alpha / n) * np.ones((n, n))
        entries.flags.writeable = False
        return cls(n=n, entries=entries, ensemble=ensemble, seed=seed)

    def __post_init__(self) -> None:
        e = np.asarray(self.entries, dtype=float)
        if e.shape != (self.n, self.n):
            raise ValueError(f"entries shape {e.shape} does not match n={self.n}")
        _check_symmetric(e)


def _check_symmetric(a: np.ndarray) -> np.ndarray:
    a = np.asarray(a, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {a.shape}")
    gap = np.max(np.abs(a - a.T)) if a.size else 0.0
    if gap > SYMMETRY_TOL:
        raise ValueError(f"matrix is not symmetric: max asymmetry {gap:.3e}")
    return a


def _as_matrix(a) -> np.ndarray:
    if isinstance(a, InteractionMatrix):
        return np.asarray(a.entries, dtype=float)
    return _check_symmetric(a)


def operator_norm(a, tol: float = 1e-10, max_iter: int = 20000) -> float:
    """Largest absolute eigenvalue, by dense solve (small n) or power iteration."""
    mat = _as_matrix(a)
    n = mat.shape[0]
    if n <= 512:
        return float(np.max(np.abs(np.linalg.eigvalsh(mat))))
    rng = np.random.default_rng(1234)
    v = rng.standard_normal(n)
    v /= np.linalg.norm(v)
    prev = 0.0
    for _ in range(max_iter):
        av = mat @ v
        norm_av = np.linalg.norm(av)
        if norm_av == 0.0:
            return 0.0
        ray = float(v @ av)
        v = av / norm_av
        if abs(ray - prev) <= tol * max(1.0, abs(ray)):
            return abs(ray)
        prev = ray
    return abs(prev)


def _sign_fix(vec: np.ndarray) -> np.ndarray:
    # orient so the largest-magnitude entry is positive
    j = int(np.argmax(np.abs(vec)))
    return -vec if vec[j] < 0.0 else vec


def lambda_plus_max_exact(a) -> tuple[float, np.ndarray]:
    """Exact maximizer by support enumeration, n <= 20.

    Candidate supports S contribute eigenpairs of A_S whose eigenvector is
    entrywise nonnegative (after orientation) and whose extension u satisfies
    (Au)_i <= 0 off the support; the global maximizer is always a candidate.
    """
    mat = _as_matrix(a)
    n = mat.shape[0]
    if n > EXACT_MAX_N:
        raise ValueError(f"exact enumeration limited to n <= {EXACT_MAX_N}, got {n}")
    all_idx = np.arange(n)
    best_val = -math.inf
    best_u: np.ndarray | None = None
    for mask in range(1, 1 << n):
        idx = all_idx[[(mask >> i) & 1 == 1 for i in range(n)]]
        k = len(idx)
        if k == 1:
            vecs = np.ones((1, 1))
            vals = mat[idx[0], idx[0]] * np.ones(1)
        else:
            vals, vecs = np.linalg.eigh(mat[np.ix_(idx, idx)])
        for j in range(k):
            v = _sign_fix(vecs[:, j])
            if np.min(v) < -KKT_TOL:
                continue
            v = np.clip(v, 0.0, None)
            v /= np.linalg.norm(v)
            u = np.zeros(n)
            u[idx] = v
            au = mat @ u
            outside = np.delete(au, idx)
            if outside.size and np.max(outside) > KKT_TOL:
                continue
            val = float(u @ au)
            if val > best_val:
                best_val = val
                best_u = u
    assert best_u is not None  # singleton supports always produce candidates
    return best_val, best_u


@dataclass(frozen=True)
class HeuristicResult:
    value: float
    maximizer: np.ndarray
    converged: bool
    iterations: int


def lambda_plus_max_heuristic(
    a,
    restarts: int = 8,
    seed: int = 0,
    tol: float = 1e-12,
    max_iter: int = 100000,
) -> HeuristicResult:
    """Projected power iteration on A + (|A| + 1) I from several positive starts.

    Always a lower bound on the exact value (the iterate stays feasible);
    the Rayleigh quotient is nondecreasing along the iteration.
    """
    mat = _as_matrix(a)
    n = mat.shape[0]
    shift = operator_norm(mat) + 1.0
    rng = np.random.default_rng(seed)

    # the two halves of the dominant eigenvector make good warm starts
    v1 = rng.standard_normal(n)
    v1 /= np.linalg.norm(v1)
    for _ in range(200):
        v1 = mat @ v1 + shift * v1
        v1 /= np.linalg.norm(v1)
    starts = [np.ones(n) / math.sqrt(n)]
    for half in (np.clip(v1, 0.0, None), np.clip(-v1, 0.0, None)):
        nrm = np.linalg.norm(half)
        if nrm > 1e-12:
            starts.append(half / nrm)

    best = HeuristicResult(-math.inf, np.zeros(n), False, 0)
    for r in range(max(len(starts), restarts)):
        if r < len(starts):
            u = starts[r]
        else:
            u = np.abs(rng.standard_normal(n))
            u /= np.linalg.norm(u)
        ray_prev = float(u @ (mat @ u))
        converged = False
        it = 0
        budget = max_iter // max(1, restarts)
        while it < budget:
            it += 1
            v = mat @ u + shift * u
            np.clip(v, 0.0, None, out=v)
            norm_v = np.linalg.norm(v)
            if norm_v == 0.0:
                break  # cannot happen for shift > |A|, kept as a guard
            u = v / norm_v
            ray = float(u @ (mat @ u))
            if abs(ray - ray_prev) <= tol * max(1.0, abs(ray)):
                converged = True
                ray_prev = ray
                break
            ray_prev = ray
        if ray_prev > best.value:
            best = HeuristicResult(ray_prev, u, converged, it)
    return best


def lambda_plus_max(a, restarts: int = 8, seed: int = 0) -> float:
    """Exact value for n <= 20, heuristic value above."""
    mat = _as_matrix(a)
    if mat.shape[0] <= EXACT_MAX_N:
        return lambda_plus_max_exact(mat)[0]
    return lambda_plus_max_heuristic(mat, restarts=restarts, seed=seed).value


def is_realizable(a, eps_sigma: float, restarts: int = 8, seed: int = 0) -> bool:
    """Whether lambda_plus_max(A) < 1 - eps_sigma."""
    if not (0.0 < eps_sigma < 1.0):
        raise ValueError(f"eps_sigma must lie in (0, 1), got {eps_sigma}")
    return lambda_plus_max(a, restarts=restarts, seed=seed) < 1.0 - eps_sigma


def truncate_interaction(a, eps_sigma: float, restarts: int = 8, seed: int = 0) -> np.ndarray:
    """A itself when realizable, otherwise the zero matrix."""
    mat = _as_matrix(a)
    if is_realizable(mat, eps_sigma, restarts=restarts, seed=seed):
        return mat
    return np.zeros_like(mat)
