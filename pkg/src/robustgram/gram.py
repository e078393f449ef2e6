"""Matrix-level estimators of the second-moment (Gram) matrix.

The practical robust estimator starts from the empirical Gram matrix,
re-estimates every quadratic form N(u_i +/- u_j) in the current eigenbasis
with the robust scalar scale solver, reassembles the matrix through the
polarization identity, and iterates with the eigenbasis of the new estimate.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .mestimator import Sample, lambda_from_squares, scale_from_squares

logger = logging.getLogger(__name__)


class NumericalError(RuntimeError):
    """Raised when an iterate degenerates (non-finite entries, failed solve)."""


@dataclass
class GramEstimate:
    """Symmetric estimate with iteration diagnostics.

    frobenius_deltas[k] is the Frobenius distance between update k and its
    predecessor (the empirical start for k = 0).  lambda_used holds one
    per-update summary (mean over directions) of the adaptive truncation
    levels; empty when a custom scale function is supplied.
    """

    matrix: np.ndarray
    iterations: int
    frobenius_deltas: list = field(default_factory=list)
    lambda_used: list = field(default_factory=list)


def empirical_gram(sample: Sample) -> np.ndarray:
    """Classical estimator (1/n) sum X_i X_i^T."""
    y = sample.data
    g = y.T @ y / sample.n
    return 0.5 * (g + g.T)


def frobenius_error(q: np.ndarray, g: np.ndarray) -> float:
    """Squared Frobenius distance sum_ij (Q_ij - G_ij)^2."""
    q = np.asarray(q, dtype=float)
    g = np.asarray(g, dtype=float)
    if q.shape != g.shape:
        raise ValueError(f"shape mismatch: {q.shape} vs {g.shape}")
    diff = q - g
    return float(np.sum(diff * diff))


def positive_part(q: np.ndarray) -> np.ndarray:
    """Project a symmetric matrix onto the PSD cone by clamping eigenvalues."""
    q = np.asarray(q, dtype=float)
    if q.ndim != 2 or q.shape[0] != q.shape[1]:
        raise ValueError("expected a square matrix")
    sym = 0.5 * (q + q.T)
    vals, vecs = np.linalg.eigh(sym)
    clipped = np.clip(vals, 0.0, None)
    out = (vecs * clipped) @ vecs.T
    return 0.5 * (out + out.T)


def robust_scale_fn(p: np.ndarray, epsilon: float, lam_log: list = None) -> float:
    """Default per-direction scale: adaptive truncation level, then the solver.

    Falls back to lambda = 1/sqrt(n) when the adaptive formula is undefined
    (tiny n or degenerate squared values).
    """
    v = np.asarray(p, dtype=float) ** 2
    if not (v > 0.0).any():
        return 0.0
    try:
        lam = lambda_from_squares(v, epsilon)
    except ValueError:
        lam = 1.0 / math.sqrt(v.size)
    if lam_log is not None:
        lam_log.append(lam)
    result = scale_from_squares(v, lam)
    if not result.converged:
        logger.warning("scale solve did not converge (lambda=%.3g); using %.6g",
                       lam, result.value)
    return result.value


def polarization_update(w: np.ndarray, scale_fn, epsilon: float) -> np.ndarray:
    """Matrix C with C_ij = (scale_fn(w_i + w_j) - scale_fn(w_i - w_j)) / 4.

    Columns of ``w`` are the projections of the data on the current basis.
    The diagonal uses the doubled column against scale_fn(0) := 0.  With the
    mean-of-squares scale this is exactly (1/n) w^T w.
    """
    w = np.asarray(w, dtype=float)
    n, d = w.shape
    c = np.zeros((d, d))
    for i in range(d):
        for j in range(i, d):
            plus = w[:, i] + w[:, j]
            minus = w[:, i] - w[:, j]
            try:
                s_plus = scale_fn(plus, epsilon) if np.any(plus != 0.0) else 0.0
                s_minus = scale_fn(minus, epsilon) if np.any(minus != 0.0) else 0.0
            except ValueError as exc:
                raise NumericalError(f"scale solve failed at entry ({i}, {j}): {exc}") from exc
            c[i, j] = c[j, i] = 0.25 * (s_plus - s_minus)
    return c


def _descending_eigenbasis(q: np.ndarray) -> np.ndarray:
    vals, vecs = np.linalg.eigh(q)
    return vecs[:, ::-1]


def robust_gram(sample: Sample, epsilon: float = 0.1, num_updates: int = 4,
                stop_tol: float = 1e-8, scale_fn=None) -> GramEstimate:
    """Iterative robust estimate of E[X X^T].

    Each update rotates the data into the eigenbasis of the previous estimate
    (the empirical Gram matrix initially), runs the polarization update there,
    and rotates back.  Stops after ``num_updates`` or once consecutive
    iterates are closer than ``stop_tol`` in Frobenius norm.
    """
    if sample.n < 2:
        raise ValueError("robust_gram needs at least two observations")
    if num_updates < 1:
        raise ValueError("num_updates must be at least 1")
    y = sample.data
    lam_means = []
    if scale_fn is None:
        track = True
        lam_log = []

        def scale_fn(p, eps):
            return robust_scale_fn(p, eps, lam_log)
    else:
        track = False

    prev = empirical_gram(sample)
    basis = _descending_eigenbasis(prev)
    q = prev
    deltas = []
    iterations = 0
    for k in range(num_updates):
        if track:
            lam_log.clear()
        c = polarization_update(y @ basis, scale_fn, epsilon)
        q = basis @ c @ basis.T
        q = 0.5 * (q + q.T)
        if not np.all(np.isfinite(q)):
            raise NumericalError(f"non-finite iterate at update {k}")
        if track:
            lam_means.append(float(np.mean(lam_log)) if lam_log else math.nan)
        deltas.append(math.sqrt(frobenius_error(q, prev)))
        iterations = k + 1
        if deltas[-1] < stop_tol:
            break
        prev = q
        basis = _descending_eigenbasis(q)
    return GramEstimate(matrix=q, iterations=iterations,
                        frobenius_deltas=deltas, lambda_used=lam_means)
