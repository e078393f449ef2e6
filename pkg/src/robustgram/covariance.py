"""Covariance estimation with unknown mean via q-blocks of pairwise differences.

The sample is split into consecutive blocks of size q; each block yields the
PSD matrix A_i = (1/(q(q-1))) sum_{j<k} (X_j - X_k)(X_j - X_k)^T, an unbiased
estimate of the covariance that only sees differences, hence is exactly
translation invariant.  The matrix-level machinery of :mod:`robustgram.gram`
then runs on the quadratic values theta^T A_i theta instead of squared
projections.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from . import bounds as bnd
from .gram import GramEstimate, NumericalError, _descending_eigenbasis, frobenius_error, positive_part
from .influence import psi
from .mestimator import Sample, lambda_from_squares, scale_from_squares, tilde_n_from_squares

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class BlockSet:
    """The per-block covariance matrices A_1..A_m for block size q."""

    blocks: np.ndarray  # (m, d, d)
    q: int
    m: int = field(init=False)

    def __post_init__(self):
        arr = np.asarray(self.blocks, dtype=float)
        if arr.ndim != 3 or arr.shape[1] != arr.shape[2]:
            raise ValueError("blocks must be a (m, d, d) array")
        object.__setattr__(self, "blocks", arr)
        object.__setattr__(self, "m", arr.shape[0])

    def quadratic_values(self, theta) -> np.ndarray:
        """Vector of theta^T A_i theta over the blocks."""
        theta = np.asarray(theta, dtype=float)
        if theta.shape != (self.blocks.shape[1],):
            raise ValueError("direction dimension mismatch")
        return np.einsum("mij,i,j->m", self.blocks, theta, theta)


def make_blocks(sample: Sample, q: int) -> BlockSet:
    """Split contiguously into floor(n/q) blocks and form their covariances.

    A_i = (1/(q(q-1))) sum_{j<k in block i} (x_j - x_k)(x_j - x_k)^T, computed
    from the pairwise differences themselves so that shifting every
    observation by the same vector leaves the blocks bitwise unchanged.
    Trailing n mod q observations are discarded with a warning.
    """
    if q < 2:
        raise ValueError("q must be at least 2")
    if sample.n < q:
        raise ValueError(f"need at least q = {q} observations, got {sample.n}")
    m = sample.n // q
    rest = sample.n - m * q
    if rest:
        logger.warning("discarding %d trailing observations (n = %d, q = %d)",
                       rest, sample.n, q)
    x = sample.data[: m * q].reshape(m, q, sample.d)
    jj, kk = np.triu_indices(q, k=1)
    diffs = x[:, jj, :] - x[:, kk, :]  # (m, q(q-1)/2, d)
    blocks = np.einsum("mpi,mpj->mij", diffs, diffs) / (q * (q - 1.0))
    blocks = 0.5 * (blocks + blocks.transpose(0, 2, 1))
    return BlockSet(blocks=blocks, q=q)


def r_lambda_sym(blocks: BlockSet, theta, lam: float) -> float:
    """Criterion (1/m) sum psi(theta^T A_i theta - lambda)."""
    if lam <= 0:
        raise ValueError("lambda must be positive")
    return float(np.mean(psi(blocks.quadratic_values(theta) - lam)))


def block_moment_bounds(sigma: np.ndarray, kappa: float, q: int) -> tuple:
    """Bounds on E||A theta||^2 / N(theta) and on E[Tr(A^2)] for the blocks.

    Returns (w ||Sigma||_inf + (kappa + 1/(q-1)) Tr(Sigma) / q,
             w Tr(Sigma^2)   + (kappa + 1/(q-1)) Tr(Sigma)^2 / q)
    with w = 1 - (q-2)/(q(q-1)).
    """
    if q < 2:
        raise ValueError("q must be at least 2")
    sigma = np.asarray(sigma, dtype=float)
    if sigma.ndim != 2 or sigma.shape[0] != sigma.shape[1]:
        raise ValueError("Sigma must be square")
    tr = float(np.trace(sigma))
    tr2 = float(np.trace(sigma @ sigma))
    op = float(np.linalg.eigvalsh(0.5 * (sigma + sigma.T)).max())
    w = 1.0 - (q - 2.0) / (q * (q - 1.0))
    coef = kappa + 1.0 / (q - 1.0)
    return (w * op + coef * tr / q, w * tr2 + coef * tr * tr / q)


def _scale_on_values(v: np.ndarray, epsilon: float) -> float:
    """Robust scale of non-negative quadratic values with adaptive truncation."""
    if not (v > 0.0).any():
        return 0.0
    try:
        lam = lambda_from_squares(v, epsilon)
    except ValueError:
        lam = 1.0 / math.sqrt(v.size)
    return scale_from_squares(v, lam).value


def _certified_estimator(v: np.ndarray, norm_sq: float, grid: bnd.Grid,
                         coeffs: list, sigma: float) -> float:
    """Grid-selected estimate on quadratic values (smallest lambda if vacuous)."""
    best_bound, best_val = math.inf, None
    for (lam, _), co in zip(grid.points, coeffs):
        val = tilde_n_from_squares(v, lam)
        b = bnd.b_bound(val / norm_sq, sigma, co)
        if b < best_bound:
            best_bound, best_val = b, val
    if best_val is None:
        best_val = tilde_n_from_squares(v, grid.points[0][0])
    return best_val


def _polarized_matrix(rotated: np.ndarray, estimator) -> np.ndarray:
    """Assemble C from per-direction estimates on the rotated quadratic values."""
    m, d, _ = rotated.shape
    c = np.zeros((d, d))
    diag = np.einsum("mii->mi", rotated)
    for i in range(d):
        c[i, i] = 0.25 * estimator(4.0 * diag[:, i], 4.0)
        for j in range(i + 1, d):
            v_plus = diag[:, i] + 2.0 * rotated[:, i, j] + diag[:, j]
            v_minus = diag[:, i] - 2.0 * rotated[:, i, j] + diag[:, j]
            # quadratic values are non-negative up to roundoff
            v_plus = np.clip(v_plus, 0.0, None)
            v_minus = np.clip(v_minus, 0.0, None)
            c[i, j] = c[j, i] = 0.25 * (estimator(v_plus, 2.0) - estimator(v_minus, 2.0))
    return c


def plugin_block_kappa(blocks: BlockSet, n_directions: int = 50, seed: int = 0) -> float:
    """Plug-in directional kurtosis of the centered data, from q = 2 style pairs."""
    rng = np.random.default_rng(seed)
    d = blocks.blocks.shape[1]
    dirs = [np.eye(d)[i] for i in range(d)]
    raw = rng.standard_normal((n_directions, d))
    dirs += [r / np.linalg.norm(r) for r in raw if np.linalg.norm(r) > 0]
    best = 1.0
    for theta in dirs:
        v = blocks.quadratic_values(theta)
        m2 = float(np.mean(v))
        if m2 <= 0.0:
            continue
        best = max(best, float(np.mean(v * v)) / (m2 * m2))
    return best


def robust_covariance(sample: Sample, q: int = 2, epsilon: float = 0.1,
                      mode: str = "iterative-practical", num_updates: int = 4,
                      stop_tol: float = 1e-8, mb: bnd.MomentBounds = None,
                      psd: bool = False) -> GramEstimate:
    """Robust estimate of the covariance matrix with unknown mean.

    mode "iterative-practical" runs the rotating-eigenbasis polarization loop
    with the adaptive scale solver on the block quadratic values.  Mode
    "grid-certified" replaces the per-direction scale by the grid-selected
    estimator (kappa mapped through the q-block transfer, n replaced by the
    block count); it requires enough blocks for the theoretical grid.
    Set ``psd=True`` to clamp negative eigenvalues of the final estimate.
    """
    if mode not in ("iterative-practical", "grid-certified"):
        raise ValueError(f"unknown mode {mode!r}")
    blocks = make_blocks(sample, q)
    mvals = blocks.blocks.shape[0]

    if mode == "iterative-practical":
        def estimator(v, _norm_sq):
            return _scale_on_values(v, epsilon)
    else:
        kappa_x = mb.kappa if mb is not None else plugin_block_kappa(blocks)
        kappa_prime = 1.0 + bnd.tau_q(kappa_x, q) / q
        op_sq = np.array([np.linalg.eigvalsh(a).max() ** 2 for a in blocks.blocks])
        s4_a = float(np.mean(op_sq)) ** 0.25
        tr_a = float(np.mean(np.trace(blocks.blocks, axis1=1, axis2=2)))
        mb_blocks = bnd.MomentBounds(kappa=kappa_prime, s4=s4_a,
                                     trace_g=max(tr_a, s4_a**2 / math.sqrt(kappa_prime)),
                                     certified=mb is not None and mb.certified)
        grid = bnd.make_grid(mvals, mb_blocks, a=0.5, epsilon=epsilon)
        coeffs = bnd.coeffs_for_grid(grid, mb_blocks)
        try:
            sigma = min(bnd.sigma_default(mvals, mb_blocks, epsilon), s4_a**2)
        except ValueError:
            sigma = s4_a**2

        def estimator(v, norm_sq):
            return _certified_estimator(v, norm_sq, grid, coeffs, sigma)

    prev = blocks.blocks.mean(axis=0)
    prev = 0.5 * (prev + prev.T)
    basis = _descending_eigenbasis(prev)
    qmat = prev
    deltas = []
    iterations = 0
    for k in range(num_updates):
        rotated = np.einsum("mij,ip,jq->mpq", blocks.blocks, basis, basis)
        c = _polarized_matrix(rotated, estimator)
        qmat = basis @ c @ basis.T
        qmat = 0.5 * (qmat + qmat.T)
        if not np.all(np.isfinite(qmat)):
            raise NumericalError(f"non-finite iterate at update {k}")
        deltas.append(math.sqrt(frobenius_error(qmat, prev)))
        iterations = k + 1
        if deltas[-1] < stop_tol:
            break
        prev = qmat
        basis = _descending_eigenbasis(qmat)
    if psd:
        qmat = positive_part(qmat)
    return GramEstimate(matrix=qmat, iterations=iterations,
                        frobenius_deltas=deltas, lambda_used=[])
