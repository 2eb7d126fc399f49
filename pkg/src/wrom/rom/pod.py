"""Weighted proper orthogonal decomposition."""

from __future__ import annotations

import numpy as np
import scipy.linalg as la

from ..errors import InvalidArgument, NumericalFailure
from .basis import gram_schmidt

NEG_EIG_TOL = 1e-12
# signed-weight path: modes below this fraction of |lambda|_max are dropped
DISCARD_TOL = 1e-12
# non-negative path keeps everything above round-off; dependent columns are
# removed by the Gram-Schmidt step instead
ROUNDOFF_TOL = 1e-15


def correlation_matrix(S: np.ndarray, X) -> np.ndarray:
    """C = S^T X S, symmetrized."""
    C = S.T @ (X @ S)
    return 0.5 * (C + C.T)


def _select(eigs: np.ndarray, N, tol) -> int:
    if N is not None and tol is not None:
        raise InvalidArgument("give either a basis size N or an energy tolerance, not both")
    if N is None and tol is None:
        return len(eigs)
    if N is not None:
        return min(int(N), len(eigs))
    pos = np.clip(eigs, 0.0, None)
    total = pos.sum()
    if total == 0.0:
        return 0
    cum = np.cumsum(pos)
    return min(int(np.searchsorted(cum, (1.0 - tol) * total)) + 1, len(eigs))


def weighted_pod(S: np.ndarray, weights, X, N: int | None = None, tol: float | None = None):
    """Weighted POD of the snapshot columns of ``S``.

    Diagonalizes the weighted correlation matrix P C (P = diag(weights),
    C = S^T X S).  With non-negative weights this is done through the
    similar symmetric matrix P^1/2 C P^1/2; signed weights (Smolyak rules)
    fall back to the nonsymmetric eigenproblem of P C, keeping real
    eigenvalues ordered by magnitude.

    Returns ``(modes, eigenvalues)``: X-orthonormal modes (n x N) and the
    full retained spectrum in non-increasing order.  When fewer modes
    than requested survive the eigenvalue cutoff (always the case for the
    full basis, ``N=None``), the remaining snapshot directions are appended
    by Gram-Schmidt so the basis spans all snapshots.
    """
    S = np.asarray(S, dtype=float)
    if S.ndim == 1:
        S = S[:, None]
    w = np.asarray(weights, dtype=float)
    M = S.shape[1]
    if M < 1 or len(w) != M:
        raise InvalidArgument(f"need one weight per snapshot, got {len(w)} for {M}")
    if not np.any(w != 0.0):
        raise InvalidArgument("all snapshot weights are zero")
    C = correlation_matrix(S, X)
    if not np.any(C):
        return np.zeros((S.shape[0], 0)), np.zeros(0)

    if np.all(w >= 0.0):
        sq = np.sqrt(w)
        W = sq[:, None] * C * sq[None, :]
        W = 0.5 * (W + W.T)
        eigs, vecs = la.eigh(W)
        order = np.argsort(eigs)[::-1]
        eigs, vecs = eigs[order], vecs[:, order]
        lam_max = max(eigs[0], 0.0)
        if eigs[-1] < -NEG_EIG_TOL * lam_max:
            raise NumericalFailure(
                "weighted correlation matrix has a negative eigenvalue",
                min_eigenvalue=float(eigs[-1]), max_eigenvalue=float(lam_max),
            )
        eigs = np.clip(eigs, 0.0, None)
        n_keep = int(np.count_nonzero(eigs > ROUNDOFF_TOL * M * lam_max))
        coeffs = sq[:, None] * vecs[:, :n_keep] / np.sqrt(eigs[:n_keep])
    else:
        eigs_c, vecs_c = la.eig(w[:, None] * C)
        lam_max = np.abs(eigs_c).max()
        real = np.abs(eigs_c.imag) <= 1e-10 * max(lam_max, 1e-300)
        eigs = eigs_c.real[real]
        vecs = vecs_c.real[:, real]
        order = np.argsort(-np.abs(eigs), kind="stable")
        eigs, vecs = eigs[order], vecs[:, order]
        keep = np.abs(eigs) > DISCARD_TOL * lam_max
        eigs, coeffs = eigs[keep], vecs[:, keep]
        n_keep = len(eigs)
    n = min(_select(eigs, N, tol), n_keep)
    modes = gram_schmidt(S @ coeffs[:, :n], X)
    target = M if N is None else int(N)
    if tol is None and modes.shape[1] < target:
        # snapshot directions below the correlation matrix's round-off floor,
        # so a full-size basis spans every snapshot
        heavy_first = np.argsort(-np.abs(w), kind="stable")
        extra = gram_schmidt(S[:, heavy_first], X, against=modes)
        modes = np.hstack([modes, extra[:, :target - modes.shape[1]]])
    return modes, eigs
