"""Dense linear-algebra kernels shared by all modules.

Lyapunov solves, positive-semidefinite factorization with eigenvalue
clamping, truncated SVD, and stability diagnostics.
"""

from __future__ import annotations

import threading
from contextlib import contextmanager
from dataclasses import dataclass

import numpy as np
import scipy.linalg

__all__ = [
    "PsdFactor",
    "solve_lyapunov",
    "psd_factor",
    "svd_truncate",
    "spectral_abscissa",
    "numerical_abscissa",
    "record_lyapunov_dims",
]

# A is considered stable only if its spectral abscissa is below this margin.
STABILITY_MARGIN = -1e-12

_recorder = threading.local()


@contextmanager
def record_lyapunov_dims():
    """Collect the dimension of every Lyapunov solve issued while active.

    Yields a list that accumulates one entry (the matrix dimension) per
    solve_lyapunov call on this thread.  Used to verify that the
    block-structured Gramian pipeline never solves an equation larger
    than the original model dimension.
    """
    sinks = getattr(_recorder, "sinks", None)
    if sinks is None:
        sinks = _recorder.sinks = []
    sink: list[int] = []
    sinks.append(sink)
    try:
        yield sink
    finally:
        sinks.remove(sink)


def _note_lyapunov_dim(n):
    for sink in getattr(_recorder, "sinks", []):
        sink.append(n)


def _as_square(A, name):
    A = np.asarray(A, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValueError(f"{name} must be square, got shape {A.shape}")
    return A


def solve_lyapunov(A, Qsym):
    """Solve A X + X A^T + Qsym = 0 for symmetric X.

    Uses the Bartels-Stewart method (real Schur reduction of A followed by
    quasi-triangular back-substitution).  A must be stable, i.e. all its
    eigenvalues have real part below -1e-12, and Qsym must be symmetric.
    The returned X is exactly symmetric and satisfies the residual bound
    ||A X + X A^T + Qsym||_F <= 1e-10 * max(||Qsym||_F, tiny).
    """
    A = _as_square(A, "A")
    Q = _as_square(Qsym, "Qsym")
    if A.shape != Q.shape:
        raise ValueError(f"shape mismatch: A {A.shape} vs Qsym {Q.shape}")
    qnorm = np.linalg.norm(Q)
    asym = np.linalg.norm(Q - Q.T)
    if asym > 1e-8 * max(qnorm, 1.0):
        raise ValueError(
            f"Qsym is not symmetric: ||Q - Q^T||_F = {asym:.3e} "
            f"(||Q||_F = {qnorm:.3e})"
        )
    sa = spectral_abscissa(A)
    if sa >= STABILITY_MARGIN:
        raise ValueError(
            f"A is not stable enough for a Lyapunov solve: "
            f"max Re(eig) = {sa:.6e} >= {STABILITY_MARGIN:.1e}"
        )
    Q = 0.5 * (Q + Q.T)
    X = scipy.linalg.solve_continuous_lyapunov(A, -Q)
    X = 0.5 * (X + X.T)
    resid = np.linalg.norm(A @ X + X @ A.T + Q)
    denom = max(qnorm, np.finfo(float).tiny)
    if resid > 1e-10 * denom:
        raise ArithmeticError(
            f"Lyapunov solve residual too large: {resid / denom:.3e} relative"
        )
    _note_lyapunov_dim(A.shape[0])
    return X


@dataclass(frozen=True)
class PsdFactor:
    """Low-rank factor F of a symmetric PSD matrix S = F F^T.

    rank is the number of retained eigenvalues; clamp_threshold is the
    absolute eigenvalue cutoff that was applied.
    """

    factor: np.ndarray
    rank: int
    clamp_threshold: float


def psd_factor(S, rel_tol=1e-12):
    """Factor a numerically PSD matrix as S ~ F F^T by clamped eigendecomposition.

    Eigenvalues below rel_tol * lambda_max are clamped to zero and dropped,
    so the factor has shape (n, rank).  Matrices whose most negative
    eigenvalue falls below -100 * rel_tol * lambda_max are rejected as not
    numerically PSD.  Strict Cholesky is deliberately avoided: the Gramians
    handled here are structurally singular.
    """
    S = _as_square(S, "S")
    snorm = np.linalg.norm(S)
    asym = np.linalg.norm(S - S.T)
    if asym > 1e-8 * max(snorm, 1.0):
        raise ValueError(f"S is not symmetric: ||S - S^T||_F = {asym:.3e}")
    S = 0.5 * (S + S.T)
    lam, U = np.linalg.eigh(S)
    lam_max = max(float(lam[-1]), 0.0)
    thr = rel_tol * lam_max
    if float(lam[0]) < -100.0 * thr:
        raise ValueError(
            f"matrix is not numerically PSD: min eigenvalue {lam[0]:.6e} "
            f"below -100 * {thr:.6e}"
        )
    keep = lam > thr
    factor = U[:, keep] * np.sqrt(np.clip(lam[keep], 0.0, None))
    return PsdFactor(factor=factor, rank=int(np.count_nonzero(keep)), clamp_threshold=thr)


def svd_truncate(M, r):
    """Rank-r truncated SVD of M.

    Returns (U_r, s_r, V_r) with orthonormal columns and s_r the leading
    singular values in descending order, so M ~ U_r @ diag(s_r) @ V_r.T and
    ||M - U_r S_r V_r^T||_2 equals the (r+1)-th singular value.  Requests
    beyond the numerical rank (sigma_r < 1e-14 * sigma_1) are rejected.
    """
    M = np.asarray(M, dtype=float)
    if M.ndim != 2:
        raise ValueError(f"M must be a matrix, got shape {M.shape}")
    if not 1 <= r <= min(M.shape):
        raise ValueError(f"r={r} out of range for shape {M.shape}")
    U, s, Vt = np.linalg.svd(M, full_matrices=False)
    if s[0] <= 0.0 or s[r - 1] < 1e-14 * s[0]:
        raise ValueError(
            f"r={r} exceeds the numerical rank: sigma_{r} = {s[r - 1]:.3e} vs "
            f"sigma_1 = {s[0]:.3e}; lower r"
        )
    return U[:, :r], s[:r].copy(), Vt[:r].T.copy()


def spectral_abscissa(A):
    """Largest real part over the eigenvalues of A."""
    A = _as_square(A, "A")
    return float(np.max(np.linalg.eigvals(A).real))


def numerical_abscissa(A):
    """Largest eigenvalue of (A + A^T)/2.

    This is the rightmost extent of the field of values of A on the real
    axis; it is negative exactly when the field of values lies in the open
    left half-plane.
    """
    A = _as_square(A, "A")
    return float(np.max(np.linalg.eigvalsh(0.5 * (A + A.T))))
