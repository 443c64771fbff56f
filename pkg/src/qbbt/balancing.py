"""Balancing transformations and reduced-order model projection.

Square-root balancing from factored Gramians: factor P_T = L_P L_P^T and
Q_T = L_Q L_Q^T, take the SVD L_Q^T L_P = U S V^T, and form
W = L_Q U_r S_r^{-1/2}, V = L_P V_r S_r^{-1/2} so that W^T V = I_r and both
projected Gramians equal diag(sigma).  A linear-part shortcut builds the
same projectors from n1-sized factors when the quadratic corrections are
ignored.
"""

from __future__ import annotations

import os
import warnings
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from . import linalg
from .gramians import (LinearGramians, assemble, compute_truncated_gramians)
from .qbsys import QBSystem, StabilizedQB, StructuredQB, save_system, stabilize
from .tensor3 import SparseTensor3, project

__all__ = [
    "RomBundle",
    "balance_factors",
    "balance",
    "linear_balance",
    "project_rom",
    "operating_point_rom",
    "reduce_structured",
    "AlphaDiagnostic",
    "select_alpha",
    "save_rom",
]

# Warn when the truncation index splits a near-degenerate singular pair.
SIGMA_TIE_RATIO = 0.999


@dataclass
class RomBundle:
    """Projection matrices, retained singular values, and the projected ROM."""

    r: int
    V: np.ndarray
    W: np.ndarray
    sigma: np.ndarray
    rom: QBSystem


def balance_factors(P_T, Q_T, rel_tol=1e-12):
    """Gramian factors and the full SVD of L_Q^T L_P.

    Returns (L_P, L_Q, U, s, V).  Callers that need several reduced orders
    can slice this once instead of refactoring per order.
    """
    L_P = linalg.psd_factor(P_T, rel_tol).factor
    L_Q = linalg.psd_factor(Q_T, rel_tol).factor
    U, s, Vt = np.linalg.svd(L_Q.T @ L_P, full_matrices=False)
    return L_P, L_Q, U, s, Vt.T


def _cut(L_P, L_Q, U, s, V, r):
    if not 1 <= r <= len(s):
        raise ValueError(
            f"r={r} exceeds the factor-product rank: only {len(s)} singular values"
        )
    if s[0] <= 0.0 or s[r - 1] < 1e-14 * s[0]:
        rank = int(np.sum(s > 1e-14 * s[0])) if s[0] > 0 else 0
        raise ValueError(f"r={r} exceeds the numerical rank {rank} of the factor product")
    if r < len(s) and s[r - 1] > 0 and s[r] / s[r - 1] > SIGMA_TIE_RATIO:
        warnings.warn(
            f"sigma_{r} and sigma_{r + 1} are nearly equal "
            f"({s[r - 1]:.6e} vs {s[r]:.6e}); the truncated subspace is ill-defined",
            RuntimeWarning,
        )
    scale = 1.0 / np.sqrt(s[:r])
    W = L_Q @ (U[:, :r] * scale)
    Vm = L_P @ (V[:, :r] * scale)
    return Vm, W, s[:r].copy()


def balance(P_T, Q_T, r, rel_tol=1e-12):
    """Square-root balancing of a Gramian pair; returns (V, W, sigma)."""
    L_P, L_Q, U, s, V = balance_factors(P_T, Q_T, rel_tol)
    return _cut(L_P, L_Q, U, s, V, r)


def linear_balance(lin: LinearGramians, r):
    """Balancing projectors from the linear-part blocks only.

    Built from n1-sized factors: V = [L_P11 V_r S_r^{-1/2}; 0] and
    W = [L_Q11 U_r S_r^{-1/2}; Q12^T L_Q11^{-T} U_r S_r^{-1/2}].  Q11 must be
    positive definite (full-rank factor) for the inverse-transpose
    application, which is realized as a triangular solve against the
    Cholesky factor.
    """
    try:
        L_Q11 = np.linalg.cholesky(lin.Q11)
    except np.linalg.LinAlgError as exc:
        raise ValueError(
            "Q11 factor is rank deficient; the linear-part shortcut needs a "
            "full-rank observability block"
        ) from exc
    L_P11 = linalg.psd_factor(lin.P11).factor
    U, s, Vt = np.linalg.svd(L_Q11.T @ L_P11, full_matrices=False)
    Vm_top, W_top, sigma = _cut(L_P11, L_Q11, U, s, Vt.T, r)
    Ur_scaled = U[:, :r] / np.sqrt(s[:r])
    W_bot = lin.Q12.T @ scipy.linalg.solve_triangular(L_Q11.T, Ur_scaled, lower=False)
    V = np.vstack([Vm_top, np.zeros((lin.n2, r))])
    W = np.vstack([W_top, W_bot])
    return V, W, sigma


def _symmetrized_tensor_from_mode1(M, r):
    rows, cols = np.nonzero(M)
    T = SparseTensor3(r, rows, cols // r, cols % r, M[rows, cols])
    return T.symmetrize()


def project_rom(sys, V, W, sigma=None, use_unstabilized=True):
    """Petrov-Galerkin projection of a QB system onto (V, W).

    Ahat = W^T A V, Bhat = W^T B, Chat = C V, Nhat_k = W^T N_k V, and the
    quadratic operator W^T H (V (x) V) re-symmetrized.  When given a
    stabilized system, the default projects the original (unstabilized)
    matrices: the stabilizing terms cancel on lift-consistent states but
    would alter off-manifold ROM dynamics.
    """
    if isinstance(sys, StabilizedQB):
        full = sys.base.as_qbsystem() if use_unstabilized else sys.as_qbsystem()
    elif isinstance(sys, StructuredQB):
        full = sys.as_qbsystem()
    else:
        full = sys
    V = np.asarray(V, dtype=float)
    W = np.asarray(W, dtype=float)
    if V.shape[0] != full.dim or W.shape[0] != full.dim or V.shape[1] != W.shape[1]:
        raise ValueError(
            f"projection shapes {V.shape}, {W.shape} do not conform to dim {full.dim}"
        )
    r = V.shape[1]
    Ahat = W.T @ full.A @ V
    Bhat = W.T @ full.B
    Chat = full.C @ V
    Nhat = [W.T @ N @ V for N in full.N_ops]
    Hhat = _symmetrized_tensor_from_mode1(project(full.H, W, V), r)
    rom = QBSystem(Ahat, Hhat, Nhat, Bhat, Chat)
    if sigma is None:
        sigma = np.array([])
    return RomBundle(r=r, V=V, W=W, sigma=np.asarray(sigma, dtype=float), rom=rom)


def operating_point_rom(sys, V, W, x_e, sigma=None, const_channel=0,
                        use_unstabilized=False):
    """Petrov-Galerkin ROM of the dynamics about a reference state.

    Exact projection under the affine ansatz x = x_e + V xhat: the state
    Jacobian of the quadratic term at x_e joins Ahat, the constant drift
    W^T (A x_e + H(x_e (x) x_e)) folds into the always-one input channel
    const_channel, and the bilinear couplings N_k x_e fold into the matching
    B columns, so the result is again a plain QB system in the deviation
    xhat.  The absolute output is y = C x_e + Chat xhat; the offset C x_e is
    returned alongside the bundle.

    When x_e is an equilibrium at some constant input, xhat = 0 is an exact
    equilibrium of the ROM, anchoring its steady output.  Given a stabilized
    system the default projects the stabilized matrices: they agree with the
    base system on the lifted manifold while damping the transverse
    directions that truncation excites.
    """
    if isinstance(sys, StabilizedQB):
        full = sys.base.as_qbsystem() if use_unstabilized else sys.as_qbsystem()
    elif isinstance(sys, StructuredQB):
        full = sys.as_qbsystem()
    else:
        full = sys
    V = np.asarray(V, dtype=float)
    W = np.asarray(W, dtype=float)
    x_e = np.asarray(x_e, dtype=float).ravel()
    if V.shape[0] != full.dim or W.shape[0] != full.dim or len(x_e) != full.dim:
        raise ValueError("projection shapes do not conform to the system dimension")
    if not 0 <= const_channel < full.m:
        raise ValueError(f"const_channel {const_channel} out of range for m={full.m}")
    r = V.shape[1]
    Ahat = W.T @ full.A @ V + W.T @ (full.H.quadratic_jacobian(x_e) @ V)
    Bhat = W.T @ full.B
    for k, N in enumerate(full.N_ops):
        Bhat[:, k] += W.T @ (N @ x_e)
    Bhat[:, const_channel] += W.T @ (full.A @ x_e
                                     + full.H.apply_quadratic(x_e, x_e))
    Nhat = [W.T @ N @ V for N in full.N_ops]
    Hhat = _symmetrized_tensor_from_mode1(project(full.H, W, V), r)
    rom = QBSystem(Ahat, Hhat, Nhat, Bhat, full.C @ V)
    if sigma is None:
        sigma = np.array([])
    bundle = RomBundle(r=r, V=V, W=W, sigma=np.asarray(sigma, dtype=float),
                       rom=rom)
    return bundle, (full.C @ x_e)


def reduce_structured(s: StructuredQB, alpha, r, use_unstabilized=True):
    """Full pipeline: stabilize, truncated Gramians, balance, project."""
    stab = stabilize(s, alpha)
    tg = compute_truncated_gramians(stab)
    P_T, Q_T = assemble(tg)
    V, W, sigma = balance(P_T, Q_T, r)
    return project_rom(stab, V, W, sigma=sigma, use_unstabilized=use_unstabilized)


@dataclass
class AlphaDiagnostic:
    """Stability indicators for one stabilization parameter candidate."""

    alpha: float
    spectral_abscissa: float
    numerical_abscissa: float
    probe_bounded: bool | None = None
    probe_max_state: float | None = None
    note: str = ""


def select_alpha(s: StructuredQB, candidates, probe_r=4, probe_t=2.0,
                 dt=1e-4, probe=True):
    """Diagnostics per candidate alpha; reports, does not auto-pick.

    For each candidate: the spectral and numerical abscissa of A(alpha)
    (the latter negative exactly when the field of values is in the open
    left half-plane), plus a short-horizon boundedness probe of a small
    balanced ROM driven by unit inputs.
    """
    rows = []
    for alpha in candidates:
        if alpha <= 0:
            raise ValueError("candidate alpha values must be positive")
        stab = stabilize(s, alpha)
        diag = AlphaDiagnostic(
            alpha=float(alpha),
            spectral_abscissa=linalg.spectral_abscissa(stab.A_alpha),
            numerical_abscissa=linalg.numerical_abscissa(stab.A_alpha),
        )
        if probe:
            try:
                bundle = reduce_structured(s, alpha, probe_r)
                ones = np.ones(bundle.rom.m)
                traj = bundle.rom.simulate(lambda t: ones, np.zeros(probe_r),
                                           probe_t, dt=dt, sample_every=10 * dt)
                peak = float(np.max(np.abs(traj.states)))
                diag.probe_bounded = bool(peak < 1e6)
                diag.probe_max_state = peak
            except Exception as exc:  # noqa: BLE001 - diagnostics must not abort the sweep
                diag.probe_bounded = False
                diag.note = f"{type(exc).__name__}: {exc}"
        rows.append(diag)
    return rows


def save_rom(bundle: RomBundle, directory):
    """Serialize a ROM bundle: the projected system plus sigma, V, W as CSV."""
    save_system(bundle.rom, directory)
    np.savetxt(os.path.join(directory, "sigma.csv"), bundle.sigma.reshape(-1, 1),
               fmt="%.17e", delimiter=",")
    np.savetxt(os.path.join(directory, "V.csv"), bundle.V, fmt="%.17e", delimiter=",")
    np.savetxt(os.path.join(directory, "W.csv"), bundle.W, fmt="%.17e", delimiter=",")
