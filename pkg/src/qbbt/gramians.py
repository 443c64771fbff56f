"""Truncated Gramians for stabilized lifted QB systems.

The structured path computes the controllability and observability Gramians
blockwise, so every Lyapunov equation it solves has the original model
dimension n1 rather than the lifted dimension.  A dense full-dimension
oracle solving the generalized Lyapunov equations directly is provided as
the reference for equivalence tests.

With A(alpha) = [[A11, A12], [0, -alpha*I]] the linear Gramians are

    P1 = [[P11, 0], [0, 0]],
    Q1 = [[Q11, Q12], [Q12^T, Q22tilde / (2 alpha)]],

and the truncated Gramians add correction blocks driven by the quadratic
tensor and the bilinear matrices:

    P_T = P1 + (1 / 2 alpha) * [[Pt11, Pt12], [Pt12^T, Pt22]],
    Q_T = Q1 + [[Qh11, Qh12], [Qh12^T, Qh22]].

The quadratic observability term pairs Q1 against the tensor's row (mode-1)
index and P1 against the third index: it is the mode-2 unfolding quadratic
form M[j, j'] = sum v v' Q1[i, i'] P1[k, k'].  Pairing P1 against the row
index instead would make the term vanish identically for every lifted
system (all tensor rows are auxiliary while P1 is nonzero only on the
original block), so this orientation is the meaningful one and the dense
oracle uses the same object.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import linalg
from .qbsys import QBSystem, StabilizedQB
from .tensor3 import SparseTensor3, pair_contract_mode1, pair_contract_mode2

__all__ = [
    "LinearGramians",
    "TruncatedGramians",
    "linear_gramians",
    "truncated_controllability",
    "truncated_observability",
    "compute_truncated_gramians",
    "assemble",
    "dense_linear_oracle",
    "dense_truncated_oracle",
    "export_blocks",
]

ORACLE_CAP = 100


@dataclass
class LinearGramians:
    """Linear-part Gramian blocks at a fixed stabilization parameter alpha.

    Q22tilde is stored unscaled: the assembled Q1 carries Q22tilde / (2 alpha).
    """

    alpha: float
    n1: int
    n2: int
    P11: np.ndarray
    Q11: np.ndarray
    Q12: np.ndarray
    Q22tilde: np.ndarray

    def assemble(self):
        """Full (N, N) linear Gramians P1, Q1."""
        N = self.n1 + self.n2
        P1 = np.zeros((N, N))
        P1[:self.n1, :self.n1] = self.P11
        Q1 = np.zeros((N, N))
        Q1[:self.n1, :self.n1] = self.Q11
        Q1[:self.n1, self.n1:] = self.Q12
        Q1[self.n1:, :self.n1] = self.Q12.T
        Q1[self.n1:, self.n1:] = self.Q22tilde / (2.0 * self.alpha)
        return P1, Q1


def linear_gramians(stab: StabilizedQB) -> LinearGramians:
    """Linear Gramian blocks from n1-dimensional solves only.

    P11 and Q11 solve the standard Lyapunov equations with (A11, B1) and
    (A11, C1); Q12 = -(A11^T - alpha I)^{-1} Q11 A12 and
    Q22tilde = A12^T Q12 + Q12^T A12.
    """
    s = stab.base
    alpha = stab.alpha
    sa = linalg.spectral_abscissa(s.A11)
    if sa >= linalg.STABILITY_MARGIN:
        raise ValueError(
            f"A11 must be stable for the structured Gramians: max Re(eig) = {sa:.6e}"
        )
    P11 = linalg.solve_lyapunov(s.A11, s.B1 @ s.B1.T)
    Q11 = linalg.solve_lyapunov(s.A11.T, s.C1.T @ s.C1)
    shift = s.A11.T - alpha * np.eye(s.n1)
    Q12 = -np.linalg.solve(shift, Q11 @ s.A12)
    Q22tilde = s.A12.T @ Q12 + Q12.T @ s.A12
    return LinearGramians(alpha=alpha, n1=s.n1, n2=s.n2,
                          P11=P11, Q11=Q11, Q12=Q12, Q22tilde=Q22tilde)


def truncated_controllability(stab: StabilizedQB, lin: LinearGramians):
    """Controllability correction blocks (stored unscaled; see assemble).

    Pt22 = H21(alpha) (P11 (x) P11) H21(alpha)^T + sum_k N21_k P11 N21_k^T,
    computed by a sparse pair contraction restricted to tensor entries whose
    mode-2 and mode-3 indices fall in the original block (where P1 is
    nonzero).  Pt12 and Pt11 follow from a shifted solve and one
    n1-dimensional Lyapunov equation.
    """
    s = stab.base
    if lin.alpha != stab.alpha:
        raise ValueError("linear Gramians were computed for a different alpha")
    alpha, n1 = stab.alpha, s.n1
    P1, _ = lin.assemble()
    T = stab.H_alpha.filter(mode2_lt=n1, mode3_lt=n1)
    G = pair_contract_mode1(T, T, P1, P1)
    Pt22 = G[n1:, n1:]
    for k in range(s.m):
        N21 = s.N21(k)
        Pt22 = Pt22 + N21 @ lin.P11 @ N21.T
    Pt22 = 0.5 * (Pt22 + Pt22.T)
    shift = s.A11 - alpha * np.eye(n1)
    Pt12 = -np.linalg.solve(shift, s.A12 @ Pt22)
    Pt11 = linalg.solve_lyapunov(s.A11, s.A12 @ Pt12.T + Pt12 @ s.A12.T)
    return Pt11, Pt12, Pt22


def truncated_observability(stab: StabilizedQB, lin: LinearGramians):
    """Observability correction blocks (stored scaled; Q_T = Q1 + blocks).

    First the quadratic term M = mode-2 quadratic form of H(alpha) pairing
    Q1 on the row index and P1 on the third index is partitioned by the
    mode-2 index into Ht11, Ht12, Ht22; then the three block equations are
    solved in order:

        0    = A11^T Qh11 + Qh11 A11 + Ht11 + (1/2a) sum N21^T Q22tilde N21
        Qh12 = -(A11^T - a I)^{-1} (Ht12 + (1/2a) sum N21^T Q22tilde N22 + Qh11 A12)
        Qh22 = (1/2a) [A12^T Qh12 + Qh12^T A12 + Ht22 + (1/2a) sum N22^T Q22tilde N22]
    """
    s = stab.base
    if lin.alpha != stab.alpha:
        raise ValueError("linear Gramians were computed for a different alpha")
    alpha, n1 = stab.alpha, s.n1
    P1, Q1 = lin.assemble()
    inv2a = 1.0 / (2.0 * alpha)
    # P1 pairs with the mode-3 index, so only entries with k < n1 contribute.
    T = stab.H_alpha.filter(mode3_lt=n1)
    M = pair_contract_mode2(T, T, Q1, P1)
    Ht11 = M[:n1, :n1]
    Ht12 = M[:n1, n1:]
    Ht22 = M[n1:, n1:]
    K11 = np.zeros((n1, n1))
    K12 = np.zeros((n1, s.n2))
    K22 = np.zeros((s.n2, s.n2))
    for k in range(s.m):
        N21, N22 = s.N21(k), s.N22(k)
        K11 += N21.T @ lin.Q22tilde @ N21
        K12 += N21.T @ lin.Q22tilde @ N22
        K22 += N22.T @ lin.Q22tilde @ N22
    Qh11 = linalg.solve_lyapunov(
        s.A11.T, 0.5 * (Ht11 + Ht11.T) + inv2a * 0.5 * (K11 + K11.T)
    )
    shift = s.A11.T - alpha * np.eye(n1)
    Qh12 = -np.linalg.solve(shift, Ht12 + inv2a * K12 + Qh11 @ s.A12)
    Qh22 = inv2a * (s.A12.T @ Qh12 + Qh12.T @ s.A12 + Ht22 + inv2a * K22)
    Qh22 = 0.5 * (Qh22 + Qh22.T)
    return Qh11, Qh12, Qh22


@dataclass
class TruncatedGramians:
    """All Gramian blocks of a stabilized system at one alpha.

    Controllability corrections (Pt*) are stored unscaled so that
    P_T = P1 + (1 / 2 alpha) * blocks; observability corrections (Qh*) are
    stored scaled so that Q_T = Q1 + blocks.
    """

    alpha: float
    linear: LinearGramians
    Pt11: np.ndarray
    Pt12: np.ndarray
    Pt22: np.ndarray
    Qh11: np.ndarray
    Qh12: np.ndarray
    Qh22: np.ndarray


def compute_truncated_gramians(stab: StabilizedQB) -> TruncatedGramians:
    lin = linear_gramians(stab)
    Pt11, Pt12, Pt22 = truncated_controllability(stab, lin)
    Qh11, Qh12, Qh22 = truncated_observability(stab, lin)
    return TruncatedGramians(alpha=stab.alpha, linear=lin,
                             Pt11=Pt11, Pt12=Pt12, Pt22=Pt22,
                             Qh11=Qh11, Qh12=Qh12, Qh22=Qh22)


def assemble(tg: TruncatedGramians):
    """Full symmetric (P_T, Q_T) from the stored blocks."""
    lin = tg.linear
    P1, Q1 = lin.assemble()
    n1 = lin.n1
    inv2a = 1.0 / (2.0 * tg.alpha)
    P_T = P1.copy()
    P_T[:n1, :n1] += inv2a * tg.Pt11
    P_T[:n1, n1:] += inv2a * tg.Pt12
    P_T[n1:, :n1] += inv2a * tg.Pt12.T
    P_T[n1:, n1:] += inv2a * tg.Pt22
    Q_T = Q1.copy()
    Q_T[:n1, :n1] += tg.Qh11
    Q_T[:n1, n1:] += tg.Qh12
    Q_T[n1:, :n1] += tg.Qh12.T
    Q_T[n1:, n1:] += tg.Qh22
    for M, name in ((P_T, "P_T"), (Q_T, "Q_T")):
        asym = np.linalg.norm(M - M.T)
        if asym > 1e-10 * max(np.linalg.norm(M), 1e-300):
            raise ArithmeticError(f"assembled {name} lost symmetry: {asym:.3e}")
    return 0.5 * (P_T + P_T.T), 0.5 * (Q_T + Q_T.T)


def _dense_cube(H: SparseTensor3):
    T = np.zeros((H.dim, H.dim, H.dim))
    T[H.i, H.j, H.k] = H.v
    return T


def _mode1_quadratic_form(T, P, Q):
    # mode1(T) @ kron(P, Q) @ mode1(T)^T without materializing the Kronecker
    # product: contract the middle indices one at a time.
    t1 = np.einsum("ijk,jl->ilk", T, P, optimize=True)
    t2 = np.einsum("ilk,km->ilm", t1, Q, optimize=True)
    return np.einsum("ilm,plm->ip", t2, T, optimize=True)


def _mode2_quadratic_form(T, P_rows, Q_cols):
    # M[j, j'] = sum T[i,j,k] T[i',j',k'] P_rows[i,i'] Q_cols[k,k']
    t1 = np.einsum("ijk,il->ljk", T, P_rows, optimize=True)
    t2 = np.einsum("ljk,km->ljm", t1, Q_cols, optimize=True)
    return np.einsum("ljm,lpm->jp", t2, T, optimize=True)


def dense_linear_oracle(sys: QBSystem, cap=ORACLE_CAP):
    """Full-dimension linear Gramians (P1, Q1) by direct Lyapunov solves."""
    if sys.dim > cap:
        raise ValueError(f"dim {sys.dim} above oracle cap {cap}")
    P1 = linalg.solve_lyapunov(sys.A, sys.B @ sys.B.T)
    Q1 = linalg.solve_lyapunov(sys.A.T, sys.C.T @ sys.C)
    return P1, Q1


def dense_truncated_oracle(sys: QBSystem, cap=ORACLE_CAP):
    """Reference truncated Gramians at full dimension.

    sys must already carry the stabilized matrices A(alpha), H(alpha).
    Solves the linear equations first, then the generalized equations with
    the quadratic terms evaluated through dense matricizations.  Small
    instances only (the dense tensor is N^3).
    """
    if sys.dim > cap:
        raise ValueError(f"dim {sys.dim} above oracle cap {cap}")
    sa = linalg.spectral_abscissa(sys.A)
    if sa >= linalg.STABILITY_MARGIN:
        raise ValueError(f"oracle requires stable A: max Re(eig) = {sa:.6e}")
    P1, Q1 = dense_linear_oracle(sys, cap)
    T = _dense_cube(sys.H)
    GP = _mode1_quadratic_form(T, P1, P1)
    GQ = _mode2_quadratic_form(T, Q1, P1)
    SP = sum((N @ P1 @ N.T for N in sys.N_ops), np.zeros_like(P1))
    SQ = sum((N.T @ Q1 @ N for N in sys.N_ops), np.zeros_like(Q1))
    P_T = linalg.solve_lyapunov(sys.A, 0.5 * (GP + GP.T) + SP + sys.B @ sys.B.T)
    Q_T = linalg.solve_lyapunov(sys.A.T, 0.5 * (GQ + GQ.T) + SQ + sys.C.T @ sys.C)
    return P_T, Q_T


def export_blocks(tg: TruncatedGramians, directory):
    """Write every Gramian block as CSV (debugging aid)."""
    import os

    os.makedirs(directory, exist_ok=True)
    blocks = {
        "P11": tg.linear.P11,
        "Q11": tg.linear.Q11,
        "Q12": tg.linear.Q12,
        "Q22tilde": tg.linear.Q22tilde,
        "Pt11": tg.Pt11,
        "Pt12": tg.Pt12,
        "Pt22": tg.Pt22,
        "Qh11": tg.Qh11,
        "Qh12": tg.Qh12,
        "Qh22": tg.Qh22,
    }
    for name, M in blocks.items():
        np.savetxt(os.path.join(directory, f"{name}.csv"), M, fmt="%.17e",
                   delimiter=",")
