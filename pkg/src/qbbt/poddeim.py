"""POD-DEIM baseline ROM for the reactor.

Snapshot collection, proper-orthogonal-decomposition basis, interpolation
point selection by pivoted QR of the nonlinearity basis, and a reduced model
whose reaction term is evaluated only at the selected grid points.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .qbsys import Trajectory, integrate_rk4
from .reactor import ReactorConfig, ReactorFOM, simulate_fom

__all__ = [
    "SnapshotSet",
    "collect_snapshots",
    "reaction_values",
    "add_noise",
    "pod_basis",
    "qdeim_points",
    "PodDeimRom",
    "build_pod_deim_rom",
]


@dataclass
class SnapshotSet:
    """State snapshots X (2n x N_s) sampled every snapshot_dt seconds."""

    X: np.ndarray
    snapshot_dt: float
    meta: dict = field(default_factory=dict)

    def save(self, directory):
        os.makedirs(directory, exist_ok=True)
        np.savetxt(os.path.join(directory, "snapshots.csv"), self.X,
                   fmt="%.17e", delimiter=",")
        with open(os.path.join(directory, "meta.txt"), "w") as fh:
            fh.write(f"snapshot_dt={self.snapshot_dt!r}\n")
            for key, val in sorted(self.meta.items()):
                fh.write(f"{key}={val}\n")

    @classmethod
    def load(cls, directory):
        X = np.loadtxt(os.path.join(directory, "snapshots.csv"),
                       delimiter=",", ndmin=2)
        meta = {}
        snapshot_dt = None
        with open(os.path.join(directory, "meta.txt")) as fh:
            for line in fh:
                key, val = line.strip().split("=", 1)
                if key == "snapshot_dt":
                    snapshot_dt = float(val)
                else:
                    meta[key] = val
        return cls(X=X, snapshot_dt=snapshot_dt, meta=meta)


def collect_snapshots(fom: ReactorFOM, cfg: ReactorConfig, u_fn, x0, t_train,
                      dt=1e-4, snapshot_dt=0.01, meta=None) -> SnapshotSet:
    """Run the FOM under the training input and record state snapshots."""
    traj = simulate_fom(fom, cfg, u_fn, x0, t_train, dt=dt,
                        sample_every=snapshot_dt)
    return SnapshotSet(X=traj.states, snapshot_dt=snapshot_dt,
                       meta=dict(meta or {}))


def reaction_values(cfg: ReactorConfig, X):
    """Reaction term f(psi, theta), one length-n column per snapshot."""
    n = cfg.n
    c0, c1, c2, c3 = (c[:, None] for c in cfg.coefficient_vectors())
    Psi, Th = X[:n], X[n:]
    return Psi * (c0 + Th * (c1 + Th * (c2 + Th * c3)))


def add_noise(X, level=0.1, seed=None):
    """Multiplicative corruption: X + level * X * (-1 + 2 Xi), Xi iid standard normal."""
    if level < 0:
        raise ValueError("noise level must be nonnegative")
    if level == 0.0:
        return X.copy()
    xi = np.random.default_rng(seed).standard_normal(X.shape)
    return X + level * X * (-1.0 + 2.0 * xi)


def pod_basis(X, r, per_field=False):
    """Leading r left singular vectors of the snapshot matrix.

    The default is a single basis over the stacked [psi; theta] state.  With
    per_field=True the basis is assembled block-diagonally from separate
    per-field SVDs (r split as evenly as possible), for sensitivity studies.
    """
    X = np.asarray(X, dtype=float)
    if not 1 <= r <= min(X.shape):
        raise ValueError(f"r={r} out of range for snapshot shape {X.shape}")
    if per_field:
        n = X.shape[0] // 2
        r_psi = r // 2
        r_theta = r - r_psi
        V = np.zeros((X.shape[0], r))
        V[:n, :r_psi] = pod_basis(X[:n], r_psi)
        V[n:, r_psi:] = pod_basis(X[n:], r_theta)
        return V
    U, s, _ = np.linalg.svd(X, full_matrices=False)
    if s[0] <= 0.0 or s[r - 1] < 1e-14 * s[0]:
        raise ValueError(f"r={r} exceeds the numerical rank of the snapshots")
    return U[:, :r].copy()


def qdeim_points(U):
    """Interpolation indices from a pivoted QR factorization of U^T.

    U must have orthonormal (at least full-rank) columns; returns the first
    r column pivots, which are distinct by construction.
    """
    U = np.asarray(U, dtype=float)
    if U.ndim != 2 or U.shape[0] < U.shape[1]:
        raise ValueError(f"basis shape {U.shape} is not tall")
    r = U.shape[1]
    _, R, piv = scipy.linalg.qr(U.T, pivoting=True, mode="economic")
    diag = np.abs(np.diag(R))
    if diag.min() < 1e-12 * max(diag.max(), 1e-300):
        raise ValueError("basis is numerically rank deficient")
    return piv[:r].copy()


@dataclass
class PodDeimRom:
    """Reduced reactor model with DEIM-sampled reaction term.

    State z of dimension r with [psi; theta] ~ V z.  The reaction is
    evaluated at the selected grid points only and lifted back through
    E = (-D V_psi^T + B*D V_theta^T) U_f (U_f[points])^{-1}, so the
    right-hand-side cost is independent of the grid size.
    """

    V: np.ndarray
    A_r: np.ndarray
    source_r: np.ndarray
    b_r: np.ndarray
    E: np.ndarray
    Vpsi_pts: np.ndarray
    Vtheta_pts: np.ndarray
    c_pts: tuple
    c_out: np.ndarray
    points: np.ndarray

    @property
    def r(self):
        return self.V.shape[1]

    def rhs(self, z, u):
        c0, c1, c2, c3 = self.c_pts
        psi_p = self.Vpsi_pts @ z
        th_p = self.Vtheta_pts @ z
        f_p = psi_p * (c0 + th_p * (c1 + th_p * (c2 + th_p * c3)))
        return self.A_r @ z + self.source_r + self.b_r * float(u) + self.E @ f_p

    def project_state(self, x_full):
        return self.V.T @ np.asarray(x_full, dtype=float).ravel()

    def simulate(self, u_fn, z0, t_end, dt=1e-4, sample_every=0.01) -> Trajectory:
        times, states = integrate_rk4(
            lambda t, z: self.rhs(z, u_fn(t)), z0, t_end, dt, sample_every
        )
        return Trajectory(times, states, (self.c_out @ states)[None, :])


def build_pod_deim_rom(fom: ReactorFOM, cfg: ReactorConfig, V, U_f,
                       points) -> PodDeimRom:
    """Assemble the reduced operators for a given basis and point selection."""
    n = fom.n
    V = np.asarray(V, dtype=float)
    U_f = np.asarray(U_f, dtype=float)
    points = np.asarray(points, dtype=np.int64).ravel()
    if V.shape[0] != 2 * n:
        raise ValueError("state basis must have 2n rows")
    if U_f.shape[0] != n or len(points) != U_f.shape[1]:
        raise ValueError("need one interpolation point per nonlinearity basis vector")
    M = U_f[points, :]
    if np.linalg.cond(M) > 1e12:
        raise ValueError("interpolation matrix (P^T U_f) is numerically singular")
    A_full = np.zeros((2 * n, 2 * n))
    A_full[:n, :n] = fom.A_psi
    A_full[n:, n:] = fom.A_theta
    A_r = V.T @ A_full @ V
    source_r = V.T @ np.concatenate([fom.b_psi, fom.b_theta])
    b_r = V[n:, :].T @ fom.b
    D = cfg.damkohler
    BD = cfg.heat_release * cfg.damkohler
    lift = -D * V[:n, :].T + BD * V[n:, :].T        # (r, n)
    E = lift @ np.linalg.solve(M.T, U_f.T).T        # U_f M^{-1}, applied from the right
    coeffs = cfg.coefficient_vectors()
    return PodDeimRom(
        V=V,
        A_r=A_r,
        source_r=source_r,
        b_r=b_r,
        E=E,
        Vpsi_pts=V[points, :].copy(),
        Vtheta_pts=V[n + points, :].copy(),
        c_pts=tuple(c[points].copy() for c in coeffs),
        c_out=V[fom.output_index, :].copy(),
        points=points.copy(),
    )
