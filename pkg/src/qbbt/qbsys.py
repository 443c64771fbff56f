"""Quadratic-bilinear system containers, block partitioning, artificial
stabilization, and fixed-step time simulation.

A QB system is  x' = A x + H(x (x) x) + sum_k (N_k x) u_k + B u,  y = C x.
Lifted systems carry the block structure with zero lower A rows, quadratic
terms confined to auxiliary rows, and inputs entering the auxiliary rows
only bilinearly; StructuredQB captures that partition and StabilizedQB adds
the -alpha*I auxiliary diagonal compensated through the quadratic tensor.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse

from .tensor3 import SparseTensor3

__all__ = [
    "QBSystem",
    "StructuredQB",
    "StabilizedQB",
    "Trajectory",
    "SimulationDiverged",
    "integrate_rk4",
    "partition",
    "stabilize",
    "save_system",
    "load_system",
]


class SimulationDiverged(RuntimeError):
    """State became non-finite during time integration."""

    def __init__(self, t):
        super().__init__(f"simulation diverged (non-finite state) at t = {t:.6g}")
        self.t = t


@dataclass
class Trajectory:
    """Sampled simulation result: states are (N, n_samples), outputs (p, n_samples)."""

    times: np.ndarray
    states: np.ndarray
    outputs: np.ndarray


def _steps_of(span, dt, name):
    steps = round(span / dt)
    if steps < 1 or abs(steps * dt - span) > 1e-9 * max(span, dt):
        raise ValueError(f"{name}={span} is not an integer multiple of dt={dt}")
    return steps


def integrate_rk4(f, x0, t_end, dt, sample_every):
    """Classical fixed-step RK4 with output sampling.

    f(t, x) -> dx/dt.  The state is recorded at t = 0 and every
    sample_every seconds thereafter (sample_every must be an integer
    multiple of dt).  Raises SimulationDiverged when a sampled state is
    non-finite, reporting the divergence time.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    stride = _steps_of(sample_every, dt, "sample_every")
    n_steps = _steps_of(t_end, dt, "t_end")
    x = np.asarray(x0, dtype=float).copy()
    times = [0.0]
    states = [x.copy()]
    half = 0.5 * dt
    sixth = dt / 6.0
    with np.errstate(over="ignore", invalid="ignore"):
        for step in range(1, n_steps + 1):
            t = (step - 1) * dt
            k1 = f(t, x)
            k2 = f(t + half, x + half * k1)
            k3 = f(t + half, x + half * k2)
            k4 = f(t + dt, x + dt * k3)
            x = x + sixth * (k1 + 2.0 * (k2 + k3) + k4)
            if step % stride == 0:
                if not np.all(np.isfinite(x)):
                    raise SimulationDiverged(step * dt)
                times.append(step * dt)
                states.append(x.copy())
    return np.array(times), np.column_stack(states)


def _maybe_sparse(M):
    # csr pays off for the large, very sparse lifted operators.
    if M.shape[0] >= 128:
        nnz = np.count_nonzero(M)
        if nnz < 0.2 * M.size:
            return scipy.sparse.csr_matrix(M)
    return M


@dataclass
class QBSystem:
    """Full QB system (A, H, N_k, B, C) with H symmetric in modes 2 and 3."""

    A: np.ndarray
    H: SparseTensor3
    N_ops: list
    B: np.ndarray
    C: np.ndarray

    def __post_init__(self):
        self.A = np.asarray(self.A, dtype=float)
        self.B = np.atleast_2d(np.asarray(self.B, dtype=float))
        self.C = np.atleast_2d(np.asarray(self.C, dtype=float))
        self.N_ops = [np.asarray(N, dtype=float) for N in self.N_ops]
        n = self.A.shape[0]
        if self.A.shape != (n, n):
            raise ValueError("A must be square")
        if self.H.dim != n:
            raise ValueError(f"H dim {self.H.dim} does not match A dim {n}")
        if self.B.shape[0] != n:
            raise ValueError("B row count must match state dimension")
        if self.C.shape[1] != n:
            raise ValueError("C column count must match state dimension")
        if self.C.shape[0] < 1:
            raise ValueError("C must have at least one output row")
        if len(self.N_ops) != self.B.shape[1]:
            raise ValueError(
                f"need one bilinear matrix per input: {len(self.N_ops)} vs m={self.B.shape[1]}"
            )
        for N in self.N_ops:
            if N.shape != (n, n):
                raise ValueError("every N_k must be n x n")
        if not self.H.is_symmetric_23():
            raise ValueError(
                "H must be symmetric in modes 2,3; build with QBSystem.from_raw"
            )

    @classmethod
    def from_raw(cls, A, H, N_ops, B, C):
        """Construct from an unsymmetrized tensor; H is symmetrized in place."""
        return cls(A, H.symmetrize(), list(N_ops), B, C)

    @property
    def dim(self):
        return self.A.shape[0]

    @property
    def m(self):
        return self.B.shape[1]

    @property
    def p(self):
        return self.C.shape[0]

    def rhs(self, x, u):
        """A x + H(x (x) x) + sum_k u_k N_k x + B u."""
        x = np.asarray(x, dtype=float).ravel()
        u = np.atleast_1d(np.asarray(u, dtype=float)).ravel()
        if len(x) != self.dim:
            raise ValueError(f"state length {len(x)} != dim {self.dim}")
        if len(u) != self.m:
            raise ValueError(f"input length {len(u)} != m {self.m}")
        out = self.A @ x + self.H.apply_quadratic(x, x) + self.B @ u
        for uk, N in zip(u, self.N_ops):
            if uk != 0.0:
                out += uk * (N @ x)
        return out

    def simulate(self, u_fn, x0, t_end, dt=1e-4, sample_every=0.01):
        """Fixed-step RK4 simulation; outputs y = C x recorded at the samples."""
        A_op = _maybe_sparse(self.A)
        N_op = [_maybe_sparse(N) for N in self.N_ops]
        B, H, m = self.B, self.H, self.m

        def f(t, x):
            u = np.atleast_1d(np.asarray(u_fn(t), dtype=float)).ravel()
            out = A_op @ x + H.apply_quadratic(x, x) + B @ u
            for uk, N in zip(u, N_op):
                if uk != 0.0:
                    out = out + uk * (N @ x)
            return out

        times, states = integrate_rk4(f, x0, t_end, dt, sample_every)
        return Trajectory(times, states, self.C @ states)


def _zero_block_error(name):
    return ValueError(f"block-structure violation: {name} must be exactly zero")


@dataclass
class StructuredQB:
    """Block partition of a lifted QB system.

    Coordinates 0..n1-1 are the original states, the rest auxiliaries.  The
    linear part acts only on the original rows, all quadratic and bilinear
    terms live in the auxiliary rows, inputs force only original rows, and
    the output reads only original coordinates.  lift_defs records, per
    auxiliary coordinate g, the quadratic monomial (p, q) with w_g = x_p * x_q
    over lifted coordinates; None marks a non-polynomial lifting.
    """

    n1: int
    A11: np.ndarray
    A12: np.ndarray
    H: SparseTensor3
    N_ops: list
    B1: np.ndarray
    C1: np.ndarray
    lift_defs: list | None = None

    def __post_init__(self):
        self.A11 = np.asarray(self.A11, dtype=float)
        self.A12 = np.asarray(self.A12, dtype=float)
        self.B1 = np.atleast_2d(np.asarray(self.B1, dtype=float))
        self.C1 = np.atleast_2d(np.asarray(self.C1, dtype=float))
        self.N_ops = [np.asarray(N, dtype=float) for N in self.N_ops]
        n1, n2 = self.n1, self.n2
        if self.A11.shape != (n1, n1) or self.A12.shape != (n1, n2):
            raise ValueError("A block shapes do not match n1/n2")
        if self.H.dim != self.dim:
            raise ValueError("H dimension must equal the lifted dimension")
        if self.H.nnz and self.H.i.min() < n1:
            raise _zero_block_error("H rows in the original range")
        for idx, N in enumerate(self.N_ops):
            if N.shape != (self.dim, self.dim):
                raise ValueError("every N_k must be full lifted dimension")
            if np.any(N[:n1, :]):
                raise _zero_block_error(f"N_{idx + 1} rows in the original range")
        if self.B1.shape[0] != n1 or self.C1.shape[1] != n1:
            raise ValueError("B1/C1 shapes do not match n1")
        if self.lift_defs is not None:
            seen = sorted(g for g, _, _ in self.lift_defs)
            if seen != list(range(n1, self.dim)):
                raise ValueError(
                    "lift_defs must define each auxiliary coordinate exactly once"
                )

    @property
    def n2(self):
        return self.A12.shape[1]

    @property
    def dim(self):
        return self.n1 + self.n2

    @property
    def m(self):
        return self.B1.shape[1]

    def N21(self, k):
        return self.N_ops[k][self.n1:, :self.n1]

    def N22(self, k):
        return self.N_ops[k][self.n1:, self.n1:]

    def full_A(self):
        A = np.zeros((self.dim, self.dim))
        A[:self.n1, :self.n1] = self.A11
        A[:self.n1, self.n1:] = self.A12
        return A

    def full_B(self):
        B = np.zeros((self.dim, self.m))
        B[:self.n1, :] = self.B1
        return B

    def full_C(self):
        C = np.zeros((self.C1.shape[0], self.dim))
        C[:, :self.n1] = self.C1
        return C

    def as_qbsystem(self):
        """Reassemble the (unstabilized) full QB system."""
        return QBSystem(self.full_A(), self.H, list(self.N_ops),
                        self.full_B(), self.full_C())


def partition(sys, n1, lift_defs=None):
    """Split a QB system into the lifted block structure, verifying zero blocks.

    The zero-block conditions are checked exactly (the lifting constructs
    them as structural zeros); any violation is rejected with the offending
    block named.
    """
    n = sys.dim
    if not 0 < n1 <= n:
        raise ValueError(f"n1={n1} out of range for dim {n}")
    if np.any(sys.A[n1:, :]):
        raise _zero_block_error("A rows below the original block")
    if np.any(sys.B[n1:, :]):
        raise _zero_block_error("B rows below the original block")
    if np.any(sys.C[:, n1:]):
        raise _zero_block_error("C columns beyond the original block")
    if sys.H.nnz and sys.H.i.min() < n1:
        raise _zero_block_error("H rows in the original range")
    for idx, N in enumerate(sys.N_ops):
        if np.any(N[:n1, :]):
            raise _zero_block_error(f"N_{idx + 1} rows in the original range")
    return StructuredQB(
        n1=n1,
        A11=sys.A[:n1, :n1].copy(),
        A12=sys.A[:n1, n1:].copy(),
        H=sys.H,
        N_ops=[N.copy() for N in sys.N_ops],
        B1=sys.B[:n1, :].copy(),
        C1=sys.C[:, :n1].copy(),
        lift_defs=lift_defs,
    )


@dataclass
class StabilizedQB:
    """Structured system with the auxiliary block shifted to -alpha*I.

    The shift is compensated by adding, for each auxiliary coordinate g with
    w_g = x_p * x_q, the quadratic entry alpha * x_p * x_q to row g, so the
    right-hand side is unchanged on every lift-consistent state.
    """

    base: StructuredQB
    alpha: float
    A_alpha: np.ndarray = field(init=False)
    H_alpha: SparseTensor3 = field(init=False)

    def __post_init__(self):
        if self.alpha <= 0:
            raise ValueError("alpha must be positive")
        if self.base.lift_defs is None:
            raise ValueError(
                "stabilization requires quadratic lift definitions for every "
                "auxiliary coordinate (polynomial lifting only)"
            )
        s = self.base
        A = s.full_A()
        A[s.n1:, s.n1:] = -self.alpha * np.eye(s.n2)
        self.A_alpha = A
        rows, ps, qs, vals = [], [], [], []
        for g, p, q in s.lift_defs:
            rows += [g, g]
            ps += [p, q]
            qs += [q, p]
            vals += [0.5 * self.alpha, 0.5 * self.alpha]
        extra = SparseTensor3(s.dim, rows, ps, qs, vals)
        self.H_alpha = s.H.add(extra)

    def as_qbsystem(self):
        """Full stabilized QB system (for the dense oracle and simulation)."""
        s = self.base
        return QBSystem(self.A_alpha, self.H_alpha, list(s.N_ops),
                        s.full_B(), s.full_C())


def stabilize(s, alpha):
    """Artificially stabilize a structured system; see StabilizedQB."""
    return StabilizedQB(base=s, alpha=float(alpha))


_FMT = "%.17e"


def save_system(sys, directory, n1=None):
    """Serialize a QB system to a directory: CSV matrices, tensor text, manifest."""
    os.makedirs(directory, exist_ok=True)
    np.savetxt(os.path.join(directory, "A.csv"), sys.A, fmt=_FMT, delimiter=",")
    np.savetxt(os.path.join(directory, "B.csv"), sys.B, fmt=_FMT, delimiter=",")
    np.savetxt(os.path.join(directory, "C.csv"), sys.C, fmt=_FMT, delimiter=",")
    for k, N in enumerate(sys.N_ops):
        np.savetxt(os.path.join(directory, f"N_{k + 1}.csv"), N, fmt=_FMT,
                   delimiter=",")
    sys.H.save_text(os.path.join(directory, "H.txt"))
    with open(os.path.join(directory, "manifest.txt"), "w") as fh:
        fh.write(f"N={sys.dim}\n")
        fh.write(f"m={sys.m}\n")
        fh.write(f"p={sys.p}\n")
        if n1 is not None:
            fh.write(f"n1={n1}\n")


def load_system(directory):
    """Load a QB system saved by save_system; returns (system, n1 or None)."""
    manifest = {}
    with open(os.path.join(directory, "manifest.txt")) as fh:
        for line in fh:
            if "=" in line:
                key, val = line.strip().split("=", 1)
                manifest[key] = int(val)
    n = manifest["N"]
    m = manifest["m"]
    A = np.loadtxt(os.path.join(directory, "A.csv"), delimiter=",", ndmin=2)
    B = np.loadtxt(os.path.join(directory, "B.csv"), delimiter=",", ndmin=2)
    C = np.loadtxt(os.path.join(directory, "C.csv"), delimiter=",", ndmin=2)
    N_ops = [
        np.loadtxt(os.path.join(directory, f"N_{k + 1}.csv"), delimiter=",", ndmin=2)
        for k in range(m)
    ]
    H = SparseTensor3.load_text(os.path.join(directory, "H.txt"), dim=n)
    return QBSystem(A, H, N_ops, B, C), manifest.get("n1")
