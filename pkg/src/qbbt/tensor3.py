"""Sparse third-order tensors in coordinate form.

Houses the quadratic operator of a quadratic-bilinear system together with
its matricizations, symmetrization, Kronecker-free pair contractions, and
Petrov-Galerkin projection.

Matricization convention (fixed for the whole package, 0-based): the mode-1
unfolding has rows indexed by i and column j*N + k, matching the Kronecker
convention (x (x) y)[j*N + k] = x[j] * y[k]; the mode-2 unfolding has rows
indexed by j and column i*N + k.
"""

from __future__ import annotations

import numpy as np
import scipy.sparse

__all__ = [
    "SparseTensor3",
    "pair_contract_mode1",
    "pair_contract_mode2",
    "project",
]

# dense_mode* guard against accidental N^2-column blowups; oracle use only.
DENSE_CAP = 50

_PAIR_CHUNK = 256


class SparseTensor3:
    """N x N x N tensor stored as deduplicated (i, j, k, value) coordinates.

    Entries are canonically sorted by (i, j, k); duplicate triples are summed
    on construction and exact zeros dropped.  Instances are immutable.
    """

    __slots__ = ("dim", "i", "j", "k", "v", "_apply_mat")

    def __init__(self, dim, i=(), j=(), k=(), v=()):
        dim = int(dim)
        if dim < 1:
            raise ValueError("tensor dimension must be positive")
        i = np.asarray(i, dtype=np.int64).ravel()
        j = np.asarray(j, dtype=np.int64).ravel()
        k = np.asarray(k, dtype=np.int64).ravel()
        v = np.asarray(v, dtype=float).ravel()
        if not (len(i) == len(j) == len(k) == len(v)):
            raise ValueError("index/value arrays must have equal length")
        if len(i) and (i.min() < 0 or j.min() < 0 or k.min() < 0
                       or max(i.max(), j.max(), k.max()) >= dim):
            raise ValueError(f"tensor indices out of range [0, {dim})")
        if not np.all(np.isfinite(v)):
            raise ValueError("tensor values must be finite")
        if len(v):
            order = np.lexsort((k, j, i))
            i, j, k, v = i[order], j[order], k[order], v[order]
            new = np.empty(len(v), dtype=bool)
            new[0] = True
            new[1:] = (i[1:] != i[:-1]) | (j[1:] != j[:-1]) | (k[1:] != k[:-1])
            starts = np.flatnonzero(new)
            v = np.add.reduceat(v, starts)
            i, j, k = i[starts], j[starts], k[starts]
            nz = v != 0.0
            i, j, k, v = i[nz], j[nz], k[nz], v[nz]
        for arr in (i, j, k, v):
            arr.setflags(write=False)
        object.__setattr__(self, "dim", dim)
        object.__setattr__(self, "i", i)
        object.__setattr__(self, "j", j)
        object.__setattr__(self, "k", k)
        object.__setattr__(self, "v", v)
        object.__setattr__(self, "_apply_mat", None)

    def __setattr__(self, name, value):
        raise AttributeError("SparseTensor3 is immutable")

    @classmethod
    def from_entries(cls, dim, entries):
        """Build from an iterable of (i, j, k, value) tuples (0-based)."""
        entries = list(entries)
        if not entries:
            return cls(dim)
        i, j, k, v = zip(*entries)
        return cls(dim, i, j, k, v)

    @property
    def nnz(self):
        return len(self.v)

    def entries(self):
        """Entries as a list of (i, j, k, value) tuples in canonical order."""
        return [(int(a), int(b), int(c), float(x))
                for a, b, c, x in zip(self.i, self.j, self.k, self.v)]

    def _matvec_operator(self):
        # N x nnz selector carrying the values; apply_quadratic then reduces
        # to one gather, one multiply and one sparse matvec.
        mat = object.__getattribute__(self, "_apply_mat")
        if mat is None:
            mat = scipy.sparse.csr_matrix(
                (self.v, (self.i, np.arange(self.nnz))),
                shape=(self.dim, max(self.nnz, 1)),
            )
            object.__setattr__(self, "_apply_mat", mat)
        return mat

    def apply_quadratic(self, x, y):
        """out[i] = sum over entries of v * x[j] * y[k].

        Never forms the N^2-length Kronecker vector.
        """
        x = np.asarray(x, dtype=float).ravel()
        y = np.asarray(y, dtype=float).ravel()
        if len(x) != self.dim or len(y) != self.dim:
            raise ValueError(
                f"vector lengths ({len(x)}, {len(y)}) do not match dim {self.dim}"
            )
        if self.nnz == 0:
            return np.zeros(self.dim)
        return self._matvec_operator() @ (x[self.j] * y[self.k])

    def symmetrize(self):
        """Half-sum with the modes-2,3 transpose: T'[i,j,k] = (T[i,j,k] + T[i,k,j]) / 2.

        Preserves the quadratic form apply_quadratic(x, x) and makes
        apply_quadratic symmetric in its two arguments.
        """
        return SparseTensor3(
            self.dim,
            np.concatenate([self.i, self.i]),
            np.concatenate([self.j, self.k]),
            np.concatenate([self.k, self.j]),
            np.concatenate([0.5 * self.v, 0.5 * self.v]),
        )

    def is_symmetric_23(self, rtol=1e-13):
        """True if the tensor equals its modes-2,3 transpose up to rtol."""
        sym = self.symmetrize()
        if sym.nnz != self.nnz:
            return False
        scale = np.max(np.abs(self.v)) if self.nnz else 0.0
        return (
            np.array_equal(sym.i, self.i)
            and np.array_equal(sym.j, self.j)
            and np.array_equal(sym.k, self.k)
            and np.all(np.abs(sym.v - self.v) <= rtol * max(scale, 1e-300))
        )

    def filter(self, rows_ge=None, mode2_lt=None, mode3_lt=None):
        """Sub-tensor keeping entries with i >= rows_ge, j < mode2_lt, k < mode3_lt.

        Same dimension, fewer entries.  Used to exploit zero blocks of the
        matrices a contraction pairs against.
        """
        keep = np.ones(self.nnz, dtype=bool)
        if rows_ge is not None:
            keep &= self.i >= rows_ge
        if mode2_lt is not None:
            keep &= self.j < mode2_lt
        if mode3_lt is not None:
            keep &= self.k < mode3_lt
        return SparseTensor3(self.dim, self.i[keep], self.j[keep],
                             self.k[keep], self.v[keep])

    def scaled(self, factor):
        return SparseTensor3(self.dim, self.i, self.j, self.k, factor * self.v)

    def add(self, other):
        if other.dim != self.dim:
            raise ValueError("tensor dimensions differ")
        return SparseTensor3(
            self.dim,
            np.concatenate([self.i, other.i]),
            np.concatenate([self.j, other.j]),
            np.concatenate([self.k, other.k]),
            np.concatenate([self.v, other.v]),
        )

    def quadratic_jacobian(self, x):
        """Sparse Jacobian of x -> apply_quadratic(x, x) at the given state.

        J[i, k] = sum_j (T[i,j,k] + T[i,k,j]) x[j]; equals 2 H(x (x) d) as an
        operator on d when the tensor is symmetric in modes 2,3.
        """
        x = np.asarray(x, dtype=float).ravel()
        if len(x) != self.dim:
            raise ValueError(f"state length {len(x)} does not match dim {self.dim}")
        rows = np.concatenate([self.i, self.i])
        cols = np.concatenate([self.k, self.j])
        vals = np.concatenate([self.v * x[self.j], self.v * x[self.k]])
        return scipy.sparse.csr_matrix((vals, (rows, cols)),
                                       shape=(self.dim, self.dim))

    def dense_mode1(self, cap=DENSE_CAP):
        """Dense N x N^2 mode-1 unfolding: rows i, column j*N + k.  Oracle use only."""
        if self.dim > cap:
            raise ValueError(f"dim {self.dim} above dense cap {cap}")
        M = np.zeros((self.dim, self.dim * self.dim))
        M[self.i, self.j * self.dim + self.k] = self.v
        return M

    def dense_mode2(self, cap=DENSE_CAP):
        """Dense N x N^2 mode-2 unfolding: rows j, column i*N + k.  Oracle use only."""
        if self.dim > cap:
            raise ValueError(f"dim {self.dim} above dense cap {cap}")
        M = np.zeros((self.dim, self.dim * self.dim))
        M[self.j, self.i * self.dim + self.k] = self.v
        return M

    def save_text(self, path):
        """Write entries as 1-based whitespace-separated "i j k v" lines."""
        with open(path, "w") as fh:
            fh.write(f"# dim {self.dim}\n")
            for a, b, c, x in zip(self.i, self.j, self.k, self.v):
                fh.write(f"{a + 1} {b + 1} {c + 1} {x:.17e}\n")

    @classmethod
    def load_text(cls, path, dim=None):
        """Read the "i j k v" text format written by save_text."""
        i, j, k, v = [], [], [], []
        with open(path) as fh:
            for line in fh:
                line = line.strip()
                if not line:
                    continue
                if line.startswith("#"):
                    parts = line[1:].split()
                    if len(parts) == 2 and parts[0] == "dim":
                        dim = int(parts[1])
                    continue
                a, b, c, x = line.split()
                i.append(int(a) - 1)
                j.append(int(b) - 1)
                k.append(int(c) - 1)
                v.append(float(x))
        if dim is None:
            raise ValueError("tensor dimension not found in file; pass dim=")
        return cls(dim, i, j, k, v)


def _selector(rows, dim, nnz):
    return scipy.sparse.csr_matrix(
        (np.ones(nnz), (rows, np.arange(nnz))), shape=(dim, max(nnz, 1))
    )


def _pair_contract(rows1, a1, b1, v1, rows2, a2, b2, v2, P, Q, dim):
    # G[rows1, rows2] += v1 * v2 * P[a1, a2] * Q[b1, b2], swept over all entry
    # pairs in chunks so the (nnz1 x nnz2) intermediate never materializes.
    G = np.zeros((dim, dim))
    n1, n2 = len(v1), len(v2)
    if n1 == 0 or n2 == 0:
        return G
    S2 = _selector(rows2, dim, n2)
    Pa2 = P[:, a2]
    Qb2 = Q[:, b2]
    for lo in range(0, n1, _PAIR_CHUNK):
        hi = min(lo + _PAIR_CHUNK, n1)
        block = (v1[lo:hi, None] * v2[None, :]) \
            * Pa2[a1[lo:hi], :] * Qb2[b1[lo:hi], :]
        rows = (S2 @ block.T).T
        np.add.at(G, rows1[lo:hi], rows)
    return G


def pair_contract_mode1(T1, T2, P, Q):
    """G[i, i'] = sum over entry pairs of v * v' * P[j, j'] * Q[k, k'].

    Equals mode1(T1) @ kron(P, Q) @ mode1(T2).T without forming any
    N^2-sized object.  Cost is O(nnz(T1) * nnz(T2)).
    """
    P, Q = _check_pair(T1, T2, P, Q)
    return _pair_contract(T1.i, T1.j, T1.k, T1.v, T2.i, T2.j, T2.k, T2.v,
                          P, Q, T1.dim)


def pair_contract_mode2(T1, T2, P, Q):
    """G[j, j'] = sum over entry pairs of v * v' * P[i, i'] * Q[k, k'].

    Equals mode2(T1) @ kron(P, Q) @ mode2(T2).T under the package's mode-2
    column convention i*N + k.
    """
    P, Q = _check_pair(T1, T2, P, Q)
    return _pair_contract(T1.j, T1.i, T1.k, T1.v, T2.j, T2.i, T2.k, T2.v,
                          P, Q, T1.dim)


def _check_pair(T1, T2, P, Q):
    if T1.dim != T2.dim:
        raise ValueError("tensor dimensions differ")
    P = np.asarray(P, dtype=float)
    Q = np.asarray(Q, dtype=float)
    n = T1.dim
    if P.shape != (n, n) or Q.shape != (n, n):
        raise ValueError(
            f"P and Q must be {n}x{n}, got {P.shape} and {Q.shape}"
        )
    return P, Q


def project(T, W, V):
    """Project the quadratic operator: Hhat[p, q*r + s] = sum v * W[i,p] * V[j,q] * V[k,s].

    Returns the r x r^2 mode-1 unfolding of the reduced tensor, i.e.
    W^T @ mode1(T) @ kron(V, V) computed at O(nnz * r^3) cost.
    """
    W = np.asarray(W, dtype=float)
    V = np.asarray(V, dtype=float)
    if W.ndim != 2 or V.ndim != 2 or W.shape[0] != T.dim or V.shape[0] != T.dim:
        raise ValueError(
            f"projection shapes {W.shape}, {V.shape} do not conform to dim {T.dim}"
        )
    r_out, r_in = W.shape[1], V.shape[1]
    if T.nnz == 0:
        return np.zeros((r_out, r_in * r_in))
    cube = np.einsum("e,ep,eq,es->pqs", T.v, W[T.i], V[T.j], V[T.k],
                     optimize=True)
    return cube.reshape(r_out, r_in * r_in)
