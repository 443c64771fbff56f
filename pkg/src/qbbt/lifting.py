"""Lifting transformations: auxiliary-variable specifications and
constructors turning polynomial or exponential scalar ODEs into
quadratic-bilinear systems.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .qbsys import QBSystem
from .tensor3 import SparseTensor3

__all__ = [
    "MonomialPower",
    "HadamardProduct",
    "Exponential",
    "LiftSpec",
    "NonPolynomialLift",
    "lift_state",
    "lift_poly_scalar",
    "poly_scalar_matrices",
    "example2_system",
    "example2_matrices",
    "consistency_residual",
]


class NonPolynomialLift(ValueError):
    """An auxiliary variable has no quadratic-monomial definition."""


@dataclass(frozen=True)
class MonomialPower:
    """Auxiliary w = x[base] ** exponent (base is a lifted coordinate index)."""

    base: int
    exponent: int


@dataclass(frozen=True)
class HadamardProduct:
    """Auxiliary w = x[p] * x[q] over lifted coordinates."""

    p: int
    q: int


@dataclass(frozen=True)
class Exponential:
    """Auxiliary w = exp(coeff * x[base]).  Simulation/consistency only."""

    coeff: float
    base: int


@dataclass
class LiftSpec:
    """Ordered auxiliary-variable definitions over an n_orig-dimensional state.

    Definition number ell creates lifted coordinate n_orig + ell and may only
    reference original coordinates or earlier auxiliaries.
    """

    n_orig: int
    aux: list

    def __post_init__(self):
        for ell, d in enumerate(self.aux):
            limit = self.n_orig + ell
            refs = (d.base,) if not isinstance(d, HadamardProduct) else (d.p, d.q)
            if any(not 0 <= ref < limit for ref in refs):
                raise ValueError(
                    f"auxiliary {ell} references coordinate outside [0, {limit})"
                )

    @property
    def dim(self):
        return self.n_orig + len(self.aux)

    def is_polynomial(self):
        return not any(isinstance(d, Exponential) for d in self.aux)

    def quadratic_defs(self):
        """lift_defs list [(coord, p, q)] with w_coord = x_p * x_q.

        A MonomialPower of exponent e is factored through the auxiliary
        holding exponent e - 1 (chained monomials), matching the canonical
        constructors in this module.  Raises NonPolynomialLift for
        exponential auxiliaries.
        """
        defs = []
        for ell, d in enumerate(self.aux):
            g = self.n_orig + ell
            if isinstance(d, HadamardProduct):
                defs.append((g, d.p, d.q))
            elif isinstance(d, MonomialPower):
                if d.exponent == 2:
                    defs.append((g, d.base, d.base))
                    continue
                prev = next(
                    (self.n_orig + m for m, dd in enumerate(self.aux[:ell])
                     if isinstance(dd, MonomialPower) and dd.base == d.base
                     and dd.exponent == d.exponent - 1),
                    None,
                )
                if prev is None:
                    raise NonPolynomialLift(
                        f"no auxiliary holds {d.base}^{d.exponent - 1} to chain through"
                    )
                defs.append((g, d.base, prev))
            else:
                raise NonPolynomialLift(
                    f"auxiliary {ell} is exponential; no quadratic definition exists"
                )
        return defs


def lift_state(spec, x_orig):
    """Evaluate the auxiliary definitions in order on an original state."""
    x_orig = np.asarray(x_orig, dtype=float).ravel()
    if len(x_orig) != spec.n_orig:
        raise ValueError(f"expected {spec.n_orig} original coordinates")
    z = np.zeros(spec.dim)
    z[:spec.n_orig] = x_orig
    for ell, d in enumerate(spec.aux):
        g = spec.n_orig + ell
        if isinstance(d, MonomialPower):
            z[g] = z[d.base] ** d.exponent
        elif isinstance(d, HadamardProduct):
            z[g] = z[d.p] * z[d.q]
        else:
            z[g] = np.exp(d.coeff * z[d.base])
    return z


def poly_scalar_matrices(a, b):
    """Lifted matrices for the scalar ODE x' = sum_k a_k x^k + b u.

    a = (a_1, ..., a_d).  The lifted state is [x, w_1, ..., w_{d-1}] with
    w_ell = x^(ell+1); the original row becomes linear (w_ell carries the
    coefficient a_{ell+1}), and the auxiliary dynamics follow the chain rule
    w_ell' = (ell+1) w_{ell-1} x' with w_0 = x, producing quadratic terms and
    a bilinear row per auxiliary.  Returns the raw (unsymmetrized) matrices
    (A, H_mode1, N1, B, C) with H_mode1 of shape d x d^2.
    """
    a = np.asarray(a, dtype=float).ravel()
    d = len(a)
    if d < 2:
        raise ValueError("need polynomial degree d >= 2; nothing to lift")
    A = np.zeros((d, d))
    A[0, 0] = a[0]
    A[0, 1:] = a[1:]
    H = np.zeros((d, d * d))
    N1 = np.zeros((d, d))
    for ell in range(1, d):
        w_prev = ell - 1  # coordinate index of w_{ell-1} (w_0 = x)
        scale = ell + 1
        if a[0] != 0.0:
            H[ell, w_prev * d + 0] += scale * a[0]
        for kk in range(1, d):
            if a[kk] != 0.0:
                H[ell, w_prev * d + kk] += scale * a[kk]
        N1[ell, w_prev] = scale * b
    B = np.zeros((d, 1))
    B[0, 0] = b
    C = np.zeros((1, d))
    C[0, 0] = 1.0
    return A, H, N1, B, C


def _tensor_from_mode1(M, dim):
    rows, cols = np.nonzero(M)
    return SparseTensor3(dim, rows, cols // dim, cols % dim, M[rows, cols])


def lift_poly_scalar(a, b):
    """Lift x' = sum_k a_k x^k + b u to QB form.

    Returns (QBSystem, LiftSpec); the system tensor is symmetrized and the
    block structure with n1 = 1 holds by construction.
    """
    A, H, N1, B, C = poly_scalar_matrices(a, b)
    d = len(A)
    sys = QBSystem.from_raw(A, _tensor_from_mode1(H, d), [N1], B, C)
    spec = LiftSpec(n_orig=1, aux=[MonomialPower(0, ell + 1) for ell in range(1, d)])
    return sys, spec


def example2_matrices(a, b):
    """Lifted matrices for x' = a x + exp(-x) + b u with auxiliary w1 = exp(-x).

    w1' = -w1 (a x + w1 + b u), giving A = [[a, 1], [0, 0]], quadratic row
    [-a * w1 x - w1^2], bilinear row -b w1, and B = [b, 0]^T.  Returns raw
    (A, H_mode1, N1, B, C).
    """
    A = np.array([[a, 1.0], [0.0, 0.0]])
    H = np.array([[0.0, 0.0, 0.0, 0.0], [0.0, 0.0, -a, -1.0]])
    N1 = np.array([[0.0, 0.0], [0.0, -b]])
    B = np.array([[b], [0.0]])
    C = np.array([[1.0, 0.0]])
    return A, H, N1, B, C


def example2_system(a, b):
    """QB lift of the exponential scalar ODE; non-polynomial, so it cannot
    be stabilized (the auxiliary has no quadratic definition)."""
    A, H, N1, B, C = example2_matrices(a, b)
    sys = QBSystem.from_raw(A, _tensor_from_mode1(H, 2), [N1], B, C)
    spec = LiftSpec(n_orig=1, aux=[Exponential(-1.0, 0)])
    return sys, spec


def consistency_residual(spec, trajectory):
    """Max over samples of ||w_sampled - definitions(x_orig_sampled)||_inf.

    The central lifting-correctness diagnostic: zero (up to integration
    error) along any trajectory started from a lift-consistent state.
    """
    states = trajectory.states
    if states.shape[0] != spec.dim:
        raise ValueError("trajectory dimension does not match the lift spec")
    worst = 0.0
    for col in range(states.shape[1]):
        expected = lift_state(spec, states[:spec.n_orig, col])
        dev = np.max(np.abs(states[spec.n_orig:, col] - expected[spec.n_orig:]))
        worst = max(worst, float(dev))
    return worst
