"""Non-adiabatic tubular reactor: full-order model and its QB lifting.

The model tracks species concentration psi(s, t) and temperature
theta(s, t) on s in (0, 1) with advection, diffusion, heat loss, a cubic
polynomial reaction term f = psi * (c0 + c1 theta + c2 theta^2 + c3 theta^3),
and a controlled heat input.  Robin inflow conditions d phi/ds(0) =
Pe (phi(0) - 1) and Neumann outflow conditions d phi/ds(1) = 0 close the
second-order finite-difference operators.  The output is the temperature at
the last grid node.

Lifting to quadratic-bilinear form introduces five auxiliary fields
w1 = psi*theta, w2 = psi*theta^2, w3 = psi*theta^3, w4 = theta^2,
w5 = theta^3 (componentwise per grid point), giving a structured system of
dimension 7n with the original block n1 = 2n.  Constant boundary sources are
routed through a dedicated always-one input channel so the lifted system
matches the QB template exactly; the control enters as the second channel.
See docs/discretization.md for the exact stencil and lifting coefficients.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .lifting import HadamardProduct, LiftSpec, lift_state
from .qbsys import StructuredQB, Trajectory, integrate_rk4
from .tensor3 import SparseTensor3

__all__ = [
    "ReactorConfig",
    "ReactorFOM",
    "taylor_arrhenius",
    "assemble_fom",
    "fom_rhs",
    "simulate_fom",
    "steady_state",
    "lift_spec",
    "lift_reactor",
    "lift_reactor_deviation",
    "lifted_initial_state",
    "SteadyStateError",
]


# Default uniform control-influence gain.  The heat input is a gentle
# actuation compared to the advection and source scales; this keeps the
# forced response in the regime reduced models are meant to track.
DEFAULT_INPUT_GAIN = 5e-5


class SteadyStateError(RuntimeError):
    """Newton iteration for the reactor steady state failed to converge."""

    def __init__(self, history):
        super().__init__(
            "steady-state Newton did not converge; residual history: "
            + ", ".join(f"{r:.3e}" for r in history)
        )
        self.history = history


def taylor_arrhenius(gamma, theta_ref):
    """Cubic reaction coefficients from the Arrhenius factor exp(gamma - gamma/theta).

    Degree-3 Taylor expansion about theta_ref, re-expanded in the monomial
    basis {1, theta, theta^2, theta^3}; returns (c0, c1, c2, c3) scalars.
    """
    if theta_ref <= 0:
        raise ValueError("theta_ref must be positive")
    t = float(theta_ref)
    g0 = math.exp(gamma - gamma / t)
    d1 = g0 * (gamma / t**2)
    d2 = g0 * (gamma**2 / t**4 - 2.0 * gamma / t**3)
    d3 = g0 * (gamma**3 / t**6 - 6.0 * gamma**2 / t**5 + 6.0 * gamma / t**4)
    # Taylor coefficients in powers of (theta - t), then binomial re-expansion.
    a0, a1, a2, a3 = g0, d1, d2 / 2.0, d3 / 6.0
    c3 = a3
    c2 = a2 - 3.0 * t * a3
    c1 = a1 - 2.0 * t * a2 + 3.0 * t**2 * a3
    c0 = a0 - t * a1 + t**2 * a2 - t**3 * a3
    return c0, c1, c2, c3


def _vector_field(value, n, name):
    if value is None:
        return None
    arr = np.asarray(value, dtype=float).ravel()
    if arr.size == 1:
        return np.full(n, float(arr[0]))
    if arr.size != n:
        raise ValueError(f"{name} must be a scalar or a length-{n} vector")
    return arr


@dataclass
class ReactorConfig:
    """Physical and numerical parameters of the reactor model.

    The reaction coefficient vectors default to the cubic Arrhenius
    expansion at (gamma, theta_ref); the control influence b_profile
    defaults to the uniform gain DEFAULT_INPUT_GAIN on the whole domain.
    Explicit overrides are accepted as scalars (broadcast) or length-n
    vectors.
    """

    damkohler: float = 0.17
    peclet: float = 25.0
    heat_release: float = 0.5
    beta: float = 2.5
    theta_ref: float = 1.0
    gamma: float = 5.0
    n: int = 199
    c0: object = None
    c1: object = None
    c2: object = None
    c3: object = None
    b_profile: object = None

    def __post_init__(self):
        if self.n < 3:
            raise ValueError("need at least 3 grid points")
        if self.peclet <= 0:
            raise ValueError("peclet must be positive")

    def coefficient_vectors(self):
        """(c0, c1, c2, c3) as length-n arrays."""
        defaults = taylor_arrhenius(self.gamma, self.theta_ref)
        out = []
        for name, default in zip(("c0", "c1", "c2", "c3"), defaults):
            vec = _vector_field(getattr(self, name), self.n, name)
            out.append(np.full(self.n, default) if vec is None else vec)
        return tuple(out)

    def input_profile(self):
        vec = _vector_field(self.b_profile, self.n, "b_profile")
        return np.full(self.n, DEFAULT_INPUT_GAIN) if vec is None else vec

    @classmethod
    def from_file(cls, path):
        """Read a key=value text config; unknown keys are rejected."""
        kwargs = {}
        scalars = {"damkohler", "peclet", "heat_release", "beta",
                   "theta_ref", "gamma"}
        vectors = {"c0", "c1", "c2", "c3", "b_profile"}
        with open(path) as fh:
            for line in fh:
                line = line.strip()
                if not line or line.startswith("#"):
                    continue
                key, val = (part.strip() for part in line.split("=", 1))
                if key == "n":
                    kwargs["n"] = int(val)
                elif key in scalars:
                    kwargs[key] = float(val)
                elif key in vectors:
                    kwargs[key] = [float(x) for x in val.split(",")]
                else:
                    raise ValueError(f"unknown reactor config key: {key}")
        return cls(**kwargs)

    def to_file(self, path):
        with open(path, "w") as fh:
            for key in ("damkohler", "peclet", "heat_release", "beta",
                        "theta_ref", "gamma", "n"):
                fh.write(f"{key}={getattr(self, key)}\n")
            for key in ("c0", "c1", "c2", "c3", "b_profile"):
                val = getattr(self, key)
                if val is not None:
                    arr = np.atleast_1d(np.asarray(val, dtype=float))
                    fh.write(f"{key}={','.join(repr(float(x)) for x in arr)}\n")


@dataclass
class ReactorFOM:
    """Discretized operators of the reactor.

    A_psi and A_theta are the advection-diffusion operators (the latter with
    the -beta shift) including boundary closures; b_psi and b_theta carry
    the constant boundary and beta*theta_ref contributions; b is the control
    influence vector.  The output row selects theta at the last grid node.
    """

    n: int
    A_psi: np.ndarray
    A_theta: np.ndarray
    b_psi: np.ndarray
    b_theta: np.ndarray
    b: np.ndarray
    output_index: int = field(init=False)

    def __post_init__(self):
        self.output_index = 2 * self.n - 1


def _advection_diffusion(n, peclet):
    """Interior stencil plus Robin/Neumann closures on a uniform grid.

    Grid nodes s_i = i*h, i = 1..n, h = 1/(n+1).  Returns (L, g) with the
    closure constants in g (from the inflow value 1 in the Robin relation).
    """
    h = 1.0 / (n + 1)
    diff = 1.0 / (peclet * h * h)
    adv = 1.0 / (2.0 * h)
    a_m = diff + adv      # coefficient of the left neighbor
    a_c = -2.0 * diff     # center
    a_p = diff - adv      # right neighbor
    L = np.zeros((n, n))
    idx = np.arange(n)
    L[idx, idx] = a_c
    L[idx[1:], idx[:-1]] = a_m
    L[idx[:-1], idx[1:]] = a_p
    g = np.zeros(n)
    # Left Robin closure, second-order one-sided:
    #   (-3 phi_0 + 4 phi_1 - phi_2) / (2h) = Pe (phi_0 - 1)
    #   => phi_0 = (4 phi_1 - phi_2 + 2 h Pe) / (3 + 2 h Pe)
    den = 3.0 + 2.0 * h * peclet
    L[0, 0] += a_m * 4.0 / den
    L[0, 1] += a_m * (-1.0) / den
    g[0] = a_m * 2.0 * h * peclet / den
    # Right Neumann closure: (3 phi_{n+1} - 4 phi_n + phi_{n-1}) / (2h) = 0
    #   => phi_{n+1} = (4 phi_n - phi_{n-1}) / 3
    L[n - 1, n - 1] += a_p * 4.0 / 3.0
    L[n - 1, n - 2] += a_p * (-1.0) / 3.0
    return L, g


def assemble_fom(cfg: ReactorConfig) -> ReactorFOM:
    """Build the discrete operators and check their stability."""
    n = cfg.n
    L, g = _advection_diffusion(n, cfg.peclet)
    A_psi = L.copy()
    A_theta = L - cfg.beta * np.eye(n)
    b_psi = g.copy()
    b_theta = g + cfg.beta * cfg.theta_ref * np.ones(n)
    fom = ReactorFOM(n=n, A_psi=A_psi, A_theta=A_theta,
                     b_psi=b_psi, b_theta=b_theta, b=cfg.input_profile())
    for name, A in (("A_psi", A_psi), ("A_theta", A_theta)):
        top = float(np.max(np.linalg.eigvals(A).real))
        if top >= 0.0:
            raise ArithmeticError(f"{name} is not stable: max Re(eig) = {top:.3e}")
    return fom


def _reaction(psi, theta, coeffs):
    c0, c1, c2, c3 = coeffs
    return psi * (c0 + theta * (c1 + theta * (c2 + theta * c3)))


def fom_rhs(fom: ReactorFOM, cfg: ReactorConfig, psi, theta, u):
    """Right-hand side of the discrete reactor equations."""
    coeffs = cfg.coefficient_vectors()
    f = _reaction(psi, theta, coeffs)
    dpsi = fom.A_psi @ psi + fom.b_psi - cfg.damkohler * f
    dtheta = (fom.A_theta @ theta + fom.b_theta + fom.b * u
              + cfg.heat_release * cfg.damkohler * f)
    return dpsi, dtheta


def simulate_fom(fom: ReactorFOM, cfg: ReactorConfig, u_fn, x0, t_end,
                 dt=1e-4, sample_every=0.01) -> Trajectory:
    """RK4 simulation of the stacked state [psi; theta]; output y = theta(s=1)."""
    n = fom.n
    coeffs = cfg.coefficient_vectors()
    D = cfg.damkohler
    BD = cfg.heat_release * cfg.damkohler
    A_psi, A_theta = fom.A_psi, fom.A_theta
    b_psi, b_theta, b = fom.b_psi, fom.b_theta, fom.b

    def f(t, x):
        psi, theta = x[:n], x[n:]
        reac = _reaction(psi, theta, coeffs)
        return np.concatenate([
            A_psi @ psi + b_psi - D * reac,
            A_theta @ theta + b_theta + b * float(u_fn(t)) + BD * reac,
        ])

    times, states = integrate_rk4(f, x0, t_end, dt, sample_every)
    return Trajectory(times, states, states[fom.output_index][None, :])


def steady_state(cfg: ReactorConfig, u_const, fom=None, tol=1e-11, max_iter=50):
    """Equilibrium (psi, theta) at constant input by Newton iteration.

    Starts from psi = theta = 1; the Jacobian of the polynomial reaction is
    assembled analytically.  Fails with the residual history if the
    infinity-norm residual does not reach tol within max_iter steps.
    """
    if fom is None:
        fom = assemble_fom(cfg)
    n = cfg.n
    c0, c1, c2, c3 = cfg.coefficient_vectors()
    D = cfg.damkohler
    BD = cfg.heat_release * cfg.damkohler
    x = np.ones(2 * n)
    history = []
    for _ in range(max_iter):
        psi, theta = x[:n], x[n:]
        dpsi, dtheta = fom_rhs(fom, cfg, psi, theta, u_const)
        F = np.concatenate([dpsi, dtheta])
        resid = float(np.max(np.abs(F)))
        history.append(resid)
        if resid <= tol:
            return psi.copy(), theta.copy()
        r_theta = c0 + theta * (c1 + theta * (c2 + theta * c3))
        dr_theta = c1 + theta * (2.0 * c2 + 3.0 * c3 * theta)
        J = np.zeros((2 * n, 2 * n))
        J[:n, :n] = fom.A_psi - D * np.diag(r_theta)
        J[:n, n:] = -D * np.diag(psi * dr_theta)
        J[n:, :n] = BD * np.diag(r_theta)
        J[n:, n:] = fom.A_theta + BD * np.diag(psi * dr_theta)
        x = x - np.linalg.solve(J, F)
    raise SteadyStateError(history)


def lift_spec(n) -> LiftSpec:
    """Auxiliary definitions of the reactor lifting, one per grid point.

    Ordered blocks w1..w5 with the chained factorization w1 = psi*theta,
    w2 = w1*theta, w3 = w2*theta, w4 = theta*theta, w5 = w4*theta.
    """
    aux = []
    psi, theta = 0, n
    w1, w2, w4 = 2 * n, 3 * n, 5 * n
    aux += [HadamardProduct(psi + g, theta + g) for g in range(n)]
    aux += [HadamardProduct(w1 + g, theta + g) for g in range(n)]
    aux += [HadamardProduct(w2 + g, theta + g) for g in range(n)]
    aux += [HadamardProduct(theta + g, theta + g) for g in range(n)]
    aux += [HadamardProduct(w4 + g, theta + g) for g in range(n)]
    return LiftSpec(n_orig=2 * n, aux=aux)


def _assemble_lifted(n, lpsi, lth, channels):
    """Shared constructor of the 7n-dimensional lifted block system.

    lpsi and lth are the linear maps of the two original fields over the
    full lifted state, as COO triples (grid point, column, value); channels
    is a list of (vec_psi, vec_theta) input-influence pairs, one per input
    channel.  The auxiliary rows substitute the linear field derivatives
    into the product rule for each auxiliary field, producing quadratic
    entries plus one bilinear matrix per channel.
    """
    n1, N = 2 * n, 7 * n
    grid = np.arange(n)
    PSI, TH = grid, n + grid
    W1, W2, W3, W4, W5 = (2 * n + grid, 3 * n + grid, 4 * n + grid,
                          5 * n + grid, 6 * n + grid)
    lpsi_g, lpsi_c, lpsi_v = lpsi
    lth_g, lth_c, lth_v = lth

    A11 = np.zeros((n1, n1))
    A12 = np.zeros((n1, 5 * n))
    for base, (gg, cc, vv) in ((0, lpsi), (n, lth)):
        orig = cc < n1
        np.add.at(A11, (base + gg[orig], cc[orig]), vv[orig])
        np.add.at(A12, (base + gg[~orig], cc[~orig] - n1), vv[~orig])

    rows, js, ks, vals = [], [], [], []

    def add_product(row_block, lin, partner, scale):
        gg, cc, vv = lin
        rows.append(row_block[gg])
        js.append(cc)
        ks.append(partner[gg])
        vals.append(scale * vv)

    # product rule per auxiliary field, with the field derivatives linear
    add_product(W1, lpsi, TH, 1.0)   # w1' = psi'*theta + psi*theta'
    add_product(W1, lth, PSI, 1.0)
    add_product(W2, lpsi, W4, 1.0)   # w2' = psi'*w4 + 2 w1*theta'
    add_product(W2, lth, W1, 2.0)
    add_product(W3, lpsi, W5, 1.0)   # w3' = psi'*w5 + 3 w2*theta'
    add_product(W3, lth, W2, 3.0)
    add_product(W4, lth, TH, 2.0)    # w4' = 2 theta*theta'
    add_product(W5, lth, W4, 3.0)    # w5' = 3 w4*theta'

    H = SparseTensor3(N, np.concatenate(rows), np.concatenate(js),
                      np.concatenate(ks), np.concatenate(vals)).symmetrize()

    N_ops = []
    B1 = np.zeros((n1, len(channels)))
    for k, (vec_psi, vec_theta) in enumerate(channels):
        Nk = np.zeros((N, N))
        Nk[W1, TH] += vec_psi
        Nk[W1, PSI] += vec_theta
        Nk[W2, W4] += vec_psi
        Nk[W2, W1] += 2.0 * vec_theta
        Nk[W3, W5] += vec_psi
        Nk[W3, W2] += 3.0 * vec_theta
        Nk[W4, TH] += 2.0 * vec_theta
        Nk[W5, W4] += 3.0 * vec_theta
        N_ops.append(Nk)
        B1[:n, k] = vec_psi
        B1[n:, k] = vec_theta

    C1 = np.zeros((1, n1))
    C1[0, n1 - 1] = 1.0
    defs = []
    for row_block, p_block in ((W1, PSI), (W2, W1), (W3, W2), (W4, TH),
                               (W5, W4)):
        defs += [(int(row_block[g]), int(p_block[g]), int(TH[g]))
                 for g in range(n)]
    defs.sort()
    return StructuredQB(n1=n1, A11=A11, A12=A12, H=H, N_ops=N_ops,
                        B1=B1, C1=C1, lift_defs=defs)


def _coo_rows(block, col_offset):
    rr, cc = np.nonzero(block)
    return rr, cc + col_offset, block[rr, cc]


def _coo_concat(parts):
    return (np.concatenate([np.asarray(p[0], dtype=np.int64) for p in parts]),
            np.concatenate([np.asarray(p[1], dtype=np.int64) for p in parts]),
            np.concatenate([np.asarray(p[2], dtype=float) for p in parts]))


def lift_reactor(fom: ReactorFOM, cfg: ReactorConfig) -> StructuredQB:
    """Structured QB system of dimension 7n with original block n1 = 2n.

    The original rows are linear in the lifted state.  Input channel 1 is
    the constant-source channel (driven by u1 = 1) carrying the boundary
    and reference-temperature terms, channel 2 the control.
    """
    n = cfg.n
    c0, c1, c2, c3 = cfg.coefficient_vectors()
    D = cfg.damkohler
    BD = cfg.heat_release * cfg.damkohler
    grid = np.arange(n)
    PSI, TH = grid, n + grid
    W1, W2, W3 = 2 * n + grid, 3 * n + grid, 4 * n + grid

    lpsi = _coo_concat([
        _coo_rows(fom.A_psi - D * np.diag(c0), 0),
        (grid, W1, -D * c1), (grid, W2, -D * c2), (grid, W3, -D * c3),
    ])
    lth = _coo_concat([
        _coo_rows(fom.A_theta, n), (grid, PSI, BD * c0),
        (grid, W1, BD * c1), (grid, W2, BD * c2), (grid, W3, BD * c3),
    ])
    channels = [(fom.b_psi, fom.b_theta), (np.zeros(n), fom.b)]
    return _assemble_lifted(n, lpsi, lth, channels)


def lift_reactor_deviation(fom: ReactorFOM, cfg: ReactorConfig, psi_e,
                           theta_e) -> StructuredQB:
    """Lifted dynamics of the deviation from an equilibrium at zero input.

    Expanding the cubic reaction about (psi_e, theta_e) gives another
    polynomial system in the deviation fields whose monomials are the same
    five auxiliary families, so the identical lifting applies: the result
    has no constant terms (the equilibrium absorbs the boundary sources),
    a single control channel, and an original block that carries the true
    reaction Jacobian.  Reduced models of this system describe the forced
    response about the operating point with an exactly representable zero
    initial state.
    """
    n = cfg.n
    c0, c1, c2, c3 = cfg.coefficient_vectors()
    psi_e = np.asarray(psi_e, dtype=float)
    theta_e = np.asarray(theta_e, dtype=float)
    dpsi, dtheta = fom_rhs(fom, cfg, psi_e, theta_e, 0.0)
    resid = max(np.max(np.abs(dpsi)), np.max(np.abs(dtheta)))
    if resid > 1e-8:
        raise ValueError(
            f"(psi_e, theta_e) is not an equilibrium at u = 0: "
            f"residual {resid:.3e}"
        )
    # reaction increment: f(psi, theta) - f(psi_e, theta_e) =
    #   r0*dpsi + pe1*dtheta + r1*w1 + r2*w2 + r3*w3 + pe2*w4 + pe3*w5
    # over the deviation auxiliaries, with r(theta) = c0 + c1 t + c2 t^2 + c3 t^3.
    r0 = c0 + theta_e * (c1 + theta_e * (c2 + theta_e * c3))
    r1 = c1 + theta_e * (2.0 * c2 + 3.0 * c3 * theta_e)
    r2 = c2 + 3.0 * c3 * theta_e
    r3 = c3
    pe1 = psi_e * r1
    pe2 = psi_e * r2
    pe3 = psi_e * r3
    D = cfg.damkohler
    BD = cfg.heat_release * cfg.damkohler
    grid = np.arange(n)
    PSI, TH = grid, n + grid
    W1, W2, W3, W4, W5 = (2 * n + grid, 3 * n + grid, 4 * n + grid,
                          5 * n + grid, 6 * n + grid)

    lpsi = _coo_concat([
        _coo_rows(fom.A_psi - D * np.diag(r0), 0),
        (grid, TH, -D * pe1),
        (grid, W1, -D * r1), (grid, W2, -D * r2), (grid, W3, -D * r3),
        (grid, W4, -D * pe2), (grid, W5, -D * pe3),
    ])
    lth = _coo_concat([
        _coo_rows(fom.A_theta, n),
        (grid, PSI, BD * r0), (grid, TH, BD * pe1),
        (grid, W1, BD * r1), (grid, W2, BD * r2), (grid, W3, BD * r3),
        (grid, W4, BD * pe2), (grid, W5, BD * pe3),
    ])
    channels = [(np.zeros(n), fom.b)]
    return _assemble_lifted(n, lpsi, lth, channels)


def lifted_initial_state(cfg: ReactorConfig, psi, theta):
    """Lift a FOM state into the 7n-dimensional coordinates."""
    return lift_state(lift_spec(cfg.n), np.concatenate([psi, theta]))
