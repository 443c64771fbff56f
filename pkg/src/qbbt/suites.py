"""Self-check suites shared by the CLI and the test suite.

Each suite returns a list of (name, passed, detail) rows: the dense-oracle
equivalence checks for the structured Gramian path, the sparse-versus-dense
tensor contraction checks, and the lifting equivalence checks.
"""

from __future__ import annotations

import numpy as np

from . import reactor
from .gramians import assemble, compute_truncated_gramians, dense_truncated_oracle
from .lifting import example2_system, lift_poly_scalar, lift_state
from .qbsys import StructuredQB, integrate_rk4, stabilize
from .tensor3 import SparseTensor3, pair_contract_mode1, pair_contract_mode2, project

__all__ = [
    "synthetic_structured",
    "oracle_suite",
    "contraction_suite",
    "lift_check_suite",
]

ORACLE_ALPHAS = (0.5, 1.0, 5.0, 20.0)


def synthetic_structured(n1=4, n2=6, seed=7, m=1, with_n22=True, nnz=8):
    """Seeded random structured QB system for oracle equivalence tests.

    Stable A11, sparse quadratic tensor confined to auxiliary rows, bilinear
    rows in the auxiliary block, and quadratic lift definitions chaining the
    auxiliaries through products of earlier coordinates.
    """
    rng = np.random.default_rng(seed)
    N = n1 + n2
    A11 = rng.uniform(-1.0, 1.0, (n1, n1)) - (n1 + 1.0) * np.eye(n1)
    A12 = rng.uniform(-1.0, 1.0, (n1, n2))
    rows = rng.integers(n1, N, nnz)
    js = rng.integers(0, N, nnz)
    ks = rng.integers(0, N, nnz)
    vals = rng.uniform(-1.0, 1.0, nnz)
    H = SparseTensor3(N, rows, js, ks, vals).symmetrize()
    N_ops = []
    for _ in range(m):
        Nk = np.zeros((N, N))
        Nk[n1:, :n1] = rng.uniform(-1.0, 1.0, (n2, n1))
        if with_n22:
            Nk[n1:, n1:] = rng.uniform(-1.0, 1.0, (n2, n2))
        N_ops.append(Nk)
    B1 = rng.uniform(-1.0, 1.0, (n1, m))
    C1 = rng.uniform(-1.0, 1.0, (1, n1))
    defs = []
    for g in range(n1, N):
        p = int(rng.integers(0, g))
        q = int(rng.integers(0, g))
        defs.append((g, p, q))
    return StructuredQB(n1=n1, A11=A11, A12=A12, H=H, N_ops=N_ops,
                        B1=B1, C1=C1, lift_defs=defs)


def _rel_fro(X, Y):
    denom = max(np.linalg.norm(Y), 1e-300)
    return np.linalg.norm(X - Y) / denom


def _oracle_rows(label, structured, alphas, tol):
    rows = []
    for alpha in alphas:
        stab = stabilize(structured, alpha)
        P_T, Q_T = assemble(compute_truncated_gramians(stab))
        P_ref, Q_ref = dense_truncated_oracle(stab.as_qbsystem())
        err = max(_rel_fro(P_T, P_ref), _rel_fro(Q_T, Q_ref))
        rows.append((f"{label} alpha={alpha:g}", err <= tol,
                     f"rel Frobenius error {err:.3e} (tol {tol:g})"))
    return rows


def oracle_suite(alphas=ORACLE_ALPHAS, tol=1e-7):
    """Structured-versus-dense truncated-Gramian equivalence checks."""
    rows = _oracle_rows("synthetic n1=4 n2=6", synthetic_structured(), alphas, tol)
    cfg = reactor.ReactorConfig(n=5)
    structured = reactor.lift_reactor(reactor.assemble_fom(cfg), cfg)
    rows += _oracle_rows("reactor n=5", structured, alphas, tol)
    return rows


def contraction_suite(tol=1e-12):
    """Sparse contractions against literal dense-Kronecker evaluation, N <= 20."""
    rng = np.random.default_rng(42)
    rows = []
    for N, nnz in ((4, 6), (6, 10), (12, 30), (20, 60)):
        T1 = SparseTensor3(N, rng.integers(0, N, nnz), rng.integers(0, N, nnz),
                           rng.integers(0, N, nnz), rng.uniform(-1, 1, nnz))
        T2 = SparseTensor3(N, rng.integers(0, N, nnz), rng.integers(0, N, nnz),
                           rng.integers(0, N, nnz), rng.uniform(-1, 1, nnz))
        M1 = rng.standard_normal((N, N))
        M2 = rng.standard_normal((N, N))
        P = M1 @ M1.T + 0.1 * np.eye(N)
        Q = M2 @ M2.T + 0.1 * np.eye(N)
        for mode, sparse_fn in ((1, pair_contract_mode1),
                                (2, pair_contract_mode2)):
            G = sparse_fn(T1, T2, P, Q)
            M_1 = T1.dense_mode1() if mode == 1 else T1.dense_mode2()
            M_2 = T2.dense_mode1() if mode == 1 else T2.dense_mode2()
            G_ref = M_1 @ np.kron(P, Q) @ M_2.T
            err = _rel_fro(G, G_ref)
            rows.append((f"pair_contract_mode{mode} N={N}", err <= tol,
                         f"rel error {err:.3e}"))
        r = 3
        W = rng.standard_normal((N, r))
        V = rng.standard_normal((N, r))
        Hhat = project(T1, W, V)
        ref = W.T @ T1.dense_mode1() @ np.kron(V, V)
        err = _rel_fro(Hhat, ref)
        rows.append((f"project N={N}", err <= tol, f"rel error {err:.3e}"))
        x = rng.standard_normal(N)
        y = rng.standard_normal(N)
        err = _rel_fro(T1.apply_quadratic(x, y),
                       T1.dense_mode1() @ np.kron(x, y))
        rows.append((f"apply_quadratic N={N}", err <= tol, f"rel error {err:.3e}"))
    return rows


def _rel_max(y, y_ref):
    scale = max(np.max(np.abs(y_ref)), 1e-300)
    return float(np.max(np.abs(y - y_ref)) / scale)


def _scalar_ode_reference(f_scalar, x0, t_end, dt, sample_every):
    times, states = integrate_rk4(
        lambda t, x: np.array([f_scalar(t, x[0])]), np.array([x0]),
        t_end, dt, sample_every,
    )
    return times, states[0]


def lift_check_suite(n=50, t_end=5.0, dt=1e-4, tol=1e-6):
    """Lifted simulations against direct nonlinear integration."""
    rows = []

    a3, b = -1.0, 1.0
    sys1, spec1 = lift_poly_scalar((0.0, 0.0, a3), b)
    u = np.cos
    x0 = 0.1
    traj = sys1.simulate(lambda t: [u(t)], lift_state(spec1, [x0]), t_end, dt=dt)
    _, x_ref = _scalar_ode_reference(
        lambda t, x: a3 * x**3 + b * u(t), x0, t_end, dt, 0.01)
    err = _rel_max(traj.states[0], x_ref)
    rows.append(("cubic scalar ODE (forced)", err <= tol, f"rel error {err:.3e}"))

    a = -1.0
    sys2, spec2 = example2_system(a, b)
    x0 = 0.2
    traj = sys2.simulate(lambda t: [u(t)], lift_state(spec2, [x0]), t_end, dt=dt)
    _, x_ref = _scalar_ode_reference(
        lambda t, x: a * x + np.exp(-x) + b * u(t), x0, t_end, dt, 0.01)
    err = _rel_max(traj.states[0], x_ref)
    rows.append(("exponential scalar ODE (forced)", err <= tol,
                 f"rel error {err:.3e}"))

    cfg = reactor.ReactorConfig(n=n)
    fom = reactor.assemble_fom(cfg)
    psi, theta = reactor.steady_state(cfg, 0.5, fom=fom)
    s_grid = np.arange(1, n + 1) / (n + 1)
    theta = theta + 0.05 * np.sin(np.pi * s_grid)
    fom_traj = reactor.simulate_fom(fom, cfg, lambda t: 0.5,
                                    np.concatenate([psi, theta]), t_end, dt=dt)
    structured = reactor.lift_reactor(fom, cfg)
    lifted = structured.as_qbsystem()
    x0_lift = reactor.lifted_initial_state(cfg, psi, theta)
    lift_traj = lifted.simulate(lambda t: [1.0, 0.5], x0_lift, t_end, dt=dt)
    err = _rel_max(lift_traj.outputs[0], fom_traj.outputs[0])
    rows.append((f"reactor n={n} (u=0.5, perturbed steady start)", err <= tol,
                 f"rel output error {err:.3e}"))
    return rows
