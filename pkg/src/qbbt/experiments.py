"""Benchmark harness comparing balanced-truncation and POD-DEIM reactor ROMs.

Four standard test cases vary the test input, training input, training
initial condition, and snapshot noise.  Every random draw flows from the
case seed, and all file outputs are formatted deterministically so repeated
runs with identical settings are byte-identical.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass, field, replace

import numpy as np

from . import poddeim, reactor
from .balancing import balance_factors, _cut, operating_point_rom
from .gramians import assemble, compute_truncated_gramians
from .linalg import numerical_abscissa, spectral_abscissa
from .qbsys import SimulationDiverged, stabilize

__all__ = [
    "CaseSpec",
    "CaseResult",
    "output_error",
    "run_case",
    "write_case_outputs",
]

_FLOAT_FMT = "%.17e"


def u_from_descriptor(desc):
    """Input signal from a short descriptor string.

    Supported: "cos" (cos t), "const:<value>", and "osc-decay"
    (0.5 * (1 + t^2 exp(-t/4) sin 6t)).
    """
    if desc == "cos":
        return math.cos
    if desc == "osc-decay":
        return lambda t: 0.5 * (1.0 + t * t * math.exp(-t / 4.0) * math.sin(6.0 * t))
    if desc.startswith("const:"):
        value = float(desc.split(":", 1)[1])
        return lambda t: value
    raise ValueError(f"unknown input descriptor: {desc}")


@dataclass
class CaseSpec:
    """One benchmark case: inputs, training regime, noise, and ROM sizes."""

    case_id: int
    u_test: str
    u_train: str
    x0_train: str = "steady"
    noise_level: float = 0.0
    t_train: float = 15.0
    t_f: float = 30.0
    r_list: list = field(default_factory=lambda: list(range(4, 21, 2)))
    alpha: float = 20.0
    seed: int = 0

    def __post_init__(self):
        if self.t_train > self.t_f:
            raise ValueError("t_train must not exceed t_f")
        if sorted(self.r_list) != list(self.r_list):
            raise ValueError("r_list must be ascending")

    @classmethod
    def standard(cls, case_id, **overrides):
        """The four standard cases.

        1: test = train = cos t.  2: same with 10% multiplicative snapshot
        noise.  3: damped oscillation around 0.5 tested against constant-0.5
        training.  4: cos t tested against constant-0.5 training from the
        cold initial condition psi = 0, theta = 1.
        """
        base = {
            1: dict(u_test="cos", u_train="cos"),
            2: dict(u_test="cos", u_train="cos", noise_level=0.1),
            3: dict(u_test="osc-decay", u_train="const:0.5"),
            4: dict(u_test="cos", u_train="const:0.5", x0_train="zero-one"),
        }
        if case_id not in base:
            raise ValueError(f"unknown case id {case_id}; expected 1..4")
        kwargs = dict(base[case_id])
        kwargs.update(overrides)
        return cls(case_id=case_id, **kwargs)


@dataclass
class CaseResult:
    spec: CaseSpec
    rows: list                 # (method, r, error, status)
    times: np.ndarray          # sample times
    y_fom: np.ndarray
    y_qbbt: dict               # r -> series
    y_pod: dict                # r -> series
    sigma: np.ndarray
    diagnostics: dict
    manifest: dict

    @property
    def failed(self):
        return any(status != "ok" for _, _, _, status in self.rows)


def output_error(y_fom, y_rom, times_fom=None, times_rom=None):
    """Sum of absolute output differences over a shared sample grid."""
    y_fom = np.asarray(y_fom, dtype=float).ravel()
    y_rom = np.asarray(y_rom, dtype=float).ravel()
    if y_fom.shape != y_rom.shape:
        raise ValueError(
            f"sample grids differ: {y_fom.shape} vs {y_rom.shape}"
        )
    if times_fom is not None and times_rom is not None \
            and not np.array_equal(times_fom, times_rom):
        raise ValueError("sample time grids differ")
    return float(np.sum(np.abs(y_fom - y_rom)))


def _resolve_x0_train(desc, cfg, steady):
    n = cfg.n
    if desc == "steady":
        return steady.copy()
    if desc == "zero-one":
        return np.concatenate([np.zeros(n), np.ones(n)])
    raise ValueError(f"unknown training initial condition: {desc}")


def run_case(spec: CaseSpec, cfg: reactor.ReactorConfig, dt=1e-4,
             sample_dt=0.01) -> CaseResult:
    """Build everything once, then sweep the requested ROM sizes.

    The test initial condition is the resting state (the equilibrium at
    zero control input).  The balanced ROMs are simulated as deviations
    about that equilibrium: the lifted resting state is not representable
    in a small balanced subspace, but the deviation from it is, and the
    anchoring keeps the ROM's steady output exact.  Stage failures
    (divergence, rank problems) mark the affected rows as failed and the
    sweep continues.
    """
    fom = reactor.assemble_fom(cfg)
    psi_ss, theta_ss = reactor.steady_state(cfg, 0.0, fom=fom)
    x0 = np.concatenate([psi_ss, theta_ss])
    u_test = u_from_descriptor(spec.u_test)
    u_train = u_from_descriptor(spec.u_train)

    fom_traj = reactor.simulate_fom(fom, cfg, u_test, x0, spec.t_f,
                                    dt=dt, sample_every=sample_dt)
    times = fom_traj.times
    y_fom = fom_traj.outputs[0]

    rows = []
    y_qbbt, y_pod = {}, {}
    diagnostics = {}
    sigma_full = np.array([])

    # Balanced-truncation pipeline (training-free).
    qbbt_stage = None
    try:
        structured = reactor.lift_reactor(fom, cfg)
        stab = stabilize(structured, spec.alpha)
        diagnostics["numerical_abscissa"] = numerical_abscissa(stab.A_alpha)
        diagnostics["spectral_abscissa"] = spectral_abscissa(stab.A_alpha)
        tg = compute_truncated_gramians(stab)
        P_T, Q_T = assemble(tg)
        factors = balance_factors(P_T, Q_T)
        sigma_full = factors[3]
        x_e = reactor.lifted_initial_state(cfg, psi_ss, theta_ss)
    except Exception as exc:  # noqa: BLE001 - report the stage, keep running
        qbbt_stage = f"failed:gramians ({type(exc).__name__}: {exc})"

    for r in spec.r_list:
        if qbbt_stage is not None:
            rows.append(("qb-bt", r, math.inf, qbbt_stage))
            continue
        try:
            V, W, sigma = _cut(*factors, r)
            bundle, y_offset = operating_point_rom(stab, V, W, x_e,
                                                   sigma=sigma)
            traj = bundle.rom.simulate(
                lambda t: np.array([1.0, u_test(t)]), np.zeros(r), spec.t_f,
                dt=dt, sample_every=sample_dt,
            )
            y = y_offset[0] + traj.outputs[0]
            y_qbbt[r] = y
            rows.append(("qb-bt", r, output_error(y_fom[1:], y[1:]), "ok"))
        except SimulationDiverged as exc:
            rows.append(("qb-bt", r, math.inf, f"failed:simulate ({exc})"))
        except Exception as exc:  # noqa: BLE001
            rows.append(("qb-bt", r, math.inf,
                         f"failed:balance ({type(exc).__name__}: {exc})"))

    # POD-DEIM pipeline (training-dependent).
    pod_stage = None
    try:
        x0_train = _resolve_x0_train(spec.x0_train, cfg, x0)
        snaps = poddeim.collect_snapshots(
            fom, cfg, u_train, x0_train, spec.t_train, dt=dt,
            snapshot_dt=sample_dt,
            meta={"u_train": spec.u_train, "x0_train": spec.x0_train,
                  "noise_seed": spec.seed},
        )
        X = snaps.X
        if spec.noise_level > 0.0:
            X = poddeim.add_noise(X, level=spec.noise_level, seed=spec.seed)
        F = poddeim.reaction_values(cfg, X)
        diagnostics["snapshot_count"] = X.shape[1]
    except Exception as exc:  # noqa: BLE001
        pod_stage = f"failed:training ({type(exc).__name__}: {exc})"

    for r in spec.r_list:
        if pod_stage is not None:
            rows.append(("pod-deim", r, math.inf, pod_stage))
            continue
        try:
            V = poddeim.pod_basis(X, r)
            U_f = poddeim.pod_basis(F, r)
            points = poddeim.qdeim_points(U_f)
            rom = poddeim.build_pod_deim_rom(fom, cfg, V, U_f, points)
            traj = rom.simulate(u_test, rom.project_state(x0), spec.t_f,
                                dt=dt, sample_every=sample_dt)
            y = traj.outputs[0]
            y_pod[r] = y
            rows.append(("pod-deim", r, output_error(y_fom[1:], y[1:]), "ok"))
        except SimulationDiverged as exc:
            rows.append(("pod-deim", r, math.inf, f"failed:simulate ({exc})"))
        except Exception as exc:  # noqa: BLE001
            rows.append(("pod-deim", r, math.inf,
                         f"failed:build ({type(exc).__name__}: {exc})"))

    coeffs = cfg.coefficient_vectors()
    manifest = {
        "case": spec.case_id,
        "n": cfg.n,
        "alpha": spec.alpha,
        "seed": spec.seed,
        "dt": dt,
        "sample_dt": sample_dt,
        "t_f": spec.t_f,
        "t_train": spec.t_train,
        "r_list": ",".join(str(r) for r in spec.r_list),
        "u_test": spec.u_test,
        "u_train": spec.u_train,
        "x0": "steady(u=0)",
        "x0_train": spec.x0_train,
        "noise_level": spec.noise_level,
        "damkohler": cfg.damkohler,
        "peclet": cfg.peclet,
        "heat_release": cfg.heat_release,
        "beta": cfg.beta,
        "gamma": cfg.gamma,
        "theta_ref": cfg.theta_ref,
        "c0": coeffs[0][0],
        "c1": coeffs[1][0],
        "c2": coeffs[2][0],
        "c3": coeffs[3][0],
    }
    return CaseResult(spec=spec, rows=rows, times=times, y_fom=y_fom,
                      y_qbbt=y_qbbt, y_pod=y_pod, sigma=sigma_full,
                      diagnostics=diagnostics, manifest=manifest)


def write_case_outputs(result: CaseResult, out_dir, make_plots=True):
    """Write errors.csv, per-size output series, diagnostics, the manifest,
    and (by default) rendered figures next to the delimited files."""
    os.makedirs(out_dir, exist_ok=True)
    case = result.spec.case_id

    with open(os.path.join(out_dir, "errors.csv"), "w") as fh:
        fh.write("method,r,error\n")
        for method, r, error, status in result.rows:
            tag = f"{error:.17e}" if status == "ok" else status
            fh.write(f"{method},{r},{tag}\n")

    for r in result.spec.r_list:
        path = os.path.join(out_dir, f"outputs_{case}_{r}.csv")
        yq = result.y_qbbt.get(r)
        yp = result.y_pod.get(r)
        with open(path, "w") as fh:
            fh.write("t,y_fom,y_qbbt,y_pod\n")
            for idx, t in enumerate(result.times):
                q = f"{yq[idx]:.17e}" if yq is not None else "nan"
                p = f"{yp[idx]:.17e}" if yp is not None else "nan"
                fh.write(f"{t:.6f},{result.y_fom[idx]:.17e},{q},{p}\n")

    with open(os.path.join(out_dir, "diag.csv"), "w") as fh:
        fh.write("kind,key,value\n")
        for idx, s in enumerate(result.sigma):
            fh.write(f"sigma,{idx + 1},{s:.17e}\n")
        for key in sorted(result.diagnostics):
            fh.write(f"alpha,{key},{result.diagnostics[key]:.17e}\n")

    with open(os.path.join(out_dir, "manifest.txt"), "w") as fh:
        for key, val in result.manifest.items():
            fh.write(f"{key}={val}\n")

    if make_plots:
        from . import report

        report.render_case_figures(result, out_dir)
