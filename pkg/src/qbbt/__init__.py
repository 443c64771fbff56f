"""Balanced truncation for lifted quadratic-bilinear systems.

Lifts nonlinear ODE systems to quadratic-bilinear form, computes
block-structured truncated Gramians with artificial stabilization, produces
balanced reduced-order models, and benchmarks them against a POD-DEIM
baseline on a tubular-reactor model.
"""

from .balancing import (RomBundle, balance, linear_balance, project_rom,
                        reduce_structured, select_alpha)
from .gramians import (LinearGramians, TruncatedGramians, assemble,
                       compute_truncated_gramians, dense_truncated_oracle,
                       linear_gramians)
from .lifting import (LiftSpec, consistency_residual, example2_system,
                      lift_poly_scalar, lift_state)
from .linalg import (numerical_abscissa, psd_factor, solve_lyapunov,
                     spectral_abscissa, svd_truncate)
from .qbsys import (QBSystem, StabilizedQB, StructuredQB, Trajectory,
                    partition, stabilize)
from .reactor import (ReactorConfig, ReactorFOM, assemble_fom, lift_reactor,
                      lift_reactor_deviation, simulate_fom, steady_state,
                      taylor_arrhenius)
from .tensor3 import SparseTensor3

__version__ = "0.1.0"

__all__ = [
    "QBSystem", "StabilizedQB", "StructuredQB", "Trajectory",
    "SparseTensor3", "LiftSpec", "LinearGramians", "TruncatedGramians",
    "RomBundle", "ReactorConfig", "ReactorFOM",
    "partition", "stabilize", "lift_poly_scalar", "example2_system",
    "lift_state", "consistency_residual", "linear_gramians",
    "compute_truncated_gramians", "assemble", "dense_truncated_oracle",
    "balance", "linear_balance", "project_rom", "reduce_structured",
    "select_alpha", "assemble_fom", "lift_reactor", "lift_reactor_deviation",
    "simulate_fom", "steady_state", "taylor_arrhenius", "solve_lyapunov",
    "psd_factor", "svd_truncate", "spectral_abscissa", "numerical_abscissa",
]
