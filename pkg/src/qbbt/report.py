"""Figure rendering for the benchmark reports.

Each CLI report directory gets PNG figures next to the CSV files: output
comparisons, the error-versus-size table, the retained singular values, and
(for parameter sweeps) the stability indicators.
"""

from __future__ import annotations

import math
import os

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402

__all__ = [
    "save_output_comparison",
    "save_error_plot",
    "save_singular_values",
    "save_alpha_sweep",
    "render_case_figures",
]

_STYLES = {"fom": dict(color="k", lw=1.6),
           "qb-bt": dict(color="tab:red", lw=1.1, ls="--"),
           "pod-deim": dict(color="tab:blue", lw=1.1, ls=":")}


def save_output_comparison(times, series, path, title=""):
    """Overlay output time series; series maps label -> 1-D array."""
    fig, ax = plt.subplots(figsize=(6.0, 3.6))
    for label, y in series.items():
        ax.plot(times, y, label=label, **_STYLES.get(label, dict(lw=1.0)))
    ax.set_xlabel("t")
    ax.set_ylabel("y(t)")
    if title:
        ax.set_title(title)
    ax.legend(frameon=False)
    ax.grid(alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def save_error_plot(rows, path, title=""):
    """Error versus reduced order, one line per method; failed rows skipped."""
    by_method = {}
    for method, r, error, status in rows:
        if status == "ok" and math.isfinite(error):
            by_method.setdefault(method, []).append((r, error))
    fig, ax = plt.subplots(figsize=(6.0, 3.6))
    for method, pts in sorted(by_method.items()):
        pts.sort()
        ax.semilogy([r for r, _ in pts], [e for _, e in pts],
                    marker="o", ms=4, label=method,
                    color=_STYLES.get(method, {}).get("color"))
    ax.set_xlabel("reduced order r")
    ax.set_ylabel("output error")
    if title:
        ax.set_title(title)
    ax.legend(frameon=False)
    ax.grid(alpha=0.3, which="both")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def save_singular_values(sigma, path, title=""):
    fig, ax = plt.subplots(figsize=(5.0, 3.4))
    ax.semilogy(range(1, len(sigma) + 1), sigma, marker=".", ms=4, lw=0.8,
                color="tab:purple")
    ax.set_xlabel("index")
    ax.set_ylabel("singular value")
    if title:
        ax.set_title(title)
    ax.grid(alpha=0.3, which="both")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def save_alpha_sweep(diags, path):
    """Abscissa indicators over the stabilization-parameter candidates."""
    alphas = [d.alpha for d in diags]
    fig, ax = plt.subplots(figsize=(6.0, 3.6))
    ax.plot(alphas, [d.numerical_abscissa for d in diags], marker="o", ms=4,
            label="numerical abscissa")
    ax.plot(alphas, [d.spectral_abscissa for d in diags], marker="s", ms=4,
            label="spectral abscissa")
    ax.axhline(0.0, color="k", lw=0.8)
    ax.set_xlabel("alpha")
    ax.set_ylabel("abscissa")
    ax.set_xscale("log")
    ax.legend(frameon=False)
    ax.grid(alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def render_case_figures(result, out_dir):
    """Standard figure set for one benchmark case."""
    case = result.spec.case_id
    save_error_plot(result.rows, os.path.join(out_dir, f"errors_{case}.png"),
                    title=f"Case {case}: output error")
    if len(result.sigma):
        save_singular_values(
            result.sigma[:max(result.spec.r_list) * 3],
            os.path.join(out_dir, f"sigma_{case}.png"),
            title=f"Case {case}: balancing singular values",
        )
    plotted = [r for r in result.spec.r_list
               if r in result.y_qbbt or r in result.y_pod]
    if plotted:
        r = plotted[-1]
        series = {"fom": result.y_fom}
        if r in result.y_qbbt:
            series["qb-bt"] = result.y_qbbt[r]
        if r in result.y_pod:
            series["pod-deim"] = result.y_pod[r]
        save_output_comparison(
            result.times, series,
            os.path.join(out_dir, f"outputs_{case}_{r}.png"),
            title=f"Case {case}, r = {r}",
        )
