"""Figure rendering for the report paths.

Figures are written next to the delimited outputs; the CSV/JSON remain
the canonical data contract and any external tool can re-render them.
Rendering is headless (Agg backend) and file-based only.
"""

from __future__ import annotations

import os

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402


def _finite_pairs(steps, values):
    xs, ys = [], []
    for s, v in zip(steps, values):
        if v is not None and np.isfinite(v):
            xs.append(s)
            ys.append(v)
    return xs, ys


def render_train_curves(rows, pearson_upper, pearson_lower, path):
    """Risk and bound trajectories (log2 scale) with the local Pearson
    correlations on a twin axis."""
    steps = [r.step for r in rows]
    fig, ax = plt.subplots(figsize=(8.0, 4.5))
    ax.plot(*_finite_pairs(steps, [r.log2_risk for r in rows]),
            color="tab:blue", lw=1.2, label="log2 risk surrogate")
    ax.plot(*_finite_pairs(steps, [r.log2_upper for r in rows]),
            color="tab:green", lw=1.0, label="log2 upper bound")
    ax.plot(*_finite_pairs(steps, [r.log2_lower for r in rows]),
            color="tab:purple", lw=1.0, label="log2 lower bound")
    ax.set_xlabel("step")
    ax.set_ylabel("log2 value")
    ax.legend(loc="lower left", fontsize=8)

    ax2 = ax.twinx()
    ax2.plot(*_finite_pairs(steps, pearson_upper), color="tab:red", lw=1.0,
             alpha=0.8, label="pearson(risk, upper)")
    ax2.plot(*_finite_pairs(steps, pearson_lower), color="tab:orange", lw=1.0,
             alpha=0.8, label="pearson(risk, lower)")
    ax2.set_ylim(-1.05, 1.05)
    ax2.set_ylabel("local Pearson correlation")
    ax2.legend(loc="lower right", fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def render_train_indicators(rows, path):
    """Gradient energy and extreme structure-matrix eigenvalues."""
    steps = [r.step for r in rows]
    fig, (ax1, ax2) = plt.subplots(2, 1, figsize=(8.0, 5.5), sharex=True)
    xs, ys = _finite_pairs(steps, [r.grad_energy for r in rows])
    ax1.plot(xs, ys, color="tab:blue", lw=1.0)
    ax1.set_yscale("log")
    ax1.set_ylabel("gradient energy")
    ax2.plot(*_finite_pairs(steps, [r.lambda_min for r in rows]),
             color="tab:purple", lw=1.0, label="lambda_min")
    ax2.plot(*_finite_pairs(steps, [r.lambda_max for r in rows]),
             color="tab:green", lw=1.0, label="lambda_max")
    ax2.set_yscale("log")
    ax2.set_xlabel("step")
    ax2.set_ylabel("structure-matrix eigenvalues")
    ax2.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def render_bound_curve(report, path):
    """Concentration bound over the epsilon grid with the observed
    exceedance frequencies."""
    eps = np.asarray(report.eps_grid)
    bound = np.asarray(report.bound_values)
    freq = np.asarray(report.empirical_exceedance)
    fig, ax = plt.subplots(figsize=(7.0, 4.2))
    ax.plot(eps, np.minimum(bound, 1.0), color="tab:green", marker="o",
            lw=1.2, label="probability bound (capped at 1)")
    ax.plot(eps, freq, color="tab:blue", marker="s", lw=1.2,
            label="empirical exceedance")
    ax.axvline(report.valid_from, color="tab:red", ls="--", lw=1.0,
               label="validity threshold")
    floor = 0.5 / max(report.trials, 1)
    ax.set_yscale("symlog", linthresh=floor)
    ax.set_xlabel("epsilon")
    ax.set_ylabel("probability")
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
