"""Matplotlib rendering of traces and reports to files.

Figures are additive: the delimited data files are the canonical outputs, and
each plot here is generated from exactly the series those files carry.  PNG
metadata is stripped so repeated runs are byte-identical.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

_SAVE_KW = {"dpi": 130, "metadata": {"Software": None}}


def _finish(fig, path):
    fig.tight_layout()
    fig.savefig(path, **_SAVE_KW)
    plt.close(fig)


def plot_multiplier_dynamics(traces: dict, path):
    """Multiplier trajectories per method, one panel per constraint."""
    m = max((t.lam.shape[1] for t in traces.values()), default=0)
    if m == 0:
        return
    fig, axes = plt.subplots(1, m, figsize=(4.2 * m, 3.2), squeeze=False)
    for i in range(m):
        ax = axes[0][i]
        for name, trace in traces.items():
            if trace.lam.shape[1] > i:
                ax.plot(trace.lam[:, i], label=name, lw=1.2)
        ax.set_xlabel("outer iteration")
        ax.set_ylabel(f"multiplier {i}")
        if i == 0:
            ax.legend(fontsize=8)
    _finish(fig, path)


def plot_slack_dynamics(traces: dict, path):
    """Constraint slack trajectories per method; feasible below the zero line."""
    m = max((t.slacks.shape[1] for t in traces.values()), default=0)
    if m == 0:
        return
    fig, axes = plt.subplots(1, m, figsize=(4.2 * m, 3.2), squeeze=False)
    for i in range(m):
        ax = axes[0][i]
        for name, trace in traces.items():
            if trace.slacks.shape[1] > i:
                ax.plot(trace.slacks[:, i], label=name, lw=1.2)
        ax.axhline(0.0, color="k", lw=0.8, ls="--")
        ax.set_xlabel("outer iteration")
        ax.set_ylabel(f"slack {i}")
        if i == 0:
            ax.legend(fontsize=8)
    _finish(fig, path)


def plot_metric_bars(metrics: dict, path):
    """Accuracy and per-transform flip-rate bars, one group per method."""
    methods = list(metrics.keys())
    flip_names = sorted(
        {name for m in metrics.values() for name in m.get("flip_rates", {})}
    )
    fig, (ax_acc, ax_flip) = plt.subplots(1, 2, figsize=(9.0, 3.4))
    xs = np.arange(len(methods))
    ax_acc.bar(xs, [metrics[m]["accuracy"] for m in methods], width=0.6)
    ax_acc.set_xticks(xs)
    ax_acc.set_xticklabels(methods, rotation=20, ha="right", fontsize=8)
    ax_acc.set_ylabel("held-out accuracy")
    ax_acc.set_ylim(0, 1)
    width = 0.8 / max(1, len(flip_names))
    for j, fname in enumerate(flip_names):
        vals = [metrics[m].get("flip_rates", {}).get(fname, 0.0) for m in methods]
        ax_flip.bar(xs + j * width, vals, width=width, label=fname)
    ax_flip.set_xticks(xs + 0.4 - width / 2)
    ax_flip.set_xticklabels(methods, rotation=20, ha="right", fontsize=8)
    ax_flip.set_ylabel("prediction flip rate")
    if flip_names:
        ax_flip.legend(fontsize=7)
    _finish(fig, path)


def plot_dual_surface(surface, inf_p: float, path):
    """Heatmap of the augmented dual over (multiplier, penalty) for m = 1,
    with the standard dual curve alongside."""
    if surface.lambda_grid.shape[1] != 1:
        return
    lams = surface.lambda_grid[:, 0]
    fig, (ax_map, ax_std) = plt.subplots(1, 2, figsize=(9.0, 3.4))
    mesh = ax_map.pcolormesh(
        lams, surface.alphas, surface.g_augmented.T, shading="nearest"
    )
    ax_map.set_yscale("log")
    ax_map.set_xlabel("multiplier")
    ax_map.set_ylabel("penalty level")
    fig.colorbar(mesh, ax=ax_map, label="dual value")
    ax_std.plot(lams, surface.g_standard, lw=1.2, label="standard dual")
    ax_std.plot(lams, surface.g_augmented.max(axis=1), lw=1.2, label="augmented (best penalty)")
    ax_std.axhline(inf_p, color="k", lw=0.8, ls="--", label="primal optimum")
    ax_std.set_xlabel("multiplier")
    ax_std.set_ylabel("dual value")
    ax_std.legend(fontsize=8)
    _finish(fig, path)


def plot_perturbation(ptable, lambda_bar, alpha_bar: float, path):
    """p(u) against its quadratic lower bound at the reported dual pair (m = 1)."""
    if ptable.u.shape[1] != 1:
        return
    finite = np.isfinite(ptable.values)
    u = ptable.u[finite, 0]
    p = ptable.values[finite]
    p0 = ptable.value_at_zero()
    lam = float(np.atleast_1d(lambda_bar)[0])
    bound = p0 - lam * u - 0.5 * alpha_bar * u * u
    fig, ax = plt.subplots(figsize=(4.8, 3.4))
    ax.plot(u, p, lw=1.4, label="perturbed optimum")
    ax.plot(u, bound, lw=1.0, ls="--", label="quadratic lower bound")
    ax.set_xlabel("constraint relaxation")
    ax.set_ylabel("optimal value")
    ax.legend(fontsize=8)
    _finish(fig, path)


def plot_harness_medians(report, path):
    """Median gaps versus sample size on log-log axes."""
    fig, ax = plt.subplots(figsize=(4.8, 3.4))
    ns = report.sample_sizes
    ax.loglog(ns, report.median_objective_gap, "o-", label="objective gap")
    if any(v > 0 for v in report.median_constraint_gap):
        ax.loglog(ns, report.median_constraint_gap, "s-", label="constraint gap")
    ax.set_xlabel("sample size")
    ax.set_ylabel("median absolute gap")
    ax.legend(fontsize=8)
    _finish(fig, path)
