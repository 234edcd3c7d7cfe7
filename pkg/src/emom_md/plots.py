"""Figure rendering for the CLI report path.

Each report CSV gets a companion PNG.  Figures are rendered with the Agg
backend and saved to files; nothing is shown interactively.
"""
from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402


def _new_axes(xlabel, ylabel, title=None):
    fig, ax = plt.subplots(figsize=(5.2, 3.6), constrained_layout=True)
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    if title:
        ax.set_title(title)
    return fig, ax


def _save(fig, outfile):
    fig.savefig(outfile, dpi=150)
    plt.close(fig)
    return outfile


def save_concentration_plot(path, outfile, label=None):
    fig, ax = _new_axes("process time", "solute concentration", label)
    ax.plot(path.times, path.c1, label="component 1")
    ax.plot(path.times, path.c2, label="component 2", linestyle="--")
    ax.legend(frameon=False)
    return _save(fig, outfile)


def save_convergence_plot(n_times, errors, slope, outfile):
    fig, ax = _new_axes("time points", "max concentration error")
    ax.loglog(n_times, errors, "o-", label="measured")
    anchor = errors[0] * (np.asarray(n_times, float) / n_times[0]) ** slope
    ax.loglog(n_times, anchor, "k:", label=f"slope {slope:.2f}")
    ax.legend(frameon=False)
    return _save(fig, outfile)


def save_comparison_plot(rows, outfile):
    """Two panels: L2 error against DoF and against runtime, per method."""
    fig, axes = plt.subplots(1, 2, figsize=(9.2, 3.6), constrained_layout=True)
    styles = {"emom": ("o-", "tab:blue"), "fvm": ("s-", "tab:orange")}
    for method in ("emom", "fvm"):
        sub = [r for r in rows if r.method == method]
        if not sub:
            continue
        marker, color = styles[method]
        axes[0].loglog([r.dof for r in sub],
                       [r.norms.l2_max for r in sub],
                       marker, color=color, label=method)
        axes[1].loglog([r.runtime_s for r in sub],
                       [r.norms.l2_max for r in sub],
                       marker, color=color, label=method)
    axes[0].set_xlabel("degrees of freedom")
    axes[1].set_xlabel("runtime [s]")
    for ax in axes:
        ax.set_ylabel("L2 concentration error")
        ax.legend(frameon=False)
    return _save(fig, outfile)


def save_psd_plot(snapshot, outfile):
    fig, ax = _new_axes("radius", "component-1 fraction",
                        f"number density at t = {snapshot.time:g}")
    if snapshot.grid_shape is not None:
        n1, n2 = snapshot.grid_shape
        z = snapshot.values.reshape(n1, n2)
        mesh = ax.pcolormesh(snapshot.x1.reshape(n1, n2),
                             snapshot.x2.reshape(n1, n2), z, shading="auto")
    else:
        mesh = ax.scatter(snapshot.x1, snapshot.x2,
                          c=snapshot.values, s=4)
    fig.colorbar(mesh, ax=ax, label="q")
    return _save(fig, outfile)


def save_radial_plot(profiles, outfile):
    """One or several (label, RadialProfile) pairs on shared axes."""
    fig, ax = _new_axes("radial position", "component-1 fraction")
    for label, prof in profiles:
        ax.plot(prof.radii, prof.fractions, label=label)
    ax.set_ylim(-0.05, 1.05)
    ax.legend(frameon=False)
    return _save(fig, outfile)
