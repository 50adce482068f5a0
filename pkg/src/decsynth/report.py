"""Figure rendering for synthesis traces and benchmark summaries.

Plots are written straight to files (Agg backend) so the CLI can drop
them next to its CSV outputs.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402


def plot_residual_trace(history, path, tol=None):
    """Semilog plot of primal/dual residuals per iteration.

    ``history`` is a sequence of (primal, dual, objective) tuples.
    """
    its = range(1, len(history) + 1)
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.semilogy(its, [h[0] for h in history], label="primal residual")
    ax.semilogy(its, [h[1] for h in history], label="dual residual")
    if tol is not None:
        ax.axhline(tol, color="gray", linestyle=":", label="tolerance")
    ax.set_xlabel("iteration")
    ax.set_ylabel("residual norm")
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path


def plot_iteration_histogram(iterations, path, bin_width=25):
    """Histogram of per-instance ADMM iteration counts."""
    top = max(iterations, default=0)
    bins = range(0, top + bin_width + 1, bin_width)
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.hist(list(iterations), bins=list(bins), edgecolor="black")
    ax.set_xlabel("iterations to convergence")
    ax.set_ylabel("instances")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path


def plot_objective_trace(history, path, reference=None):
    """Objective value per iteration, optionally against a reference line."""
    its = range(1, len(history) + 1)
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.plot(its, [h[2] for h in history], label="consensus objective")
    if reference is not None:
        ax.axhline(reference, color="gray", linestyle=":", label="one-shot optimum")
    ax.set_xlabel("iteration")
    ax.set_ylabel("objective")
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path
