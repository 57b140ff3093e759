"""Matplotlib figures rendered next to the delimited outputs.

Every report-producing CLI stage writes its numbers as CSV/JSON and a
matching figure file, so a run directory is readable without further
tooling.
"""

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt


def save_curve_figure(path, xs, ys, xlabel: str, ylabel: str, title: str = ""):
    fig, ax = plt.subplots(figsize=(5.0, 3.4), dpi=120)
    ax.plot(xs, ys, lw=1.5, color="tab:blue")
    ax.axvline(0.0, color="gray", lw=0.6, alpha=0.6)
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    if title:
        ax.set_title(title, fontsize=10)
    ax.grid(alpha=0.3, lw=0.4)
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)


def save_loss_figure(path, rows, title: str = "training loss"):
    """rows: (iteration, total, ce, mae)."""
    its = [r[0] for r in rows]
    fig, ax = plt.subplots(figsize=(5.0, 3.4), dpi=120)
    ax.plot(its, [r[1] for r in rows], lw=0.8, label="total", color="tab:blue")
    ax.plot(its, [r[2] for r in rows], lw=0.8, label="classification", color="tab:orange")
    ax.plot(its, [r[3] for r in rows], lw=0.8, label="magnitude", color="tab:green")
    ax.set_xlabel("iteration")
    ax.set_ylabel("loss")
    ax.set_title(title, fontsize=10)
    ax.legend(fontsize=8)
    ax.grid(alpha=0.3, lw=0.4)
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)


def save_bar_figure(path, values, xlabel: str, ylabel: str, title: str = ""):
    fig, ax = plt.subplots(figsize=(5.0, 3.4), dpi=120)
    ax.bar(range(len(values)), values, color="tab:blue")
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    if title:
        ax.set_title(title, fontsize=10)
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)


def save_heatmap_figure(path, heatmap, title: str = "per-pixel mean squared difference"):
    fig, ax = plt.subplots(figsize=(4.4, 3.8), dpi=120)
    im = ax.imshow(heatmap, cmap="magma")
    fig.colorbar(im, ax=ax, shrink=0.85)
    ax.set_title(title, fontsize=10)
    ax.set_xticks([])
    ax.set_yticks([])
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)


def save_trace_figure(path, trace, title: str = "latent reproduction"):
    """trace rows: (step, train_loss, eval_residual)."""
    steps = [r[0] for r in trace]
    fig, ax = plt.subplots(figsize=(5.0, 3.4), dpi=120)
    ax.plot(steps, [r[2] for r in trace], lw=1.2, color="tab:red", label="held-out residual")
    ax.set_xlabel("step")
    ax.set_ylabel("residual")
    ax.set_yscale("log")
    ax.set_title(title, fontsize=10)
    ax.legend(fontsize=8)
    ax.grid(alpha=0.3, lw=0.4)
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)
