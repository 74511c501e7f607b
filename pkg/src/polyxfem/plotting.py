"""Report figures (matplotlib, Agg backend)."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402
from matplotlib.collections import PolyCollection  # noqa: E402

golden_mean = (np.sqrt(5) - 1.0) / 2.0
fig_width = 4.5

params = {
    "axes.labelsize": 9,
    "font.size": 8,
    "legend.fontsize": 8,
    "xtick.labelsize": 8,
    "ytick.labelsize": 8,
    "lines.linewidth": 1.2,
    "lines.markersize": 3,
    "figure.dpi": 150,
    "savefig.bbox": "tight",
}


def _fig(aspect=golden_mean):
    plt.rcParams.update(params)
    return plt.subplots(figsize=(fig_width, fig_width * aspect))


def plot_mesh(path, mesh, crack=None, title=None):
    fig, ax = _fig(1.0)
    polys = [mesh.nodes[r] for r in mesh.elements]
    ax.add_collection(PolyCollection(polys, facecolors="none", edgecolors="k", linewidths=0.3))
    if crack is not None:
        v = np.asarray(crack.vertices)
        ax.plot(v[:, 0], v[:, 1], "r-", lw=1.5)
    ax.autoscale_view()
    ax.set_aspect("equal")
    ax.set_xlabel("x [mm]")
    ax.set_ylabel("y [mm]")
    ax.set_title(title or f"{mesh.n_elements} elements")
    fig.savefig(path)
    plt.close(fig)


def plot_field(path, points, rings, values, label="von Mises [Pa]", title=None):
    fig, ax = _fig(1.0)
    pc = PolyCollection([points[r] for r in rings], array=np.asarray(values), cmap="jet", edgecolors="none")
    ax.add_collection(pc)
    ax.autoscale_view()
    ax.set_aspect("equal")
    fig.colorbar(pc, ax=ax, label=label, shrink=0.8)
    ax.set_xlabel("x [mm]")
    ax.set_ylabel("y [mm]")
    if title:
        ax.set_title(title)
    fig.savefig(path)
    plt.close(fig)


def plot_curves(path, x, curves: dict, xlabel, ylabel, title=None, markers=True):
    fig, ax = _fig()
    for name, y in curves.items():
        ax.plot(x, y, "o-" if markers else "-", label=name)
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    if title:
        ax.set_title(title)
    ax.legend(frameon=False)
    ax.grid(alpha=0.3)
    fig.savefig(path)
    plt.close(fig)


def plot_patch_table(path, rows):
    """Patch-test errors vs element count (log-log)."""
    rows = np.asarray(rows, dtype=float)
    fig, ax = _fig()
    labels = ["L2, correction", "L2, no correction", "H1, correction", "H1, no correction"]
    for k, lab in enumerate(labels, 1):
        ax.loglog(rows[:, 0], rows[:, k], "o-", label=lab)
    ax.set_xlabel("number of elements")
    ax.set_ylabel("relative error")
    ax.legend(frameon=False)
    ax.grid(alpha=0.3, which="both")
    fig.savefig(path)
    plt.close(fig)


def plot_crack_faces(path, ref, upper, lower, title=None):
    """Undeformed crack line and the deformed upper and lower faces."""
    fig, ax = _fig()
    ax.plot(ref[:, 0], ref[:, 1], "k--", label="undeformed")
    ax.plot(upper[:, 0], upper[:, 1], "-", label="upper face")
    ax.plot(lower[:, 0], lower[:, 1], "-", label="lower face")
    ax.set_aspect("equal")
    ax.set_xlabel("x [mm]")
    ax.set_ylabel("y [mm]")
    if title:
        ax.set_title(title)
    ax.legend(frameon=False)
    fig.savefig(path)
    plt.close(fig)
