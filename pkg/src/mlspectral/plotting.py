"""Self-contained SVG plots of study output (800 x 600, fixed ids, no timestamp)."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

WIDTH, HEIGHT = 800, 600
PT = 72  # the SVG backend measures the canvas in points


def _figure():
    plt.rcParams["svg.hashsalt"] = "mlspectral"
    plt.rcParams["svg.fonttype"] = "path"
    return plt.figure(figsize=(WIDTH / PT, HEIGHT / PT), dpi=PT)


def _save(fig, path):
    fig.savefig(path, format="svg", dpi=PT, metadata={"Date": None})
    plt.close(fig)


def decay_plot(path, t, norms, predicted_slope, title=""):
    """Log-log norms with a reference line of the predicted slope through the last sample."""
    t = np.asarray(t, dtype=float)
    norms = np.asarray(norms, dtype=float)
    fig = _figure()
    ax = fig.add_subplot(1, 1, 1)
    ax.loglog(t, norms, "o-", ms=3, label="measured")
    ref = norms[-1] * (t / t[-1]) ** predicted_slope
    ax.loglog(t, ref, "--", label=f"slope {predicted_slope:.3g}")
    ax.set_xlabel("t")
    ax.set_ylabel("norm")
    ax.set_title(title)
    ax.legend()
    _save(fig, path)


def ratio_plot(path, t, ratio, title=""):
    t = np.asarray(t, dtype=float)
    ratio = np.asarray(ratio, dtype=float)
    fig = _figure()
    ax = fig.add_subplot(1, 1, 1)
    pos = ratio > 0
    ax.loglog(t[pos], ratio[pos], "o-", ms=3)
    ax.set_xlabel("t")
    ax.set_ylabel("lhs / rhs")
    ax.set_title(title)
    _save(fig, path)


def order_plot(path, mus, coarse, fine, title=""):
    mus = np.asarray(mus, dtype=float)
    fig = _figure()
    ax = fig.add_subplot(1, 1, 1)
    x = np.arange(mus.size)
    ax.semilogy(x, np.maximum(coarse, 1e-300), "o", label="coarse")
    ax.semilogy(x, np.maximum(fine, 1e-300), "s", label="fine")
    ax.set_xlabel("eigenvalue index")
    ax.set_ylabel("max residual")
    ax.set_title(title)
    ax.legend()
    _save(fig, path)
