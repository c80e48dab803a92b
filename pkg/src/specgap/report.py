"""Figure rendering for the CLI report path.

Every figure is written next to its delimited output with fixed metadata so
repeated runs produce identical bytes.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

_META = {"Software": "specgap"}


def _save(fig, path):
    fig.savefig(path, dpi=110, metadata=_META)
    plt.close(fig)
    return path


def spectrum_figure(path, bundle, disc_samples=None):
    """Band edges with gap shading, plus the discriminant trace if given."""
    fig, ax = plt.subplots(figsize=(7, 4))
    lams = bundle.lams
    if disc_samples is not None:
        ls, ds = disc_samples
        ax.plot(ls, ds, lw=1.0, color="tab:blue", label="discriminant")
        ax.axhline(2.0, color="gray", lw=0.6)
        ax.axhline(-2.0, color="gray", lw=0.6)
    for i in range(1, bundle.n_pairs + 1):
        a, b = bundle.gap(i)
        if b > a:
            ax.axvspan(a, b, color="tab:red", alpha=0.25)
    ax.plot(lams, np.zeros_like(lams), "k|", ms=18)
    ax.set_xlabel(r"$\lambda$")
    ax.set_title("periodic spectrum and gaps")
    if disc_samples is not None:
        ax.legend(loc="upper right")
    return _save(fig, path)


def gap_width_figure(path, bundle):
    fig, ax = plt.subplots(figsize=(5, 3.5))
    w = bundle.gap_widths()
    ax.semilogy(np.arange(1, len(w) + 1), np.maximum(w, 1e-16), "o-")
    ax.set_xlabel("gap index")
    ax.set_ylabel("width")
    ax.set_title("gap widths")
    return _save(fig, path)


def locus_figure(path, p, n_theta=181):
    """z = 0 slice of the Kerr loci: ring, horizons' equatorial traces."""
    from .kerr import kerr_loci
    info = kerr_loci(p)
    fig, ax = plt.subplots(figsize=(5, 5))
    th = np.linspace(0, 2 * np.pi, n_theta)
    x, y, _ = info["surfaces"]["U0"]["param"](th)
    ax.plot(x, y, label="U0 ring")
    for name in ("U1", "U2"):
        x, y, _ = info["surfaces"][name]["param"](th, np.zeros_like(th))
        ax.plot(x, y, label=name)
    ax.set_aspect("equal")
    ax.legend(loc="upper right", fontsize=8)
    ax.set_title("Kerr loci, z = 0 section")
    return _save(fig, path)


def period_matrix_figure(path, entries):
    """Im R entries along the transverse point list."""
    fig, ax = plt.subplots(figsize=(6, 4))
    xs = np.arange(len(entries))
    mmax = max(pm.m for _, _, pm, _ in entries) if entries else 0
    for i in range(mmax):
        vals = [pm.mat[i, i].imag if pm.m > i else np.nan
                for _, _, pm, _ in entries]
        ax.plot(xs, vals, "o-", label="Im R[%d,%d]" % (i, i))
    ax.set_xlabel("transverse point index")
    ax.set_title("period matrix diagonal over the transverse set")
    if mmax:
        ax.legend(fontsize=8)
    return _save(fig, path)


def trajectory_figure(path, traj):
    fig, ax = plt.subplots(figsize=(7, 3.5))
    ax.plot(traj.t, traj.u, lw=0.9, label="u(t)")
    if traj.envelope is not None:
        ax.plot(traj.envelope_t, traj.envelope, "r.-", ms=4, lw=0.7,
                label="envelope")
    ax.set_xlabel("t")
    ax.legend(fontsize=8)
    ax.set_title("collapse oscillator")
    return _save(fig, path)


def gap_evolution_figure(path, width_history):
    fig, ax = plt.subplots(figsize=(6, 4))
    W = np.asarray(width_history)
    for i in range(W.shape[1]):
        ax.semilogy(np.maximum(W[:, i], 1e-300), "o-", ms=3,
                    label="gap %d" % (i + 1))
    ax.set_xlabel("application count")
    ax.set_ylabel("gap width")
    ax.set_title("gap widths under the operator sequence")
    ax.legend(fontsize=8)
    return _save(fig, path)
