"""Static PNG renderings of the CLI tables (matplotlib, Agg backend)."""

import os

import matplotlib
import numpy as np

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

_DPI = 120
# fixed metadata keeps repeated renders byte-identical
_PNG_META = {"Software": None}


def _save(fig, path):
    fig.tight_layout()
    fig.savefig(path, dpi=_DPI, metadata=_PNG_META)
    plt.close(fig)
    return path


def plot_eigs(tracks, out_dir) -> str:
    """One panel per mode; eigenvalues in Hz (E / 2 pi) against t/T."""
    modes = sorted({tr.mode.value for tr in tracks})
    fig, axes = plt.subplots(1, len(modes), figsize=(5 * len(modes), 4), squeeze=False)
    for ax, mode in zip(axes[0], modes):
        for tr in (t for t in tracks if t.mode.value == mode):
            lines = ax.plot(tr.t_over_T, tr.eigenvalues / (2 * np.pi), lw=1)
            lines[0].set_label(f"T = {tr.T:g} s")
            for ln in lines[1:]:
                ln.set_color(lines[0].get_color())
        ax.set_title(mode)
        ax.set_xlabel("t / T")
        ax.set_ylabel("E / 2π (Hz)")
        ax.legend(fontsize=7)
    return _save(fig, os.path.join(out_dir, "eigs.png"))


def plot_phases(tracks, out_dir) -> str:
    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(10, 4))
    for tr in tracks:
        ax1.plot(tr.t, tr.theta, label=tr.mode.value)
        ax2.plot(tr.t, tr.gamma, label=tr.mode.value)
    ax1.set_title("dynamical phase")
    ax2.set_title("geometric phase")
    for ax in (ax1, ax2):
        ax.set_xlabel("t (s)")
        ax.set_ylabel("rad")
        ax.legend()
    return _save(fig, os.path.join(out_dir, "phases.png"))


def plot_sweep(cells, out_dir) -> str:
    """Final fidelity against T, one line per (mode, N)."""
    fig, ax = plt.subplots(figsize=(6, 4))
    keys = sorted({(c.mode.value, c.N) for c in cells})
    for mode, N in keys:
        pts = [(c.T, c.fidelity) for c in cells if c.mode.value == mode and c.N == N]
        ax.plot(*zip(*pts), marker="o", ls="-" if mode == "CD" else "--", label=f"{mode} N={N}")
    ax.set_xlabel("T (s)")
    ax.set_ylabel("final fidelity")
    ax.legend(fontsize=7, ncol=2)
    return _save(fig, os.path.join(out_dir, "sweep.png"))


def plot_spectrum(sp, out_dir) -> str:
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.plot(sp.frequency, sp.real, lw=1)
    ax.set_xlabel("frequency (Hz)")
    ax.set_ylabel("signal (arb.)")
    return _save(fig, os.path.join(out_dir, "spectrum.png"))


def plot_decay(tau, signal, fit, out_dir) -> str:
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.plot(tau, signal, "o", label="data")
    x = np.linspace(0.0, max(tau), 200)
    ax.plot(x, fit.amplitude * np.exp(-x / fit.t_dec), label=f"T_dec = {fit.t_dec:.3g} s")
    ax.set_xlabel("storage time (s)")
    ax.set_ylabel("signal")
    ax.legend()
    return _save(fig, os.path.join(out_dir, "decay.png"))
