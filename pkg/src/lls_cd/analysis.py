"""Detection spectra, exponential decay fits and table aggregation."""

import logging
import math
from collections import OrderedDict
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np
from scipy.optimize import curve_fit

from . import model, numkit
from .errors import FitFailed
from .model import SpinSystem

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class Spectrum:
    frequency: np.ndarray  # Hz, ascending
    real: np.ndarray


def fid(rho, sys: SpinSystem, times) -> np.ndarray:
    """``M(t) = Tr[rho(t) (I1+ + I2+)]`` under free evolution with ``H_I``."""
    ops = model.spin_operators()
    plus = ops.I1x + 1j * ops.I1y + ops.I2x + 1j * ops.I2y
    dec = numkit.herm_eig(model.h_initial(sys))
    V, E = dec.eigenvectors, dec.eigenvalues
    r = V.conj().T @ np.asarray(rho, dtype=complex) @ V
    o = V.conj().T @ plus @ V
    # Tr[e^{-iEt} r e^{iEt} o] = sum_jk r_jk o_kj e^{-i (E_j - E_k) t}
    weights = (r * o.T).ravel()
    omega = (E[:, None] - E[None, :]).ravel()
    keep = np.abs(weights) > 1e-14
    t = np.asarray(times, dtype=float)
    return np.exp(-1j * np.outer(t, omega[keep])) @ weights[keep]


def spectrum(rho, sys: SpinSystem, *, linewidth_hz: float = 0.5,
             spectral_width_hz: float = 400.0, points: int = 8192,
             phase_deg: float = 0.0) -> Spectrum:
    """Real part of the Fourier-transformed, exponentially apodized FID.

    A component ``exp(+2 pi i f t)`` of the FID peaks at ``+f``.
    """
    if linewidth_hz < 0 or spectral_width_hz <= 0 or points < 2:
        raise ValueError("invalid spectrum parameters")
    dt = 1.0 / spectral_width_hz
    t = np.arange(points) * dt
    signal = fid(rho, sys, t) * np.exp(-math.pi * linewidth_hz * t)
    signal = signal * np.exp(1j * math.radians(phase_deg))
    signal[0] *= 0.5  # avoids a baseline offset from the first point
    transformed = np.fft.fftshift(np.fft.fft(signal)) * dt
    freq = np.fft.fftshift(np.fft.fftfreq(points, dt))
    return Spectrum(frequency=freq, real=transformed.real)


@dataclass(frozen=True)
class DecayFit:
    amplitude: float
    t_dec: float
    residual_norm: float
    n_used: int
    n_skipped: int

    def ratio_to(self, t1: float) -> float:
        return self.t_dec / t1


def fit_decay(tau, signal) -> DecayFit:
    """Least-squares fit of ``A exp(-tau / T_dec)``.

    A log-linear regression on the positive signals seeds a nonlinear
    refinement.  Rows with a non-positive signal are skipped with a warning.

    Raises:
        FitFailed: fewer than 3 usable points, repeated delays, or a
            non-decaying fit.
    """
    tau = np.asarray(tau, dtype=float)
    y = np.asarray(signal, dtype=float)
    if tau.shape != y.shape:
        raise FitFailed("tau and signal lengths differ")
    good = np.isfinite(tau) & np.isfinite(y) & (y > 0)
    skipped = int(np.count_nonzero(~good))
    if skipped:
        log.warning("skipping %d rows with non-positive signal", skipped)
    tau, y = tau[good], y[good]
    if tau.size < 3:
        raise FitFailed(f"need at least 3 positive points, got {tau.size}")
    if np.unique(tau).size != tau.size:
        raise FitFailed("storage times must be distinct")

    slope, intercept = np.polyfit(tau, np.log(y), 1)
    if slope >= 0:
        raise FitFailed("signal does not decay")
    p0 = (math.exp(intercept), -1.0 / slope)

    def model_fn(x, a, t_dec):
        return a * np.exp(-x / t_dec)

    try:
        (a, t_dec), _ = curve_fit(model_fn, tau, y, p0=p0, xtol=1e-15, ftol=1e-15, gtol=1e-15,
                                  maxfev=10_000)
    except RuntimeError as exc:
        raise FitFailed(str(exc)) from exc
    if not t_dec > 0:
        raise FitFailed(f"non-positive decay constant {t_dec}")
    resid = float(np.linalg.norm(model_fn(tau, a, t_dec) - y))
    return DecayFit(amplitude=float(a), t_dec=float(t_dec), residual_norm=resid,
                    n_used=int(tau.size), n_skipped=skipped)


def aggregate(rows: Iterable[dict], key: str, value: str) -> "OrderedDict":
    """Mean of ``value`` per distinct ``key``, in first-seen key order.

    Averaging repeated experiments (or simulated fidelities over N) per
    total time gives one bar per key.
    """
    groups = OrderedDict()
    for row in rows:
        groups.setdefault(row[key], []).append(float(row[value]))
    return OrderedDict((k, math.fsum(v) / len(v)) for k, v in groups.items())


def weak_coupling_lines(sys: SpinSystem) -> Sequence[float]:
    """Stick positions (Hz) of the two doublets, spin 1 then spin 2."""
    d, j = sys.delta / 2, sys.j / 2
    return (-d - j, -d + j, d - j, d + j)
