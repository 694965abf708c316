import math

import numpy as np
import pytest

from lls_cd import analysis, dynamics, model, pulseir
from lls_cd.errors import FitFailed
from lls_cd.pulseir import CompileOptions, HardPulse

TAU = np.arange(5.0, 51.0, 5.0)


def line_values(sp, sys):
    vals = []
    for f0 in analysis.weak_coupling_lines(sys):
        window = np.abs(sp.frequency - f0) < 0.6
        idx = np.flatnonzero(window)
        vals.append(sp.real[idx[np.argmax(np.abs(sp.real[idx]))]])
    return np.array(vals)


def test_zero_state_spectrum(sys):
    sp = analysis.spectrum(np.zeros((4, 4)), sys)
    assert np.all(sp.real == 0)


def test_in_phase_doublets(sys):
    U = pulseir.event_unitary(HardPulse("+y", math.pi / 2), sys)
    sp = analysis.spectrum(U @ dynamics.rho0() @ U.conj().T, sys)
    v = line_values(sp, sys)
    assert np.all(v > 0)
    # doublet centers at -delta/2 and +delta/2
    peak = sp.frequency[np.argmax(sp.real)]
    assert abs(abs(peak) - sys.delta / 2) < sys.j


def test_antiphase_doublets(sys):
    det = pulseir.detection_events(sys, CompileOptions())
    sp = analysis.spectrum(pulseir.simulate_events(det, dynamics.rho_s0(), sys), sys)
    v = line_values(sp, sys)
    assert v[0] * v[1] < 0 and v[2] * v[3] < 0
    assert np.min(np.abs(v)) > 0.5 * np.max(np.abs(v))


def test_spectrum_frequency_axis(sys):
    sp = analysis.spectrum(dynamics.rho0(), sys, spectral_width_hz=200.0, points=1024)
    assert sp.frequency[0] == pytest.approx(-100.0)
    assert np.all(np.diff(sp.frequency) > 0)


def test_fit_noiseless():
    fit = analysis.fit_decay(TAU, np.exp(-TAU / 27.3))
    assert fit.t_dec == pytest.approx(27.3, rel=1e-9)
    assert fit.amplitude == pytest.approx(1.0, rel=1e-9)
    assert fit.n_used == 10


def test_fit_noisy_seeded():
    rng = np.random.default_rng(7)
    y = 2.5 * np.exp(-TAU / 27.3) * (1 + 0.01 * rng.standard_normal(TAU.size))
    assert analysis.fit_decay(TAU, y).t_dec == pytest.approx(27.3, rel=0.03)


def test_fit_ratio():
    fit = analysis.fit_decay(TAU, np.exp(-TAU / 27.3))
    assert fit.ratio_to(5.1) == pytest.approx(5.35, abs=0.01)


def test_fit_skips_non_positive(caplog):
    y = np.exp(-TAU / 10.0)
    y[3] = -0.1
    y[5] = 0.0
    fit = analysis.fit_decay(TAU, y)
    assert fit.n_skipped == 2 and fit.t_dec == pytest.approx(10.0, rel=1e-9)
    assert "skipping" in caplog.text


def test_fit_errors():
    with pytest.raises(FitFailed):
        analysis.fit_decay([1.0, 2.0], [1.0, 0.5])
    with pytest.raises(FitFailed):
        analysis.fit_decay([1.0, 2.0, 3.0, 4.0], [1.0, 0.0, -1.0, 0.5])
    with pytest.raises(FitFailed):
        analysis.fit_decay([1.0, 1.0, 2.0], [1.0, 0.9, 0.5])
    with pytest.raises(FitFailed):
        analysis.fit_decay([1.0, 2.0, 3.0], [1.0, 2.0, 4.0])


def test_aggregate_means_in_order():
    rows = [{"T": "0.1", "s": 1}, {"T": "0.05", "s": 4}, {"T": "0.1", "s": 3}]
    assert list(analysis.aggregate(rows, "T", "s").items()) == [("0.1", 2.0), ("0.05", 4.0)]
