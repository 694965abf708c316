"""``lls`` command line: figure data as CSV/JSON, programs, spectra, decay fits.

Every subcommand computes its tables first and writes them at the end from
a single thread.  CSV numbers carry 9 significant digits; JSON keys keep a
fixed order.
"""

import argparse
import csv
import dataclasses
import io
import json
import logging
import math
import os
import sys
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np

from . import analysis, dynamics, model, pulseir
from .dynamics import DriveMode, FidelityMode
from .errors import CalibrationFailed, ConfigError, FitFailed, LLSError
from .model import AlphaMode, DriveSchedule, SpinSystem
from .pulseir import CompileOptions, WMode

log = logging.getLogger("lls")

EXIT_CONFIG = 2
EXIT_CALIBRATION = 3
EXIT_FIT = 4

SPECTRUM_SOURCES = ("rho_s0", "pulse", "AD", "CD")


@dataclass
class RunConfig:
    delta_hz: float = 90.7
    j_hz: float = 3.24
    T_list: List[float] = field(default_factory=lambda: [0.01, 0.05, 0.1, 0.3, 0.5])
    N_list: List[int] = field(default_factory=lambda: [10, 15, 20, 25, 30])
    modes: List[str] = field(default_factory=lambda: ["AD", "CD"])
    alpha_mode: str = "closed_form"
    fidelity_mode: str = "deviation_overlap"
    w_mode: str = "approx"
    nu_x_hz: float = 10_000.0
    nu_f_hz: float = 2_500.0
    tau_storage_s: float = 30.0
    output_dir: str = "out"
    eig_samples: int = 201
    phase_T: float = 0.01
    phase_N: int = 30
    phase_samples: Optional[int] = None
    propagator: str = "exact"
    workers: int = 1
    spectrum_source: str = "rho_s0"
    linewidth_hz: float = 0.5
    spectral_width_hz: float = 400.0
    spectrum_points: int = 8192
    t1_s: float = 5.1
    plots: bool = True

    def validate(self) -> "RunConfig":
        positive = ("delta_hz", "j_hz", "nu_x_hz", "nu_f_hz", "tau_storage_s", "phase_T",
                    "spectral_width_hz", "t1_s")
        for name in positive:
            v = getattr(self, name)
            if not (isinstance(v, (int, float)) and v > 0 and math.isfinite(v)):
                raise ConfigError(f"{name} must be a positive number, got {v!r}")
        if self.linewidth_hz < 0:
            raise ConfigError("linewidth_hz must be >= 0")
        for name in ("T_list", "N_list", "modes"):
            if not getattr(self, name):
                raise ConfigError(f"{name} must be nonempty")
        if any(not (T > 0) for T in self.T_list):
            raise ConfigError("T_list entries must be positive")
        if any(not isinstance(N, int) or N < 1 for N in self.N_list + [self.phase_N]):
            raise ConfigError("N values must be positive integers")
        for ints in ("eig_samples", "spectrum_points", "workers"):
            if not isinstance(getattr(self, ints), int) or getattr(self, ints) < 1:
                raise ConfigError(f"{ints} must be a positive integer")
        if self.eig_samples < 2:
            raise ConfigError("eig_samples must be >= 2")
        if self.propagator not in ("exact", "trotter"):
            raise ConfigError("propagator must be 'exact' or 'trotter'")
        if self.spectrum_source not in SPECTRUM_SOURCES:
            raise ConfigError(f"spectrum_source must be one of {SPECTRUM_SOURCES}")
        # enum lookups raise ConfigError on bad names
        _ = (self.drive_modes, self.alpha, self.fidelity, self.wmode)
        return self

    @property
    def system(self) -> SpinSystem:
        return SpinSystem(self.delta_hz, self.j_hz)

    @property
    def drive_modes(self):
        return [_enum(DriveMode, m, "modes") for m in self.modes]

    @property
    def alpha(self) -> AlphaMode:
        return _enum(AlphaMode, self.alpha_mode, "alpha_mode")

    @property
    def fidelity(self) -> FidelityMode:
        return _enum(FidelityMode, self.fidelity_mode, "fidelity_mode")

    @property
    def wmode(self) -> WMode:
        return _enum(WMode, self.w_mode, "w_mode")

    @property
    def compile_options(self) -> CompileOptions:
        return CompileOptions(nu_x=self.nu_x_hz, nu_f=self.nu_f_hz, w_mode=self.wmode,
                              alpha_mode=self.alpha)


def _enum(cls, value, name):
    try:
        return cls(value)
    except ValueError:
        choices = ", ".join(m.value for m in cls)
        raise ConfigError(f"{name}: {value!r} is not one of {choices}") from None


def load_config(path: Optional[str]) -> RunConfig:
    """Read a JSON config; missing fields keep their defaults."""
    if path is None:
        return RunConfig().validate()
    try:
        with open(path, encoding="utf-8") as fh:
            raw = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    if not isinstance(raw, dict):
        raise ConfigError("config must be a JSON object")
    known = {f.name for f in dataclasses.fields(RunConfig)}
    unknown = sorted(set(raw) - known)
    if unknown:
        raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
    try:
        cfg = RunConfig(**raw)
        return cfg.validate()
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc


# --- output helpers ----------------------------------------------------------------


def fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return str(bool(x)).lower()
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        s = format(float(x), ".9g")
        return "0" if s == "-0" else s
    return str(x)


def csv_text(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([fmt(v) for v in row])
    return buf.getvalue()


def json_text(obj) -> str:
    return json.dumps(obj, indent=2, ensure_ascii=False) + "\n"


class Outputs:
    """Collects files in memory and writes them all at once."""

    def __init__(self):
        self.files = {}
        self.figures = []

    def add(self, name: str, text: str):
        self.files[name] = text

    def figure(self, fn, *args):
        self.figures.append((fn, args))

    def write(self, out_dir: str, plots: bool) -> List[str]:
        written = []
        for name, text in self.files.items():
            path = os.path.join(out_dir, name)
            os.makedirs(os.path.dirname(path), exist_ok=True)
            with open(path, "w", encoding="utf-8", newline="") as fh:
                fh.write(text)
            written.append(path)
        if plots and self.figures:
            from . import plots as plotting

            os.makedirs(out_dir, exist_ok=True)
            for fn, args in self.figures:
                written.append(getattr(plotting, fn)(*args, out_dir))
        return written


# --- commands ---------------------------------------------------------------------


def cmd_eigs(cfg: RunConfig, out: Outputs):
    sys_ = cfg.system
    rows, tracks = [], []
    for mode in cfg.drive_modes:
        for T in cfg.T_list:
            # the continuous tracks do not depend on N
            tr = dynamics.eigen_tracks(sys_, DriveSchedule(T, 1), mode, cfg.alpha, cfg.eig_samples)
            tracks.append(tr)
            for x, E in zip(tr.t_over_T, tr.eigenvalues):
                rows.append([x, *E, mode.value, T])
    out.add("eigs.csv", csv_text(["t_over_T", "E1", "E2", "E3", "E4", "mode", "T"], rows))
    out.figure("plot_eigs", tracks)
    return rows


def cmd_phases(cfg: RunConfig, out: Outputs):
    sys_ = cfg.system
    schedule = DriveSchedule(cfg.phase_T, cfg.phase_N)
    rows, tracks = [], []
    for mode in cfg.drive_modes:
        tr = dynamics.phases(sys_, schedule, mode, cfg.alpha, cfg.phase_samples)
        tracks.append(tr)
        rows.extend([t, th, g, mode.value] for t, th, g in zip(tr.t, tr.theta, tr.gamma))
    out.add("phases.csv", csv_text(["t", "theta", "gamma", "mode"], rows))
    out.figure("plot_phases", tracks)
    return rows


def cmd_sweep(cfg: RunConfig, out: Outputs):
    result = dynamics.sweep(cfg.system, cfg.T_list, cfg.N_list, cfg.drive_modes, cfg.alpha,
                            cfg.fidelity, propagator=cfg.propagator, workers=cfg.workers)
    rows = [[c.T, c.N, c.mode.value, c.alpha_mode.value, c.fidelity] for c in result.cells]
    out.add("sweep.csv", csv_text(["T", "N", "mode", "alpha_mode", "fidelity_final"], rows))
    # mean over N per (mode, T): one bar per total time
    agg_rows = []
    for mode in cfg.drive_modes:
        cells = [{"T": c.T, "f": c.fidelity} for c in result.cells if c.mode is mode]
        for T, mean in analysis.aggregate(cells, "T", "f").items():
            agg_rows.append([T, mode.value, mean])
    out.add("sweep_mean_over_N.csv", csv_text(["T", "mode", "fidelity_mean"], agg_rows))
    out.figure("plot_sweep", result.cells)
    return result


def _program_name(mode, T, N):
    return f"programs/{mode.value}_T{fmt(T)}_N{N}.txt"


def cmd_compile(cfg: RunConfig, out: Outputs):
    sys_ = cfg.system
    opts = cfg.compile_options
    timing = []
    for T in cfg.T_list:
        for N in cfg.N_list:
            schedule = DriveSchedule(T, N)
            for mode in cfg.drive_modes:
                prog = pulseir.compile_program(sys_, schedule, mode, opts, cfg.tau_storage_s)
                out.add(_program_name(mode, T, N), pulseir.program_to_text(prog))
            rep = pulseir.timing_report(sys_, schedule, opts)
            timing.append({
                "T": T, "N": N,
                "t_ad": rep.t_ad, "t_cd": rep.t_cd, "f_factor": rep.f_factor,
                "t_cd_symbolic": rep.t_cd_symbolic,
                "tau0_equalized_ad": rep.t_cd / N,
            })
    doc = {
        "w_mode": opts.w_mode.value,
        "angle_scale": pulseir.calibrate_w(sys_, opts.w_mode),
        "nu_x_hz": opts.nu_x,
        "nu_f_hz": opts.nu_f,
        "cells": timing,
    }
    out.add("timing.json", json_text(doc))
    return doc


def spectrum_state(cfg: RunConfig):
    """Deviation state handed to the spectrum synthesis."""
    sys_ = cfg.system
    opts = cfg.compile_options
    src = cfg.spectrum_source
    if src == "pulse":
        U = pulseir.event_unitary(pulseir.HardPulse("+y", math.pi / 2, opts.nu_x), sys_)
        return U @ dynamics.rho0() @ U.conj().T
    if src == "rho_s0":
        return pulseir.simulate_events(pulseir.detection_events(sys_, opts), dynamics.rho_s0(), sys_)
    mode = DriveMode(src)
    schedule = DriveSchedule(cfg.T_list[0], cfg.N_list[-1])
    prog = pulseir.compile_program(sys_, schedule, mode, opts, cfg.tau_storage_s)
    return pulseir.simulate_program(prog, dynamics.rho0())


def cmd_spectrum(cfg: RunConfig, out: Outputs):
    sp = analysis.spectrum(spectrum_state(cfg), cfg.system, linewidth_hz=cfg.linewidth_hz,
                             spectral_width_hz=cfg.spectral_width_hz, points=cfg.spectrum_points)
    rows = zip(sp.frequency, sp.real)
    out.add("spectrum.csv", csv_text(["frequency_hz", "real"], rows))
    out.figure("plot_spectrum", sp)
    return sp


def read_decay_csv(path: str):
    try:
        with open(path, encoding="utf-8", newline="") as fh:
            rows = list(csv.DictReader(fh))
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from exc
    if not rows or not {"tau_s", "signal"} <= set(rows[0]):
        raise FitFailed("decay input needs columns tau_s and signal")
    try:
        tau = [float(r["tau_s"]) for r in rows]
        sig = [float(r["signal"]) for r in rows]
    except ValueError as exc:
        raise FitFailed(f"non-numeric decay input: {exc}") from exc
    return tau, sig


def cmd_fit_decay(cfg: RunConfig, out: Outputs, input_path: str):
    tau, sig = read_decay_csv(input_path)
    fit = analysis.fit_decay(tau, sig)
    doc = {
        "amplitude": fit.amplitude,
        "t_dec_s": fit.t_dec,
        "residual_norm": fit.residual_norm,
        "n_used": fit.n_used,
        "n_skipped": fit.n_skipped,
        "t1_s": cfg.t1_s,
        "ratio_to_t1": fit.ratio_to(cfg.t1_s),
    }
    out.add("decay_fit.json", json_text(doc))
    out.figure("plot_decay", tau, sig, fit)
    return doc


def cmd_aggregate(cfg: RunConfig, out: Outputs, input_path: str, key: str, value: str):
    try:
        with open(input_path, encoding="utf-8", newline="") as fh:
            rows = list(csv.DictReader(fh))
    except OSError as exc:
        raise ConfigError(f"cannot read {input_path}: {exc}") from exc
    if not rows or key not in rows[0] or value not in rows[0]:
        raise ConfigError(f"input needs columns {key} and {value}")
    means = analysis.aggregate(rows, key, value)
    out.add("aggregate.csv", csv_text([key, f"{value}_mean"], means.items()))
    return means


COMMANDS = ("eigs", "phases", "sweep", "compile", "spectrum", "fit-decay", "aggregate", "all")


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="lls", description=__doc__.splitlines()[0])
    p.add_argument("command", choices=COMMANDS)
    p.add_argument("--config", help="JSON config file (defaults reproduce every figure)")
    p.add_argument("--out", help="output directory (overrides output_dir)")
    p.add_argument("--input", help="CSV input for fit-decay (tau_s, signal) or aggregate")
    p.add_argument("--key", default="T", help="aggregate: grouping column")
    p.add_argument("--value", default="signal", help="aggregate: averaged column")
    p.add_argument("--no-plots", action="store_true", help="skip PNG figures")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def run(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = load_config(args.config)
        out_dir = args.out or cfg.output_dir
        out = Outputs()
        cmd = args.command
        if cmd in ("fit-decay", "aggregate") and not args.input:
            raise ConfigError(f"{cmd} requires --input")
        if cmd in ("eigs", "all"):
            cmd_eigs(cfg, out)
        if cmd in ("phases", "all"):
            cmd_phases(cfg, out)
        if cmd in ("sweep", "all"):
            cmd_sweep(cfg, out)
        if cmd in ("compile", "all"):
            cmd_compile(cfg, out)
        if cmd in ("spectrum", "all"):
            cmd_spectrum(cfg, out)
        if cmd == "fit-decay" or (cmd == "all" and args.input):
            cmd_fit_decay(cfg, out, args.input)
        if cmd == "aggregate":
            cmd_aggregate(cfg, out, args.input, args.key, args.value)
        for path in out.write(out_dir, cfg.plots and not args.no_plots):
            log.info("wrote %s", path)
    except ConfigError as exc:
        print(f"lls: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except CalibrationFailed as exc:
        print(f"lls: calibration failed: {exc}", file=sys.stderr)
        return EXIT_CALIBRATION
    except FitFailed as exc:
        print(f"lls: fit failed: {exc}", file=sys.stderr)
        return EXIT_FIT
    except LLSError as exc:
        print(f"lls: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    return 0


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()
