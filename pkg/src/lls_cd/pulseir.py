"""Pulse-sequence representation, compilation and simulation.

A program is an ordered list of three primitive event kinds:

* :class:`Delay`: free precession under ``H_I``;
* :class:`HardPulse`: an instantaneous global rotation
  ``exp(-i angle (I1b + I2b))``.  Its audit duration is ``angle / (2 pi nu_x)``;
* :class:`SpinLock`: isotropic evolution.  A lock given by ``duration``
  applies ``exp(-i H_F duration)``.  A lock given by ``angle`` applies the
  isotropic rotation ``exp(-i angle I1.I2)`` and lasts ``|angle| / (2 pi nu_F)``
  on the wall clock.

Each delay also carries a ``role`` recording what it is meant to realize.
:func:`event_unitary` with ``ideal=True`` swaps a delay's full free
evolution for that idealization:

``"free"``      ``exp(-i H_I t)``, no idealization;
``"shift"``     chemical-shift frame rotation ``exp(+i pi delta t (I1z - I2z))``;
``"coupling"``  weak-coupling precession under ``-pi delta (I1z - I2z) + 2 pi J I1z I2z``,
                the half of a J spin echo.

Physical simulation (``ideal=False``, the default in :func:`simulate_program`)
always uses ``H_I``.
"""

import enum
import functools
import math
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence, Union

import numpy as np

from . import model, numkit
from .dynamics import DriveMode
from .errors import CalibrationFailed, Infeasible
from .model import AlphaMode, DriveSchedule, DriveSegment, SpinSystem

DELAY_ROLES = ("free", "shift", "coupling")
PHASES = ("+x", "-x", "+y", "-y")
ANGLE_SCALES = (1.0, -1.0, 0.5, -0.5, 2.0, -2.0)
EXACT_W_TOL = 1e-8
APPROX_W_TOL = 1e-6
_PROBE_ANGLE = 0.1


@dataclass(frozen=True)
class Delay:
    duration: float
    role: str = "free"
    tag: str = ""

    def __post_init__(self):
        if not (self.duration >= 0 and math.isfinite(self.duration)):
            raise ValueError(f"delay duration must be >= 0, got {self.duration}")
        if self.role not in DELAY_ROLES:
            raise ValueError(f"unknown delay role {self.role!r}")

    @property
    def audit_duration(self) -> float:
        return self.duration


@dataclass(frozen=True)
class HardPulse:
    phase: str
    angle: float
    nu_x: float = 10_000.0
    tag: str = ""

    def __post_init__(self):
        if self.phase not in PHASES:
            raise ValueError(f"unknown pulse phase {self.phase!r}")
        if not math.isfinite(self.angle):
            raise ValueError("pulse angle must be finite")
        if self.nu_x <= 0:
            raise ValueError("nu_x must be positive")

    @property
    def audit_duration(self) -> float:
        return abs(self.angle) / (2 * math.pi * self.nu_x)


@dataclass(frozen=True)
class SpinLock:
    nu_f: float
    duration: Optional[float] = None
    angle: Optional[float] = None
    tag: str = ""

    def __post_init__(self):
        if (self.duration is None) == (self.angle is None):
            raise ValueError("a spin-lock takes exactly one of duration or angle")
        if self.duration is not None and not (self.duration >= 0 and math.isfinite(self.duration)):
            raise ValueError(f"spin-lock duration must be >= 0, got {self.duration}")
        if self.angle is not None and not math.isfinite(self.angle):
            raise ValueError("spin-lock angle must be finite")
        if self.nu_f <= 0:
            raise ValueError("nu_f must be positive")

    @property
    def audit_duration(self) -> float:
        if self.duration is not None:
            return self.duration
        return abs(self.angle) / (2 * math.pi * self.nu_f)


PulseEvent = Union[Delay, HardPulse, SpinLock]


def pulse(phase: str, angle: float, nu_x: float, tag: str = "") -> HardPulse:
    """Hard pulse with a non-negative angle; a negative angle flips the phase."""
    if angle < 0:
        flipped = {"+x": "-x", "-x": "+x", "+y": "-y", "-y": "+y"}[phase]
        return HardPulse(flipped, -angle, nu_x, tag)
    return HardPulse(phase, angle, nu_x, tag)


class WMode(enum.Enum):
    EXACT = "exact"
    APPROX = "approx"


@dataclass(frozen=True)
class CompileOptions:
    nu_x: float = 10_000.0
    nu_f: float = 2_500.0
    w_mode: WMode = WMode.APPROX
    angle_scale: Optional[float] = None  # None: calibrate
    alpha_mode: AlphaMode = AlphaMode.CLOSED_FORM

    def __post_init__(self):
        if self.nu_x <= 0 or self.nu_f <= 0:
            raise ValueError("nu_x and nu_f must be positive")
        if self.angle_scale is not None and self.angle_scale not in ANGLE_SCALES:
            raise ValueError(f"angle_scale must be one of {ANGLE_SCALES}")


@dataclass(frozen=True)
class PulseProgram:
    events: tuple
    metadata: dict = field(default_factory=dict)

    @property
    def total_duration(self) -> float:
        return math.fsum(e.audit_duration for e in self.events)

    def section(self, tag: str) -> tuple:
        return tuple(e for e in self.events if e.tag == tag)

    def section_duration(self, tag: str) -> float:
        return math.fsum(e.audit_duration for e in self.section(tag))

    def __len__(self):
        return len(self.events)


# --- event semantics ----------------------------------------------------------------


_PULSE_AXES = {"+x": ("I1x", "I2x", 1.0), "-x": ("I1x", "I2x", -1.0),
               "+y": ("I1y", "I2y", 1.0), "-y": ("I1y", "I2y", -1.0)}


def event_unitary(event: PulseEvent, sys: SpinSystem, ideal: bool = False) -> np.ndarray:
    ops = model.spin_operators()
    if isinstance(event, Delay):
        if not ideal or event.role == "free":
            H = model.h_initial(sys)
        elif event.role == "shift":
            H = -math.pi * sys.delta * ops.D
        else:
            H = -math.pi * sys.delta * ops.D + 2 * math.pi * sys.j * ops.Izz
        return numkit.expm_i(H, event.duration)
    if isinstance(event, HardPulse):
        a, b, sign = _PULSE_AXES[event.phase]
        return numkit.expm_i(sign * (getattr(ops, a) + getattr(ops, b)), event.angle)
    if isinstance(event, SpinLock):
        if event.duration is not None:
            return numkit.expm_i(model.h_final(sys), event.duration)
        return numkit.expm_i(ops.I1I2, event.angle)
    raise TypeError(f"not a pulse event: {event!r}")


def events_unitary(events: Sequence[PulseEvent], sys: SpinSystem, ideal: bool = False) -> np.ndarray:
    """Net propagator; the first event in the list acts first."""
    U = numkit.identity(4)
    for e in events:
        U = event_unitary(e, sys, ideal) @ U
    return U


def simulate_program(program: PulseProgram, rho, *, ideal: bool = False,
                     sys: Optional[SpinSystem] = None) -> np.ndarray:
    """Apply every event of ``program`` to the deviation state ``rho`` in order."""
    sys = sys or program.metadata.get("sys")
    state = np.array(rho, dtype=complex)
    if not program.events:
        return state
    for e in program.events:
        state = numkit.conjugate(event_unitary(e, sys, ideal), state)
    return state


def simulate_events(events: Sequence[PulseEvent], rho, sys: SpinSystem, *, ideal: bool = False):
    return simulate_program(PulseProgram(tuple(events), {"sys": sys}), rho, ideal=ideal)


def validate_segment(events: Sequence[PulseEvent], target, sys: SpinSystem,
                     *, ideal: bool = True) -> float:
    """Global-phase-invariant distance ``1 - |Tr[U^dagger V]| / 4``."""
    U = events_unitary(events, sys, ideal)
    return unitary_distance(U, target)


def unitary_distance(U, V) -> float:
    d = U.shape[0]
    return float(1.0 - abs(np.trace(U.conj().T @ V)) / d)


# --- generator analysis --------------------------------------------------------------


def generator(U) -> np.ndarray:
    """Hermitian ``G`` with ``U = e^{i phi} exp(-i G)`` for some global phase.

    ``phi`` puts the branch cut in the middle of the widest gap between
    eigenphases, so the generator stays continuous for rotations near pi.
    """
    w = np.linalg.eigvals(U)
    ph = np.sort(np.mod(np.angle(w), 2 * np.pi))
    gaps = np.diff(np.concatenate([ph, [ph[0] + 2 * np.pi]]))
    k = int(np.argmax(gaps))
    cut = ph[k] + gaps[k] / 2
    return numkit.logm_u(U * np.exp(-1j * (cut - np.pi)))


def _component_basis():
    ops = model.spin_operators()
    return {
        "identity": numkit.identity(4),
        "zq_x": np.array(ops.F),
        "zq_y": -np.array(ops.Y),
        "izz": np.array(ops.Izz),
        "d": np.array(ops.D),
    }


def generator_components(G) -> dict:
    """Projections of ``G`` on identity, ZQ-x, ZQ-y, I1zI2z and I1z-I2z.

    ``zq_y`` is ``I1yI2x - I1xI2y`` (``+sigma_y/2`` on the zero-quantum
    block), so ``exp(-i a Y)`` has ``zq_y = -a``.  ``outside`` is the
    Frobenius norm of what none of the five absorb.
    """
    out = {}
    rest = np.array(G, dtype=complex)
    for name, B in _component_basis().items():
        c = numkit.hs_inner(G, B) / numkit.hs_inner(B, B)
        out[name] = c
        rest = rest - c * B
    out["outside"] = float(np.linalg.norm(rest))
    return out


# --- compilation ---------------------------------------------------------------------


def compile_ad_segment(segment: DriveSegment, opts: Optional[CompileOptions] = None,
                       tag: str = "drive") -> list:
    """Two symmetric halves ``[Delay tau1, SpinLock tau2, Delay tau1]``."""
    opts = opts or CompileOptions()
    tau1 = (1 - segment.lambda_n) * segment.tau0 / 4
    tau2 = segment.lambda_n * segment.tau0 / 2
    half = [Delay(tau1, "free", tag), SpinLock(opts.nu_f, duration=tau2, tag=tag), Delay(tau1, "free", tag)]
    return half + list(half)


def w_target(segment: DriveSegment) -> np.ndarray:
    return numkit.expm_i(model.spin_operators().Y, segment.kappa_n * segment.tau0)


def _w_exact_events(sys: SpinSystem, theta: float, opts: CompileOptions, tag: str) -> list:
    nu_x = opts.nu_x

    def echo(eta):
        tau_j = eta / (2 * math.pi * sys.j)
        return [Delay(tau_j, "coupling", tag), HardPulse("+x", math.pi, nu_x, tag),
                Delay(tau_j, "coupling", tag)]

    def shift(beta):
        return Delay(beta / (math.pi * sys.delta), "shift", tag)

    # rightmost factor of the operator product is emitted first
    return ([pulse("-x", math.pi / 2, nu_x, tag)]
            + echo(3 * math.pi / 2)
            + [shift(3 * math.pi / 2), pulse("+x", theta, nu_x, tag), shift(math.pi / 2)]
            + echo(math.pi / 2)
            + [pulse("+x", math.pi / 2, nu_x, tag)])


def _w_approx_events(sys: SpinSystem, theta: float, opts: CompileOptions, tag: str) -> list:
    return [Delay(1 / (4 * sys.delta), "shift", tag),
            SpinLock(opts.nu_f, angle=theta, tag=tag),
            Delay(3 / (4 * sys.delta), "shift", tag)]


def _approx_frame(sys: SpinSystem) -> np.ndarray:
    return numkit.expm_i(-math.pi * sys.delta * model.spin_operators().D, 1 / sys.delta)


def approx_w_report(events, sys: SpinSystem, *, ideal: bool = True) -> dict:
    """Generator components of an approximate W block.

    ``raw`` analyses the block itself, frame rotation included.  ``framed``
    first strips the net chemical-shift frame ``exp(+i pi (I1z - I2z))`` of
    the two delays.
    """
    U = events_unitary(events, sys, ideal)
    frame = _approx_frame(sys)
    return {
        "raw": generator_components(generator(U)),
        "framed": generator_components(generator(frame.conj().T @ U)),
    }


def _w_error(sys, w_mode, scale, opts, target_angle) -> float:
    seg = DriveSegment(n=1, lambda_n=0.5, kappa_n=target_angle, tau0=1.0)
    if w_mode is WMode.EXACT:
        events = _w_exact_events(sys, scale * target_angle, opts, "")
        return validate_segment(events, w_target(seg), sys)
    events = _w_approx_events(sys, scale * target_angle, opts, "")
    comps = approx_w_report(events, sys)["raw"]
    return abs(comps["zq_y"] + target_angle)


@functools.lru_cache(maxsize=None)
def _calibrate(sys: SpinSystem, w_mode: WMode) -> tuple:
    opts = CompileOptions(w_mode=w_mode)
    errors = {s: _w_error(sys, w_mode, s, opts, _PROBE_ANGLE) for s in ANGLE_SCALES}
    best = min(ANGLE_SCALES, key=lambda s: errors[s])
    return best, errors[best]


def calibrate_w(sys: SpinSystem, w_mode: WMode) -> float:
    """Pick the central-angle scale that makes W hit its target rotation.

    The choice is made once per (spin system, W mode) from a probe rotation
    and cached.

    Raises:
        CalibrationFailed: if no candidate meets the W tolerance.
    """
    scale, err = _calibrate(sys, w_mode)
    tol = EXACT_W_TOL if w_mode is WMode.EXACT else APPROX_W_TOL
    if err > tol:
        raise CalibrationFailed(
            f"no angle scale reaches {tol:g} for {w_mode.value} W (best {err:.3e})", err
        )
    return scale


def _resolved_scale(sys, opts):
    return opts.angle_scale if opts.angle_scale is not None else calibrate_w(sys, opts.w_mode)


def compile_w_exact(segment: DriveSegment, sys: SpinSystem,
                    opts: Optional[CompileOptions] = None, tag: str = "drive",
                    verify: bool = True) -> list:
    """Auxiliary unitary built from pulses, frame delays and two J echoes.

    The ideal-event propagator equals ``exp(-i kappa_n tau0 Y)`` up to a
    global phase.
    """
    opts = opts or CompileOptions(w_mode=WMode.EXACT)
    theta = _resolved_scale(sys, replace(opts, w_mode=WMode.EXACT)) * segment.kappa_n * segment.tau0
    events = _w_exact_events(sys, theta, opts, tag)
    if verify and opts.angle_scale is None:
        dist = validate_segment(events, w_target(segment), sys)
        if dist > EXACT_W_TOL:
            raise CalibrationFailed(f"exact W misses its target by {dist:.3e}", dist)
    return events


def compile_w_approx(segment: DriveSegment, sys: SpinSystem,
                     opts: Optional[CompileOptions] = None, tag: str = "drive",
                     verify: bool = True) -> list:
    """Short W: frame delay ``1/(4 delta)``, isotropic lock, frame delay ``3/(4 delta)``."""
    opts = opts or CompileOptions(w_mode=WMode.APPROX)
    theta = _resolved_scale(sys, replace(opts, w_mode=WMode.APPROX)) * segment.kappa_n * segment.tau0
    events = _w_approx_events(sys, theta, opts, tag)
    if verify and opts.angle_scale is None:
        zq_y = approx_w_report(events, sys)["raw"]["zq_y"]
        err = abs(zq_y + segment.kappa_n * segment.tau0)
        if err > APPROX_W_TOL:
            raise CalibrationFailed(f"approximate W misses its target by {err:.3e}", err)
    return events


def compile_w(segment, sys, opts, tag="drive"):
    if opts.w_mode is WMode.EXACT:
        return compile_w_exact(segment, sys, opts, tag)
    return compile_w_approx(segment, sys, opts, tag)


def compile_drive(sys: SpinSystem, schedule: DriveSchedule, mode: DriveMode,
                  opts: Optional[CompileOptions] = None,
                  segments: Optional[Sequence[DriveSegment]] = None) -> list:
    """Events of the N-segment AD or CD evolution, tagged ``"drive"``."""
    opts = opts or CompileOptions()
    if segments is None:
        segments = model.discretize(sys, schedule, opts.alpha_mode)
    events = []
    for seg in segments:
        halves = compile_ad_segment(seg, opts)
        events.extend(halves[:3])
        if mode is DriveMode.CD:
            events.extend(compile_w(seg, sys, opts))
        events.extend(halves[3:])
    return events


def initialization_events(sys: SpinSystem, opts: CompileOptions) -> list:
    """``rho0 -> rho1``: (pi/2)_x, chemical-shift delay 1/(2 delta), (pi/2)_y."""
    return [HardPulse("+x", math.pi / 2, opts.nu_x, "init"),
            Delay(1 / (2 * sys.delta), "shift", "init"),
            HardPulse("+y", math.pi / 2, opts.nu_x, "init")]


def detection_events(sys: SpinSystem, opts: CompileOptions) -> list:
    """Singlet order -> antiphase ``I1xI2z - I1zI2x``: delay 1/(4 delta), (pi/2)_x."""
    return [Delay(1 / (4 * sys.delta), "shift", "detect"),
            HardPulse("+x", math.pi / 2, opts.nu_x, "detect")]


def storage_events(tau_storage: float, opts: CompileOptions) -> list:
    return [SpinLock(opts.nu_f, duration=tau_storage, tag="storage")]


def compile_program(sys: SpinSystem, schedule: DriveSchedule, mode: DriveMode,
                    opts: Optional[CompileOptions] = None, tau_storage: float = 30.0) -> PulseProgram:
    """Initialization, drive, storage spin-lock and detection, in that order."""
    opts = opts or CompileOptions()
    events = (initialization_events(sys, opts)
              + compile_drive(sys, schedule, mode, opts)
              + storage_events(tau_storage, opts)
              + detection_events(sys, opts))
    meta = {"sys": sys, "T": schedule.T, "N": schedule.N, "mode": mode,
            "alpha_mode": opts.alpha_mode, "w_mode": opts.w_mode,
            "tau_storage": tau_storage, "opts": opts}
    return PulseProgram(tuple(events), meta)


# --- timing ----------------------------------------------------------------------------


@dataclass(frozen=True)
class TimingReport:
    t_ad: float
    t_cd: float
    t_cd_symbolic: float

    @property
    def f_factor(self) -> float:
        return self.t_cd / self.t_ad


def _drive_time(events) -> float:
    return math.fsum(e.audit_duration for e in events)


def timing_report(sys: SpinSystem, schedule: DriveSchedule,
                  opts: Optional[CompileOptions] = None) -> TimingReport:
    """Wall-clock length of the AD and CD drive sections, from their events.

    ``t_cd_symbolic`` is ``N tau0 [1 + 1/(delta tau0) + mean(kappa_n)]``,
    evaluated literally for comparison only; it mixes a rate into a
    dimensionless bracket.
    """
    opts = opts or CompileOptions()
    segments = model.discretize(sys, schedule, opts.alpha_mode)
    t_ad = _drive_time(compile_drive(sys, schedule, DriveMode.AD, opts, segments))
    t_cd = _drive_time(compile_drive(sys, schedule, DriveMode.CD, opts, segments))
    tau0, N = schedule.tau0, schedule.N
    mean_kappa = math.fsum(s.kappa_n for s in segments) / N
    symbolic = N * tau0 * (1 + 1 / (sys.delta * tau0) + mean_kappa)
    return TimingReport(t_ad=t_ad, t_cd=t_cd, t_cd_symbolic=symbolic)


def equalize_durations(sys: SpinSystem, schedule: DriveSchedule,
                       opts: Optional[CompileOptions] = None) -> float:
    """Segment length for the AD run whose drive lasts as long as the CD drive."""
    report = timing_report(sys, schedule, opts)
    tau0 = report.t_cd / schedule.N
    if not tau0 > 0:
        raise Infeasible(f"equalized tau0 = {tau0} is not positive")
    return tau0


# --- text export ---------------------------------------------------------------------


def _fmt(x: float) -> str:
    s = format(float(x), ".9g")
    return "0" if s == "-0" else s


def program_to_text(program: PulseProgram) -> str:
    """Tab-separated listing, one event per line, ``#`` metadata header."""
    meta = program.metadata
    sys = meta.get("sys")
    lines = []
    if sys is not None:
        lines.append(f"# delta_hz\t{_fmt(sys.delta)}")
        lines.append(f"# j_hz\t{_fmt(sys.j)}")
    for key in ("T", "N", "mode", "alpha_mode", "w_mode", "tau_storage"):
        if key not in meta:
            continue
        value = meta[key]
        if isinstance(value, enum.Enum):
            value = value.value
        elif isinstance(value, float):
            value = _fmt(value)
        lines.append(f"# {key}\t{value}")
    for e in program.events:
        if isinstance(e, Delay):
            lines.append(f"DELAY\t{_fmt(e.duration)}")
        elif isinstance(e, HardPulse):
            lines.append(f"PULSE\t{e.phase}\t{_fmt(e.angle)}")
        elif e.duration is not None:
            lines.append(f"SPINLOCK\t{_fmt(e.duration)}\t{_fmt(e.nu_f)}")
        else:
            lines.append(f"SPINLOCK_ANGLE\t{_fmt(e.angle)}\t{_fmt(e.nu_f)}")
    return "\n".join(lines) + "\n"


def program_from_text(text: str, nu_x: float = 10_000.0) -> PulseProgram:
    """Parse :func:`program_to_text` output.  Delay roles and tags are not stored."""
    meta = {}
    events = []
    for raw in text.splitlines():
        if not raw.strip():
            continue
        if raw.startswith("#"):
            key, _, value = raw[1:].strip().partition("\t")
            meta[key] = value
            continue
        kind, *params = raw.split("\t")
        if kind == "DELAY":
            events.append(Delay(float(params[0])))
        elif kind == "PULSE":
            events.append(HardPulse(params[0], float(params[1]), nu_x))
        elif kind == "SPINLOCK":
            events.append(SpinLock(float(params[1]), duration=float(params[0])))
        elif kind == "SPINLOCK_ANGLE":
            events.append(SpinLock(float(params[1]), angle=float(params[0])))
        else:
            raise ValueError(f"unknown event kind {kind!r}")
    if "delta_hz" in meta and "j_hz" in meta:
        meta["sys"] = SpinSystem(float(meta.pop("delta_hz")), float(meta.pop("j_hz")))
    return PulseProgram(tuple(events), meta)
