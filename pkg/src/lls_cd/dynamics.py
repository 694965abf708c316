"""Propagation under discretized AD/CD drives, spectral tracks and sweeps.

Segments are applied in increasing ``n``: segment 1 acts first on the
initial state.  This ordering is fixed and is not configurable.

Two segment propagators are available:

``"exact"``
    ``exp(-i H^{lambda_n} tau0)`` for the piecewise-constant Hamiltonian.
``"trotter"``
    the compiled-sequence form ``V W V`` with
    ``V = exp(-i H_I tau1) exp(-i H_F tau2) exp(-i H_I tau1)``,
    ``tau1 = (1 - lambda_n) tau0 / 4``, ``tau2 = lambda_n tau0 / 2`` and
    ``W = exp(-i kappa_n tau0 Y)`` for CD (identity for AD).
"""

import enum
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

import numpy as np

from . import model, numkit
from .errors import DegeneratePair, GapClosure, ZeroNorm
from .model import AlphaMode, DriveSchedule, SpinSystem


class DriveMode(enum.Enum):
    AD = "AD"
    CD = "CD"


class InitialState(enum.Enum):
    PURE_GROUND = "pure_ground"
    RHO1 = "rho1"


class FidelityMode(enum.Enum):
    DEVIATION_OVERLAP = "deviation_overlap"
    PURE_POPULATION = "pure_population"


def rho0() -> np.ndarray:
    """Thermal deviation state ``I1z + I2z``."""
    ops = model.spin_operators()
    return ops.I1z + ops.I2z


def rho1() -> np.ndarray:
    """``I1z - I2z``: excess population in ``|01>``."""
    return np.array(model.spin_operators().D)


def rho_s0() -> np.ndarray:
    """``-I1.I2``: excess population in the singlet."""
    return -np.array(model.spin_operators().I1I2)


TRANSPORT_LIMIT = 1.0 / math.sqrt(1.5)


def fidelity_lls(state, fidelity_mode: FidelityMode = FidelityMode.DEVIATION_OVERLAP) -> float:
    """Overlap of a state with the singlet order.

    ``DEVIATION_OVERLAP`` takes a density operator and returns
    ``|Tr[rho rho_S0]| / sqrt(Tr[rho^2] Tr[rho_S0^2])``; ``PURE_POPULATION``
    takes a state vector and returns ``|<S0|psi>|^2``.
    """
    if fidelity_mode is FidelityMode.PURE_POPULATION:
        psi = np.asarray(state, dtype=complex).reshape(-1)
        norm = float(np.vdot(psi, psi).real)
        if norm == 0:
            raise ZeroNorm("zero state vector")
        return float(abs(np.vdot(model.singlet_vector(), psi)) ** 2 / norm)
    rho = np.asarray(state)
    target = rho_s0()
    purity = numkit.hs_inner(rho, rho)
    if purity == 0:
        raise ZeroNorm("Tr[rho^2] = 0")
    value = abs(numkit.hs_inner(rho, target)) / math.sqrt(purity * numkit.hs_inner(target, target))
    return min(value, 1.0 + 1e-12)


@dataclass
class Trajectory:
    times: np.ndarray
    states: list
    fidelities: np.ndarray
    mode: DriveMode
    alpha_mode: AlphaMode
    initial: InitialState
    propagator: str = "exact"

    @property
    def final_fidelity(self) -> float:
        return float(self.fidelities[-1])

    @property
    def final_state(self):
        return self.states[-1]


def segment_hamiltonian(sys: SpinSystem, seg: model.DriveSegment, mode: DriveMode) -> np.ndarray:
    H = model.h_ad(sys, seg.lambda_n)
    if mode is DriveMode.CD:
        H = H + seg.kappa_n * model.spin_operators().Y
    return H


def segment_unitary(sys: SpinSystem, seg: model.DriveSegment, mode: DriveMode,
                    propagator: str = "exact") -> np.ndarray:
    if propagator == "exact":
        return numkit.expm_i(segment_hamiltonian(sys, seg, mode), seg.tau0)
    if propagator != "trotter":
        raise ValueError(f"unknown propagator {propagator!r}")
    tau1 = (1 - seg.lambda_n) * seg.tau0 / 4
    tau2 = seg.lambda_n * seg.tau0 / 2
    UI = numkit.expm_i(model.h_initial(sys), tau1)
    UF = numkit.expm_i(model.h_final(sys), tau2)
    half = UI @ UF @ UI
    if mode is DriveMode.AD:
        return half @ half
    W = numkit.expm_i(model.spin_operators().Y, seg.kappa_n * seg.tau0)
    return half @ W @ half


def initial_state(sys: SpinSystem, initial: InitialState):
    if initial is InitialState.RHO1:
        return rho1()
    dec = numkit.herm_eig(model.h_initial(sys))
    return dec.eigenvectors[:, 0].copy()


def evolve(sys: SpinSystem, schedule: DriveSchedule, mode: DriveMode,
           alpha_mode: AlphaMode = AlphaMode.CLOSED_FORM,
           initial: InitialState = InitialState.RHO1,
           *, propagator: str = "exact",
           segments: Optional[Sequence[model.DriveSegment]] = None,
           fidelity_mode: Optional[FidelityMode] = None) -> Trajectory:
    """Propagate ``initial`` through the N-segment drive.

    ``segments`` overrides ``model.discretize`` (used e.g. to zero ``kappa``).
    The fidelity is recorded at ``t = 0`` and after every segment.  A pure
    initial state is scored by ``PURE_POPULATION`` and a deviation state by
    ``DEVIATION_OVERLAP`` unless ``fidelity_mode`` says otherwise; a pure
    state scored by overlap is first turned into ``|psi><psi|``.
    """
    if segments is None:
        segments = model.discretize(sys, schedule, alpha_mode)
    state = initial_state(sys, initial)
    pure = initial is InitialState.PURE_GROUND
    if fidelity_mode is None:
        fidelity_mode = FidelityMode.PURE_POPULATION if pure else FidelityMode.DEVIATION_OVERLAP

    def score(s):
        if pure and fidelity_mode is FidelityMode.DEVIATION_OVERLAP:
            s = np.outer(s, s.conj())
        return fidelity_lls(s, fidelity_mode)

    states = [state]
    fids = [score(state)]
    times = [0.0]
    t = 0.0
    for seg in segments:
        U = segment_unitary(sys, seg, mode, propagator)
        state = U @ state if pure else numkit.conjugate(U, state)
        t += seg.tau0
        states.append(state)
        fids.append(score(state))
        times.append(t)
    return Trajectory(times=np.array(times), states=states, fidelities=np.array(fids),
                      mode=mode, alpha_mode=alpha_mode, initial=initial,
                      propagator=propagator)


def transport_oracle(sys: SpinSystem, rho) -> np.ndarray:
    """Map ``rho`` through the ideal eigenbasis transport ``H_I -> H_F``.

    ``|00>`` and ``|11>`` are eigenstates along the whole path; inside the
    zero-quantum block the lower (upper) level of ``H_I`` goes to the lower
    (upper) level of ``H_F``.  No dynamical phase is attached.  This is an
    independent reference for transitionless driving and needs ``J > 0``.
    """
    block = [1, 2]
    U = np.eye(4, dtype=complex)

    def block_vectors(H):
        _, v = np.linalg.eigh(H[np.ix_(block, block)])
        return v

    v0 = block_vectors(model.h_initial(sys))
    v1 = block_vectors(model.h_final(sys))
    U[np.ix_(block, block)] = v1 @ v0.conj().T
    return numkit.conjugate(U, rho)


# --- spectral tracks -------------------------------------------------------------


def _hamiltonian_at(sys, schedule, mode, alpha_mode, t):
    point = model.lambda_of(schedule, t)
    if mode is DriveMode.AD:
        return model.h_ad(sys, point.lam)
    return model.h_cd(sys, point, alpha_mode)


@dataclass
class EigenTrack:
    t_over_T: np.ndarray
    eigenvalues: np.ndarray  # (samples, 4), ascending, rad/s
    mode: DriveMode
    T: float

    @property
    def spread(self) -> np.ndarray:
        return self.eigenvalues[:, -1] - self.eigenvalues[:, 0]


def eigen_tracks(sys: SpinSystem, schedule: DriveSchedule, mode: DriveMode,
                 alpha_mode: AlphaMode = AlphaMode.CLOSED_FORM,
                 samples: int = 201) -> EigenTrack:
    if samples < 2:
        raise ValueError("samples must be >= 2")
    s = np.linspace(0.0, 1.0, samples)
    evals = np.array([
        numkit.herm_eig(_hamiltonian_at(sys, schedule, mode, alpha_mode, x * schedule.T)).eigenvalues
        for x in s
    ])
    return EigenTrack(t_over_T=s, eigenvalues=evals, mode=mode, T=schedule.T)


@dataclass
class PhaseTrack:
    t: np.ndarray
    theta: np.ndarray
    gamma: np.ndarray
    ground_energy: np.ndarray
    mode: DriveMode


def berry_phase(vectors: Sequence[np.ndarray]) -> np.ndarray:
    """Cumulative discrete Berry phase ``-Im sum_j log <n_j|n_j+1>``."""
    gamma = np.zeros(len(vectors))
    for k in range(1, len(vectors)):
        overlap = np.vdot(vectors[k - 1], vectors[k])
        if abs(overlap) < 0.5:
            raise GapClosure(f"overlap {abs(overlap):.3f} between samples {k-1},{k}; refine the grid")
        gamma[k] = gamma[k - 1] - np.log(overlap).imag
    return gamma


def phases(sys: SpinSystem, schedule: DriveSchedule, mode: DriveMode,
           alpha_mode: AlphaMode = AlphaMode.CLOSED_FORM,
           samples: Optional[int] = None) -> PhaseTrack:
    """Dynamical and geometric phase of the instantaneous ground state.

    ``samples`` defaults to ``10 N + 1`` grid points.  ``theta`` is the
    trapezoidal integral of ``-E_ground``; ``gamma`` uses gauge-fixed
    eigenvectors in the discrete Berry formula.
    """
    if samples is None:
        samples = 10 * schedule.N + 1
    t = np.linspace(0.0, schedule.T, samples)
    energies = np.empty(samples)
    vectors = []
    for k, tk in enumerate(t):
        dec = numkit.herm_eig(_hamiltonian_at(sys, schedule, mode, alpha_mode, tk))
        gap = dec.eigenvalues[1] - dec.eigenvalues[0]
        if gap <= 0:
            raise GapClosure(f"ground state degenerate at t = {tk}")
        energies[k] = dec.eigenvalues[0]
        vectors.append(dec.eigenvectors[:, 0])
    theta = np.zeros(samples)
    theta[1:] = -np.cumsum(0.5 * (energies[1:] + energies[:-1]) * np.diff(t))
    return PhaseTrack(t=t, theta=theta, gamma=berry_phase(vectors),
                      ground_energy=energies, mode=mode)


def adiabaticity_ratio(sys: SpinSystem, schedule: DriveSchedule, t: float) -> float:
    """Largest ``|<m|dH/dt|n>| / |E_n - E_m|`` over pairs of AD eigenstates."""
    point = model.lambda_of(schedule, t)
    if point.lam_dot == 0.0:
        return 0.0
    dec = numkit.herm_eig(model.h_ad(sys, point.lam))
    V, E = dec.eigenvectors, dec.eigenvalues
    Hdot = point.lam_dot * (V.conj().T @ model.d_lambda_h(sys) @ V)
    best = 0.0
    for m in range(4):
        for n in range(4):
            if m == n:
                continue
            num = abs(Hdot[m, n])
            gap = abs(E[n] - E[m])
            if gap < model.DEGENERACY_TOL:
                if num > model.DEGENERACY_TOL:
                    raise DegeneratePair(f"degenerate levels {m},{n} coupled by {num:.3e}")
                continue
            best = max(best, num / gap)
    return best


# --- sweeps -----------------------------------------------------------------------


@dataclass(frozen=True)
class SweepCell:
    T: float
    N: int
    mode: DriveMode
    alpha_mode: AlphaMode
    fidelity: float


@dataclass
class SweepResult:
    cells: list = field(default_factory=list)

    def lookup(self, T, N, mode) -> float:
        for c in self.cells:
            if c.T == T and c.N == N and c.mode is mode:
                return c.fidelity
        raise KeyError((T, N, mode))


def sweep(sys: SpinSystem, T_list, N_list, modes=(DriveMode.AD, DriveMode.CD),
          alpha_mode: AlphaMode = AlphaMode.CLOSED_FORM,
          fidelity_mode: FidelityMode = FidelityMode.DEVIATION_OVERLAP,
          *, propagator: str = "exact", workers: int = 1) -> SweepResult:
    """Final fidelity on the full ``(T, N, mode)`` grid.

    Cells are emitted with T outermost, then N, then mode, whatever order
    the workers finish in.
    """
    if not T_list or not N_list or not modes:
        raise ValueError("sweep lists must be nonempty")
    initial = (InitialState.PURE_GROUND if fidelity_mode is FidelityMode.PURE_POPULATION
               else InitialState.RHO1)
    keys = [(T, N, m) for T in T_list for N in N_list for m in modes]

    def run(key):
        T, N, m = key
        traj = evolve(sys, DriveSchedule(T=T, N=N), m, alpha_mode, initial,
                      propagator=propagator, fidelity_mode=fidelity_mode)
        return SweepCell(T=T, N=N, mode=m, alpha_mode=alpha_mode, fidelity=traj.final_fidelity)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            cells = list(pool.map(run, keys))
    else:
        cells = [run(k) for k in keys]
    return SweepResult(cells=cells)


def zero_kappa(segments):
    return [replace(s, kappa_n=0.0) for s in segments]
