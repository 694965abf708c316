"""Two-spin Hamiltonians, drive schedule and adiabatic gauge potentials.

Conventions used throughout:

* computational basis ``|00>, |01>, |10>, |11>`` with spin 1 leftmost and
  ``Iz|0> = +1/2 |0>``;
* chemical-shift difference ``delta`` and coupling ``j`` are given in Hz;
  every Hamiltonian is returned in rad/s;
* the closed-form coefficient ``alpha`` and amplitude ``kappa`` are evaluated
  with ``delta`` and ``j`` in Hz.  Both are ratio-structured, so any common
  rescaling of the two frequencies leaves ``kappa`` unchanged.

The zero-quantum operator ``Y = I1x I2y - I1y I2x`` carries the counterdiabatic
term.  On the ``{|01>, |10>}`` block it equals ``-sigma_y / 2``.
"""

import enum
import functools
import math
from dataclasses import dataclass, field

import numpy as np

from . import numkit
from .errors import (
    DegenerateCoupling,
    FlatAction,
    LambdaOutOfRange,
    Singular,
    TimeOutOfRange,
)

_ENDPOINT_TOL = 1e-12
DEGENERACY_TOL = 1e-9  # rad/s


class AlphaMode(enum.Enum):
    """Which first-order coefficient feeds the gauge potential."""

    CLOSED_FORM = "closed_form"
    VARIATIONAL = "variational"


@dataclass(frozen=True)
class SpinSystem:
    """Chemical-shift difference and scalar coupling of the spin pair, in Hz."""

    delta: float = 90.7
    j: float = 3.24

    def __post_init__(self):
        for name in ("delta", "j"):
            value = getattr(self, name)
            if not math.isfinite(value) or value < 0:
                raise ValueError(f"{name} must be finite and non-negative, got {value}")

    @property
    def weak_coupling(self) -> bool:
        """False when delta/J < 5; the approximate pulse sequences assume delta >> J."""
        return self.j == 0 or self.delta / self.j >= 5.0


@dataclass(frozen=True)
class SpinOperators:
    I1x: np.ndarray
    I1y: np.ndarray
    I1z: np.ndarray
    I2x: np.ndarray
    I2y: np.ndarray
    I2z: np.ndarray
    I1I2: np.ndarray
    D: np.ndarray
    Y: np.ndarray
    F: np.ndarray
    Izz: np.ndarray = field(repr=False)


@functools.lru_cache(maxsize=None)
def spin_operators() -> SpinOperators:
    """Single- and two-spin operators in the computational basis."""
    sx = np.array([[0, 1], [1, 0]], dtype=complex) / 2
    sy = np.array([[0, -1j], [1j, 0]], dtype=complex) / 2
    sz = np.array([[1, 0], [0, -1]], dtype=complex) / 2
    e = np.eye(2, dtype=complex)
    kron = numkit.kron
    I1x, I1y, I1z = kron(sx, e), kron(sy, e), kron(sz, e)
    I2x, I2y, I2z = kron(e, sx), kron(e, sy), kron(e, sz)
    F = I1x @ I2x + I1y @ I2y
    Izz = I1z @ I2z
    ops = SpinOperators(
        I1x=I1x, I1y=I1y, I1z=I1z,
        I2x=I2x, I2y=I2y, I2z=I2z,
        I1I2=F + Izz,
        D=I1z - I2z,
        Y=I1x @ I2y - I1y @ I2x,
        F=F,
        Izz=Izz,
    )
    for arr in vars(ops).values():
        arr.flags.writeable = False
    return ops


def singlet_vector() -> np.ndarray:
    return np.array([0, 1, -1, 0], dtype=complex) / math.sqrt(2)


def h_initial(sys: SpinSystem) -> np.ndarray:
    """``-pi delta (I1z - I2z) + 2 pi J I1.I2`` in rad/s."""
    ops = spin_operators()
    return -math.pi * sys.delta * ops.D + 2 * math.pi * sys.j * ops.I1I2


def h_final(sys: SpinSystem) -> np.ndarray:
    """Isotropic coupling ``2 pi J I1.I2``; ground state is the singlet."""
    return 2 * math.pi * sys.j * spin_operators().I1I2


def d_lambda_h(sys: SpinSystem) -> np.ndarray:
    """``dH_AD/dlambda = H_F - H_I = pi delta (I1z - I2z)``."""
    return h_final(sys) - h_initial(sys)


def _check_lambda(lam: float) -> float:
    if not (-_ENDPOINT_TOL <= lam <= 1 + _ENDPOINT_TOL):
        raise LambdaOutOfRange(f"lambda = {lam} outside [0, 1]")
    return min(max(lam, 0.0), 1.0)


def h_ad(sys: SpinSystem, lam: float) -> np.ndarray:
    lam = _check_lambda(lam)
    if lam == 0.0:
        return h_initial(sys)
    if lam == 1.0:
        return h_final(sys)
    return (1 - lam) * h_initial(sys) + lam * h_final(sys)


# --- schedule -----------------------------------------------------------------


@dataclass(frozen=True)
class DriveSchedule:
    T: float
    N: int

    def __post_init__(self):
        if not (math.isfinite(self.T) and self.T > 0):
            raise ValueError(f"T must be positive, got {self.T}")
        if int(self.N) != self.N or self.N < 1:
            raise ValueError(f"N must be a positive integer, got {self.N}")

    @property
    def tau0(self) -> float:
        return self.T / self.N


@dataclass(frozen=True)
class SchedulePoint:
    t: float
    lam: float
    lam_dot: float


def _lambda_and_rate(s: float, T: float) -> tuple[float, float]:
    """Schedule value and time derivative at fractional time ``s = t/T``."""
    v = 0.5 * math.pi * s
    u = 0.5 * math.pi * math.sin(v) ** 2
    lam = math.sin(u) ** 2
    if s == 0.0 or s == 1.0:
        # both factors of the analytic derivative vanish exactly here
        return lam, 0.0
    lam_dot = (math.pi**2 / (4 * T)) * math.sin(2 * u) * math.sin(2 * v)
    return lam, lam_dot


def lambda_of(schedule: DriveSchedule, t: float) -> SchedulePoint:
    """Evaluate ``lambda(t) = sin^2((pi/2) sin^2(pi t / 2T))`` and its rate."""
    T = schedule.T
    if not (-_ENDPOINT_TOL * T <= t <= T * (1 + _ENDPOINT_TOL)):
        raise TimeOutOfRange(f"t = {t} outside [0, {T}]")
    t = min(max(t, 0.0), T)
    lam, lam_dot = _lambda_and_rate(t / T, T)
    return SchedulePoint(t=t, lam=lam, lam_dot=lam_dot)


# --- first-order gauge potential --------------------------------------------------


def alpha_closed_form(sys: SpinSystem, lam: float) -> float:
    """Closed-form first-order coefficient, in s^2."""
    lam = _check_lambda(lam)
    denom = 4 * sys.delta**2 * (lam - 1) ** 2 + sys.j**2
    if denom == 0:
        raise Singular("alpha is singular for J = 0 at lambda = 1")
    return 1.0 / (4 * math.pi**2 * denom)


def ansatz_coefficient(sys: SpinSystem, alpha: float) -> float:
    """Coefficient ``c`` of ``Y`` in ``i alpha [H_I, H_F] = c Y``."""
    return -4 * math.pi**2 * sys.delta * sys.j * alpha


def gauge_potential_ansatz(sys: SpinSystem, lam: float, alpha: float) -> np.ndarray:
    """First-order gauge potential ``i alpha [H_I, H_F]`` (dimensionless)."""
    _check_lambda(lam)
    return ansatz_coefficient(sys, alpha) * spin_operators().Y


def exact_gauge_potential(sys: SpinSystem, lam: float) -> np.ndarray:
    """Gauge potential from its eigenbasis matrix elements.

    ``<m|A|n> = i <m|dH|n> / (E_n - E_m)`` for every nondegenerate pair;
    pairs inside a degenerate cluster must be uncoupled by ``dH`` and are set
    to zero.

    Raises:
        DegenerateCoupling: if a degenerate pair has a nonzero ``dH`` element.
    """
    dec = numkit.herm_eig(h_ad(sys, lam))
    V, E = dec.eigenvectors, dec.eigenvalues
    dH = V.conj().T @ d_lambda_h(sys) @ V
    A = np.zeros((4, 4), dtype=complex)
    for m in range(4):
        for n in range(4):
            if m == n:
                continue
            gap = E[n] - E[m]
            if abs(gap) < DEGENERACY_TOL:
                if abs(dH[m, n]) > DEGENERACY_TOL:
                    raise DegenerateCoupling(
                        f"levels {m},{n} are degenerate but coupled by {abs(dH[m, n]):.3e}"
                    )
                continue
            A[m, n] = 1j * dH[m, n] / gap
    A = V @ A @ V.conj().T
    return 0.5 * (A + A.conj().T)


def _action_matrices(sys: SpinSystem, lam: float):
    H = h_ad(sys, lam)
    HI, HF = h_initial(sys), h_final(sys)
    P = HF - HI
    Q = numkit.commutator(H, numkit.commutator(HI, HF))
    return H, P, Q


def action_coefficients(sys: SpinSystem, lam: float) -> tuple[float, float, float]:
    """Quadratic coefficients ``(a, b, c)`` with ``S(alpha) = a alpha^2 + b alpha + c``.

    ``G = dH + alpha [H_AD, [H_I, H_F]]`` so ``a = Tr Q^2``, ``b = 2 Tr PQ``,
    ``c = Tr P^2``.
    """
    _, P, Q = _action_matrices(sys, lam)
    a = numkit.hs_inner(Q, Q)
    b = 2 * numkit.hs_inner(P, Q)
    c = numkit.hs_inner(P, P)
    return a, b, c


@dataclass(frozen=True)
class ActionReport:
    S: float
    commutator_residual: float


def action_and_residual(sys: SpinSystem, lam: float, alpha: float) -> ActionReport:
    """Action ``Tr G^2`` and the Frobenius norm of ``[H_AD, G]``.

    ``G = dH/dlambda - i [H_AD, A]`` with ``A`` the first-order ansatz.
    """
    H = h_ad(sys, lam)
    A = gauge_potential_ansatz(sys, lam, alpha)
    G = d_lambda_h(sys) - 1j * numkit.commutator(H, A)
    S = numkit.hs_inner(G, G)
    residual = float(np.linalg.norm(numkit.commutator(H, G)))
    return ActionReport(S=S, commutator_residual=residual)


def _golden_section(f, lo: float, hi: float, iters: int = 200) -> float:
    invphi = (math.sqrt(5) - 1) / 2
    x1 = hi - invphi * (hi - lo)
    x2 = lo + invphi * (hi - lo)
    f1, f2 = f(x1), f(x2)
    for _ in range(iters):
        if f1 <= f2:
            hi, x2, f2 = x2, x1, f1
            x1 = hi - invphi * (hi - lo)
            f1 = f(x1)
        else:
            lo, x1, f1 = x1, x2, f2
            x2 = lo + invphi * (hi - lo)
            f2 = f(x2)
        if hi - lo <= 1e-15 * max(abs(lo), abs(hi)):
            break
    return 0.5 * (lo + hi)


def alpha_variational_numeric(sys: SpinSystem, lam: float) -> float:
    """Minimize the action by function evaluations alone.

    Golden-section search on an expanding bracket, then parabolic steps
    through three wide-spaced samples.  The flat bottom of the action limits
    bracketing to ~sqrt(eps); the parabola, exact for a quadratic, removes
    that limit.
    """

    def S(alpha):
        return action_and_residual(sys, lam, alpha).S

    scale = max(float(np.max(np.abs(np.linalg.eigvalsh(h_ad(sys, lam))))), 1e-300)
    half = 1.0 / scale**2
    # widen until the interior of the bracket beats both ends
    for _ in range(200):
        s_lo, s_mid, s_hi = S(-half), S(0.0), S(half)
        x = _golden_section(S, -half, half)
        if abs(x) < 0.9 * half and S(x) <= min(s_lo, s_hi, s_mid):
            break
        half *= 4.0
    for _ in range(3):
        h = max(abs(x) * 1e-2, half * 1e-6)
        fm, f0, fp = S(x - h), S(x), S(x + h)
        curvature = fp - 2 * f0 + fm
        if curvature <= 0:
            break
        x = x - h * (fp - fm) / (2 * curvature)
    return x


def alpha_variational(sys: SpinSystem, lam: float, *, cross_check: bool = True) -> float:
    """Action-minimizing first-order coefficient, in s^2.

    The minimizer comes from the quadratic coefficients of the action.  With
    ``cross_check`` set, a derivative-free search must agree to 1e-10
    relative or ``ArithmeticError`` is raised.

    Raises:
        FlatAction: when ``J = 0`` so the action does not depend on alpha.
    """
    a, b, _ = action_coefficients(sys, lam)
    if sys.j == 0 or a <= 0:
        raise FlatAction("action is independent of alpha (J = 0)")
    alpha = -b / (2 * a)
    if cross_check:
        numeric = alpha_variational_numeric(sys, lam)
        if abs(numeric - alpha) > 1e-10 * abs(alpha):
            raise ArithmeticError(
                f"closed-form alpha {alpha!r} and numeric minimizer {numeric!r} disagree"
            )
    return alpha


def alpha_for(sys: SpinSystem, lam: float, mode: AlphaMode) -> float:
    if mode is AlphaMode.CLOSED_FORM:
        return alpha_closed_form(sys, lam)
    return alpha_variational(sys, lam, cross_check=False)


# --- counterdiabatic drive ---------------------------------------------------------


def kappa(sys: SpinSystem, point: SchedulePoint,
          mode: AlphaMode = AlphaMode.CLOSED_FORM) -> float:
    """Amplitude (rad/s) of ``H_lambda = kappa Y``.

    For the closed form this is ``-lam_dot delta J / (4 delta^2 (lam-1)^2 + J^2)``.
    """
    if point.lam_dot == 0.0:
        return 0.0
    if mode is AlphaMode.CLOSED_FORM:
        denom = 4 * sys.delta**2 * (point.lam - 1) ** 2 + sys.j**2
        return -point.lam_dot * sys.delta * sys.j / denom
    alpha = alpha_variational(sys, point.lam, cross_check=False)
    return point.lam_dot * ansatz_coefficient(sys, alpha)


def h_lambda(sys: SpinSystem, point: SchedulePoint,
             mode: AlphaMode = AlphaMode.CLOSED_FORM) -> np.ndarray:
    return kappa(sys, point, mode) * spin_operators().Y


def h_cd(sys: SpinSystem, point: SchedulePoint,
         mode: AlphaMode = AlphaMode.CLOSED_FORM) -> np.ndarray:
    return h_ad(sys, point.lam) + h_lambda(sys, point, mode)


@dataclass(frozen=True)
class DriveSegment:
    n: int
    lambda_n: float
    kappa_n: float
    tau0: float
    lambda_dot_n: float = 0.0


def discretize(sys: SpinSystem, schedule: DriveSchedule,
               mode: AlphaMode = AlphaMode.CLOSED_FORM,
               sampling: str = "right") -> list[DriveSegment]:
    """Split the drive into ``N`` piecewise-constant segments.

    Segment ``n`` (1-based) is sampled at ``t_n = n T / N`` (``"right"``) or at
    ``(n - 1/2) T / N`` (``"midpoint"``).  Segments are applied in increasing
    ``n``.
    """
    N, T = schedule.N, schedule.T
    if sampling not in ("right", "midpoint"):
        raise ValueError(f"unknown sampling {sampling!r}")
    shift = 0.0 if sampling == "right" else 0.5
    segments = []
    for n in range(1, N + 1):
        s = (n - shift) / N
        lam, lam_dot = _lambda_and_rate(s, T)
        point = SchedulePoint(t=s * T, lam=lam, lam_dot=lam_dot)
        segments.append(
            DriveSegment(n=n, lambda_n=lam, kappa_n=kappa(sys, point, mode),
                         tau0=schedule.tau0, lambda_dot_n=lam_dot)
        )
    return segments
