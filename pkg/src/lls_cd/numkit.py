"""Dense complex linear algebra for small Hermitian systems.

Matrices are plain ``numpy`` arrays of dtype ``complex128``.  Every routine
here is a pure function; nothing is cached or mutated.

Exponentials and logarithms go through an exact spectral decomposition
rather than a Padé/scaling-squaring series, which is exact to rounding for
the 4x4 Hermitian operators used throughout the package.
"""

from dataclasses import dataclass

import numpy as np
from numpy.typing import NDArray
from scipy.linalg import schur

from .errors import DimensionMismatch, NotHermitian, NotUnitary

HERMITIAN_TOL = 1e-12
UNITARY_TOL = 1e-10
# relative slack used when deciding that two eigenvector components tie
_TIE_TOL = 1e-12

ComplexMatrix = NDArray[np.complex128]


@dataclass(frozen=True)
class SpectralDecomposition:
    """Eigenvalues (ascending) and gauge-fixed eigenvectors (as columns)."""

    eigenvalues: NDArray[np.float64]
    eigenvectors: ComplexMatrix

    def reconstruct(self) -> ComplexMatrix:
        V = self.eigenvectors
        return (V * self.eigenvalues) @ V.conj().T


def as_matrix(A) -> ComplexMatrix:
    M = np.asarray(A, dtype=np.complex128)
    if M.ndim != 2 or M.shape[0] != M.shape[1] or M.shape[0] < 1:
        raise DimensionMismatch(f"expected a square matrix, got shape {M.shape}")
    if not np.all(np.isfinite(M)):
        raise ValueError("matrix has non-finite entries")
    return M


def identity(dim: int) -> ComplexMatrix:
    return np.eye(dim, dtype=np.complex128)


def hermiticity_error(A) -> float:
    M = np.asarray(A)
    return float(np.max(np.abs(M - M.conj().T))) if M.size else 0.0


def unitarity_error(U) -> float:
    M = np.asarray(U)
    return float(np.max(np.abs(M.conj().T @ M - np.eye(M.shape[0]))))


def check_hermitian(A, tol: float = HERMITIAN_TOL) -> ComplexMatrix:
    M = as_matrix(A)
    # scale the tolerance with the matrix magnitude so rad/s-sized entries pass
    scale = max(1.0, float(np.max(np.abs(M))))
    err = hermiticity_error(M)
    if err > tol * scale:
        raise NotHermitian(f"max |A - A^dagger| = {err:.3e} exceeds {tol:.1e}")
    return M


def check_unitary(U, tol: float = UNITARY_TOL) -> ComplexMatrix:
    M = as_matrix(U)
    err = unitarity_error(M)
    if err > tol:
        raise NotUnitary(f"max |U^dagger U - 1| = {err:.3e} exceeds {tol:.1e}")
    return M


def _fix_gauge(V: ComplexMatrix) -> ComplexMatrix:
    """Rotate each column so its largest component is real and positive.

    Ties between components (within a relative 1e-12) go to the lowest index.
    """
    V = V.copy()
    for k in range(V.shape[1]):
        col = V[:, k]
        mags = np.abs(col)
        idx = int(np.flatnonzero(mags >= mags.max() * (1.0 - _TIE_TOL))[0])
        phase = col[idx] / mags[idx]
        V[:, k] = col / phase
        V[idx, k] = mags[idx]
    return V


def herm_eig(H) -> SpectralDecomposition:
    """Spectral decomposition of a Hermitian matrix.

    Raises:
        NotHermitian: if ``H`` is not self-adjoint within tolerance.
    """
    M = check_hermitian(H)
    # symmetrize so LAPACK sees an exactly Hermitian input
    M = 0.5 * (M + M.conj().T)
    w, V = np.linalg.eigh(M)
    return SpectralDecomposition(eigenvalues=w, eigenvectors=_fix_gauge(V))


def expm_i(H, t: float) -> ComplexMatrix:
    """Return ``exp(-i H t)``."""
    if not np.isfinite(t):
        raise ValueError("t must be finite")
    dec = herm_eig(H)
    V = dec.eigenvectors
    return (V * np.exp(-1j * dec.eigenvalues * t)) @ V.conj().T


def logm_u(U) -> ComplexMatrix:
    """Principal Hermitian generator ``G`` with ``U = exp(-i G)``.

    Eigenphases of ``U`` are mapped into (-pi, pi]; an eigenvalue of exactly
    -1 is reported with phase +pi, i.e. generator eigenvalue -pi.
    """
    M = check_unitary(U)
    # a unitary is normal, so the Schur form is diagonal up to rounding
    T, Z = schur(M, output="complex")
    z = np.diag(T)
    phase = np.angle(z)
    # np.angle returns values in (-pi, pi]; snap -pi onto the +pi branch
    phase = np.where(np.isclose(phase, -np.pi, rtol=0.0, atol=1e-15), np.pi, phase)
    G = (Z * (-phase)) @ Z.conj().T
    return 0.5 * (G + G.conj().T)


def kron(A, B) -> ComplexMatrix:
    """Tensor product with ``A`` acting on the leftmost (first) factor."""
    return np.kron(np.asarray(A, dtype=np.complex128), np.asarray(B, dtype=np.complex128))


def hs_inner(A, B) -> float:
    """Hilbert-Schmidt overlap ``Tr[A B]`` of two Hermitian operators."""
    A = np.asarray(A)
    B = np.asarray(B)
    if A.shape != B.shape:
        raise DimensionMismatch(f"shapes {A.shape} and {B.shape} differ")
    # Tr[A B] = sum_ij A_ij B_ji
    return float(np.real(np.sum(A * B.T)))


def commutator(A, B) -> ComplexMatrix:
    return A @ B - B @ A


def conjugate(U, rho) -> ComplexMatrix:
    """``U rho U^dagger``."""
    return U @ rho @ U.conj().T
