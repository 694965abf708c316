import math

import numpy as np
import pytest

from lls_cd import numkit
from lls_cd.errors import DimensionMismatch, NotHermitian, NotUnitary
from lls_cd.model import SpinSystem, h_final, spin_operators

from conftest import random_hermitian

IZ = np.diag([0.5, -0.5])
I2 = np.eye(2)


def test_identity_spectrum():
    dec = numkit.herm_eig(numkit.identity(4))
    assert np.allclose(dec.eigenvalues, 1.0)


def test_zero_matrix_gives_identity_eigenvectors():
    dec = numkit.herm_eig(np.zeros((4, 4)))
    assert np.allclose(dec.eigenvalues, 0.0)
    assert np.allclose(dec.eigenvectors, np.eye(4))


def test_final_hamiltonian_spectrum():
    w = numkit.herm_eig(h_final(SpinSystem(90.7, 3.24))).eigenvalues
    J = 3.24
    assert np.allclose(w, [-1.5 * math.pi * J] + [0.5 * math.pi * J] * 3, atol=1e-10)
    assert w[0] == pytest.approx(-15.268, abs=1e-3)


def test_reconstruction_sorting_and_gauge(rng):
    for _ in range(50):
        H = random_hermitian(rng, scale=100.0)
        dec = numkit.herm_eig(H)
        assert np.max(np.abs(dec.reconstruct() - H)) <= 1e-10
        assert np.all(np.diff(dec.eigenvalues) >= 0)
        for k in range(4):
            col = dec.eigenvectors[:, k]
            idx = int(np.argmax(np.abs(col)))
            assert col[idx].imag == 0.0 and col[idx].real > 0


def test_gauge_tie_goes_to_lowest_index():
    V = numkit._fix_gauge(np.array([[1j, 0], [-1j, 1]]) / math.sqrt(2))
    assert V[0, 0] == pytest.approx(1 / math.sqrt(2))


def test_non_hermitian_rejected():
    with pytest.raises(NotHermitian):
        numkit.herm_eig(np.array([[0, 1], [0, 0]]))


def test_non_finite_rejected():
    with pytest.raises(ValueError):
        numkit.herm_eig(np.array([[np.nan, 0], [0, 1]]))


def test_expm_zero_time_is_identity(rng):
    assert np.allclose(numkit.expm_i(random_hermitian(rng), 0.0), np.eye(4))


def test_full_nutation_is_identity_up_to_phase():
    ops = spin_operators()
    U = numkit.expm_i(2 * math.pi * (ops.I1x + ops.I2x), 1.0)
    assert abs(abs(np.trace(U)) / 4 - 1) < 1e-12


def test_same_generator_commutes():
    H = h_final(SpinSystem())
    A, B = numkit.expm_i(H, 0.3), numkit.expm_i(H, 1.7)
    assert np.allclose(numkit.commutator(A, B), 0, atol=1e-12)


def test_logm_identity_is_zero():
    assert np.allclose(numkit.logm_u(np.eye(4)), 0)


def test_logm_round_trip(rng):
    for _ in range(50):
        G = random_hermitian(rng)
        G *= 0.9 * math.pi / np.linalg.norm(G, 2)
        assert np.max(np.abs(numkit.logm_u(numkit.expm_i(G, 1.0)) - G)) <= 1e-10


def test_logm_branch_at_minus_one():
    G = numkit.logm_u(np.diag([1.0, -1.0]))
    assert np.allclose(np.diag(G), [0.0, -math.pi])


def test_logm_rejects_non_unitary():
    with pytest.raises(NotUnitary):
        numkit.logm_u(2 * np.eye(2))


def test_kron_basis_order():
    assert np.allclose(numkit.kron(I2, I2), np.eye(4))
    assert np.allclose(numkit.kron(IZ, I2), np.diag([0.5, 0.5, -0.5, -0.5]))
    assert np.allclose(numkit.kron(IZ, IZ), np.diag([0.25, -0.25, -0.25, 0.25]))


def test_hs_inner_values():
    ops = spin_operators()
    D, S = ops.D, -ops.I1I2
    assert numkit.hs_inner(D, D) == pytest.approx(2.0)
    assert numkit.hs_inner(S, S) == pytest.approx(0.75)
    assert numkit.hs_inner(D, S) == pytest.approx(0.0, abs=1e-15)


def test_hs_inner_dimension_mismatch():
    with pytest.raises(DimensionMismatch):
        numkit.hs_inner(np.eye(2), np.eye(4))


def test_check_unitary_tolerance():
    numkit.check_unitary(np.eye(3) * (1 + 1e-12))
    with pytest.raises(NotUnitary):
        numkit.check_unitary(np.eye(3) * (1 + 1e-8))
