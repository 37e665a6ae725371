import numpy as np
import pytest

from bosefeed.errors import ConfigError
from bosefeed.hilbert import (
    TrapBasis,
    gaussian_amplitude,
    hermitian_function,
    kick_unitary,
    momentum_op,
    position_op,
    resolution_amplitude,
)
from bosefeed.quadrature import gauss_legendre


def test_widths_and_spectrum():
    b = TrapBasis(10, omega=2.5)
    assert b.dq0 * b.dp0 == pytest.approx(0.5, abs=1e-15)
    assert np.allclose(np.diff(b.energies), 2.5)


@pytest.mark.parametrize("dim, omega", [(0, 1.0), (3, 0.0), (2.5, 1.0)])
def test_bad_basis(dim, omega):
    with pytest.raises(ConfigError):
        TrapBasis(dim, omega)


def test_two_level_operators():
    b = TrapBasis(2)
    assert np.allclose(position_op(b), b.dq0 * np.array([[0, 1], [1, 0]]))
    assert np.allclose(momentum_op(b), np.array([[0, -1j * b.dp0], [1j * b.dp0, 0]]))


def test_ground_state_moments_and_commutator():
    b = TrapBasis(30)
    q, p = position_op(b), momentum_op(b)
    assert np.allclose(np.diag(q), 0)
    assert (q @ q)[0, 0].real == pytest.approx(b.dq0**2, abs=1e-14)
    assert (p @ p)[0, 0].real == pytest.approx(b.dp0**2, abs=1e-14)
    comm = q @ p - p @ q
    assert np.max(np.abs(comm[:-1, :-1] - 1j * np.eye(29))) < 1e-12
    assert np.max(np.abs(q - q.conj().T)) <= 1e-12
    assert np.max(np.abs(p - p.conj().T)) <= 1e-12


def test_hermitian_function():
    b = TrapBasis(12)
    p = b.p
    assert np.allclose(hermitian_function(p, lambda x: x), p, atol=1e-12)
    assert np.allclose(hermitian_function(p, lambda x: 1.0), np.eye(12), atol=1e-12)
    assert np.max(np.abs(hermitian_function(p, lambda x: x**2) - p @ p)) < 1e-10
    with pytest.raises(ValueError, match="not Hermitian"):
        hermitian_function(np.array([[0, 1], [0, 0]]), lambda x: x)


def test_resolution_amplitude():
    one = TrapBasis(1)
    val = resolution_amplitude(0.0, 0.7, one.p)
    assert val[0, 0] == pytest.approx((2 * np.pi * 0.49) ** -0.25)
    with pytest.raises(ConfigError):
        resolution_amplitude(0.0, 0.0, one.p)
    b = TrapBasis(12)
    big = resolution_amplitude(0.0, 1e3, b.p)
    assert np.max(np.abs(big / (2 * np.pi * 1e6) ** -0.25 - np.eye(12))) < 1e-4


def test_povm_completeness():
    b, sigma = TrapBasis(12), 0.8
    half = 8 * sigma + 8 * b.dp0 * np.sqrt(b.dim)
    nodes, weights = gauss_legendre(0.0, half, 400)
    total = sum(w * resolution_amplitude(a, sigma, b.p, eig=b.p_eig) @ resolution_amplitude(a, sigma, b.p, eig=b.p_eig)
                for a, w in zip(nodes, weights))
    assert np.max(np.abs(total[:10, :10] - np.eye(10))) < 1e-8


def test_gaussian_amplitude_is_normalized():
    x, w = gauss_legendre(0.0, 20.0, 200)
    assert np.sum(w * gaussian_amplitude(x, 1.3) ** 2) == pytest.approx(1.0, abs=1e-12)


def test_kick_unitary():
    b = TrapBasis(40)
    assert np.allclose(kick_unitary(-1.0, (-1.0, 1.0), 1, b.q), np.eye(40))
    U = kick_unitary(0.3, (1.5, 0.2), 1, b.q)
    assert np.max(np.abs(U.conj().T @ U - np.eye(40))) <= 1e-10
    # f = 1
    U = kick_unitary(1.0, (1.0, 0.0), 1, b.q)
    shifted = U.conj().T @ b.p @ U
    assert np.max(np.abs(shifted[:20, :20] - b.p[:20, :20] - np.eye(20))) <= 1e-6
    with pytest.raises(ConfigError):
        kick_unitary(1.0, (1.0, 0.0), 0, b.q)


def test_truncation_doubling_leading_block():
    b = TrapBasis(20)
    big = b.doubled()
    for make in (position_op, momentum_op):
        assert np.max(np.abs(make(big)[:20, :20] - make(b))) <= 1e-8
    m = resolution_amplitude(0.4, 1.0, b.p)
    mb = resolution_amplitude(0.4, 1.0, big.p)
    assert np.max(np.abs(m[:8, :8] - mb[:8, :8])) <= 1e-8
