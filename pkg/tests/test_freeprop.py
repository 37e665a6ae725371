import numpy as np
import pytest

from bosefeed import oracle as orc
from bosefeed.corrdyn import FeedbackConfig, apply_feedback, bec_initial, sadm
from bosefeed.errors import ConfigError
from bosefeed.freeprop import EvolvedField, energy_phase, evolve_correlation, free_particle_Vz, harmonic_Vz
from bosefeed.hilbert import TrapBasis


@pytest.mark.parametrize("make", [lambda t: harmonic_Vz(t, 1.3, 3), lambda t: free_particle_Vz(t, 3)])
def test_group_identities(make):
    for t in (0.2, 1.7, -0.9):
        assert np.max(np.abs((make(-t) @ make(t)).v - np.eye(3))) <= 1e-12
        assert np.max(np.abs((make(t) @ make(0.4)).v - make(t + 0.4).v)) <= 1e-12
        assert np.allclose(make(t).v[2], [0, 0, 1]) and np.allclose(make(t).v[:, 2], [0, 0, 1])
    assert np.allclose(make(0.0).v, np.eye(3))


def test_full_period_and_small_t():
    assert np.allclose(harmonic_Vz(2 * np.pi / 1.3, 1.3, 2).v, np.eye(3), atol=1e-12)
    t, w, N_e = 1e-3, 0.5, 2
    gap = np.abs(harmonic_Vz(t, w, N_e).v - free_particle_Vz(t, N_e).v)
    # entries measured in their natural scales: 1, t / N_e and N_e / t
    scaled = gap / np.array([[1, N_e / t, 1], [t / N_e, 1, 1], [1, 1, 1]])
    assert np.max(scaled) <= (w * t) ** 2
    assert np.linalg.det(free_particle_Vz(2.0, 4).v[:2, :2]) == pytest.approx(1)
    with pytest.raises(ConfigError):
        harmonic_Vz(1.0, 0.0, 2)


def test_heisenberg_A_matches_oracle():
    N, N_e = 2, 2
    ob = orc.fock_basis(N, 6)
    t = np.pi / 4
    V = harmonic_Vz(t, 1.0, N_e).v
    U = np.diag(np.exp(-1j * ob.energy_levels * t))
    A_t = U.conj().T @ ob.A @ U
    predicted = V[0, 0] * ob.A + V[0, 1] * ob.Q / N_e
    assert np.max(np.abs(A_t - predicted)) < 1e-8


def test_wrapper_identities():
    b = TrapBasis(12)
    cfg = FeedbackConfig(sigma=b.dp0, N_e=2)
    D = apply_feedback(bec_initial(2, b), cfg, b)
    t = 0.7
    E = evolve_correlation(D, t, harmonic_Vz(t, 1.0, 2), b)
    assert isinstance(E, EvolvedField)
    rho = sadm(D)
    assert np.max(np.abs(sadm(E) - energy_phase(b.energies, t) * rho)) <= 1e-12
    assert np.allclose(np.diag(sadm(E)), np.diag(rho), atol=1e-12)
    same = evolve_correlation(D, 0.0, harmonic_Vz(0.0, 1.0, 2), b)
    assert np.allclose(same.matrix((0.2, 0.3, 0.1)), D.matrix((0.2, 0.3, 0.1)))
    with pytest.raises(ConfigError):
        evolve_correlation(D, 1.0, harmonic_Vz(0.5, 1.0, 2), b)


def test_bec_quarter_period_matches_oracle(rng):
    N = 3
    ob = orc.fock_basis(N, 12)
    b = ob.trap
    t = np.pi / 2
    E = evolve_correlation(bec_initial(N, b), t, harmonic_Vz(t, 1.0, N), b)
    # alpha width moves to the beta direction, scaled by omega N_e
    assert E.form.cov[1, 1] == pytest.approx((N - 1) * b.dp0**2 / N**2)
    later = orc.free_evolve(orc.bec_state(ob), ob, t)
    for z in rng.uniform(-1, 1, size=(5, 3)):
        assert np.max(np.abs(E.matrix(z) - orc.correlation_matrix(later, ob, z, N))) < 1e-8


def test_random_state_evolution_matches_oracle(rng):
    ob = orc.fock_basis(2, 6)
    s = orc.random_state(ob, rng, rank=2)
    D = orc.oracle_field(s, ob, 2)
    for t in (np.pi / 2, np.pi):
        E = evolve_correlation(D, t, harmonic_Vz(t, 1.0, 2), ob.trap)
        later = orc.free_evolve(s, ob, t)
        for z in rng.uniform(-1, 1, size=(3, 3)):
            assert np.max(np.abs(E.matrix(z) - orc.correlation_matrix(later, ob, z, 2))) <= 1e-6
