import numpy as np
import pytest

from bosefeed import oracle as orc
from bosefeed.corrdyn import FeedbackConfig, bec_initial, feedback_reduced
from bosefeed.errors import ConfigError
from bosefeed.hilbert import TrapBasis
from bosefeed.observables import (
    avar_check,
    closed_form_uncertainty,
    closed_form_var_p_scaled,
    macro_variance_A,
    moments,
)


def test_ground_state_moments():
    b = TrapBasis(20)
    rho = np.zeros((20, 20))
    rho[0, 0] = 5
    m = moments(rho, b)
    assert m.var_p_scaled == pytest.approx(1, abs=1e-8)
    assert m.var_q_scaled == pytest.approx(1, abs=1e-8)
    assert m.uncertainty_product_scaled == pytest.approx(1, abs=1e-8)
    assert m.n_atoms_mean == pytest.approx(5)
    with pytest.raises(ConfigError):
        moments(np.zeros((3, 3)), TrapBasis(3))


def test_post_feedback_reports():
    b = TrapBasis(40)
    m1 = moments(feedback_reduced(bec_initial(1, b), FeedbackConfig(sigma=b.dp0, N_e=1), b), b)
    assert m1.var_p_scaled == pytest.approx(1, abs=1e-6)
    m2 = moments(feedback_reduced(bec_initial(2, b), FeedbackConfig(sigma=b.dp0, N_e=2), b), b)
    assert m2.uncertainty_product_scaled == pytest.approx(np.sqrt(1.5), abs=1e-6)
    assert closed_form_uncertainty(2, 1.0) == pytest.approx(np.sqrt(1.5))


def test_macro_variance():
    N = 5
    ob = orc.fock_basis(N, 4)
    bec = orc.bec_state(ob)
    assert macro_variance_A(bec, ob) == pytest.approx(N * ob.trap.dp0**2, abs=1e-12)
    assert macro_variance_A(bec_initial(N, ob.trap)) == pytest.approx(N * ob.trap.dp0**2, abs=1e-12)
    one = orc.fock_basis(1, 6)
    psi = np.zeros(6, dtype=complex)
    psi[[0, 1, 3]] = [0.6, 0.6j, 0.52915]
    s = orc.ManyBodyState.from_factor(psi / np.linalg.norm(psi))
    assert macro_variance_A(s, one) == pytest.approx(moments(orc.single_atom_dm(s, one), one.trap).var_p)
    # number state along an eigenmode of the measured observable
    two = orc.fock_basis(2, 4)
    eigvec = two.A_eig[1][:, 0]
    s = orc.ManyBodyState.from_factor(eigvec)
    assert macro_variance_A(s, two) == pytest.approx(0, abs=1e-12)


def test_avar_check():
    N = 3
    ob = orc.fock_basis(N, 14)
    cfg = FeedbackConfig(sigma=ob.trap.dp0, N_e=N)
    pre = orc.bec_state(ob)
    post = orc.exact_feedback(pre, cfg, ob)
    a = moments(orc.single_atom_dm(pre, ob), ob.trap)
    b = moments(orc.single_atom_dm(post, ob), ob.trap)
    mv = macro_variance_A(pre, ob)
    assert abs(avar_check(a, mv, b, N, cfg.sigma)) <= 1e-6
    wrong = 1.3 * cfg.sigma
    assert avar_check(a, mv, b, N, wrong) == pytest.approx((cfg.sigma**2 - wrong**2) / N**2, abs=1e-6)
    assert closed_form_var_p_scaled(1, 1.7) == pytest.approx(1.7**2)
