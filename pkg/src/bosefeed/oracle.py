"""Brute-force many-body reference on the fixed-N symmetric Fock space.

Everything here works directly with occupation-number states of ``N`` bosons
in the lowest ``M`` trap modes. Nothing is shared with the kernel code path
in :mod:`bosefeed.corrdyn` beyond the single-atom ``p`` and ``q`` matrices,
so the two routes check each other.
"""

from dataclasses import dataclass
from functools import cached_property
from math import comb

import numpy as np
import scipy.sparse as sp

from .errors import CapacityError, ConfigError, QuadratureError, TruncationError
from .hilbert import KICK_SIGN, TrapBasis, gaussian_amplitude, hermitian_function, linear_response
from .quadrature import gauss_legendre

DEFAULT_CAP = 5000


def _occupations(n, m):
    """Occupation vectors of ``n`` bosons in ``m`` modes, descending lexicographic order."""
    if m == 1:
        return [(n,)]
    out = []
    for first in range(n, -1, -1):
        out.extend((first,) + rest for rest in _occupations(n - first, m - 1))
    return out


class FockBasis:
    """Symmetric ``N``-atom sector over ``M`` truncated modes."""

    def __init__(self, n_atoms, n_modes, omega=1.0, cap=DEFAULT_CAP):
        if n_atoms < 0 or n_modes < 1:
            raise ConfigError("need n_atoms >= 0 and n_modes >= 1")
        dim = comb(n_atoms + n_modes - 1, n_modes - 1)
        if dim > cap:
            raise CapacityError(dim, cap)
        self.n_atoms = int(n_atoms)
        self.n_modes = int(n_modes)
        self.omega = float(omega)
        self.cap = cap
        self.states = np.array(_occupations(self.n_atoms, self.n_modes), dtype=np.int64).reshape(
            -1, self.n_modes
        )
        self.index = {tuple(s): i for i, s in enumerate(self.states.tolist())}

    def __repr__(self):
        return f"FockBasis(n_atoms={self.n_atoms}, n_modes={self.n_modes}, dim={self.dim})"

    @property
    def dim(self):
        return len(self.states)

    @cached_property
    def trap(self):
        return TrapBasis(self.n_modes, self.omega)

    @cached_property
    def lower(self):
        """The ``N - 1`` sector over the same modes."""
        if self.n_atoms == 0:
            raise ConfigError("the N = 0 sector has no lower sector")
        return FockBasis(self.n_atoms - 1, self.n_modes, self.omega, self.cap)

    @cached_property
    def hopping(self):
        """Nonzero elements ``<row| phi_cre^dag phi_ann |col>`` as parallel arrays."""
        rows, cols, cre, ann, amp = [], [], [], [], []
        for col, occ in enumerate(self.states.tolist()):
            for lam in range(self.n_modes):
                if occ[lam] == 0:
                    continue
                for mu in range(self.n_modes):
                    if mu == lam:
                        rows.append(col)
                        a = float(occ[lam])
                    else:
                        new = list(occ)
                        new[lam] -= 1
                        new[mu] += 1
                        rows.append(self.index[tuple(new)])
                        a = np.sqrt(occ[lam] * (occ[mu] + 1.0))
                    cols.append(col)
                    cre.append(mu)
                    ann.append(lam)
                    amp.append(a)
        return tuple(np.asarray(x) for x in (rows, cols, cre, ann, amp))

    def annihilator(self, mu):
        """Sparse ``phi_mu`` mapping this sector onto :attr:`lower`."""
        low = self.lower
        occ = self.states
        src = np.nonzero(occ[:, mu] > 0)[0]
        dst_states = occ[src].copy()
        dst_states[:, mu] -= 1
        dst = np.array([low.index[tuple(s)] for s in dst_states.tolist()], dtype=np.int64)
        vals = np.sqrt(occ[src, mu].astype(float))
        return sp.csr_matrix((vals, (dst, src)), shape=(low.dim, self.dim))

    @cached_property
    def annihilators(self):
        return [self.annihilator(mu) for mu in range(self.n_modes)]

    @cached_property
    def A(self):
        return second_quantize(self.trap.p, self)

    @cached_property
    def Q(self):
        """Second-quantized total position (``B * N_e``)."""
        return second_quantize(self.trap.q, self)

    @cached_property
    def A_eig(self):
        # exp(-i pi/2 sum_lam lam n_lam) rotates p into dp0 (a + a^dag), a real symmetric matrix
        phase = np.exp(-0.5j * np.pi * (self.states @ np.arange(self.n_modes)))
        R = phase[:, None] * self.A * phase.conj()[None, :]
        w, U = np.linalg.eigh(R.real)
        return w, phase.conj()[:, None] * U

    @cached_property
    def Q_eig(self):
        w, U = np.linalg.eigh(self.Q.real)
        return w, U.astype(complex)

    @cached_property
    def energy_levels(self):
        return self.states @ self.trap.energies

    @cached_property
    def top_mode_mask(self):
        return self.states[:, -1] > 0

    @cached_property
    def safe_mask(self):
        """States leaving the top mode empty, on which truncated commutators are exact."""
        return self.states[:, -1] == 0


def fock_basis(N, M, omega=1.0, cap=DEFAULT_CAP):
    if N < 1:
        raise ConfigError("N must be a positive integer")
    return FockBasis(N, M, omega, cap)


def second_quantize(sop, basis):
    """``sum_{mu lam} <mu|sop|lam> phi_mu^dag phi_lam`` using the leading ``M x M`` block of ``sop``."""
    sop = np.asarray(sop)
    M = basis.n_modes
    if sop.shape[0] < M:
        raise ConfigError(f"single-atom operator of size {sop.shape[0]} is smaller than M={M}")
    out = np.zeros((basis.dim, basis.dim), dtype=complex)
    if basis.n_atoms == 0:
        return out
    rows, cols, cre, ann, amp = basis.hopping
    np.add.at(out, (rows, cols), sop[cre, ann] * amp)
    return out


def macro_A(basis, p_op=None):
    return basis.A.copy() if p_op is None else second_quantize(p_op, basis)


def macro_B(basis, N_e, q_op=None):
    if N_e == 0:
        raise ConfigError("N_e must be non-zero")
    Q = basis.Q if q_op is None else second_quantize(q_op, basis)
    return Q / N_e


def number_op(basis):
    return basis.n_atoms * np.eye(basis.dim, dtype=complex)


@dataclass
class ManyBodyState:
    """Density matrix on a :class:`FockBasis`; ``factor`` optionally holds ``L`` with ``rho = L L^dag``."""

    rho: np.ndarray
    factor: np.ndarray = None

    def __post_init__(self):
        self.rho = np.asarray(self.rho, dtype=complex)

    @classmethod
    def from_factor(cls, L):
        L = np.asarray(L, dtype=complex)
        if L.ndim == 1:
            L = L[:, None]
        return cls(L @ L.conj().T, L)

    def get_factor(self, rel_cut=1e-14):
        if self.factor is None:
            w, v = np.linalg.eigh(0.5 * (self.rho + self.rho.conj().T))
            keep = w > rel_cut * max(w.max(), 0.0)
            self.factor = v[:, keep] * np.sqrt(w[keep])
        return self.factor

    @property
    def trace(self):
        return float(np.trace(self.rho).real)

    def min_eigenvalue(self):
        return float(np.linalg.eigvalsh(0.5 * (self.rho + self.rho.conj().T)).min())

    def validate(self, tol=1e-10):
        if np.max(np.abs(self.rho - self.rho.conj().T)) > tol:
            raise ConfigError("density matrix is not Hermitian")
        if abs(self.trace - 1.0) > tol:
            raise ConfigError(f"density matrix trace {self.trace} != 1")
        if self.min_eigenvalue() < -tol:
            raise ConfigError("density matrix is not positive semidefinite")
        return self


def bec_state(basis):
    """All atoms in the trap ground state."""
    psi = np.zeros(basis.dim, dtype=complex)
    occ = [0] * basis.n_modes
    occ[0] = basis.n_atoms
    psi[basis.index[tuple(occ)]] = 1.0
    return ManyBodyState.from_factor(psi)


def random_state(basis, rng, rank=2, support_modes=None):
    """Random (generally correlated) mixed state on occupations restricted to ``support_modes`` lowest modes."""
    support_modes = basis.n_modes if support_modes is None else support_modes
    allowed = np.all(basis.states[:, support_modes:] == 0, axis=1)
    L = np.zeros((basis.dim, rank), dtype=complex)
    k = int(allowed.sum())
    L[allowed] = rng.normal(size=(k, rank)) + 1j * rng.normal(size=(k, rank))
    L /= np.sqrt(np.sum(np.abs(L) ** 2))
    return ManyBodyState.from_factor(L)


def expectation(state, op):
    return complex(np.sum(state.rho.T * op))


def kick_sign(cfg):
    return -KICK_SIGN if getattr(cfg, "debug_flip_kick_sign", False) else KICK_SIGN


def kick_operator(basis, cfg, A_val):
    """Many-body kick ``U(A) = exp(i f(A) B)`` in the Fock basis."""
    q, V = basis.Q_eig
    f = float(linear_response(A_val, cfg.s, cfg.A0))
    phase = np.exp(kick_sign(cfg) * 1j * f * q / cfg.N_e)
    return (V * phase) @ V.conj().T


def exact_feedback(state, cfg, basis, n_nodes=201, trace_tol=1e-8, leak_tol=1e-6, range_mult=8.0, max_refine=2):
    """Average ``U(A) M(A - A_op) rho M(A - A_op)^dag U(A)^dag`` over outcomes ``A`` by Gauss-Legendre quadrature.

    The output is not renormalized. The node count is doubled up to
    ``max_refine`` times while the trace drifts by more than ``trace_tol``;
    after that :class:`QuadratureError` is raised. :class:`TruncationError`
    is raised when more than ``leak_tol`` of the population reaches the top mode.
    """
    for _ in range(max_refine + 1):
        out = _feedback_once(state, cfg, basis, n_nodes, range_mult)
        drift = abs(out.trace - state.trace)
        if drift <= trace_tol:
            break
        n_nodes *= 2
    else:
        raise QuadratureError(f"quadrature under-resolved: trace drift {drift:.3e} > {trace_tol:.1e}")
    leak = float(np.real(np.diag(out.rho))[basis.top_mode_mask].sum())
    if leak > leak_tol:
        raise TruncationError(
            f"population {leak:.3e} in top mode {basis.n_modes - 1} exceeds {leak_tol:.1e}; increase n_modes"
        )
    return out


def _feedback_once(state, cfg, basis, n_nodes, range_mult):
    sigma = cfg.sigma
    a_vals, Va = basis.A_eig
    q_vals, Vq = basis.Q_eig
    b_vals = q_vals / cfg.N_e
    L = state.get_factor()
    psi = Va.conj().T @ L
    T = Vq.conj().T @ Va

    pops = np.sum(np.abs(psi) ** 2, axis=1)
    mean_A = float(pops @ a_vals)
    sd_A = float(np.sqrt(max(pops @ a_vals**2 - mean_A**2, 0.0)))
    nodes, weights = gauss_legendre(mean_A, range_mult * (sigma + sd_A), n_nodes)

    dim, r = psi.shape
    sign = kick_sign(cfg)
    blocks = []
    chunk = max(1, int(4e6 // (dim * r)))
    for start in range(0, len(nodes), chunk):
        A_k = nodes[start:start + chunk]
        w_k = weights[start:start + chunk]
        amps = gaussian_amplitude(A_k[:, None] - a_vals[None, :], sigma)  # (n, dim)
        X = amps[:, :, None] * psi[None, :, :]  # (n, dim, r)
        Y = np.matmul(T, X)
        f = linear_response(A_k, cfg.s, cfg.A0)
        Y *= np.exp(sign * 1j * f[:, None] * b_vals[None, :])[:, :, None]
        Y *= np.sqrt(w_k)[:, None, None]
        blocks.append(Y.transpose(1, 0, 2).reshape(dim, -1))
    F = Vq @ np.concatenate(blocks, axis=1)
    return ManyBodyState(F @ F.conj().T, F if F.shape[1] <= dim else None)


def single_atom_dm(state, basis):
    """``rho_{mu lam} = <phi_lam^dag phi_mu>``; trace equals N."""
    rows, cols, cre, ann, amp = basis.hopping
    out = np.zeros((basis.n_modes, basis.n_modes), dtype=complex)
    np.add.at(out, (ann, cre), amp * state.rho[cols, rows])
    return out


def _weyl(basis, z, N_e):
    alpha, beta, gamma = z
    G = alpha * basis.A + (beta / N_e) * basis.Q
    T = hermitian_function(G, lambda w: np.exp(1j * w))
    return T * np.exp(1j * gamma * basis.n_atoms / N_e)


def correlation_matrix(state, basis, z, N_e):
    """All entries ``<phi_lam^dag exp(i z.Z) phi_mu>`` with ``Z = (A, B, N/N_e)`` on the ``N-1`` sector."""
    if basis.n_atoms == 0:
        raise ConfigError("correlation function undefined in the N = 0 sector")
    low = basis.lower
    T = _weyl(low, z, N_e)
    L = state.get_factor()
    G = [phi @ L for phi in basis.annihilators]  # each (dim_low, r)
    TG = [T @ g for g in G]
    M = basis.n_modes
    out = np.empty((M, M), dtype=complex)
    for mu in range(M):
        for lam in range(M):
            out[mu, lam] = np.vdot(G[lam], TG[mu])
    return out


def correlation_at(state, basis, z, mu, lam, N_e):
    return correlation_matrix(state, basis, z, N_e)[mu, lam]


def free_evolve(state, basis, t, energies=None):
    """Exact non-interacting evolution ``exp(-i H t) rho exp(i H t)``."""
    E = basis.energy_levels if energies is None else basis.states @ np.asarray(energies)[: basis.n_modes]
    ph = np.exp(-1j * E * t)
    rho = ph[:, None] * state.rho * ph.conj()[None, :]
    factor = None if state.factor is None else ph[:, None] * state.factor
    return ManyBodyState(rho, factor)


def macro_characteristic(state, basis, z, N_e):
    """``<exp(i (alpha A + beta B + gamma N / N_e))>``."""
    return complex(np.sum(state.rho.T * _weyl(basis, z, N_e)))


def macro_variance_A(state, basis):
    A = basis.A
    m = expectation(state, A).real
    return expectation(state, A @ A).real - m**2


def oracle_field(state, basis, N_e):
    """Correlation field read directly off an oracle state (lazy, memoized)."""
    from .corrdyn import CorrelationField

    class OracleField(CorrelationField):
        kind = "oracle"

        def _evaluate(self, z):
            return correlation_matrix(state, basis, z, N_e)

    return OracleField(basis.trap, basis.n_atoms, N_e)
