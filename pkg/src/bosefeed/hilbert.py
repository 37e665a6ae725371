"""Single-atom operators in a truncated harmonic-trap energy basis.

Natural units hbar = m = 1. Position and momentum are built from the ladder
operators, ``q = dq0 (a + a^dag)`` and ``p = i dp0 (a^dag - a)``, so that
``[q, p] = i`` away from the truncation corner.

Matrices are plain complex ``numpy`` arrays; the basis object only carries
the truncation and trap frequency plus cached spectral data.
"""

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .errors import ConfigError

HERMITIAN_TOL = 1e-10

# [p, q] = COMMUTATOR_SIGN * i for the (measured, conjugate) = (p, q) pairing.
COMMUTATOR_SIGN = -1
# The kick exp(KICK_SIGN * i f q / N_e) shifts p by +f / N_e.
KICK_SIGN = -COMMUTATOR_SIGN


@dataclass(frozen=True, eq=False)
class TrapBasis:
    """Lowest ``dim`` energy eigenstates of a harmonic trap with frequency ``omega``."""

    dim: int
    omega: float = 1.0

    def __post_init__(self):
        if int(self.dim) != self.dim or self.dim < 1:
            raise ConfigError(f"dim must be a positive integer, got {self.dim!r}")
        if not self.omega > 0:
            raise ConfigError(f"omega must be positive, got {self.omega!r}")

    @property
    def dq0(self):
        return np.sqrt(1.0 / (2.0 * self.omega))

    @property
    def dp0(self):
        return np.sqrt(self.omega / 2.0)

    @cached_property
    def energies(self):
        return self.omega * (np.arange(self.dim) + 0.5)

    @cached_property
    def annihilation(self):
        return np.diag(np.sqrt(np.arange(1, self.dim)), 1).astype(complex)

    @cached_property
    def q(self):
        a = self.annihilation
        return self.dq0 * (a + a.conj().T)

    @cached_property
    def p(self):
        a = self.annihilation
        return 1j * self.dp0 * (a.conj().T - a)

    @cached_property
    def p_eig(self):
        """``(w, V)`` with ``p = V diag(w) V^dag``."""
        return np.linalg.eigh(self.p)

    @cached_property
    def q_eig(self):
        return np.linalg.eigh(self.q)

    def doubled(self):
        return TrapBasis(2 * self.dim, self.omega)


def position_op(basis):
    """Position operator ``q = dq0 (a + a^dag)``."""
    return basis.q.copy()


def momentum_op(basis):
    """Momentum operator ``p = i dp0 (a^dag - a)``."""
    return basis.p.copy()


def _check_hermitian(op):
    op = np.asarray(op)
    if op.ndim != 2 or op.shape[0] != op.shape[1]:
        raise ValueError("operator must be a square matrix")
    scale = max(1.0, float(np.max(np.abs(op))) if op.size else 1.0)
    if np.max(np.abs(op - op.conj().T), initial=0.0) > HERMITIAN_TOL * scale:
        raise ValueError("operator is not Hermitian")
    return op


def hermitian_function(op, g, eig=None):
    """Apply the scalar function ``g`` to a Hermitian matrix via its eigendecomposition.

    ``eig`` may carry a precomputed ``(w, V)`` pair for ``op``.
    """
    op = _check_hermitian(op)
    w, v = np.linalg.eigh(op) if eig is None else eig
    gw = np.asarray(g(w), dtype=complex)
    if gw.shape == ():
        gw = np.full(w.shape, gw)
    return (v * gw) @ v.conj().T


def gaussian_amplitude(x, sigma):
    """Resolution amplitude ``(2 pi sigma^2)^(-1/4) exp(-x^2 / (4 sigma^2))``.

    ``|M|^2`` is a normalized Gaussian with standard deviation ``sigma``.
    """
    return (2 * np.pi * sigma**2) ** -0.25 * np.exp(-np.square(x) / (4 * sigma**2))


def resolution_amplitude(A_val, sigma, meas_op, eig=None):
    """Operator ``M(A_val - meas_op)`` for the Gaussian resolution amplitude."""
    if not sigma > 0:
        raise ConfigError(f"sigma must be positive, got {sigma!r}")
    return hermitian_function(meas_op, lambda w: gaussian_amplitude(A_val - w, sigma), eig=eig)


def linear_response(A, s, A0):
    """Feedback response ``f(A) = s (A + A0)``."""
    return s * (np.asarray(A) + A0)


def kick_unitary(A_val, response, N_e, conj_op, eig=None):
    """Conditional kick ``exp(i f(A_val) conj_op / N_e)``.

    ``response`` is the pair ``(s, A0)``. With ``conj_op = q`` this satisfies
    ``U^dag p U = p + f(A_val) / N_e``.
    """
    if N_e == 0:
        raise ConfigError("N_e must be non-zero")
    s, A0 = response
    f = float(linear_response(A_val, s, A0))
    return hermitian_function(conj_op, lambda w: np.exp(KICK_SIGN * 1j * f * w / N_e), eig=eig)
