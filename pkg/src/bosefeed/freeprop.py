"""Free evolution of correlation fields between feedback stages.

For dynamics linear in ``Z = (A, B, N/N_e)`` the Heisenberg operators obey
``Z(t) = V(t) Z``. The evolved field is the input field read at ``V^T z``
with the single-atom energy phases attached, so no quadrature is needed.
"""

from dataclasses import dataclass

import numpy as np

from .corrdyn import CorrelationField, GaussianField, GaussianForm, as_z
from .errors import ConfigError


@dataclass(frozen=True)
class PropagationMatrix:
    v: np.ndarray
    t: float
    kind: str

    def __post_init__(self):
        v = np.asarray(self.v, dtype=float)
        if v.shape != (3, 3):
            raise ConfigError("propagation matrix must be 3x3")
        v.flags.writeable = False
        object.__setattr__(self, "v", v)

    def __matmul__(self, other):
        return PropagationMatrix(self.v @ other.v, self.t + other.t, self.kind)

    def inverse(self):
        return PropagationMatrix(np.linalg.inv(self.v), -self.t, self.kind)


def harmonic_Vz(t, omega, N_e):
    """Trap with frequency ``omega``: ``A`` total momentum, ``B`` summed position over ``N_e``."""
    if not omega > 0:
        raise ConfigError(f"omega must be positive, got {omega!r}")
    c, s = np.cos(omega * t), np.sin(omega * t)
    v = np.array([
        [c, -omega * N_e * s, 0.0],
        [s / (omega * N_e), c, 0.0],
        [0.0, 0.0, 1.0],
    ])
    return PropagationMatrix(v, float(t), "harmonic")


def free_particle_Vz(t, N_e):
    v = np.array([
        [1.0, 0.0, 0.0],
        [t / N_e, 1.0, 0.0],
        [0.0, 0.0, 1.0],
    ])
    return PropagationMatrix(v, float(t), "free-particle")


def energy_phase(energies, t):
    """Matrix of ``exp(-i (E_mu - E_lam) t)``."""
    ph = np.exp(-1j * np.asarray(energies) * t)
    return ph[:, None] * ph.conj()[None, :]


class EvolvedField(CorrelationField):
    def __init__(self, inner, t, V, basis, energies=None):
        super().__init__(basis, inner.n_atoms, inner.n_est, inner.depth)
        self.inner = inner
        self.t = t
        self.V = V
        self.phase = energy_phase(basis.energies if energies is None else energies, t)
        self.kind = inner.kind

    @property
    def z_independent(self):
        return self.inner.z_independent

    def _evaluate(self, z):
        zin = self.V.v.T @ as_z(z).as_array()
        return self.inner.matrix(zin) * self.phase


def evolve_correlation(D, t, V, basis, energies=None):
    """Field after free evolution for time ``t``.

    Gaussian fields stay Gaussian (closed form); anything else is wrapped
    lazily. ``energies`` defaults to the harmonic-trap spectrum of ``basis``.
    """
    if abs(V.t - t) > 1e-12 * max(1.0, abs(t)):
        raise ConfigError("propagation matrix was built for a different time")
    if D.basis.dim != basis.dim:
        raise ConfigError("field and basis truncations differ")
    if abs(V.v[2, 0]) + abs(V.v[2, 1]) + abs(V.v[0, 2]) + abs(V.v[1, 2]) > 0 or V.v[2, 2] != 1:
        raise ConfigError("propagation matrix must leave N unchanged")
    phase = energy_phase(basis.energies if energies is None else energies, t)
    form = D.gaussian_form()
    if form is not None:
        V2 = V.v[:2, :2]
        new = GaussianForm(form.rho * phase, V2 @ form.cov @ V2.T, V2 @ form.mean, form.rate)
        return GaussianField(new, basis, D.n_atoms, D.n_est, D.depth)
    return EvolvedField(D, t, V, basis, energies)
