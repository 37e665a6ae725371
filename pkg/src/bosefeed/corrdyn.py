"""Correlation fields and the feedback kernel.

A correlation field maps ``(mu, lam, z)`` to ``<phi_lam^dag exp(i z.Z) phi_mu>``
with ``Z = (A, B, N/N_e)``. At ``z = 0`` it is the single-atom density matrix.
Fields here live in a fixed-``N`` sector, so their ``gamma`` dependence is the
exact phase ``exp(i gamma (N - 1) / N_e)``; the kernel uses that to do the
``gamma``-conjugate integral in closed form.

With that, one feedback stage (measure ``A`` with resolution ``sigma``, kick by
``exp(i f(A) B)``) maps a field onto

    D'(z) = e^{i n1 gamma} / (2 pi) int dA dA' e^{i alpha (A - A' + n1 f(A))}
            U(A) M(A' - h - p) Dt(A - A'; beta) M(A' + h - p) U(A)^dag

where ``n1 = (N - 1) / N_e``, ``h = c beta n1 / 2`` with ``[p, q] = c i``, and
``Dt(x; beta)`` is the Fourier transform over ``alpha`` of the field at
``gamma = 0``. Everything on the right is a single-atom matrix.
"""

import threading
from dataclasses import dataclass, field
from math import isfinite

import numpy as np

from .errors import ConfigError, QuadratureError
from .hilbert import COMMUTATOR_SIGN, KICK_SIGN, gaussian_amplitude, linear_response
from .quadrature import gauss_legendre

MAX_DEPTH = 3
MIN_NODES = 32


@dataclass(frozen=True)
class ZVector:
    alpha: float = 0.0
    beta: float = 0.0
    gamma: float = 0.0

    def __post_init__(self):
        if not all(isfinite(v) for v in (self.alpha, self.beta, self.gamma)):
            raise ConfigError("z components must be finite")

    def __iter__(self):
        return iter((self.alpha, self.beta, self.gamma))

    def as_array(self):
        return np.array([self.alpha, self.beta, self.gamma], dtype=float)


def as_z(z):
    if isinstance(z, ZVector):
        return z
    if z is None or (np.isscalar(z) and z == 0):
        return ZVector()
    a, b, g = (float(v) for v in z)
    return ZVector(a, b, g)


@dataclass(frozen=True)
class QuadSettings:
    """Gauss-Legendre node counts for the kernel quadratures."""

    n_A: int = 192
    n_Aprime: int = 192
    n_alpha: int = 128
    range_mult: float = 8.0

    def __post_init__(self):
        for name in ("n_A", "n_Aprime", "n_alpha"):
            if getattr(self, name) < MIN_NODES:
                raise ConfigError(f"{name} must be at least {MIN_NODES}")
        if not self.range_mult > 0:
            raise ConfigError("range_mult must be positive")

    def doubled(self):
        return QuadSettings(2 * self.n_A, 2 * self.n_Aprime, 2 * self.n_alpha, self.range_mult)


@dataclass(frozen=True)
class FeedbackConfig:
    """Measurement width ``sigma``, response ``f(A) = s (A + A0)`` and atom-number estimate ``N_e``."""

    sigma: float
    s: float = -1.0
    A0: float = 0.0
    N_e: int = 1
    quad: QuadSettings = field(default_factory=QuadSettings)
    debug_flip_kick_sign: bool = False

    def __post_init__(self):
        if not self.sigma > 0:
            raise ConfigError(f"sigma must be positive, got {self.sigma!r}")
        if int(self.N_e) != self.N_e or self.N_e < 1:
            raise ConfigError(f"N_e must be a positive integer, got {self.N_e!r}")

    def response(self, A):
        return linear_response(A, self.s, self.A0)


@dataclass(frozen=True)
class GaussianForm:
    """``D(z) = rho * exp(i rate gamma + i mean.(alpha, beta) - (alpha, beta) cov (alpha, beta)^T / 2)``."""

    rho: np.ndarray
    cov: np.ndarray
    mean: np.ndarray
    rate: float

    @property
    def z_independent(self):
        return self.rate == 0 and not np.any(self.cov) and not np.any(self.mean)

    def envelope(self, z):
        a, b, g = z
        v = np.array([a, b])
        return np.exp(1j * self.rate * g + 1j * self.mean @ v - 0.5 * v @ self.cov @ v)

    def fourier(self, x, beta):
        """Scalar factor of ``int d alpha e^{-i alpha x} D(alpha, beta, 0)``; multiply by ``rho``."""
        c11, c12, c22 = self.cov[0, 0], self.cov[0, 1], self.cov[1, 1]
        if c11 <= 0:
            raise ConfigError("alpha Fourier transform of a field that does not decay in alpha")
        x = np.asarray(x, dtype=float)
        pre = np.exp(1j * self.mean[1] * beta - 0.5 * c22 * beta**2) * np.sqrt(2 * np.pi / c11)
        return pre * np.exp(-np.square(x - self.mean[0] - 1j * c12 * beta) / (2 * c11))


class CorrelationField:
    """Lazy evaluator of ``D_{mu lam}(z)``; subclasses implement :meth:`_evaluate`."""

    kind = "numeric-composed"

    def __init__(self, basis, n_atoms, n_est, depth=0):
        if n_atoms < 1:
            raise ConfigError("correlation fields need N >= 1")
        self.basis = basis
        self.n_atoms = int(n_atoms)
        self.n_est = n_est
        self.depth = depth
        self._memo = {}
        self._lock = threading.Lock()

    @property
    def rate(self):
        return (self.n_atoms - 1) / self.n_est

    @property
    def z_independent(self):
        return False

    def gaussian_form(self):
        return None

    def _evaluate(self, z):
        raise NotImplementedError

    def matrix(self, z=None):
        z = as_z(z)
        key = tuple(np.round(z.as_array(), 12))
        out = self._memo.get(key)
        if out is None:
            out = self._evaluate(z)
            out.flags.writeable = False
            with self._lock:
                self._memo.setdefault(key, out)
        return out

    def __call__(self, mu, lam, z=None):
        return complex(self.matrix(z)[mu, lam])


class GaussianField(CorrelationField):
    kind = "analytic-gaussian"

    def __init__(self, form, basis, n_atoms, n_est, depth=0):
        super().__init__(basis, n_atoms, n_est, depth)
        self.form = form

    @property
    def z_independent(self):
        return self.form.z_independent

    def gaussian_form(self):
        return self.form

    def _evaluate(self, z):
        return self.form.rho * self.form.envelope(z)


def constant_field(rho, basis, n_atoms, n_est, depth=0):
    """Field equal to ``rho`` for every ``z``."""
    form = GaussianForm(np.asarray(rho, dtype=complex), np.zeros((2, 2)), np.zeros(2), 0.0)
    return GaussianField(form, basis, n_atoms, n_est, depth)


def bec_initial(N, basis, N_e=None):
    """All ``N`` atoms in the trap ground state; ``N_e`` defaults to ``N``."""
    if N < 1:
        raise ConfigError("N must be at least 1")
    N_e = N if N_e is None else N_e
    rho = np.zeros((basis.dim, basis.dim), dtype=complex)
    rho[0, 0] = N
    cov = (N - 1) * np.diag([basis.dp0**2, basis.dq0**2 / N_e**2])
    form = GaussianForm(rho, cov, np.zeros(2), (N - 1) / N_e)
    return GaussianField(form, basis, N, N_e)


class TracedField(CorrelationField):
    """Pass-through wrapper recording every ``z`` it is evaluated at.

    It deliberately hides the analytic form of the wrapped field, which
    forces the numeric quadrature route downstream.
    """

    def __init__(self, inner):
        super().__init__(inner.basis, inner.n_atoms, inner.n_est, inner.depth)
        self.inner = inner
        self.calls = []

    @property
    def z_independent(self):
        return self.inner.z_independent

    def matrix(self, z=None):
        z = as_z(z)
        self.calls.append(z)
        return self.inner.matrix(z)

    def _evaluate(self, z):
        return self.inner.matrix(z)


def sadm(D):
    """Single-atom density matrix, the field at ``z = 0``."""
    return np.array(D.matrix(ZVector()))


def _spread(rho, w, V):
    """Mean and standard deviation of ``p`` for a single-atom matrix ``rho`` (trace-normalized)."""
    probs = np.real(np.einsum("ij,ji->i", V.conj().T, rho @ V))
    tr = probs.sum()
    if tr <= 0:
        raise ConfigError("field has non-positive trace at z = 0")
    mean = probs @ w / tr
    var = max(probs @ w**2 / tr - mean**2, 0.0)
    return mean, np.sqrt(var)


def _alpha_moments(D, beta, scale):
    """Mean and standard deviation of the variable conjugate to ``alpha``, from log-derivatives of the trace."""
    delta = 1e-2 / scale
    t0, tp, tm = (np.trace(D.matrix((a, beta, 0.0))) for a in (0.0, delta, -delta))
    if min(abs(t0), abs(tp), abs(tm)) == 0:
        raise QuadratureError("alpha tail unresolved: vanishing field trace")
    lp, lm, l0 = np.log(tp), np.log(tm), np.log(t0)
    mean = float(np.imag(lp - lm)) / (2 * delta)
    mean = (mean + np.pi / delta) % (2 * np.pi / delta) - np.pi / delta
    var = -float(np.real(lp + lm - 2 * l0)) / delta**2
    if not var > 0:
        raise QuadratureError("alpha tail unresolved: field does not decay in alpha")
    return mean, np.sqrt(var)


def _alpha_grid(D, beta, quad, scale, x_extent=0.0, tail_tol=1e-10):
    """Nodes for the ``alpha`` integral. ``x_extent`` bounds the conjugate argument, so the
    node count grows until the oscillating factor ``exp(-i alpha x)`` is resolved."""
    x_mean, x_sd = _alpha_moments(D, beta, scale)
    amax = quad.range_mult / x_sd
    t0 = abs(np.trace(D.matrix((0.0, beta, 0.0))))
    for _ in range(5):
        edge = max(abs(np.trace(D.matrix((s * amax, beta, 0.0)))) for s in (-1, 1))
        if edge <= tail_tol * t0:
            break
        amax *= 1.5
    else:
        raise QuadratureError("alpha tail unresolved")
    n = max(quad.n_alpha, int(np.ceil(0.6 * amax * (x_extent + abs(x_mean)))) + MIN_NODES)
    nodes, weights = gauss_legendre(0.0, amax, n)
    return nodes, weights, x_mean, x_sd


def alpha_fourier(D, beta, gamma, x, mu=None, lam=None, quad=None):
    """``int d alpha' exp(-i alpha' x) D(alpha', beta, gamma)`` as a matrix over ``(mu, lam)``.

    Closed form for Gaussian fields, Gauss-Legendre otherwise. ``x`` may be
    a scalar or a 1-D array (result then gains a leading axis).
    """
    if D.z_independent:
        raise ConfigError("alpha Fourier transform of a z-independent field is a delta; use the single-atom channel")
    phase = np.exp(1j * D.rate * gamma)
    x_arr = np.atleast_1d(np.asarray(x, dtype=float))
    form = D.gaussian_form()
    if form is not None:
        out = form.fourier(x_arr, beta)[:, None, None] * form.rho[None]
    else:
        quad = QuadSettings() if quad is None else quad
        nodes, weights, _, _ = _alpha_grid(
            D, beta, quad, scale=D.basis.dp0 * np.sqrt(D.n_atoms), x_extent=float(np.max(np.abs(x_arr)))
        )
        samples = np.stack([D.matrix((a, beta, 0.0)) for a in nodes])
        ker = weights[None, :] * np.exp(-1j * np.outer(x_arr, nodes))
        out = np.tensordot(ker, samples, axes=(1, 0))
    out = out * phase
    if np.ndim(x) == 0:
        out = out[0]
    if mu is not None:
        return out[..., mu, lam]
    return out


def _kick_phase_matrix(f, e, N_e, sign):
    """Elementwise factor ``exp(i sign f (e_i - e_j) / N_e)`` of the kick in the ``q`` eigenbasis, for each ``f``."""
    ph = np.exp(sign * 1j * np.multiply.outer(f, e) / N_e)
    return ph[:, :, None] * ph.conj()[:, None, :]


def _conjugate_sum(inner, coef, f, basis, cfg):
    """``sum_a coef_a U(A_a) V inner_a V^dag U(A_a)^dag`` with ``inner`` in the ``p`` eigenbasis."""
    _, V = basis.p_eig
    e, W = basis.q_eig
    T = W.conj().T @ V
    sign = -KICK_SIGN if cfg.debug_flip_kick_sign else KICK_SIGN
    d = basis.dim
    out = np.zeros((d, d), dtype=complex)
    chunk = max(1, int(2e6 // (d * d)))
    for s in range(0, len(coef), chunk):
        blk = T[None] @ inner[s:s + chunk] @ T.conj().T[None]
        ph = _kick_phase_matrix(f[s:s + chunk], e, cfg.N_e, sign)
        out += np.einsum("a,aij->ij", coef[s:s + chunk], ph * blk)
    return W @ out @ W.conj().T


def single_atom_channel(rho, cfg, basis, quad=None):
    """``int dA U(A) M(A - p) rho M(A - p) U(A)^dag`` with ``U(A) = exp(i f(A) q / N_e)``."""
    quad = cfg.quad if quad is None else quad
    w, V = basis.p_eig
    mean, sd = _spread(rho, w, V)
    nodes, weights = gauss_legendre(mean, quad.range_mult * (cfg.sigma + sd), quad.n_A)
    rho_hat = V.conj().T @ rho @ V
    m = gaussian_amplitude(nodes[:, None] - w[None, :], cfg.sigma)  # (n, d)
    inner = rho_hat[None] * (m[:, :, None] * m[:, None, :])
    return _conjugate_sum(inner, weights.astype(complex), cfg.response(nodes), basis, cfg)


def _check_pairing(D, cfg, basis):
    if D.basis.dim != basis.dim:
        raise ConfigError("field and basis truncations differ")
    if D.n_est != cfg.N_e:
        raise ConfigError(f"field was built with N_e={D.n_est}, feedback uses N_e={cfg.N_e}")


def _kernel(D, cfg, basis, z, quad):
    alpha, beta, gamma = as_z(z)
    _check_pairing(D, cfg, basis)
    rho0 = sadm(D)
    if D.z_independent:
        return single_atom_channel(rho0, cfg, basis, quad)

    R = quad.range_mult
    n1 = D.rate
    h = COMMUTATOR_SIGN * beta * n1 / 2
    w, V = basis.p_eig
    mean_p, sd_p = _spread(rho0, w, V)

    Ap_lo, Ap_hi = mean_p - R * (cfg.sigma + sd_p) - abs(h), mean_p + R * (cfg.sigma + sd_p) + abs(h)
    form = D.gaussian_form()
    scale = basis.dp0 * np.sqrt(D.n_atoms)
    if form is not None:
        x_mean, x_sd = form.mean[0], np.sqrt(form.cov[0, 0])
    else:
        x_mean, x_sd = _alpha_moments(D, beta, scale)
    A_half = R * (cfg.sigma + sd_p + x_sd) + abs(h)
    A, wA = gauss_legendre(mean_p + x_mean, A_half, quad.n_A)
    d = basis.dim

    def amplitudes(Ap):
        Mm = gaussian_amplitude(Ap[None, :] - h - w[:, None], cfg.sigma)  # (d, n')
        Mp = gaussian_amplitude(Ap[None, :] + h - w[:, None], cfg.sigma)
        return Mm, Mp

    if form is not None:
        # G(A - A') can be much narrower than the A' range, so each A node gets
        # its own A' nodes on the overlap of the two supports
        rho_hat = V.conj().T @ form.rho @ V
        inner = np.zeros((len(A), d, d), dtype=complex)
        for i, a in enumerate(A):
            lo = max(Ap_lo, a - x_mean - R * x_sd)
            hi = min(Ap_hi, a - x_mean + R * x_sd)
            if hi <= lo:
                continue
            Ap, wAp = gauss_legendre(0.5 * (lo + hi), 0.5 * (hi - lo), quad.n_Aprime)
            Mm, Mp = amplitudes(Ap)
            c = wAp * np.exp(-1j * alpha * Ap) * form.fourier(a - Ap, beta)
            inner[i] = (Mm * c) @ Mp.T
        inner *= rho_hat[None]
    else:
        Ap, wAp = gauss_legendre(0.5 * (Ap_lo + Ap_hi), 0.5 * (Ap_hi - Ap_lo), quad.n_Aprime)
        Mm, Mp = amplitudes(Ap)
        cAp = wAp * np.exp(-1j * alpha * Ap)
        # largest |A - A'| on the tensor grid
        x_extent = A_half + 0.5 * (Ap_hi - Ap_lo) + abs(x_mean)
        a_nodes, a_weights, _, _ = _alpha_grid(D, beta, quad, scale, x_extent)
        Dhat = np.stack([V.conj().T @ D.matrix((a, beta, 0.0)) @ V for a in a_nodes])
        S = np.stack([(Mm * (cAp * np.exp(1j * a * Ap))) @ Mp.T for a in a_nodes])
        E = a_weights[None, :] * np.exp(-1j * np.outer(A, a_nodes))  # (n, n_alpha)
        inner = np.tensordot(E, Dhat * S, axes=(1, 0))

    f = cfg.response(A)
    coef = wA / (2 * np.pi) * np.exp(1j * alpha * (A + n1 * f))
    return np.exp(1j * n1 * gamma) * _conjugate_sum(inner, coef, f, basis, cfg)


def feedback_reduced(D_pre, cfg, basis, trace_rtol=1e-4):
    """Single-atom density matrix right after one feedback stage."""
    out = _kernel(D_pre, cfg, basis, ZVector(), cfg.quad)
    before = np.trace(sadm(D_pre)).real
    drift = abs(np.trace(out).real - before)
    if drift > trace_rtol * before:
        raise QuadratureError(f"kernel quadrature under-resolved: trace drift {drift:.3e}")
    return out


def feedback_full(D_pre, cfg, basis, z, verify=True, rtol=1e-3):
    """Post-feedback field at ``z``. With ``verify`` the result is recomputed on doubled grids."""
    out = _kernel(D_pre, cfg, basis, z, cfg.quad)
    if verify:
        fine = _kernel(D_pre, cfg, basis, z, cfg.quad.doubled())
        scale = max(np.max(np.abs(fine)), 1e-300)
        change = np.max(np.abs(fine - out)) / scale
        if change > rtol:
            raise QuadratureError(f"kernel quadrature under-resolved: node doubling changed result by {change:.2e}")
    return out


class FeedbackField(CorrelationField):
    """Lazily evaluated post-feedback field, memoized per ``z``."""

    def __init__(self, pre, cfg, basis):
        if pre.depth + 1 > MAX_DEPTH:
            raise ConfigError(f"at most {MAX_DEPTH} feedback stages can be composed")
        _check_pairing(pre, cfg, basis)
        super().__init__(basis, pre.n_atoms, pre.n_est, pre.depth + 1)
        self.pre = pre
        self.cfg = cfg

    def _evaluate(self, z):
        return _kernel(self.pre, self.cfg, self.basis, z, self.cfg.quad)


def apply_feedback(D_pre, cfg, basis):
    """Field after one feedback stage; z-independent inputs stay z-independent."""
    if D_pre.z_independent:
        _check_pairing(D_pre, cfg, basis)
        if D_pre.depth + 1 > MAX_DEPTH:
            raise ConfigError(f"at most {MAX_DEPTH} feedback stages can be composed")
        rho = single_atom_channel(sadm(D_pre), cfg, basis)
        return constant_field(rho, basis, D_pre.n_atoms, D_pre.n_est, D_pre.depth + 1)
    return FeedbackField(D_pre, cfg, basis)


def decorrelated(D):
    """Zero-width surrogate: same single-atom density matrix, no dependence on ``z``."""
    return constant_field(sadm(D), D.basis, D.n_atoms, D.n_est, D.depth)


def decorrelation_gap(D_pre, cfg, basis):
    """Frobenius distance between the reduced map applied to ``D_pre`` and to its decorrelated surrogate."""
    exact = feedback_reduced(D_pre, cfg, basis)
    surrogate = feedback_reduced(decorrelated(D_pre), cfg, basis)
    return float(np.linalg.norm(exact - surrogate))
