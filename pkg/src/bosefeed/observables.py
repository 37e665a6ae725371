"""Per-atom moments, uncertainty products and the macroscopic variance relation."""

from dataclasses import asdict, dataclass

import numpy as np

from .errors import ConfigError


@dataclass(frozen=True)
class MomentReport:
    mean_p: float
    mean_q: float
    var_p: float
    var_q: float
    var_p_scaled: float
    var_q_scaled: float
    uncertainty_product_scaled: float
    n_atoms_mean: float

    def as_dict(self):
        return asdict(self)


def moments(rho, basis):
    """Per-atom moments of ``p`` and ``q``; ``rho`` is normalized by its own trace."""
    rho = np.asarray(rho)
    n = float(np.trace(rho).real)
    if not n > 0:
        raise ConfigError("density matrix trace must be positive")
    p, q = basis.p, basis.q

    def ev(op):
        return float(np.trace(rho @ op).real) / n

    mean_p, mean_q = ev(p), ev(q)
    var_p = max(ev(p @ p) - mean_p**2, 0.0)
    var_q = max(ev(q @ q) - mean_q**2, 0.0)
    return MomentReport(
        mean_p=mean_p,
        mean_q=mean_q,
        var_p=var_p,
        var_q=var_q,
        var_p_scaled=var_p / basis.dp0**2,
        var_q_scaled=var_q / basis.dq0**2,
        uncertainty_product_scaled=float(np.sqrt(var_p * var_q) / (basis.dq0 * basis.dp0)),
        n_atoms_mean=n,
    )


def macro_variance_A(obj, basis=None):
    """Variance of the total momentum.

    ``obj`` is either an oracle :class:`ManyBodyState` (then ``basis`` is its
    Fock basis) or a Gaussian correlation field. For a field,
    ``<A^2> = Tr(p X) + Tr(rho p^2)`` where ``X = -i dD/d alpha`` at ``z = 0``
    and ``<A> = Tr(rho p)``.
    """
    from .corrdyn import CorrelationField
    from .oracle import ManyBodyState, macro_variance_A as oracle_variance

    if isinstance(obj, ManyBodyState):
        if basis is None:
            raise ConfigError("oracle states need their Fock basis")
        return float(oracle_variance(obj, basis))
    if isinstance(obj, CorrelationField):
        form = obj.gaussian_form()
        if form is None:
            raise ConfigError("field-path macroscopic variance needs an analytic Gaussian field")
        p = obj.basis.p
        rho = form.rho
        mean = np.trace(rho @ p).real
        second = form.mean[0] * mean + np.trace(rho @ p @ p).real
        return float(second - mean**2)
    raise TypeError(f"unsupported object {type(obj).__name__}")


def avar_check(pre_report, pre_macro_var, post_report, N, sigma):
    """Residual of the post-feedback per-atom variance against the knowledge-gain relation."""
    expected = pre_report.var_p - pre_macro_var / N**2 + sigma**2 / N**2
    return float(post_report.var_p - expected)


def closed_form_var_p_scaled(N, sigma_over_dp0):
    """BEC closed form with ``s = -1``, ``A0 = 0``, ``N_e = N``."""
    return 1.0 - 1.0 / N + sigma_over_dp0**2 / N**2


def closed_form_uncertainty(N, sigma_over_dp0):
    return float(np.sqrt(closed_form_var_p_scaled(N, sigma_over_dp0) * (1.0 + 1.0 / sigma_over_dp0**2)))
