"""Run configuration: one JSON document, every default explicit."""

import json
from dataclasses import asdict, dataclass, field, fields

from .corrdyn import FeedbackConfig, QuadSettings
from .errors import ConfigError
from .hilbert import TrapBasis

EXPERIMENTS = ("fig2", "fig3", "validate", "single")
DEFAULT_N_LIST = [1, 2, 3, 4, 5, 6, 8, 10, 15, 20, 30, 50, 100]


def _default_modes():
    # enough modes that the top-mode leakage stays below 1e-6 at sigma/dp0 = 2
    return {"1": 40, "2": 18, "3": 14, "4": 10, "5": 10}


@dataclass
class OracleSettings:
    n_modes: dict = field(default_factory=_default_modes)
    a_nodes: int = 201
    sigma_over_dp0: float = 2.0
    cap: int = 5000

    def modes_for(self, N):
        try:
            return int(self.n_modes[str(N)])
        except KeyError:
            raise ConfigError(f"oracle.n_modes has no entry for N={N}") from None


@dataclass
class ValidateSettings:
    n_atoms: list = field(default_factory=lambda: [1, 2, 3])
    seed: int = 1234
    decorrelation_sigmas: list = field(default_factory=lambda: [2.0, 5.0, 10.0, 20.0])
    decorrelation_dim: int = 240
    debug_flip_kick_sign: bool = False


@dataclass
class RunConfig:
    experiment: str = "fig2"
    omega: float = 1.0
    sigma_over_dp0: list = field(default_factory=lambda: [1.0, 1.5, 2.0])
    n_atoms: list = field(default_factory=lambda: list(DEFAULT_N_LIST))
    s: float = -1.0
    A0: float = 0.0
    N_e_policy: object = "equal-N"
    dim: int = 40
    oracle: OracleSettings = field(default_factory=OracleSettings)
    quad: QuadSettings = field(default_factory=QuadSettings)
    validate: ValidateSettings = field(default_factory=ValidateSettings)
    out_path: str = None

    def __post_init__(self):
        if self.experiment not in EXPERIMENTS:
            raise ConfigError(f"experiment must be one of {EXPERIMENTS}, got {self.experiment!r}")
        if not self.sigma_over_dp0 or not self.n_atoms:
            raise ConfigError("sigma_over_dp0 and n_atoms must be non-empty")
        if any(not x > 0 for x in self.sigma_over_dp0):
            raise ConfigError("sigma_over_dp0 entries must be positive")
        if any(int(n) != n or n < 1 for n in self.n_atoms):
            raise ConfigError("n_atoms entries must be positive integers")
        if not self.omega > 0:
            raise ConfigError("omega must be positive")
        if int(self.dim) != self.dim or self.dim < 2:
            raise ConfigError("dim must be an integer >= 2")
        self.n_est(1)

    def n_est(self, N):
        policy = self.N_e_policy
        if policy == "equal-N":
            return N
        if isinstance(policy, dict) and set(policy) == {"fixed"}:
            value = policy["fixed"]
            if isinstance(value, int) and value >= 1:
                return value
        raise ConfigError(f"N_e_policy must be 'equal-N' or {{'fixed': positive int}}, got {policy!r}")

    def trap(self, dim=None):
        return TrapBasis(self.dim if dim is None else dim, self.omega)

    def feedback(self, N, sigma_over_dp0, basis=None):
        basis = self.trap() if basis is None else basis
        return FeedbackConfig(
            sigma=sigma_over_dp0 * basis.dp0,
            s=self.s,
            A0=self.A0,
            N_e=self.n_est(N),
            quad=self.quad,
            debug_flip_kick_sign=self.validate.debug_flip_kick_sign,
        )

    def to_dict(self):
        return asdict(self)


def _build(cls, data, where):
    if not isinstance(data, dict):
        raise ConfigError(f"{where} must be a JSON object")
    known = {f.name for f in fields(cls)}
    unknown = set(data) - known
    if unknown:
        raise ConfigError(f"unknown keys in {where}: {sorted(unknown)}")
    try:
        return cls(**data)
    except TypeError as exc:
        raise ConfigError(f"bad {where}: {exc}") from None


def config_from_dict(data, experiment=None):
    data = dict(data)
    nested = {
        "oracle": OracleSettings,
        "quad": QuadSettings,
        "validate": ValidateSettings,
    }
    for key, cls in nested.items():
        if key in data:
            data[key] = _build(cls, data[key], key)
    if experiment is not None:
        if data.get("experiment", experiment) != experiment:
            raise ConfigError(f"config is for experiment {data['experiment']!r}, not {experiment!r}")
        data["experiment"] = experiment
    return _build(RunConfig, data, "config")


def load_config(path=None, experiment=None):
    if path is None:
        return config_from_dict({}, experiment)
    try:
        with open(path, encoding="utf-8") as fh:
            data = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from None
    return config_from_dict(data, experiment)
