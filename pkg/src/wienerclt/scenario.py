"""
Scenario configuration: parse the key-value config file and build the profile.

Example config::

    [scenario]
    model = mccdma-uplink
    N = 64
    K = 32
    rho = 0.1
    law = qpsk
    trials = 10000
    seed = 1

    [profile]
    L = 5

    [power_table]
    base_power = 1
    multipliers = 1 2 4 8 16
    proportions = 1/8 1/4 1/4 1/8 1/4
"""

from __future__ import annotations

import configparser
import dataclasses
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path

import numpy as np

from . import profiles as prof
from .equilibrium import DEFAULT_MAX_ITER, DEFAULT_TOL
from .simulator import LAWS, channel_stream

MODELS = ("general-grid", "separable", "cdma-flat", "mccdma-uplink",
          "mccdma-downlink", "continuous-profile")

# defaults for the MC-CDMA uplink experiment
UPLINK_RHO = 0.1
UPLINK_L = 5
UPLINK_N_OVER_K = 2


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class SolverSettings:
    tol: float = DEFAULT_TOL
    max_iter: int = DEFAULT_MAX_ITER
    damping: float = 0.0


@dataclass(frozen=True)
class ScenarioConfig:
    model: str
    N: int
    K: int
    rho: float
    law: str = "qpsk"
    power_table: prof.PowerClassTable | None = None
    L: int | None = None
    trials: int = 10_000
    seed: int = 0
    workers: int = 1
    solver: SolverSettings = field(default_factory=SolverSettings)
    csv: str | None = None
    d: tuple[float, ...] | None = None
    dtilde: tuple[float, ...] | None = None
    powers: tuple[float, ...] | None = None
    function: str | None = None
    k_values: tuple[int, ...] = ()
    n_over_k: float | None = None

    def __post_init__(self):
        if self.model not in MODELS:
            raise ConfigError(f"model: unknown {self.model!r}; expected one of {MODELS}")
        if self.law not in LAWS:
            raise ConfigError(f"law: unknown {self.law!r}; expected one of {LAWS}")
        for name in ("N", "K", "trials"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name}: must be a positive integer")
        if not (np.isfinite(self.rho) and self.rho > 0):
            raise ConfigError(f"rho: must be > 0, got {self.rho!r}")
        if self.workers < 1:
            raise ConfigError("workers: must be >= 1")
        if self.model in ("mccdma-uplink", "mccdma-downlink"):
            if self.L is None or self.L < 1:
                raise ConfigError(f"L: required (>= 1) for model {self.model}")
        if self.model == "mccdma-uplink" and self.power_table is None and self.powers is None:
            raise ConfigError("power_table: required for model mccdma-uplink")
        if self.model == "general-grid" and not self.csv:
            raise ConfigError("profile.csv: required for model general-grid")
        if self.model == "separable" and (self.d is None or self.dtilde is None):
            raise ConfigError("profile.d and profile.dtilde: required for model separable")
        if self.model == "continuous-profile" and not self.function:
            raise ConfigError("profile.function: required for model continuous-profile")
        s = self.solver
        if not (s.tol > 0 and s.max_iter >= 1 and 0 <= s.damping < 1):
            raise ConfigError("solver: need tol > 0, max_iter >= 1, 0 <= damping < 1")

    def with_K(self, K: int) -> "ScenarioConfig":
        """Same scenario at another K, keeping the N/K ratio."""
        ratio = self.n_over_k if self.n_over_k is not None else self.N / self.K
        return dataclasses.replace(self, K=K, N=max(1, int(round(ratio * K))))


def uplink_experiment_config(K: int, seed: int, *, rho: float = UPLINK_RHO,
                             trials: int = 10_000, law: str = "qpsk",
                             n_over_k: float = UPLINK_N_OVER_K,
                             workers: int = 1) -> ScenarioConfig:
    """MC-CDMA uplink with the five power classes, L = 5 taps and QPSK signatures."""
    return ScenarioConfig(
        model="mccdma-uplink", N=int(round(n_over_k * K)), K=K, rho=rho, law=law,
        power_table=prof.PowerClassTable.five_classes(1.0), L=UPLINK_L, trials=trials,
        seed=seed, workers=workers, n_over_k=n_over_k)


def _vector(text: str, key: str) -> tuple[float, ...]:
    try:
        return tuple(float(v) for v in prof.as_vector(text))
    except (ValueError, ZeroDivisionError) as exc:
        raise ConfigError(f"{key}: cannot parse number list {text!r}") from exc


def _broadcast(values, n: int, key: str) -> np.ndarray:
    v = np.asarray(values, dtype=float)
    if v.size == 1:
        return np.full(n, float(v[0]))
    if v.size != n:
        raise ConfigError(f"{key}: expected 1 or {n} values, got {v.size}")
    return v


def load_config(path, overrides: dict | None = None) -> ScenarioConfig:
    """Parse a scenario config file; errors carry the offending section/field."""
    cp = configparser.ConfigParser(inline_comment_prefixes=(";", "#"))
    cp.optionxform = str
    path = Path(path)
    try:
        with open(path) as fh:
            cp.read_file(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except configparser.Error as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    if not cp.has_section("scenario"):
        raise ConfigError(f"{path}: missing [scenario] section")

    def get(section, key, conv, default=None, required=False):
        if not cp.has_option(section, key):
            if required:
                raise ConfigError(f"{path}: [{section}] {key}: required")
            return default
        raw = cp.get(section, key)
        try:
            return conv(raw)
        except (ValueError, TypeError, ZeroDivisionError) as exc:
            raise ConfigError(f"{path}: [{section}] {key} = {raw!r}: {exc}") from exc

    kw = dict(
        model=get("scenario", "model", str, required=True),
        N=get("scenario", "N", int, required=True),
        K=get("scenario", "K", int, required=True),
        rho=get("scenario", "rho", float, required=True),
        law=get("scenario", "law", str, "qpsk"),
        trials=get("scenario", "trials", int, 10_000),
        seed=get("scenario", "seed", int, 0),
        workers=get("scenario", "workers", int, 1),
    )
    kw["L"] = get("profile", "L", int)
    csv_path = get("profile", "csv", str)
    if csv_path and not Path(csv_path).is_absolute():
        csv_path = str(path.parent / csv_path)
    kw["csv"] = csv_path
    kw["d"] = get("profile", "d", lambda s: _vector(s, "profile.d"))
    kw["dtilde"] = get("profile", "dtilde", lambda s: _vector(s, "profile.dtilde"))
    kw["powers"] = get("profile", "powers", lambda s: _vector(s, "profile.powers"))
    kw["function"] = get("profile", "function", str)

    if cp.has_section("power_table"):
        base = get("power_table", "base_power", float, 1.0)
        mults = get("power_table", "multipliers", lambda s: _vector(s, "multipliers"), required=True)
        props = get("power_table", "proportions",
                    lambda s: tuple(Fraction(v) for v in s.replace(",", " ").split()),
                    required=True)
        if len(mults) != len(props):
            raise ConfigError(f"{path}: [power_table] multipliers and proportions differ in length")
        try:
            kw["power_table"] = prof.PowerClassTable(base, tuple(zip(mults, props)))
        except prof.ProfileError as exc:
            raise ConfigError(f"{path}: [power_table] {exc}") from exc

    kw["solver"] = SolverSettings(
        tol=get("solver", "tol", float, DEFAULT_TOL),
        max_iter=get("solver", "max_iter", int, DEFAULT_MAX_ITER),
        damping=get("solver", "damping", float, 0.0),
    )
    kw["k_values"] = get("report", "k_values",
                         lambda s: tuple(int(v) for v in s.replace(",", " ").split()), ())
    kw["n_over_k"] = get("report", "n_over_k", float)
    kw.update({k: v for k, v in (overrides or {}).items() if v is not None})
    try:
        return ScenarioConfig(**kw)
    except ConfigError as exc:
        raise ConfigError(f"{path}: {exc}") from exc


_SAFE_NUMPY = {name: getattr(np, name) for name in (
    "sin", "cos", "tan", "exp", "log", "sqrt", "abs", "pi", "minimum", "maximum",
    "where", "cosh", "sinh", "tanh", "arctan", "e")}


def profile_function(expr: str):
    """Compile ``expr`` (in ``x`` and ``y``) into a vectorized function."""
    code = compile(expr, "<profile.function>", "eval")
    for name in code.co_names:
        if name not in _SAFE_NUMPY and name not in ("x", "y"):
            raise ConfigError(f"profile.function: name {name!r} is not allowed")
    return lambda x, y: eval(code, {"__builtins__": {}}, {**_SAFE_NUMPY, "x": x, "y": y})


def _powers(cfg: ScenarioConfig) -> np.ndarray:
    if cfg.powers is not None:
        return _broadcast(cfg.powers, cfg.K + 1, "profile.powers")
    if cfg.power_table is not None:
        return prof.expand_power_classes(cfg.power_table, cfg.K)
    return np.ones(cfg.K + 1)


def build_profile(cfg: ScenarioConfig) -> tuple[prof.VarianceProfile, dict]:
    """Construct the scenario's variance profile.

    Returns the profile and a dict of extras (channel draws, powers) for the record.
    """
    N, K = cfg.N, cfg.K
    extras: dict = {}
    try:
        if cfg.model == "general-grid":
            p = prof.load_csv(cfg.csv)
        elif cfg.model == "separable":
            p = prof.build_separable(_broadcast(cfg.d, N, "profile.d"),
                                     _broadcast(cfg.dtilde, K + 1, "profile.dtilde"))
        elif cfg.model == "cdma-flat":
            extras["powers"] = _powers(cfg)
            p = prof.cdma_flat_profile(N, extras["powers"])
        elif cfg.model == "mccdma-uplink":
            powers = _powers(cfg)
            chans = prof.sample_rayleigh_taps(cfg.L, K + 1, N, channel_stream(cfg.seed))
            p = prof.mccdma_uplink_profile([c.freq_response for c in chans], powers)
            extras.update(powers=powers, channels=chans)
        elif cfg.model == "mccdma-downlink":
            powers = _powers(cfg)
            (chan,) = prof.sample_rayleigh_taps(cfg.L, 1, N, channel_stream(cfg.seed))
            p = prof.mccdma_downlink_profile(chan.freq_response, powers)
            extras.update(powers=powers, channels=[chan])
        else:
            p = prof.sample_continuous(profile_function(cfg.function), N, K)
    except prof.ProfileError as exc:
        raise ConfigError(f"profile: {exc}") from exc
    if p.sigma2.shape != (N, K + 1):
        raise ConfigError(f"profile has shape {p.sigma2.shape} but config says N={N}, K={K}")
    return p, extras
