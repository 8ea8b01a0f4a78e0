from __future__ import annotations

import logging
import math
import os
from dataclasses import asdict, dataclass, fields, replace
from pathlib import Path
from typing import Any, Dict, Mapping, Optional, Tuple

import numpy as np

from epdwave.errors import ConfigError
from epdwave.fields import PROFILES, GridSpec
from epdwave.norms import ContractionParams
from epdwave.propagator import DampingParams

logger = logging.getLogger(__name__)

COMMANDS = ("validate-specfun", "linear-decay", "inhomogeneous", "nonlinear", "phase-scan")

# grid n and final time per command when not configured
COMMAND_DEFAULTS: Dict[str, Tuple[int, float]] = {
    "validate-specfun": (64, 10.0),
    "linear-decay": (512, 50.0),
    "inhomogeneous": (256, 50.0),
    "nonlinear": (256, 20.0),
    "phase-scan": (128, 10.0),
}


def _env_str(name: str, default: Optional[str]) -> Optional[str]:
    v = os.getenv(name)
    return v if v not in (None, "") else default


def _env_number(name: str, default, kind):
    v = os.getenv(name)
    if v in (None, ""):
        return default
    try:
        return kind(v)
    except ValueError:
        raise ConfigError(f"{name} must be {'an integer' if kind is int else 'a number'}; got {v!r}") from None


def _env_float(name: str, default: Optional[float]) -> Optional[float]:
    return _env_number(name, default, float)


def _env_int(name: str, default: Optional[int]) -> Optional[int]:
    return _env_number(name, default, int)


def parse_range(text: str, flag: str) -> np.ndarray:
    """'a:b:n' -> n evenly spaced values from a to b inclusive."""
    parts = str(text).split(":")
    if len(parts) != 3:
        raise ConfigError(f"{flag} must look like a:b:n; got {text!r}")
    try:
        a, b, n = float(parts[0]), float(parts[1]), int(parts[2])
    except ValueError:
        raise ConfigError(f"{flag} must look like a:b:n with numbers; got {text!r}") from None
    if n < 1:
        raise ConfigError(f"{flag} needs n >= 1; got {n}")
    return np.linspace(a, b, n)


def load_config_file(path: Path) -> Dict[str, str]:
    """Line-based `key = value` (UTF-8, '#' comments); keys spelled like the flags without dashes."""
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    known = {f.name for f in fields(ExperimentConfig)}
    out: Dict[str, str] = {}
    for lineno, raw in enumerate(path.read_text(encoding="utf-8").splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected 'key = value'; got {raw!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        key = key.replace("-", "_")
        if key not in known:
            raise ConfigError(f"{path}:{lineno}: unknown key {key!r}")
        out[key] = value
    return out


@dataclass(frozen=True)
class ExperimentConfig:
    mu: float = 2.5
    p: float = 2.5
    eps: float = 1e-3
    eps1: Optional[float] = None
    grid: Optional[int] = None
    domain: Optional[float] = None
    tmax: Optional[float] = None
    tol: Optional[float] = None
    case: str = "generic"
    samples: int = 100
    seed: int = 20240611
    out: str = "data/runs"
    mu_range: Optional[str] = None
    p_range: Optional[str] = None

    @classmethod
    def from_env(cls) -> "ExperimentConfig":
        d = cls()
        return cls(
            mu=_env_float("EPDW_MU", d.mu),
            p=_env_float("EPDW_P", d.p),
            eps=_env_float("EPDW_EPS", d.eps),
            eps1=_env_float("EPDW_EPS1", d.eps1),
            grid=_env_int("EPDW_GRID", d.grid),
            domain=_env_float("EPDW_DOMAIN", d.domain),
            tmax=_env_float("EPDW_TMAX", d.tmax),
            tol=_env_float("EPDW_TOL", d.tol),
            case=_env_str("EPDW_CASE", d.case),
            samples=_env_int("EPDW_SAMPLES", d.samples),
            seed=_env_int("EPDW_SEED", d.seed),
            out=_env_str("EPDW_OUT", d.out),
            mu_range=_env_str("EPDW_MU_RANGE", d.mu_range),
            p_range=_env_str("EPDW_P_RANGE", d.p_range),
        )

    def merged(self, overrides: Mapping[str, Any]) -> "ExperimentConfig":
        """New config with `overrides` applied; string values are coerced to the field type."""
        coerced: Dict[str, Any] = {}
        types = {"mu": float, "p": float, "eps": float, "eps1": float, "domain": float, "tmax": float,
                 "tol": float, "grid": int, "samples": int, "seed": int}
        for key, value in overrides.items():
            if value is None:
                continue
            cast = types.get(key, str)
            try:
                coerced[key] = cast(value)
            except (TypeError, ValueError):
                raise ConfigError(f"{key} must be a {cast.__name__}; got {value!r}") from None
        return replace(self, **coerced)

    # ---- resolved values
    def resolved_grid(self, command: str) -> int:
        return self.grid if self.grid is not None else COMMAND_DEFAULTS[command][0]

    def resolved_tmax(self, command: str) -> float:
        return self.tmax if self.tmax is not None else COMMAND_DEFAULTS[command][1]

    def grid_spec(self, command: str) -> GridSpec:
        tmax = self.resolved_tmax(command)
        n = self.resolved_grid(command)
        if self.domain is None:
            return GridSpec.for_final_time(n, tmax)
        return GridSpec(n=n, domain_half_width=self.domain)

    def damping_params(self) -> DampingParams:
        return DampingParams(mu=self.mu, p_exponent=self.p, epsilon=self.eps)

    def contraction_params(self, p: Optional[float] = None) -> ContractionParams:
        if self.eps1 is not None:
            return ContractionParams(eps1=self.eps1)
        return ContractionParams.default_for(self.p if p is None else p)

    def validate(self, command: str) -> None:
        """Raise ConfigError naming the first violated bound."""
        if command not in COMMANDS:
            raise ConfigError(f"unknown command {command!r}; expected one of {COMMANDS}")
        if self.samples < 1:
            raise ConfigError(f"samples must be >= 1; got {self.samples}")
        if self.tol is not None and not (self.tol > 0.0 and math.isfinite(self.tol)):
            raise ConfigError(f"tol must be > 0; got {self.tol!r}")
        if command == "validate-specfun":
            return
        if command != "phase-scan":
            self.damping_params()
        if self.case not in PROFILES:
            raise ConfigError(f"case must be one of {PROFILES}; got {self.case!r}")
        tmax = self.resolved_tmax(command)
        if not (tmax > 1.0):
            raise ConfigError(f"tmax must be > 1; got {tmax!r}")
        self.grid_spec(command).check_final_time(tmax)
        if self.eps1 is not None:
            ContractionParams(eps1=self.eps1)
        if command == "phase-scan":
            for text, flag in ((self.mu_range, "--mu-range"), (self.p_range, "--p-range")):
                if text is not None:
                    parse_range(text, flag)
            for mu in self.mu_values():
                # mu and eps bounds only; p is checked below with the scan's looser floor
                DampingParams.exploratory(float(mu), 2.5, self.eps)
            if self.p_values().min() <= 1.0:
                raise ConfigError(f"p must be > 1 in a phase scan; got {self.p_values().min():g}")

    def mu_values(self) -> np.ndarray:
        return parse_range(self.mu_range, "--mu-range") if self.mu_range else np.array([self.mu])

    def p_values(self) -> np.ndarray:
        return parse_range(self.p_range, "--p-range") if self.p_range else np.array([self.p])

    def as_dict(self) -> Dict[str, Any]:
        return asdict(self)


def resolve_config(cli_values: Mapping[str, Any]) -> ExperimentConfig:
    """defaults < environment < config file ($EPDW_CONFIG) < CLI flags."""
    cfg = ExperimentConfig.from_env()
    file_path = _env_str("EPDW_CONFIG", None)
    if file_path:
        cfg = cfg.merged(load_config_file(Path(file_path)))
        logger.info(f"Loaded config file {file_path}")
    return cfg.merged({k: v for k, v in cli_values.items() if v is not None})


def pool_workers() -> int:
    """Phase-scan pool size from EPDW_WORKERS (default: CPU count)."""
    return max(1, _env_int("EPDW_WORKERS", os.cpu_count() or 1))
