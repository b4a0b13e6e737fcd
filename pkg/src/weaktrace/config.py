"""Flat ``key = value`` scenario configuration."""

from __future__ import annotations

import math
from dataclasses import dataclass, field, fields, replace
from typing import Iterable

import numpy as np

from .beamprop import DEFAULT_W0, DEFAULT_WAVELENGTH, BeamParams
from .dsl import eval_expr
from .dynamics import DEFAULT_EPS, DEFAULT_FREQS, Drive, VibrationConfig

MIRRORS = ("A", "B", "C", "E", "F")
SCENARIOS = ("original", "pf", "zd-sweep", "scaling")
FAR_FACTOR = 1e6
FORMATS = ("csv", "csv+svg")


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class ScenarioConfig:
    scenario: str = "original"
    phi_c: float | None = None  # None: scenario default
    z_d: float | None = None  # None: far field
    eps: float = DEFAULT_EPS
    delta: float = 0.0
    w0: float = DEFAULT_W0
    wavelength: float = DEFAULT_WAVELENGTH
    sample_rate: float = 512.0
    duration: float = 1.0
    freq: dict = field(default_factory=lambda: dict(DEFAULT_FREQS))
    phase: dict = field(default_factory=lambda: {m: 0.0 for m in MIRRORS})
    z: dict = field(default_factory=lambda: {m: 0.0 for m in MIRRORS})
    zeta_min: float = 0.1
    zeta_max: float = 1.5
    n_zd: int = 12
    eps_min: float = 1e-5
    eps_max: float = 1e-3
    n_eps: int = 5
    out: str = "out"
    format: str = "csv+svg"

    # -- derived quantities -------------------------------------------------

    @property
    def beam(self) -> BeamParams:
        return BeamParams(self.w0, self.wavelength)

    @property
    def z_D(self) -> float:
        return FAR_FACTOR * self.beam.z_R if self.z_d is None else self.z_d

    @property
    def phi_C(self) -> float:
        if self.phi_c is not None:
            return self.phi_c
        if self.scenario == "pf":
            return pf_phase(self)
        if self.scenario == "zd-sweep":
            return math.pi / 2
        return 0.0

    def vibration(self, eps: float | None = None) -> VibrationConfig:
        theta = self.beam.theta_for_eps(self.eps if eps is None else eps)
        drives = {m: Drive(self.freq[m], theta, self.phase[m]) for m in MIRRORS}
        return VibrationConfig(drives, self.sample_rate, self.duration)

    def zeta_grid(self) -> np.ndarray:
        return np.linspace(self.zeta_min, self.zeta_max, self.n_zd)

    def eps_grid(self) -> np.ndarray:
        return np.logspace(math.log10(self.eps_min), math.log10(self.eps_max), self.n_eps)

    def validate(self) -> "ScenarioConfig":
        if self.scenario not in SCENARIOS:
            raise ConfigError(f"scenario: unknown value {self.scenario!r}; expected one of {', '.join(SCENARIOS)}")
        if self.format not in FORMATS:
            raise ConfigError(f"format: expected one of {', '.join(FORMATS)}")
        for name in ("w0", "wavelength", "sample_rate", "duration", "eps", "eps_min", "eps_max"):
            if not getattr(self, name) > 0:
                raise ConfigError(f"{name}: must be positive")
        if self.z_d is not None and self.z_d < 0:
            raise ConfigError("z_d: must be non-negative or 'far'")
        if self.n_zd < 1 or self.n_eps < 1:
            raise ConfigError("n_zd/n_eps: sweep grids must be nonempty")
        if not self.zeta_min <= self.zeta_max or not self.eps_min <= self.eps_max:
            raise ConfigError("sweep grids must be sorted (min <= max)")
        if not (0 <= self.zeta_min and self.zeta_max < math.pi / 2):
            raise ConfigError("zeta_min/zeta_max: must lie in [0, pi/2)")
        for table in ("freq", "phase", "z"):
            missing = set(MIRRORS) - set(getattr(self, table))
            if missing:
                raise ConfigError(f"{table}.{sorted(missing)[0]}: missing")
        try:
            self.vibration()
        except ValueError as exc:
            raise ConfigError(f"freq: {exc}") from None
        return self


def pf_phase(cfg: ScenarioConfig) -> float:
    """Arm-C phase that hides the A/B traces at the configured detector.

    The far-field literal maps to pi/2 exactly rather than gouy(1e6 z_R).
    """
    if cfg.z_d is None:
        return math.pi / 2
    return float(cfg.beam.gouy(cfg.z_d))


_SCALAR_KEYS =[f.name for f in fields(ScenarioConfig) if f.name not in ("freq", "phase", "z")]
VALID_KEYS = sorted(_SCALAR_KEYS + [f"{t}.{m}" for t in ("freq", "phase", "z") for m in MIRRORS])


def _parse_value(key: str, text: str):
    text = text.strip()
    if key in ("scenario", "out", "format"):
        return text
    if key == "phi_c":
        return None if text == "auto" else eval_expr(text)
    if key == "z_d":
        return None if text == "far" else eval_expr(text)
    if key in ("n_zd", "n_eps"):
        v = eval_expr(text)
        if v != int(v):
            raise ValueError(f"expected an integer, got {text!r}")
        return int(v)
    return eval_expr(text)


def apply_overrides(cfg: ScenarioConfig, pairs: Iterable[str], origin: str = "override") -> ScenarioConfig:
    """Apply ``key=value`` strings; unknown keys are rejected with the list of valid ones."""
    changes: dict = {}
    tables = {t: dict(getattr(cfg, t)) for t in ("freq", "phase", "z")}
    for i, pair in enumerate(pairs, start=1):
        key, sep, value = pair.partition("=")
        key = key.strip()
        where = f"{origin} {i}" if origin == "override" else f"{origin}:{i}"
        if not sep:
            raise ConfigError(f"{where}: expected key=value, got {pair!r}")
        if key not in VALID_KEYS:
            raise ConfigError(f"{where}: unknown key {key!r}; valid keys: {', '.join(VALID_KEYS)}")
        try:
            parsed = _parse_value(key.split(".")[0], value)
        except ValueError as exc:
            raise ConfigError(f"{where}: key {key!r}: {exc}") from None
        if "." in key:
            table, tag = key.split(".", 1)
            tables[table][tag] = parsed
        else:
            changes[key] = parsed
    return replace(cfg, **changes, **tables)


def parse_config(text: str, origin: str = "config") -> ScenarioConfig:
    pairs = []
    linenos = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if line:
            pairs.append(line)
            linenos.append(lineno)
    cfg = ScenarioConfig()
    for lineno, pair in zip(linenos, pairs):
        try:
            cfg = apply_overrides(cfg, [pair], origin="override")
        except ConfigError as exc:
            msg = str(exc).split(": ", 1)[1]
            raise ConfigError(f"{origin}: line {lineno}: {msg}") from None
    return cfg


def dump_config(cfg: ScenarioConfig) -> str:
    lines = []
    for key in _SCALAR_KEYS:
        v = getattr(cfg, key)
        if key == "phi_c" and v is None:
            v = "auto"
        elif key == "z_d" and v is None:
            v = "far"
        elif isinstance(v, float):
            v = repr(v)
        lines.append(f"{key} = {v}")
    for table in ("freq", "phase", "z"):
        for m in MIRRORS:
            lines.append(f"{table}.{m} = {getattr(cfg, table)[m]!r}")
    return "\n".join(lines) + "\n"
