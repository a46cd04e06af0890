"""Run configuration: ``section.key = value`` documents with '#' comments."""
from __future__ import annotations

import math
from dataclasses import dataclass, field, fields
from typing import Optional

from .kernel import KINDS, Kernel, make_kernel
from .study import PRESETS

__all__ = ["ConfigError", "RunConfig", "parse_config", "load_config"]


class ConfigError(ValueError):
    def __init__(self, key, message):
        super().__init__(f"{key}: {message}")
        self.key = key


def _floats(text):
    return tuple(float(t) for t in text.replace(",", " ").split())


def _ints(text):
    return tuple(int(t) for t in text.replace(",", " ").split())


def _bool(text):
    t = text.strip().lower()
    if t in ("true", "yes", "1", "on"):
        return True
    if t in ("false", "no", "0", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


@dataclass
class DomainConfig:
    a: float = 0.0
    b: float = 1.0
    n_elements: int = 16
    collar_width: float = 0.0
    levels: int = 1


@dataclass
class KernelConfig:
    kind: str = "fractional"
    s: Optional[float] = None
    epsilon: Optional[float] = None
    constant: Optional[float] = None
    use_normalization_preset: bool = False


@dataclass
class PhysicsConfig:
    m: Optional[float] = None
    tau: Optional[float] = None
    T: Optional[float] = None
    n_steps: Optional[int] = None
    initial: str = "bump"
    center: float = 0.5
    width: float = 0.25
    height: float = 1.0
    seed: int = 0


@dataclass
class SolverConfig:
    newton_tol: float = 1e-10
    newton_max_iter: int = 100
    line_search_beta: float = 0.5
    quadrature_order: int = 8


@dataclass
class StudyConfig:
    kind: str = "space"
    taus: tuple = ()
    ref_offset: int = 2
    ref_factor: int = 8
    rate_target: Optional[float] = None
    rate_tolerance: Optional[float] = None
    cea_max: float = 10.0


@dataclass
class ValidateConfig:
    sizes: tuple = (4, 8, 16)
    s_values: tuple = (0.3, 0.5, 0.7)
    tolerance: float = 1e-8
    max_deviation: float = 1e-6


@dataclass
class OutputConfig:
    trajectory: str = "trajectory.csv"
    errors: str = "errors.csv"
    solution: str = "solution.csv"
    matrix: str = ""


_SECTIONS = {
    "domain": DomainConfig, "kernel": KernelConfig, "physics": PhysicsConfig,
    "solver": SolverConfig, "study": StudyConfig, "validate": ValidateConfig,
    "output": OutputConfig,
}

_PARSERS = {
    "domain.a": float, "domain.b": float, "domain.n_elements": int,
    "domain.collar_width": float, "domain.levels": int,
    "kernel.kind": str, "kernel.s": float, "kernel.epsilon": float, "kernel.constant": float,
    "kernel.use_normalization_preset": _bool,
    "physics.m": float, "physics.tau": float, "physics.T": float, "physics.n_steps": int,
    "physics.initial": str, "physics.center": float, "physics.width": float,
    "physics.height": float, "physics.seed": int,
    "solver.newton_tol": float, "solver.newton_max_iter": int,
    "solver.line_search_beta": float, "solver.quadrature_order": int,
    "study.kind": str, "study.taus": _floats, "study.ref_offset": int, "study.ref_factor": int,
    "study.rate_target": float, "study.rate_tolerance": float, "study.cea_max": float,
    "validate.sizes": _ints, "validate.s_values": _floats, "validate.tolerance": float,
    "validate.max_deviation": float,
    "output.trajectory": str, "output.errors": str, "output.solution": str, "output.matrix": str,
}


@dataclass
class RunConfig:
    domain: DomainConfig = field(default_factory=DomainConfig)
    kernel: KernelConfig = field(default_factory=KernelConfig)
    physics: PhysicsConfig = field(default_factory=PhysicsConfig)
    solver: SolverConfig = field(default_factory=SolverConfig)
    study: StudyConfig = field(default_factory=StudyConfig)
    validate: ValidateConfig = field(default_factory=ValidateConfig)
    output: OutputConfig = field(default_factory=OutputConfig)

    def make_kernel(self, s: Optional[float] = None) -> Kernel:
        k = self.kernel
        return make_kernel(k.kind, k.s if s is None else s, k.epsilon, k.constant,
                           k.use_normalization_preset)

    def preset_params(self) -> dict:
        p = self.physics
        return {} if p.initial == "random" else {"center": p.center, "width": p.width,
                                                 "height": p.height}


def _check(cond, key, message):
    if not cond:
        raise ConfigError(key, message)


def _validate(cfg: RunConfig):
    d, k, p, s = cfg.domain, cfg.kernel, cfg.physics, cfg.solver
    _check(math.isfinite(d.a) and math.isfinite(d.b), "domain.a", "endpoints must be finite")
    _check(d.a < d.b, "domain.b", "must exceed domain.a")
    _check(d.n_elements >= 1, "domain.n_elements", "must be at least 1")
    _check(d.collar_width >= 0, "domain.collar_width", "must be nonnegative")
    _check(d.levels >= 1, "domain.levels", "must be at least 1")
    _check(k.kind in KINDS, "kernel.kind", f"must be one of {KINDS}")
    _check(k.s is not None, "kernel.s", "is required")
    _check(0 < k.s < 1, "kernel.s", "must lie in (0, 1)")
    if k.kind == "fractional":
        _check(k.epsilon is None, "kernel.epsilon", "not allowed for the fractional kernel")
    else:
        _check(k.epsilon is not None, "kernel.epsilon", f"required for kind {k.kind}")
        _check(k.epsilon > 0, "kernel.epsilon", "must be positive")
    if k.constant is not None:
        _check(k.constant > 0, "kernel.constant", "must be positive")
        _check(not k.use_normalization_preset, "kernel.use_normalization_preset",
               "conflicts with an explicit kernel.constant")
    _check(p.m is not None, "physics.m", "is required")
    _check(p.m > 0, "physics.m", "must be positive")
    _check(p.tau is not None, "physics.tau", "is required")
    _check(p.tau > 0, "physics.tau", "must be positive")
    if p.n_steps is None:
        _check(p.T is not None, "physics.n_steps", "give physics.n_steps or physics.T")
        k_steps = p.T / p.tau
        _check(abs(k_steps - round(k_steps)) <= 1e-9 * max(1.0, k_steps), "physics.T",
               "must be a multiple of physics.tau")
        p.n_steps = int(round(k_steps))
    else:
        _check(p.n_steps >= 0, "physics.n_steps", "must be nonnegative")
        if p.T is not None:
            _check(math.isclose(p.T, p.n_steps * p.tau, rel_tol=1e-9, abs_tol=1e-15),
                   "physics.T", "inconsistent with physics.n_steps * physics.tau")
    _check(p.initial in PRESETS, "physics.initial", f"must be one of {PRESETS}")
    _check(p.width > 0, "physics.width", "must be positive")
    _check(s.newton_tol > 0, "solver.newton_tol", "must be positive")
    _check(s.newton_max_iter >= 1, "solver.newton_max_iter", "must be at least 1")
    _check(0 < s.line_search_beta < 1, "solver.line_search_beta", "must lie in (0, 1)")
    _check(s.quadrature_order >= 2, "solver.quadrature_order", "must be at least 2")
    st = cfg.study
    _check(st.kind in ("space", "time"), "study.kind", "must be 'space' or 'time'")
    _check(st.ref_offset >= 1, "study.ref_offset", "must be at least 1")
    _check(st.ref_factor >= 1, "study.ref_factor", "must be at least 1")
    _check(all(t > 0 for t in st.taus), "study.taus", "must be positive")
    _check(all(n >= 1 for n in cfg.validate.sizes), "validate.sizes", "must be positive")
    _check(all(0 < v < 1 for v in cfg.validate.s_values), "validate.s_values",
           "must lie in (0, 1)")


def parse_config(text: str) -> RunConfig:
    cfg = RunConfig()
    seen = set()
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}", f"expected 'section.key = value', got {raw!r}")
        key, value = (t.strip() for t in line.split("=", 1))
        if key not in _PARSERS:
            raise ConfigError(key, "unknown key")
        if key in seen:
            raise ConfigError(key, "given twice")
        seen.add(key)
        try:
            parsed = _PARSERS[key](value)
        except ValueError as exc:
            raise ConfigError(key, f"cannot parse {value!r}: {exc}") from None
        section, name = key.split(".")
        setattr(getattr(cfg, section), name, parsed)
    _validate(cfg)
    return cfg


def load_config(path) -> RunConfig:
    with open(path) as fh:
        return parse_config(fh.read())


def section_fields(section: str) -> list:
    return [f.name for f in fields(_SECTIONS[section])]
