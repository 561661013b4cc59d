"""Experiment configuration: a flat ``[section]`` / ``key = value`` format.

Lists are comma separated, ``#`` starts a comment. Unknown sections and
keys are rejected.
"""

from __future__ import annotations

import configparser
import difflib
from dataclasses import dataclass, field, fields
from typing import Optional

from .grid import ExternalPotential, assemble_operator, build_domain
from .weights import make_weights

__all__ = ["ConfigError", "ExperimentConfig", "parse_config", "render_config", "DEFAULT_CONFIG"]

MODES = ("linear", "coupled", "scf-1d", "cross-validate")
FORMATS = ("json", "csv")


class ConfigError(ValueError):
    pass


def _floats(text: str) -> tuple[float, ...]:
    return tuple(float(t) for t in text.split(",") if t.strip())


def _ints(text: str) -> tuple[int, ...]:
    return tuple(int(t) for t in text.split(",") if t.strip())


def _words(text: str) -> tuple[str, ...]:
    return tuple(t.strip() for t in text.split(",") if t.strip())


@dataclass(frozen=True)
class DomainSpec:
    dim: int
    extents: tuple[float, ...]
    points: tuple[int, ...]


@dataclass(frozen=True)
class PotentialSpec:
    kind: str = "zero"
    center: Optional[tuple[float, ...]] = None
    stiffness: Optional[float] = None
    depth: Optional[float] = None
    lower: Optional[tuple[float, ...]] = None
    upper: Optional[tuple[float, ...]] = None


@dataclass(frozen=True)
class WeightsSpec:
    rho_scheme: str
    M: int
    alpha: Optional[float] = None
    p: Optional[float] = None
    beta: Optional[float] = None
    base_eigenvalues: Optional[tuple[float, ...]] = None
    values: Optional[tuple[float, ...]] = None


@dataclass(frozen=True)
class SolverSpec:
    mode: str = "linear"
    max_iterations: int = 20000
    tolerance: float = 1e-8
    seed: int = 0
    restarts: int = 3
    line_search: str = "armijo"
    armijo_c1: float = 1e-4
    backtrack: float = 0.5
    step: float = 0.1
    reorthonormalize_every: int = 50
    theta_steps: int = 5
    damping: float = 0.5
    scf_tolerance: float = 1e-12


@dataclass(frozen=True)
class OutputSpec:
    directory: str = "."
    name: str = "report"
    formats: tuple[str, ...] = ("json",)


@dataclass(frozen=True)
class ExperimentConfig:
    domain: DomainSpec
    weights: WeightsSpec
    potential: PotentialSpec = field(default_factory=PotentialSpec)
    solver: SolverSpec = field(default_factory=SolverSpec)
    output: OutputSpec = field(default_factory=OutputSpec)

    def build_domain(self):
        d = self.domain
        return build_domain(d.dim, d.extents, d.points)

    def build_potential(self) -> ExternalPotential:
        p = self.potential
        if p.kind == "zero":
            return ExternalPotential.zero()
        if p.kind == "harmonic":
            return ExternalPotential.harmonic(p.center, p.stiffness)
        if p.kind == "square_well":
            return ExternalPotential.square_well(p.depth, p.lower, p.upper)
        raise ConfigError(f"unknown potential kind {p.kind!r}")

    def build_operator(self):
        return assemble_operator(self.build_domain(), self.build_potential())

    def build_weights(self):
        w = self.weights
        return make_weights(w.rho_scheme, w.M, self.domain.dim, alpha=w.alpha, p=w.p, beta=w.beta,
                            base_eigenvalues=w.base_eigenvalues, values=w.values)


# section name -> (dataclass, {key: parser})
_SCHEMA = {
    "domain": (DomainSpec, {"dim": int, "extents": _floats, "points": _ints}),
    "potential": (PotentialSpec, {"kind": str, "center": _floats, "stiffness": float, "depth": float,
                                  "lower": _floats, "upper": _floats}),
    "weights": (WeightsSpec, {"rho_scheme": str, "M": int, "alpha": float, "p": float, "beta": float,
                              "base_eigenvalues": _floats, "values": _floats}),
    "solver": (SolverSpec, {"mode": str, "max_iterations": int, "tolerance": float, "seed": int,
                            "restarts": int, "line_search": str, "armijo_c1": float, "backtrack": float,
                            "step": float, "reorthonormalize_every": int, "theta_steps": int,
                            "damping": float, "scf_tolerance": float}),
    "output": (OutputSpec, {"directory": str, "name": str, "formats": _words}),
}
_REQUIRED = {"domain": ("dim", "extents", "points"), "weights": ("rho_scheme", "M")}


def _unknown(kind: str, name: str, choices) -> ConfigError:
    hint = difflib.get_close_matches(name, list(choices), n=1)
    suffix = f"; did you mean {hint[0]!r}?" if hint else ""
    return ConfigError(f"unknown {kind} {name!r}{suffix}")


def parse_config(text: str) -> ExperimentConfig:
    """Parse and validate an experiment configuration."""
    parser = configparser.ConfigParser(interpolation=None, comment_prefixes=("#",),
                                       inline_comment_prefixes=("#",), default_section="\x00")
    parser.optionxform = str
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"malformed configuration: {exc}") from None
    sections = {}
    for name in parser.sections():
        if name not in _SCHEMA:
            raise _unknown("section", name, _SCHEMA)
        cls, keys = _SCHEMA[name]
        values = {}
        for key, raw in parser.items(name):
            if key not in keys:
                raise _unknown(f"key in [{name}]", key, keys)
            try:
                values[key] = keys[key](raw.strip())
            except ValueError:
                raise ConfigError(f"[{name}] {key} = {raw!r}: expected {keys[key].__name__.lstrip('_')}") from None
        for key in _REQUIRED.get(name, ()):
            if key not in values:
                raise ConfigError(f"missing required key {key!r} in [{name}]")
        sections[name] = cls(**values)
    for name in _REQUIRED:
        if name not in sections:
            raise ConfigError(f"missing required section [{name}]")
    config = ExperimentConfig(**sections)
    validate(config)
    return config


def validate(config: ExperimentConfig) -> None:
    d, s, o = config.domain, config.solver, config.output
    if d.dim not in (1, 2, 3):
        raise ConfigError(f"[domain] dim = {d.dim}: dimension must be <= 3 (N <= 3 is required)")
    if s.mode not in MODES:
        raise _unknown("mode", s.mode, MODES)
    if s.mode in ("scf-1d", "cross-validate") and d.dim != 1:
        raise ConfigError(f"[solver] mode = {s.mode} requires dim = 1, got dim = {d.dim}")
    for fmt in o.formats:
        if fmt not in FORMATS:
            raise _unknown("output format", fmt, FORMATS)
    if not o.formats:
        raise ConfigError("[output] formats must name at least one of json, csv")
    try:
        _check_solver(s)
        domain = config.build_domain()
        config.build_potential().realize(domain)
        weights = config.build_weights()
    except ConfigError:
        raise
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    if weights.M > domain.n:
        raise ConfigError(f"[weights] M = {weights.M} exceeds the number of grid points {domain.n}")


def _check_solver(s: SolverSpec) -> None:
    from .solvers import SolverOptions

    SolverOptions(max_iterations=s.max_iterations, gradient_tolerance=s.tolerance,
                  line_search=s.line_search,
                  armijo_c1=s.armijo_c1, backtrack_factor=s.backtrack, fixed_step=s.step,
                  reorthonormalize_every=s.reorthonormalize_every, seed=s.seed, restarts=s.restarts)
    if s.theta_steps < 1:
        raise ValueError("[solver] theta_steps must be >= 1")
    if not 0 < s.damping <= 1:
        raise ValueError("[solver] damping must lie in (0, 1]")
    if s.scf_tolerance <= 0:
        raise ValueError("[solver] scf_tolerance must be positive")


def _format(value) -> str:
    if isinstance(value, tuple):
        return ", ".join(_format(v) for v in value)
    if isinstance(value, float):
        return repr(value)
    return str(value)


def render_config(config: ExperimentConfig) -> str:
    """Inverse of :func:`parse_config` (unset optional keys are omitted)."""
    lines = []
    for name in ("domain", "potential", "weights", "solver", "output"):
        section = getattr(config, name)
        lines.append(f"[{name}]")
        for f in fields(section):
            value = getattr(section, f.name)
            if value is not None:
                lines.append(f"{f.name} = {_format(value)}")
        lines.append("")
    return "\n".join(lines)


DEFAULT_CONFIG = ExperimentConfig(
    domain=DomainSpec(1, (1.0,), (199,)),
    weights=WeightsSpec("geometric", 4, alpha=0.5),
    potential=PotentialSpec(),
    solver=SolverSpec(mode="coupled"),
    output=OutputSpec(),
)
