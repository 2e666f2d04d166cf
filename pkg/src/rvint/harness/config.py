"""Experiment configuration: INI-style text with dotted field paths.

Example::

    [experiment]
    name = proposition1
    seed = 7
    mc = 1000

    [grid]
    N = 4096

    [ladder]
    eps0 = 0.04

Every field is addressed as ``section.key`` in validation messages and
overrides.  Omitted fields take the per-experiment defaults below.
"""
from __future__ import annotations

import configparser
import hashlib
import json
from typing import Optional

from pydantic import BaseModel, ConfigDict, Field, ValidationError

from ..errors import InvalidParameterError
from ..regularization import LADDER_FLOOR_STEPS
from ..spde import REGISTRIES, lookup

EXPERIMENTS = (
    "rv-identities",
    "proposition1",
    "isometry",
    "kernel-bounds",
    "spde-adapted",
    "spde-anticipating",
    "lipschitz",
)

DESCRIPTIONS = {
    "rv-identities": "eps-integral identities, Ito oracle and quadratic variation on Brownian paths",
    "proposition1": "series Ito integral vs cylindrical forward integral for adapted integrands",
    "isometry": "Monte Carlo isometry of the cylindrical series integral",
    "kernel-bounds": "Dirichlet heat kernel: L^p small-time bounds, semigroup, symmetry",
    "spde-adapted": "heat equation solver: deterministic limit, additive-noise variance, mild residual",
    "spde-anticipating": "substitution solution with initial data depending on terminal noise",
    "lipschitz": "mean-square Lipschitz dependence of v^z on the parameter z",
}


class _Section(BaseModel):
    model_config = ConfigDict(extra="forbid")


class ExperimentSection(_Section):
    name: str
    seed: int = Field(20240601, ge=0)
    mc: int = Field(1000, ge=1)
    workers: int = Field(1, ge=1)
    out_dir: Optional[str] = None


class GridSection(_Section):
    T: float = Field(1.0, gt=0)
    N: int = Field(4096, ge=2)
    P: int = Field(64, ge=4)


class TruncationSection(_Section):
    J: int = Field(16, ge=1)
    M: int = Field(32, ge=1)


class LadderSection(_Section):
    eps0: float = Field(0.1, gt=0)
    ratio: float = Field(0.5, gt=0, lt=1)
    length: int = Field(4, ge=1)


class FunctionSection(BaseModel):
    model_config = ConfigDict(extra="allow")
    name: str


class ToleranceSection(_Section):
    identity_rms: float = 1e-2
    ito_mae: float = 2e-2
    qv_rel: float = 0.05
    isometry_rel: float = 0.05
    prop1_rms: float = 5e-2
    slope: float = 0.05
    semigroup: float = 1e-8
    deterministic: float = 1e-6
    variance_rel: float = 0.10
    residual_rms: float = 5e-2
    residual_ratio: float = 2.0
    lipschitz_unit: float = 0.05
    lipschitz_slope: float = 0.1
    ucp: float = 1e-2


class ExperimentConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    experiment: ExperimentSection
    grid: GridSection = GridSection()
    truncation: TruncationSection = TruncationSection()
    ladder: LadderSection = LadderSection()
    f: FunctionSection = FunctionSection(name="sin-profile")
    g: FunctionSection = FunctionSection(name="linear", sigma=0.5)
    F: FunctionSection = FunctionSection(name="terminal-noise")
    tolerance: ToleranceSection = ToleranceSection()

    @property
    def name(self) -> str:
        return self.experiment.name

    def function_params(self, kind: str) -> dict:
        sec = getattr(self, kind)
        return {k: v for k, v in sec.model_dump().items() if k != "name"}

    def build(self, kind: str, **overrides):
        sec = getattr(self, kind)
        params = self.function_params(kind)
        params.update(overrides)
        return lookup(kind, sec.name, **params)

    def ladder_values(self) -> tuple:
        lad = self.ladder
        return tuple(lad.eps0 * lad.ratio**k for k in range(lad.length))

    def config_hash(self) -> str:
        """Hash of everything that affects emitted numbers (not out_dir or workers)."""
        data = self.model_dump()
        data["experiment"].pop("out_dir", None)
        data["experiment"].pop("workers", None)
        blob = json.dumps(data, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()[:16]


# Per-experiment defaults, applied beneath whatever the document sets.
DEFAULTS = {
    "rv-identities": {"experiment": {"mc": 1000}, "grid": {"T": 1.0, "N": 4096},
                      "ladder": {"eps0": 0.1, "ratio": 0.5, "length": 4}},
    "proposition1": {"experiment": {"mc": 1000}, "grid": {"T": 1.0, "N": 4096}, "truncation": {"J": 16, "M": 16},
                     "ladder": {"eps0": 0.04, "ratio": 0.5, "length": 5}},
    "isometry": {"experiment": {"mc": 10000}, "grid": {"T": 1.0, "N": 64}, "truncation": {"J": 16, "M": 16},
                 "ladder": {"eps0": 0.4, "ratio": 0.5, "length": 2}},
    "kernel-bounds": {"experiment": {"mc": 1}, "grid": {"P": 256}, "truncation": {"J": 1, "M": 256},
                      "ladder": {"eps0": 0.1, "ratio": 0.5, "length": 1}},
    "spde-adapted": {"experiment": {"mc": 200}, "grid": {"T": 0.1, "N": 4096, "P": 64},
                     "truncation": {"J": 32, "M": 32}, "ladder": {"eps0": 0.004, "ratio": 0.5, "length": 5},
                     "g": {"name": "linear", "sigma": 0.5}, "f": {"name": "sin-profile"},
                     "F": {"name": "constant"}},
    "spde-anticipating": {"experiment": {"mc": 200}, "grid": {"T": 0.1, "N": 4096, "P": 64},
                          "truncation": {"J": 32, "M": 32}, "ladder": {"eps0": 0.004, "ratio": 0.5, "length": 5},
                          "g": {"name": "linear", "sigma": 0.5}, "f": {"name": "sin-profile"},
                          "F": {"name": "terminal-noise"}},
    "lipschitz": {"experiment": {"mc": 200}, "grid": {"T": 0.1, "N": 256, "P": 32},
                  "truncation": {"J": 16, "M": 16}, "ladder": {"eps0": 0.1, "ratio": 0.5, "length": 1},
                  "g": {"name": "linear", "sigma": 0.5}, "f": {"name": "sin-profile"}},
}


class ConfigError(ValueError):
    """Validation failures, each a ``(field_path, message)`` pair."""

    def __init__(self, failures):
        self.failures = list(failures)
        super().__init__("; ".join(f"{p}: {m}" for p, m in self.failures))


def _coerce(value: str):
    try:
        return json.loads(value)
    except (json.JSONDecodeError, ValueError):
        return value


def _read_sections(text: str) -> dict:
    parser = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
    parser.optionxform = str
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ConfigError([("<document>", str(exc).splitlines()[0])]) from None
    return {s: {k: _coerce(v) for k, v in parser.items(s)} for s in parser.sections()}


def _merge(base: dict, top: dict) -> dict:
    out = {k: dict(v) for k, v in base.items()}
    for sec, vals in top.items():
        if sec in ("f", "g", "F") and "name" in vals and vals["name"] != out.get(sec, {}).get("name"):
            out[sec] = dict(vals)
        else:
            out.setdefault(sec, {}).update(vals)
    return out


def _semantic_failures(cfg: ExperimentConfig) -> list:
    failures = []
    floor = LADDER_FLOOR_STEPS * cfg.grid.T / cfg.grid.N
    smallest = cfg.ladder_values()[-1]
    if smallest < floor * (1 - 1e-9):
        failures.append(("ladder", f"smallest eps {smallest:g} is below the floor {LADDER_FLOOR_STEPS}*dt = {floor:g}"))
    if cfg.truncation.J > cfg.truncation.M:
        failures.append(("truncation.J", f"J={cfg.truncation.J} exceeds M={cfg.truncation.M}"))
    if cfg.name.startswith("spde") or cfg.name == "lipschitz":
        if cfg.truncation.M > cfg.grid.P - 1:
            failures.append(("truncation.M", f"M={cfg.truncation.M} must be <= P-1={cfg.grid.P - 1}"))
    for kind in ("f", "g", "F"):
        sec = getattr(cfg, kind)
        reg = REGISTRIES[kind]
        if sec.name not in reg:
            failures.append((f"{kind}.name", f"unknown {kind} function {sec.name!r}; registry has {sorted(reg)}"))
            continue
        try:
            cfg.build(kind)
        except InvalidParameterError as exc:
            failures.append((f"{kind}", str(exc)))
    return failures


def parse_config(text: str, overrides: dict = None) -> ExperimentConfig:
    """Parse and validate a configuration document.

    ``overrides`` maps dotted paths (``"experiment.seed"``) to values and is
    applied after the document.  Raises ``ConfigError`` listing every
    failure with its field path.
    """
    raw = _read_sections(text)
    for path, value in (overrides or {}).items():
        sec, key = path.split(".", 1)
        raw.setdefault(sec, {})[key] = value
    name = raw.get("experiment", {}).get("name")
    if name is None:
        raise ConfigError([("experiment.name", "missing experiment name")])
    if name not in EXPERIMENTS:
        raise ConfigError([("experiment.name", f"unknown experiment {name!r}; choose from {list(EXPERIMENTS)}")])
    merged = _merge(DEFAULTS[name], raw)
    try:
        cfg = ExperimentConfig.model_validate(merged)
    except ValidationError as exc:
        raise ConfigError([(".".join(str(p) for p in e["loc"]), e["msg"]) for e in exc.errors()]) from None
    failures = _semantic_failures(cfg)
    if failures:
        raise ConfigError(failures)
    return cfg


def load_config(path, overrides: dict = None) -> ExperimentConfig:
    with open(path) as fh:
        return parse_config(fh.read(), overrides)
