"""Experiment configuration: TOML tables mapped onto dataclasses."""
from __future__ import annotations

import hashlib
import json
import sys
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any

import numpy as np

if sys.version_info >= (3, 11):
    import tomllib
else:  # pragma: no cover - exercised on 3.10
    import tomli as tomllib

from .carpet import CEIL, FLOOR, NONUNIQUE_CARPET, TABLE1_CARPETS, CarpetSpec
from .measures import BernoulliDriver, MarkovDriver
from .symbolic import IfsModel, bernoulli_convolution_ifs, cantor_ifs, similarity_ifs

EXPERIMENTS = ("dim", "optimize", "cover-time", "hitting-time", "slope", "orbit", "table1", "table2", "oracle")
SYSTEM_KINDS = ("carpet", "ifs", "cantor", "bernoulli-convolution")
NAMED_CARPETS = dict(TABLE1_CARPETS, nonunique=NONUNIQUE_CARPET)


class ConfigError(ValueError):
    pass


@dataclass
class SystemConfig:
    kind: str = "carpet"
    name: str | None = "row2"
    m: int | None = None
    n: int | None = None
    digits: list[list[int]] | None = None
    ratios: list[float] | None = None
    translations: list[Any] | None = None
    diameter: float | None = None
    lam: float | None = None

    def validate(self) -> None:
        if self.kind not in SYSTEM_KINDS:
            raise ConfigError(f"unknown system kind {self.kind!r}; expected one of {SYSTEM_KINDS}")
        if self.kind == "carpet":
            self.carpet()
        else:
            self.ifs()

    def carpet(self) -> CarpetSpec:
        if self.kind != "carpet":
            raise ConfigError(f"experiment needs a carpet, got system kind {self.kind!r}")
        if self.digits is not None:
            if self.m is None or self.n is None:
                raise ConfigError("carpet digits need m and n")
            try:
                return CarpetSpec(int(self.m), int(self.n), tuple(tuple(int(v) for v in d) for d in self.digits))
            except ValueError as exc:
                raise ConfigError(str(exc)) from exc
        if self.name not in NAMED_CARPETS:
            raise ConfigError(f"unknown carpet name {self.name!r}; known: {sorted(NAMED_CARPETS)}")
        return NAMED_CARPETS[self.name]

    def ifs(self) -> IfsModel:
        try:
            if self.kind == "carpet":
                return self.carpet().ifs()
            if self.kind == "cantor":
                return cantor_ifs()
            if self.kind == "bernoulli-convolution":
                if self.lam is None:
                    raise ConfigError("bernoulli-convolution needs lam")
                return bernoulli_convolution_ifs(float(self.lam))
            if self.ratios is None or self.translations is None:
                raise ConfigError("ifs systems need ratios and translations")
            if len(self.ratios) != len(self.translations):
                raise ConfigError("ratios and translations differ in length")
            return similarity_ifs(self.ratios, self.translations, self.diameter)
        except ConfigError:
            raise
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc

    def alphabet(self) -> int:
        if self.kind == "carpet":
            return len(self.carpet().digits)
        return self.ifs().size


@dataclass
class DriverConfig:
    kind: str = "uniform"
    weights: list[float] | None = None
    transition: list[list[float]] | None = None

    def build(self, alphabet: int):
        try:
            if self.kind == "uniform":
                return BernoulliDriver(np.full(alphabet, 1.0 / alphabet))
            if self.kind == "bernoulli":
                if self.weights is None or len(self.weights) != alphabet:
                    raise ConfigError(f"bernoulli driver needs {alphabet} weights")
                return BernoulliDriver(self.weights)
            if self.kind == "markov":
                if self.transition is None or len(self.transition) != alphabet:
                    raise ConfigError(f"markov driver needs a {alphabet}x{alphabet} transition matrix")
                return MarkovDriver(self.transition)
        except ConfigError:
            raise
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
        raise ConfigError(f"unknown driver kind {self.kind!r}")


@dataclass
class BoundConstants:
    c0: float = 1.0
    d: float | None = None
    alpha: float | None = None


@dataclass
class ExperimentConfig:
    experiment: str = "table1"
    seed: int = 20240101
    trials: int = 100
    threads: int = 1
    out: str = "out"
    system: SystemConfig = field(default_factory=SystemConfig)
    driver: DriverConfig = field(default_factory=DriverConfig)
    levels: list[int] = field(default_factory=lambda: [6])
    radii: list[float] | None = None
    convention: str = FLOOR
    target: list[int] | None = None
    step_ceiling: int = 10**9
    samples: int = 100000
    probes: int = 200
    grid_delta: float = 1e-3
    orbit_level: int = 7
    orbit_vectors: list[list[float]] | None = None
    orbit_start: list[float] | None = None
    bounds: BoundConstants = field(default_factory=BoundConstants)
    svg_size: int = 600
    svg_radius: float = 0.6

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        data = dict(data)
        nested = {"system": SystemConfig, "driver": DriverConfig, "bounds": BoundConstants}
        kwargs = {}
        known = set(cls.__dataclass_fields__)
        for key, value in data.items():
            key_py = key.replace("-", "_")
            if key_py not in known:
                raise ConfigError(f"unknown config key {key!r}")
            if key_py in nested:
                sub = nested[key_py]
                bad = set(value) - set(sub.__dataclass_fields__)
                if bad:
                    raise ConfigError(f"unknown keys in [{key}]: {sorted(bad)}")
                value = sub(**value)
            kwargs[key_py] = value
        return cls(**kwargs)

    @classmethod
    def load(cls, path: str | Path) -> "ExperimentConfig":
        try:
            with open(path, "rb") as fh:
                data = tomllib.load(fh)
        except tomllib.TOMLDecodeError as exc:
            raise ConfigError(f"cannot parse {path}: {exc}") from exc
        return cls.from_dict(data)

    def validate(self) -> None:
        if self.experiment not in EXPERIMENTS:
            raise ConfigError(f"unknown experiment {self.experiment!r}; expected one of {EXPERIMENTS}")
        if self.trials < 1:
            raise ConfigError("trials must be >= 1")
        if self.threads < 1:
            raise ConfigError("threads must be >= 1")
        if not 0 <= self.seed < 2**64:
            raise ConfigError("seed must be an unsigned 64-bit integer")
        if self.convention not in (FLOOR, CEIL):
            raise ConfigError(f"convention must be {FLOOR!r} or {CEIL!r}")
        if any(int(k) < 1 for k in self.levels):
            raise ConfigError("levels must be positive")
        if self.radii is not None and any(r <= 0 for r in self.radii):
            raise ConfigError("radii must be positive")
        if self.experiment not in ("table1", "table2"):
            self.system.validate()
            self.driver.build(self.system.alphabet())

    def to_dict(self) -> dict:
        return asdict(self)

    def canonical_json(self) -> str:
        """Result-determining fields only; output location and worker count do not change results."""
        d = self.to_dict()
        d.pop("out")
        d.pop("threads")
        return json.dumps(d, sort_keys=True, separators=(",", ":"))

    def config_hash(self) -> str:
        return hashlib.sha256(self.canonical_json().encode()).hexdigest()[:16]
