"""Campaign configuration: a JSON document validated on load."""

from __future__ import annotations

import hashlib
import json
import math
import os
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

from ..auxprocess import AuxParams, manual_params, schedule_params
from ..graph import Graph, random_regular, read_edgelist
from ..hamiltonian import DisorderSpec
from ..poisson import DEFAULT_T_GRID
from ..spectral import RescaledWindow

ENV_OUTPUT_DIR = "POISSONLAB_OUTPUT_DIR"
ENV_WORKERS = "POISSONLAB_WORKERS"
SOLVERS = ("householder-ql", "lapack")


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class GraphConfig:
    n: int | None = None
    degree: int | None = None
    seed: int | None = None
    edgelist: str | None = None

    def __post_init__(self):
        if self.edgelist is None and None in (self.n, self.degree, self.seed):
            raise ConfigError("graph needs either an edge list or n, degree and seed")

    def build(self) -> Graph:
        if self.edgelist is not None:
            return read_edgelist(self.edgelist)
        return random_regular(self.n, self.degree, self.seed)


@dataclass(frozen=True)
class AuxConfig:
    source: str = "manual"
    R: int | None = None
    tau: float | None = None
    C: float | None = None
    mu: float | None = None
    mu_s: float | None = None
    a: float | None = None

    def __post_init__(self):
        if self.source == "manual":
            if self.R is None or self.tau is None:
                raise ConfigError("manual aux parameters need R and tau")
        elif self.source == "schedule":
            if self.mu_s is None or self.a is None:
                raise ConfigError("schedule source needs mu_s and a")
        else:
            raise ConfigError(f"unknown aux source {self.source!r}")
        if self.mu is not None and self.mu <= 0:
            raise ConfigError("mu must be positive")

    def params(self, n: int, K: int) -> AuxParams:
        if self.source == "manual":
            return manual_params(self.R, self.tau, K, mu=self.mu, C=self.C)
        p = schedule_params(n, K, self.mu_s, self.a, strict=False)
        return replace(p, mu=self.mu)


@dataclass(frozen=True)
class ExperimentConfig:
    graph: GraphConfig
    alpha: float
    E: float = 0.0
    I: tuple[float, float] = (-2.0, 2.0)
    family: str = "uniform"
    rho0: float = 1.0
    aux: AuxConfig | None = None
    realizations: int = 100
    base_seed: int = 0
    t_grid: tuple[float, ...] = DEFAULT_T_GRID
    gap_window: float | None = 20.0
    count_intervals: tuple[tuple[float, float], ...] = ()
    lemma_checks: bool = False
    eigensolver: str = "householder-ql"
    verbose: bool = False
    output_dir: str | None = None
    workers: int = 1

    def __post_init__(self):
        if self.alpha < 0:
            raise ConfigError("alpha must be non-negative")
        if not self.I[1] > self.I[0]:
            raise ConfigError("window I needs a < b")
        if self.realizations < 0:
            raise ConfigError("realizations must be non-negative")
        if self.gap_window is not None and self.gap_window <= 0:
            raise ConfigError("gap_window must be positive")
        for a, b in self.count_intervals:
            if not b > a:
                raise ConfigError(f"count interval [{a}, {b}) is empty")
        if self.eigensolver not in SOLVERS:
            raise ConfigError(f"eigensolver must be one of {SOLVERS}")
        if self.workers < 1:
            raise ConfigError("workers must be positive")
        DisorderSpec(self.rho0, self.family)
        if any(t < 0 for t in self.t_grid) or not self.t_grid:
            raise ConfigError("t grid must be a non-empty list of non-negative values")

    # -- derived objects ------------------------------------------------------

    @property
    def disorder(self) -> DisorderSpec:
        return DisorderSpec(self.rho0, self.family)

    @property
    def density_sup(self) -> float:
        """Sup of the density of the diagonal entries alpha * omega."""
        return self.disorder.density_sup / self.alpha if self.alpha > 0 else math.inf

    def window(self, n: int, epsilon: float = 0.0) -> RescaledWindow:
        return RescaledWindow(self.E, self.I[0], self.I[1], n, epsilon)

    def gap_interval(self, n: int) -> tuple[float, float] | None:
        if self.gap_window is None:
            return None
        return self.E - 0.5 * self.gap_window / n, self.E + 0.5 * self.gap_window / n

    def aux_params(self, g: Graph) -> AuxParams | None:
        return None if self.aux is None else self.aux.params(g.n, g.K)

    # -- serialization --------------------------------------------------------

    def to_dict(self) -> dict:
        d = asdict(self)
        d["I"] = list(self.I)
        d["t_grid"] = list(self.t_grid)
        d["count_intervals"] = [list(c) for c in self.count_intervals]
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=1)

    @property
    def config_hash(self) -> str:
        """Hash of every field that influences the records."""
        d = self.to_dict()
        for k in ("output_dir", "workers"):
            d.pop(k)
        return hashlib.sha256(json.dumps(d, sort_keys=True).encode()).hexdigest()[:16]

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        d = dict(d)
        known = set(cls.__dataclass_fields__)
        unknown = set(d) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        try:
            d["graph"] = GraphConfig(**d["graph"])
            if d.get("aux") is not None:
                d["aux"] = AuxConfig(**d["aux"])
        except (KeyError, TypeError) as exc:
            raise ConfigError(f"malformed config: {exc}") from exc
        if "I" in d:
            d["I"] = tuple(d["I"])
        if "t_grid" in d:
            d["t_grid"] = tuple(d["t_grid"])
        if "count_intervals" in d:
            d["count_intervals"] = tuple(tuple(c) for c in d["count_intervals"])
        return cls(**d)

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        cfg = cls.from_dict(json.loads(Path(path).read_text()))
        return cfg.with_env()

    def with_env(self, environ=None) -> "ExperimentConfig":
        """Apply the output-directory and worker-count environment overrides."""
        env = os.environ if environ is None else environ
        changes = {}
        if env.get(ENV_OUTPUT_DIR):
            changes["output_dir"] = env[ENV_OUTPUT_DIR]
        if env.get(ENV_WORKERS):
            try:
                changes["workers"] = int(env[ENV_WORKERS])
            except ValueError as exc:
                raise ConfigError(f"{ENV_WORKERS} must be an integer") from exc
        return replace(self, **changes) if changes else self
