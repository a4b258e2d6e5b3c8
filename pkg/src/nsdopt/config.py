"""Experiment configuration for nsdopt."""

from __future__ import annotations

import os
from pathlib import Path
from typing import Any, Literal

import yaml
from pydantic import BaseModel, Field, ValidationError, model_validator

from nsdopt.models import AlgorithmName

WORKERS_ENV = "NSDOPT_WORKERS"
MAX_DEFAULT_WORKERS = 8

ProblemKind = Literal[
    "abs_deviation",
    "euclidean_distance",
    "linear",
    "max_affine",
    "worst_case_global",
    "worst_case_local",
]
GraphKind = Literal["path", "ring", "star", "complete", "file"]


class ConfigNotFoundError(Exception):
    """Raised when the experiment configuration file does not exist."""

    pass


class ConfigError(Exception):
    """Raised when a configuration file cannot be parsed or validated.

    ``errors`` holds one "field.path: message" line per problem.
    """

    def __init__(self, path: Path, errors: list[str]):
        self.path = path
        self.errors = errors
        super().__init__(f"invalid configuration {path}:\n  " + "\n  ".join(errors))


class ProblemSpec(BaseModel):
    """Local functions and the feasible ball.

    ``params`` depends on ``kind``:
    - abs_deviation: ``centers`` (n × d) or ``seed`` + ``spread`` for uniform draws
    - euclidean_distance: ``centers`` (or ``seed`` + ``spread``), optional ``scales``
    - linear: ``slopes`` (n × d) or ``seed``
    - max_affine: ``pieces`` (per node: {slopes, offsets})
    - worst_case_global: ``t``, ``L``
    - worst_case_local: ``t``, ``L``, ``eigengap``
    """

    kind: ProblemKind
    d: int = Field(gt=0)
    R: float = Field(default=1.0, gt=0)
    L_g: float | None = Field(default=None, gt=0)
    """Overrides the mean of the local Lipschitz constants."""

    params: dict[str, Any] = Field(default_factory=dict)

    @model_validator(mode="after")
    def _check_params(self) -> ProblemSpec:
        if self.kind.startswith("worst_case"):
            for key in ("t", "L"):
                if key not in self.params:
                    raise ValueError(f"{self.kind} needs params.{key}")
        if self.kind == "worst_case_local" and "eigengap" not in self.params:
            raise ValueError("worst_case_local needs params.eigengap")
        return self


class NetworkSpec(BaseModel):
    """Communication graph. Worst-case local problems build their own graph."""

    kind: GraphKind = "ring"
    n: int | None = Field(default=None, gt=0)
    tau: float = Field(default=1.0, ge=0)
    compute_times: list[float] | None = None
    file: Path | None = None
    """Edge-list file, relative to the config file."""

    @model_validator(mode="after")
    def _check_source(self) -> NetworkSpec:
        if self.kind == "file" and self.file is None:
            raise ValueError("kind 'file' needs a file")
        if self.kind != "file" and self.n is None:
            raise ValueError(f"kind {self.kind!r} needs n")
        if self.compute_times is not None and any(rho <= 0 for rho in self.compute_times):
            raise ValueError("compute_times must be positive")
        return self


class AlgorithmConstants(BaseModel):
    """Explicit iteration counts; anything left out is derived from ε."""

    T: int | None = Field(default=None, ge=1)
    K: int | None = Field(default=None, ge=1)
    M: int | None = Field(default=None, ge=1)
    iterations: int | None = Field(default=None, ge=1)


class AlgorithmSpec(BaseModel):
    name: AlgorithmName
    constants: Literal["auto"] | AlgorithmConstants = "auto"
    heterogeneous: bool = False
    record_every: int = Field(default=1, ge=1)
    averaging_tol: float | None = Field(default=None, gt=0)
    inner_tol: float = Field(default=1e-8, gt=0)

    def explicit(self) -> AlgorithmConstants:
        if self.constants == "auto":
            return AlgorithmConstants()
        return self.constants


class ExperimentConfig(BaseModel):
    """Top-level experiment file."""

    problem: ProblemSpec
    network: NetworkSpec = Field(default_factory=NetworkSpec)
    algorithm: AlgorithmSpec
    epsilon: float = Field(gt=0)
    seeds: list[int] = Field(min_length=1)
    output_dir: Path = Path("results")

    # Internal: directory of the config file (not from the file)
    _config_dir: Path | None = None

    def document(self) -> dict[str, Any]:
        return self.model_dump(mode="json")


def _format_errors(error: ValidationError) -> list[str]:
    lines = []
    for item in error.errors():
        location = ".".join(str(part) for part in item["loc"]) or "<root>"
        lines.append(f"{location}: {item['msg']}")
    return lines


def _resolve_paths(config: ExperimentConfig, config_dir: Path) -> ExperimentConfig:
    """Resolve the edge-list file and output directory against the config's directory."""
    if config.network.file is not None and not config.network.file.is_absolute():
        config.network.file = config_dir / config.network.file
    if not config.output_dir.is_absolute():
        config.output_dir = config_dir / config.output_dir
    config._config_dir = config_dir
    return config


def load_experiment(path: Path) -> ExperimentConfig:
    """Load an experiment from a JSON or YAML file.

    Raises:
        ConfigNotFoundError: If ``path`` does not exist.
        ConfigError: If the file does not parse or a field is invalid.
    """
    path = Path(path)
    if not path.exists():
        raise ConfigNotFoundError(
            f"Configuration file not found: {path}\n"
            "Run 'nsdopt init' to create one."
        )

    # JSON is a subset of YAML.
    try:
        with open(path) as f:
            data = yaml.safe_load(f) or {}
    except yaml.YAMLError as e:
        raise ConfigError(path, [f"<file>: {e}"]) from e
    if not isinstance(data, dict):
        raise ConfigError(path, ["<root>: expected a mapping"])

    try:
        config = ExperimentConfig(**data)
    except ValidationError as e:
        raise ConfigError(path, _format_errors(e)) from e

    config = _resolve_paths(config, path.resolve().parent)
    if config.network.file is not None and not config.network.file.exists():
        raise ConfigError(path, [f"network.file: file not found: {config.network.file}"])
    return config


def worker_count(seeds: int) -> int:
    """Threads for a seed sweep: $NSDOPT_WORKERS, else min(seeds, 8)."""
    value = os.environ.get(WORKERS_ENV)
    if value:
        try:
            return max(1, int(value))
        except ValueError:
            pass
    return max(1, min(seeds, MAX_DEFAULT_WORKERS))


STARTER_CONFIG: dict[str, Any] = {
    "problem": {
        "kind": "abs_deviation",
        "d": 1,
        "R": 1.0,
        "params": {"centers": [[-0.8], [-0.3], [0.1], [0.4], [0.9]]},
    },
    "network": {"kind": "ring", "n": 5, "tau": 1.0},
    "algorithm": {"name": "mspd", "constants": "auto"},
    "epsilon": 0.5,
    "seeds": [1, 2, 3],
    "output_dir": "results/ring5_mspd",
}
