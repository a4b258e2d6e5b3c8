"""Data models for nsdopt run records."""

from __future__ import annotations

import csv
import hashlib
import io
import json
from pathlib import Path
from typing import Any, Literal

from pydantic import BaseModel, Field, computed_field, model_validator

AlgorithmName = Literal["naive", "drs", "mspd", "cp_exact"]
SweepAxis = Literal["epsilon", "dimension", "eigengap"]

TRACE_HEADER = ["time", "node", "gap", "consensus", "subgrads", "messages"]


def config_digest(document: dict[str, Any]) -> str:
    """Short content hash of a JSON-serialisable configuration."""
    payload = json.dumps(document, sort_keys=True, default=str)
    return hashlib.sha256(payload.encode()).hexdigest()[:16]


class TraceSample(BaseModel):
    """State of a run at one simulated instant."""

    time: float
    """Simulated time in time units."""

    iteration: int
    """Outer iterations completed."""

    node_values: list[float]
    """f̄ evaluated at each node's reported iterate."""

    value: float
    """f̄ at the algorithm's reported iterate."""

    consensus: float = 0.0
    """(1/n) Σ_i ‖θ_i − mean‖₂ over the nodes' reported iterates."""

    subgrads: list[int]
    """Cumulative subgradient evaluations per node."""

    messages: int
    """Cumulative vector messages over all edges."""

    optimum: float | None = None
    """f̄* when known; gaps are measured against it."""

    @computed_field
    @property
    def gap(self) -> float | None:
        return None if self.optimum is None else self.value - self.optimum

    def node_gaps(self) -> list[float] | None:
        if self.optimum is None:
            return None
        return [v - self.optimum for v in self.node_values]


class RunTrace(BaseModel):
    """Time series of one run. Sample times are strictly increasing."""

    algorithm: AlgorithmName
    seed: int | None = None
    config_digest: str = ""
    samples: list[TraceSample] = Field(default_factory=list)
    metadata: dict[str, Any] = Field(default_factory=dict)

    @model_validator(mode="after")
    def _check_times(self) -> RunTrace:
        for before, after in zip(self.samples, self.samples[1:]):
            if after.time <= before.time:
                raise ValueError(
                    f"sample times must increase: {after.time} follows {before.time}"
                )
        return self

    def append(self, sample: TraceSample) -> None:
        if self.samples and sample.time <= self.samples[-1].time:
            raise ValueError(
                f"sample times must increase: {sample.time} follows {self.samples[-1].time}"
            )
        self.samples.append(sample)

    @property
    def final(self) -> TraceSample:
        return self.samples[-1]

    @property
    def total_time(self) -> float:
        return self.samples[-1].time if self.samples else 0.0

    def best_gaps(self) -> list[float]:
        """Minimum-so-far of the reported gap."""
        best, out = float("inf"), []
        for sample in self.samples:
            if sample.gap is None:
                raise ValueError("trace has no optimum attached")
            best = min(best, sample.gap)
            out.append(best)
        return out

    def to_csv(self) -> str:
        """One row per node plus a ``mean`` row per sample."""
        buffer = io.StringIO()
        writer = csv.writer(buffer, lineterminator="\n")
        writer.writerow(TRACE_HEADER)
        for sample in self.samples:
            gaps = sample.node_gaps()
            for node, subgrads in enumerate(sample.subgrads):
                gap = "" if gaps is None else repr(gaps[node])
                writer.writerow(
                    [repr(sample.time), node, gap, repr(sample.consensus), subgrads,
                     sample.messages]
                )
            mean_gap = "" if sample.gap is None else repr(sample.gap)
            writer.writerow(
                [repr(sample.time), "mean", mean_gap, repr(sample.consensus),
                 sum(sample.subgrads), sample.messages]
            )
        return buffer.getvalue()

    def write_csv(self, path: Path) -> None:
        path.write_text(self.to_csv())


class BoundSample(BaseModel):
    time: float
    iteration: int
    gap: float
    """Seed-mean gap of the reported iterate."""

    stderr: float = 0.0
    min_node_gap: float
    upper_bound: float | None = None
    envelope: float | None = None
    upper_violation: bool = False
    envelope_violation: bool = False


class BoundReport(BaseModel):
    """Measured gaps against the applicable upper bound and lower envelope."""

    algorithm: AlgorithmName
    upper_bound_name: str
    envelope_name: str | None = None
    stochastic: bool = False
    seeds: int = 1
    samples: list[BoundSample] = Field(default_factory=list)

    @computed_field
    @property
    def upper_violations(self) -> int:
        return sum(s.upper_violation for s in self.samples)

    @computed_field
    @property
    def envelope_violations(self) -> int:
        return sum(s.envelope_violation for s in self.samples)

    @property
    def final(self) -> BoundSample:
        return self.samples[-1]


class RunSummary(BaseModel):
    """Contents of ``summary.json``."""

    algorithm: AlgorithmName
    seeds: list[int]
    final_gap_mean: float | None = None
    final_gap_stderr: float | None = None
    total_time: float
    closed_form_time: float
    constants: dict[str, Any] = Field(default_factory=dict)
    upper_violations: int = 0
    envelope_violations: int = 0
    config_digest: str = ""


class SweepRow(BaseModel):
    """Time-to-ε of each algorithm for one value of the swept axis."""

    axis: SweepAxis
    value: float
    times: dict[str, float]
    """Closed-form simulated time per algorithm."""

    communication: dict[str, float] = Field(default_factory=dict)
    """Communication share of each time."""


def write_sweep_csv(rows: list[SweepRow], path: Path | None = None) -> str:
    algorithms = sorted({name for row in rows for name in row.times})
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(
        ["axis", "value"] + [f"time_{a}" for a in algorithms]
        + [f"comm_{a}" for a in algorithms]
    )
    for row in rows:
        writer.writerow(
            [row.axis, repr(row.value)]
            + [repr(row.times[a]) if a in row.times else "" for a in algorithms]
            + [repr(row.communication[a]) if a in row.communication else "" for a in algorithms]
        )
    text = buffer.getvalue()
    if path is not None:
        path.write_text(text)
    return text
