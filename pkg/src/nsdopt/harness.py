"""Simulated-time cost model, closed-form time accounting and bound reports."""

from __future__ import annotations

import logging
import math
from typing import Protocol

import numpy as np

from nsdopt.models import AlgorithmName, BoundReport, BoundSample, RunTrace, TraceSample
from nsdopt.network import GossipMatrix, Network, SpanningTree
from nsdopt.objectives import ProblemInstance

logger = logging.getLogger(__name__)

ENVELOPE_ATOL = 1e-12


class OptimumUnknownError(Exception):
    """Raised when a bound comparison needs f̄* but the problem carries none."""

    pass


class CostModel:
    """Simulated clock of a black-box distributed procedure.

    Parallel work within a phase is charged as the slowest node; phases add up.
    One instance belongs to exactly one run.
    """

    def __init__(self, net: Network):
        self.net = net
        self.rho = net.rho()
        self.tau = net.tau
        self.time = 0.0
        self.subgradients = np.zeros(net.n, dtype=np.int64)
        self._edge_index = {edge: k for k, edge in enumerate(net.edges)}
        self.edge_messages = np.zeros(len(net.edges), dtype=np.int64)

    @property
    def messages(self) -> int:
        return int(self.edge_messages.sum())

    def _advance(self, elapsed: float) -> float:
        if elapsed < 0:
            raise ValueError(f"cannot charge negative time {elapsed}")
        self.time += elapsed
        return elapsed

    def charge_parallel_compute(self, counts: np.ndarray | list[int]) -> float:
        """Each node i computes counts_i subgradients: elapsed = max_i counts_i·ρ_i."""
        counts = np.asarray(counts, dtype=np.int64)
        if counts.shape != (self.net.n,):
            raise ValueError(f"expected {self.net.n} counts, got shape {counts.shape}")
        if np.any(counts < 0):
            raise ValueError("subgradient counts must be non-negative")
        self.subgradients += counts
        return self._advance(float(np.max(counts * self.rho)))

    def _tree_messages(self, tree: SpanningTree) -> None:
        for child, parent in enumerate(tree.parent):
            if parent >= 0:
                self.edge_messages[self._edge_index[(min(child, parent), max(child, parent))]] += 1

    def charge_tree_broadcast(self, tree: SpanningTree, tau: float | None = None) -> float:
        """Root to leaves, one level per τ: elapsed = depth·τ."""
        self._tree_messages(tree)
        return self._advance(tree.height * (self.tau if tau is None else tau))

    def charge_tree_aggregate(self, tree: SpanningTree, tau: float | None = None) -> float:
        """Leaves to root, summing at internal nodes: elapsed = depth·τ."""
        self._tree_messages(tree)
        return self._advance(tree.height * (self.tau if tau is None else tau))

    def charge_gossip_round(self, W: GossipMatrix, tau: float | None, K: int) -> float:
        """K synchronous neighbour exchanges: elapsed = K·τ."""
        if K < 0:
            raise ValueError(f"gossip steps must be non-negative, got {K}")
        self.edge_messages += 2 * K
        return self._advance(K * (self.tau if tau is None else tau))

    def sample(
        self,
        problem: ProblemInstance,
        iteration: int,
        node_points: np.ndarray,
        reported: np.ndarray,
    ) -> TraceSample:
        """Snapshot counters and evaluate f̄ at the nodes' and the reported iterates."""
        node_points = np.atleast_2d(node_points)
        center = node_points.mean(axis=0)
        consensus = float(np.mean(np.linalg.norm(node_points - center, axis=1)))
        return TraceSample(
            time=self.time,
            iteration=iteration,
            node_values=problem.objective_batch(node_points).tolist(),
            value=problem.objective(reported),
            consensus=consensus,
            subgrads=self.subgradients.tolist(),
            messages=self.messages,
            optimum=problem.optimum_value,
        )


# --- Closed-form time accounting ---


def drs_time(T: int, K: int, depth: int, tau: float, rho_max: float = 1.0) -> float:
    """T(2·depth·τ + K·ρ_max)."""
    return T * (2 * depth * tau + K * rho_max)


def naive_time(iterations: int, depth: int, tau: float, rho_max: float = 1.0) -> float:
    """iterations · (2·depth·τ + ρ_max)."""
    return iterations * (2 * depth * tau + rho_max)


def mspd_time(T: int, K: int, M: int, tau: float, rho: np.ndarray | None = None,
              heterogeneous: bool = False) -> float:
    """T(Kτ + compute) with compute = M·max ρ_i, or max_i ⌈M/ρ_i⌉ρ_i when heterogeneous."""
    if rho is None:
        compute = float(M)
    elif heterogeneous:
        compute = float(np.max(np.ceil(M / rho) * rho))
    else:
        compute = float(M * np.max(rho))
    return T * (K * tau + compute)


def mspd_time_bound(eps: float, R: float, L_ell: float, eigengap: float, tau: float) -> float:
    """⌈4RL_ℓ/ε⌉·τ/√γ + ⌈4RL_ℓ/ε⌉²."""
    count = math.ceil(4 * R * L_ell / eps)
    return count * tau / math.sqrt(eigengap) + count**2


# --- Rate bounds ---


def drs_rate_bound(R: float, L_g: float, d: int, t: int, K: int) -> float:
    """10RL_g d^{1/4}/t + 5RL_g/√(tK)."""
    return 10 * R * L_g * d**0.25 / t + 5 * R * L_g / math.sqrt(t * K)


def naive_rate_bound(R: float, L_g: float, t: int) -> float:
    """RL_g(2 + ln t)/(2√t) for the uniform average with steps R/(L_g√(s+1))."""
    return R * L_g * (2 + math.log(t)) / (2 * math.sqrt(t))


def mspd_rate_bound(R: float, L: float, eigengap: float, t: int, M: float) -> float:
    """(RL/√γ)(1/t + 1/M); M = inf drops the inner-loop term."""
    return R * L / math.sqrt(eigengap) * (1.0 / t + 1.0 / M)


class RateBound(Protocol):
    def rate_bound(self, iteration: int) -> float: ...

    @property
    def bound_name(self) -> str: ...


def aggregate_final_gaps(gaps: list[float]) -> tuple[float, float]:
    """Seed mean and standard error of the mean."""
    values = np.asarray(gaps, dtype=float)
    if values.size == 0:
        raise ValueError("no gaps to aggregate")
    stderr = float(np.std(values, ddof=1) / math.sqrt(values.size)) if values.size > 1 else 0.0
    return float(values.mean()), stderr


def compare_bounds(
    traces: RunTrace | list[RunTrace],
    problem: ProblemInstance,
    config: RateBound,
) -> BoundReport:
    """Evaluate the upper bound and lower envelope at every trace sample.

    Several traces (one per seed, identical sample times) are averaged and a
    sample violates the upper bound when mean > bound + 2·stderr. The lower
    envelope of a worst-case instance applies to samples at or before the
    time the instance was built for, and is checked against every node.

    Raises:
        OptimumUnknownError: If ``problem`` has no optimum value attached.
    """
    if problem.optimum_value is None:
        raise OptimumUnknownError(
            "bound comparison needs f̄*: attach one with objectives.with_optimum(problem)"
        )
    traces = [traces] if isinstance(traces, RunTrace) else list(traces)
    if not traces:
        raise ValueError("no traces to compare")
    algorithm: AlgorithmName = traces[0].algorithm
    stochastic = len(traces) > 1
    optimum = problem.optimum_value
    envelope = problem.envelope

    report = BoundReport(
        algorithm=algorithm,
        upper_bound_name=config.bound_name,
        envelope_name=None if envelope is None else f"{envelope.kind}_envelope",
        stochastic=stochastic,
        seeds=len(traces),
    )
    for column in zip(*(trace.samples for trace in traces), strict=True):
        times = {s.time for s in column}
        if len(times) != 1:
            raise ValueError(f"seed traces disagree on sample times: {sorted(times)}")
        head = column[0]
        gaps = [s.value - optimum for s in column]
        mean_gap, stderr = aggregate_final_gaps(gaps)
        min_node_gap = min(min(v - optimum for v in s.node_values) for s in column)

        upper = config.rate_bound(head.iteration) if head.iteration > 0 else None
        upper_violation = False
        if upper is not None:
            slack = 2 * stderr if stochastic else 0.0
            upper_violation = mean_gap > upper + slack

        floor = None
        envelope_violation = False
        if envelope is not None and head.time <= envelope.build_time:
            floor = envelope.floor()
            lowest = min(min_node_gap, min(gaps))
            envelope_violation = lowest < floor - ENVELOPE_ATOL

        report.samples.append(
            BoundSample(
                time=head.time,
                iteration=head.iteration,
                gap=mean_gap,
                stderr=stderr,
                min_node_gap=min_node_gap,
                upper_bound=upper,
                envelope=floor,
                upper_violation=upper_violation,
                envelope_violation=envelope_violation,
            )
        )
    if report.upper_violations or report.envelope_violations:
        logger.warning(
            "%s: %d upper-bound and %d envelope violations",
            algorithm,
            report.upper_violations,
            report.envelope_violations,
        )
    return report
