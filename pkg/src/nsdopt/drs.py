"""Distributed randomized smoothing and the naive distributed subgradient baseline.

Both run master/slave style over a BFS spanning tree: the current point is
broadcast down the tree, nodes compute in parallel and the sum of their
contributions is aggregated back up.
"""

from __future__ import annotations

import logging
import math

import numpy as np
from pydantic import BaseModel, Field

from nsdopt.harness import CostModel, drs_rate_bound, naive_rate_bound
from nsdopt.models import RunTrace
from nsdopt.network import Network, spanning_tree
from nsdopt.numerics import project_ball
from nsdopt.objectives import ProblemInstance, SeededStream, smoothed_estimate

logger = logging.getLogger(__name__)


class ConfigMismatchError(Exception):
    """Raised when algorithm constants were derived for a different problem."""

    pass


def accelerated_weights(T: int) -> list[float]:
    """α_0 = 1, α_{t+1} = 2/(1 + √(1 + 4/α_t²)) for t = 0..T."""
    alphas = [1.0]
    for _ in range(T):
        a = alphas[-1]
        alphas.append(2.0 / (1.0 + math.sqrt(1.0 + 4.0 / (a * a))))
    return alphas


class DrsConfig(BaseModel):
    """Constants of distributed randomized smoothing, schedules materialised on [0, T]."""

    eps: float = Field(gt=0)
    R: float = Field(gt=0)
    L_g: float = Field(gt=0)
    d: int = Field(gt=0)
    seed: int = 0
    T: int = Field(ge=1)
    K: int = Field(ge=1)
    alphas: list[float]
    smoothing: list[float]
    """γ_t = R d^{-1/4} α_t."""

    steps: list[float]
    """η_t = R α_t / (2 L_g (d^{1/4} + √((t+1)/K)))."""

    bound_name: str = "drs_rate"

    def rate_bound(self, iteration: int) -> float:
        return drs_rate_bound(self.R, self.L_g, self.d, iteration, self.K)

    def constants(self) -> dict[str, float]:
        return {"eps": self.eps, "R": self.R, "L_g": self.L_g, "d": self.d, "T": self.T,
                "K": self.K}


def drs_config(
    eps: float,
    R: float,
    L_g: float,
    d: int,
    seed: int = 0,
    T: int | None = None,
    K: int | None = None,
) -> DrsConfig:
    """T = ⌈20RL_g d^{1/4}/ε⌉ and K = ⌈5RL_g d^{-1/4}/ε⌉ unless given explicitly."""
    if eps <= 0 or R <= 0 or L_g <= 0:
        raise ValueError("eps, R and L_g must be positive")
    root = d**0.25
    T = math.ceil(20 * R * L_g * root / eps) if T is None else T
    K = math.ceil(5 * R * L_g / (root * eps)) if K is None else K
    alphas = accelerated_weights(T)
    return DrsConfig(
        eps=eps,
        R=R,
        L_g=L_g,
        d=d,
        seed=seed,
        T=T,
        K=K,
        alphas=alphas,
        smoothing=[R / root * a for a in alphas],
        steps=[
            R * a / (2 * L_g * (root + math.sqrt((t + 1) / K))) for t, a in enumerate(alphas)
        ],
    )


def _check_consistent(problem: ProblemInstance, R: float, L_g: float, d: int) -> None:
    if problem.d != d or not math.isclose(problem.R, R) or not math.isclose(problem.L_g, L_g):
        raise ConfigMismatchError(
            f"constants were derived for (d={d}, R={R}, L_g={L_g}) but the problem has "
            f"(d={problem.d}, R={problem.R}, L_g={problem.L_g})"
        )


def run_drs(
    problem: ProblemInstance,
    net: Network,
    cfg: DrsConfig,
    clock: CostModel,
    record_every: int = 1,
) -> tuple[np.ndarray, RunTrace]:
    """Run T iterations of distributed randomized smoothing.

    Every node draws the iteration's K Gaussian perturbations from the shared
    seeded stream, so they agree without exchanging them.

    Raises:
        ConfigMismatchError: If ``cfg`` was built for another (d, R, L_g) or
            the network size differs from the number of local functions.
    """
    _check_consistent(problem, cfg.R, cfg.L_g, cfg.d)
    if net.n != problem.n:
        raise ConfigMismatchError(f"network has {net.n} nodes, problem has {problem.n}")
    tree = spanning_tree(net)
    stream = SeededStream(seed=cfg.seed)
    n, R = problem.n, problem.R
    logger.info("drs: T=%d K=%d n=%d d=%d depth=%d", cfg.T, cfg.K, n, problem.d, tree.height)

    x = np.zeros(problem.d)
    z = np.zeros(problem.d)
    G = np.zeros(problem.d)
    trace = RunTrace(
        algorithm="drs",
        seed=cfg.seed,
        metadata={
            "depth_tau": tree.height * net.tau,
            "root": tree.root,
            "T": cfg.T,
            "K": cfg.K,
            "max_iterate_norm": 0.0,
        },
    )
    trace.append(clock.sample(problem, 0, np.tile(x, (n, 1)), x))
    counts = np.full(n, cfg.K)
    largest_norm = 0.0

    for t in range(cfg.T):
        alpha = cfg.alphas[t]
        y = (1 - alpha) * x + alpha * z
        clock.charge_tree_broadcast(tree)
        contributions = np.zeros(problem.d)
        for oracle in problem.locals:
            estimate = smoothed_estimate(oracle, y, cfg.smoothing[t], cfg.K, stream, t)
            contributions += estimate.gradient
        clock.charge_parallel_compute(counts)
        clock.charge_tree_aggregate(tree)

        G = G + contributions / (n * alpha)
        z = project_ball(-cfg.steps[t + 1] * G, 0.0, R)
        x = (1 - alpha) * x + alpha * z
        largest_norm = max(largest_norm, float(np.linalg.norm(x)), float(np.linalg.norm(y)),
                           float(np.linalg.norm(z)))

        if (t + 1) % record_every == 0 or t + 1 == cfg.T:
            trace.append(clock.sample(problem, t + 1, np.tile(x, (n, 1)), x))
            logger.debug("drs t=%d time=%.6g value=%.6g", t + 1, clock.time, trace.final.value)

    trace.metadata["max_iterate_norm"] = largest_norm
    return x, trace


class NaiveConfig(BaseModel):
    """Projected subgradient baseline: ⌈(RL_g/ε)²⌉ iterations."""

    eps: float = Field(gt=0)
    R: float = Field(gt=0)
    L_g: float = Field(gt=0)
    iterations: int = Field(ge=1)
    bound_name: str = "naive_rate"

    def rate_bound(self, iteration: int) -> float:
        return naive_rate_bound(self.R, self.L_g, iteration)

    def constants(self) -> dict[str, float]:
        return {"eps": self.eps, "R": self.R, "L_g": self.L_g, "iterations": self.iterations}


def naive_config(eps: float, R: float, L_g: float, iterations: int | None = None) -> NaiveConfig:
    if eps <= 0:
        raise ValueError(f"eps must be positive, got {eps}")
    if iterations is None:
        iterations = math.ceil((R * L_g / eps) ** 2)
    return NaiveConfig(eps=eps, R=R, L_g=L_g, iterations=iterations)


def run_naive_subgradient(
    problem: ProblemInstance,
    net: Network,
    eps: float,
    clock: CostModel,
    iterations: int | None = None,
    record_every: int = 1,
) -> tuple[np.ndarray, RunTrace]:
    """Distributed projected subgradient descent with step R/(L_g √(t+1)).

    Each iteration broadcasts θ_t, sums one subgradient per node up the tree
    and reports the uniform average of θ_0..θ_t.
    """
    if net.n != problem.n:
        raise ConfigMismatchError(f"network has {net.n} nodes, problem has {problem.n}")
    cfg = naive_config(eps, problem.R, max(problem.L_g, 1e-300), iterations)
    tree = spanning_tree(net)
    n, R = problem.n, problem.R
    logger.info("naive: %d iterations, n=%d depth=%d", cfg.iterations, n, tree.height)

    theta = np.zeros(problem.d)
    average = np.zeros(problem.d)
    trace = RunTrace(
        algorithm="naive",
        metadata={"depth_tau": tree.height * net.tau, "iterations": cfg.iterations},
    )
    trace.append(clock.sample(problem, 0, np.tile(theta, (n, 1)), theta))
    ones = np.ones(n, dtype=np.int64)

    for t in range(cfg.iterations):
        clock.charge_tree_broadcast(tree)
        grad = problem.subgradient(theta)
        clock.charge_parallel_compute(ones)
        clock.charge_tree_aggregate(tree)

        average += (theta - average) / (t + 1)
        theta = project_ball(theta - R / (cfg.L_g * math.sqrt(t + 1)) * grad, 0.0, R)
        if (t + 1) % record_every == 0 or t + 1 == cfg.iterations:
            trace.append(clock.sample(problem, t + 1, np.tile(average, (n, 1)), average))

    return average, trace
