"""Multi-step primal-dual: decentralized Chambolle-Pock with accelerated gossip.

Nodes hold primal rows Θ (n × d) and dual rows Y = ΛAᵀ. The dual step gossips
2Θ^t − Θ^{t-1} through the Chebyshev polynomial P_K(W̃); the primal step is a
local proximal problem approximated by M projected subgradient steps.
"""

from __future__ import annotations

import logging
import math

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from nsdopt.drs import ConfigMismatchError
from nsdopt.harness import CostModel, mspd_rate_bound
from nsdopt.models import RunTrace
from nsdopt.network import (
    GossipMatrix,
    accelerated_gossip,
    chebyshev_polynomial_matrix,
    default_gossip_steps,
    gossip_average,
    path_graph,
)
from nsdopt.numerics import project_ball
from nsdopt.objectives import ObjectiveOracle, ProblemInstance

logger = logging.getLogger(__name__)

CP_CONDITION_RTOL = 1e-12
# Reference prox solves stop here even if the a-priori bound asks for more.
MAX_REFERENCE_INNER_STEPS = 1_000_000


class MspdConfig(BaseModel):
    """Constants of the multi-step primal-dual method."""

    eps: float = Field(gt=0)
    R: float = Field(gt=0)
    L_ell: float = Field(gt=0)
    n: int = Field(gt=0)
    eigengap: float = Field(gt=0, le=1)
    """γ(W) of the underlying gossip matrix."""

    K: int = Field(ge=1)
    T: int = Field(ge=1)
    M: int = Field(ge=1)
    c1: float = Field(ge=0, lt=1)
    eta: float = Field(gt=0)
    sigma: float = Field(gt=0)
    tau: float = Field(default=0.0, ge=0)
    seed: int = 0
    heterogeneous: bool = False
    """Node i runs ⌈M/ρ_i⌉ inner steps."""

    compute_times: list[float] | None = None
    L_c: float | None = None
    """sqrt((1/n) Σ ρ_i L_i²), set in heterogeneous mode."""

    polynomial_eigengap: float = Field(gt=0, le=1)
    """Measured γ(P_K(W̃))."""

    polynomial_lambda_max: float = Field(ge=0)
    """Measured λ₁(P_K(W̃)); zero on a single node."""

    bound_name: str = "mspd_rate"

    def inner_steps(self) -> np.ndarray:
        if self.heterogeneous and self.compute_times is not None:
            return np.ceil(self.M / np.asarray(self.compute_times)).astype(np.int64)
        return np.full(self.n, self.M, dtype=np.int64)

    def rate_bound(self, iteration: int) -> float:
        lipschitz = self.L_c if self.heterogeneous and self.L_c is not None else self.L_ell
        return mspd_rate_bound(self.R, lipschitz, self.polynomial_eigengap, iteration, self.M)

    def constants(self) -> dict[str, float]:
        return {
            "eps": self.eps,
            "K": self.K,
            "T": self.T,
            "M": self.M,
            "c1": self.c1,
            "eta": self.eta,
            "sigma": self.sigma,
            "eigengap": self.eigengap,
            "polynomial_eigengap": self.polynomial_eigengap,
            "polynomial_lambda_max": self.polynomial_lambda_max,
        }


def polynomial_eigengap_bound(c1: float, K: int) -> float:
    """((1 − c₁^K) / (1 + c₁^K))², a lower bound on γ(P_K(W̃))."""
    q = c1**K
    return ((1 - q) / (1 + q)) ** 2


def polynomial_lambda_max_bound(c1: float, K: int) -> float:
    """(1 + c₁^K)² / (1 + c₁^{2K}), an upper bound on λ₁(P_K(W̃))."""
    q = c1**K
    return (1 + q) ** 2 / (1 + q * q)


def mspd_config(
    eps: float,
    R: float,
    L_ell: float,
    W: GossipMatrix,
    n: int,
    tau: float | None = None,
    T: int | None = None,
    M: int | None = None,
    K: int | None = None,
    seed: int = 0,
    heterogeneous: bool = False,
    problem: ProblemInstance | None = None,
) -> MspdConfig:
    """Derive K, T = M = ⌈4RL_ℓ/ε⌉, c₁, η and a σ that satisfies ση λ₁(P_K) ≤ 1.

    σ is the header value (1 + c₁^{2K}) / (τ(1 − c₁^K)²) when τ > 0, capped at
    1/(η λ₁(P_K(W̃))).
    """
    if eps <= 0 or R <= 0 or L_ell <= 0:
        raise ValueError("eps, R and L_ell must be positive")
    if W.n != n:
        raise ConfigMismatchError(f"gossip matrix has order {W.n}, expected {n}")
    if tau is None:
        tau = W.network.tau if W.network is not None else 0.0
    gamma = W.eigengap
    K = default_gossip_steps(W) if K is None else K
    count = math.ceil(4 * R * L_ell / eps)
    T = count if T is None else T
    M = count if M is None else M
    root = math.sqrt(gamma)
    c1 = (1 - root) / (1 + root)
    q = c1**K
    eta = n * R / L_ell * (1 - q) / (1 + q)

    if n == 1:
        lambda_max, polynomial_gap = 0.0, 1.0
    else:
        polynomial = chebyshev_polynomial_matrix(W, K)
        lambda_max, polynomial_gap = polynomial.lambda_max, polynomial.eigengap
    cap = math.inf if lambda_max == 0 else 1.0 / (eta * lambda_max)
    header = (1 + q * q) / (tau * (1 - q) ** 2) if tau > 0 else math.inf
    sigma = min(header, cap)
    if math.isinf(sigma):
        sigma = 1.0

    compute_times = None
    L_c = None
    if W.network is not None and W.network.compute_times is not None:
        compute_times = list(W.network.compute_times)
        if problem is not None:
            L_c = problem.L_c(np.asarray(compute_times))

    cfg = MspdConfig(
        eps=eps,
        R=R,
        L_ell=L_ell,
        n=n,
        eigengap=gamma,
        K=K,
        T=T,
        M=M,
        c1=c1,
        eta=eta,
        sigma=sigma,
        polynomial_eigengap=min(polynomial_gap, 1.0),
        polynomial_lambda_max=lambda_max,
        tau=tau,
        seed=seed,
        heterogeneous=heterogeneous,
        compute_times=compute_times,
        L_c=L_c,
    )
    logger.info("mspd constants: %s", cfg.constants())
    return cfg


class PrimalDualState(BaseModel):
    """Θ^t, Θ^{t-1} and the dual rows Y^t."""

    model_config = ConfigDict(arbitrary_types_allowed=True)

    theta: np.ndarray
    theta_prev: np.ndarray
    Y: np.ndarray

    @classmethod
    def zeros(cls, n: int, d: int) -> PrimalDualState:
        return cls(theta=np.zeros((n, d)), theta_prev=np.zeros((n, d)), Y=np.zeros((n, d)))

    def dual_kernel_residual(self) -> float:
        """‖Y^T 𝟙‖₂ / (1 + ‖Y‖_F); stays near zero since 𝟙 is in the gossip kernel."""
        return float(np.linalg.norm(self.Y.sum(axis=0)) / (1.0 + np.linalg.norm(self.Y)))

    def max_primal_norm(self) -> float:
        return float(np.max(np.linalg.norm(self.theta, axis=1)))


def inner_prox_subgradient(
    f_i: ObjectiveOracle,
    y_i: np.ndarray,
    theta_i: np.ndarray,
    eta: float,
    n: int,
    M: int,
    R: float,
) -> np.ndarray:
    """M projected subgradient steps with weights 2/(m+2) on the local prox problem.

    Approximates argmin_{‖θ‖≤R} (1/n) f_i(θ) − θ·y_i + (1/2η)‖θ − θ_i‖².
    """
    if M < 1:
        raise ValueError(f"inner iteration count must be at least 1, got {M}")
    anchor = theta_i + eta * y_i
    current = np.array(theta_i, dtype=float)
    for m in range(M):
        grad = f_i.subgradient(current)
        current = (m * current - 2.0 * ((eta / n) * grad - anchor)) / (m + 2)
        current = project_ball(current, 0.0, R)
    return current


class _Averager:
    """Running per-node and global time averages of Θ^1..Θ^t."""

    def __init__(self, n: int, d: int):
        self.count = 0
        self.nodes = np.zeros((n, d))

    def add(self, theta: np.ndarray) -> None:
        self.count += 1
        self.nodes += (theta - self.nodes) / self.count

    @property
    def center(self) -> np.ndarray:
        return self.nodes.mean(axis=0)


def _check_order(problem: ProblemInstance, W: GossipMatrix) -> None:
    if W.n != problem.n:
        raise ConfigMismatchError(
            f"gossip matrix has order {W.n} but the problem has {problem.n} local functions"
        )


def run_mspd(
    problem: ProblemInstance,
    W: GossipMatrix,
    cfg: MspdConfig,
    clock: CostModel,
    record_every: int = 1,
    averaging_tol: float | None = None,
) -> tuple[np.ndarray, RunTrace]:
    """Run T outer iterations and return θ̄_T = (1/T)(1/n) Σ_t Σ_i θ_i^t.

    With ``averaging_tol`` the node time-averages are also gossip-averaged after
    the run; the rounds used and the worst post-averaging node value go into
    the trace metadata and are not charged to ``clock``.

    Raises:
        ConfigMismatchError: If W's order differs from the number of local functions.
    """
    _check_order(problem, W)
    if cfg.n != problem.n:
        raise ConfigMismatchError(f"config was built for n={cfg.n}, problem has n={problem.n}")
    n, d, R = problem.n, problem.d, problem.R
    state = PrimalDualState.zeros(n, d)
    averages = _Averager(n, d)
    inner_steps = cfg.inner_steps()
    trace = RunTrace(algorithm="mspd", seed=cfg.seed, metadata={"K": cfg.K, "T": cfg.T,
                                                                "M": cfg.M})
    trace.append(clock.sample(problem, 0, state.theta, state.theta.mean(axis=0)))
    worst_kernel, worst_norm = 0.0, 0.0

    for t in range(cfg.T):
        relaxed = 2 * state.theta - state.theta_prev
        state.Y = state.Y - cfg.sigma * accelerated_gossip(relaxed, W, cfg.K)
        clock.charge_gossip_round(W, cfg.tau, cfg.K)

        updated = np.empty_like(state.theta)
        for i, oracle in enumerate(problem.locals):
            updated[i] = inner_prox_subgradient(
                oracle, state.Y[i], state.theta[i], cfg.eta, n, int(inner_steps[i]), R
            )
        clock.charge_parallel_compute(inner_steps)
        state.theta_prev, state.theta = state.theta, updated
        averages.add(state.theta)

        worst_kernel = max(worst_kernel, state.dual_kernel_residual())
        worst_norm = max(worst_norm, state.max_primal_norm())
        if (t + 1) % record_every == 0 or t + 1 == cfg.T:
            trace.append(clock.sample(problem, t + 1, averages.nodes, averages.center))
            logger.debug("mspd t=%d time=%.6g value=%.6g", t + 1, clock.time, trace.final.value)

    trace.metadata.update(
        max_dual_kernel_residual=worst_kernel,
        max_primal_norm=worst_norm,
        polynomial_eigengap=cfg.polynomial_eigengap,
    )
    if averaging_tol is not None:
        result = gossip_average(averages.nodes, W, cfg.K, averaging_tol)
        trace.metadata.update(
            averaging_rounds=result.rounds,
            averaging_time=result.rounds * cfg.K * cfg.tau,
            post_averaging_values=problem.objective_batch(result.values).tolist(),
        )
    return averages.center, trace


def exact_local_prox(
    f_i: ObjectiveOracle,
    y_i: np.ndarray,
    theta_i: np.ndarray,
    eta: float,
    n: int,
    R: float,
    inner_tol: float,
) -> np.ndarray:
    """Solve the local prox problem of step (b′) over B₂(0, R).

    Uses the oracle's closed-form prox of (η/n)f_i at θ_i + η y_i when it lands
    in the ball (clipped onto [−R, R] in one dimension). Otherwise runs the
    inner loop long enough that the strongly convex bound 2G²/(M+1) ≤ inner_tol.
    """
    anchor = theta_i + eta * y_i
    point = f_i.prox(anchor, eta / n)
    if point is not None:
        if point.size == 1:
            return np.clip(point, -R, R)
        if np.linalg.norm(point) <= R:
            return point
    G = (eta / n) * f_i.lipschitz + float(np.linalg.norm(anchor)) + R
    steps = math.ceil(2 * G * G / inner_tol)
    if steps > MAX_REFERENCE_INNER_STEPS:
        logger.warning("reference prox capped at %d inner steps (needs %d)",
                       MAX_REFERENCE_INNER_STEPS, steps)
        steps = MAX_REFERENCE_INNER_STEPS
    return inner_prox_subgradient(f_i, y_i, theta_i, eta, n, steps, R)


def run_chambolle_pock_exact(
    problem: ProblemInstance,
    W: GossipMatrix,
    eta: float,
    sigma: float,
    T: int,
    inner_tol: float,
) -> tuple[np.ndarray, RunTrace]:
    """Reference primal-dual run with the gossip operator W applied directly.

    To match `run_mspd`, pass the materialised P_K(W̃) as ``W``. Every outer
    iteration is charged one time unit on a private clock.

    Raises:
        ConfigMismatchError: If σ η λ₁(W) > 1 or W's order is wrong.
    """
    _check_order(problem, W)
    if sigma * eta * W.lambda_max > 1 + CP_CONDITION_RTOL:
        raise ConfigMismatchError(
            f"step sizes violate σ·η·λ₁(W) ≤ 1: {sigma * eta * W.lambda_max:.6g}"
        )
    n, d, R = problem.n, problem.d, problem.R
    clock = CostModel(path_graph(n, tau=0.0))
    state = PrimalDualState.zeros(n, d)
    averages = _Averager(n, d)
    trace = RunTrace(algorithm="cp_exact", metadata={"T": T, "inner_tol": inner_tol})
    trace.append(clock.sample(problem, 0, state.theta, state.theta.mean(axis=0)))
    ones = np.ones(n, dtype=np.int64)
    worst_kernel = 0.0

    for t in range(T):
        state.Y = state.Y - sigma * (W.entries @ (2 * state.theta - state.theta_prev))
        updated = np.empty_like(state.theta)
        for i, oracle in enumerate(problem.locals):
            updated[i] = exact_local_prox(
                oracle, state.Y[i], state.theta[i], eta, n, R, inner_tol
            )
        clock.charge_parallel_compute(ones)
        state.theta_prev, state.theta = state.theta, updated
        averages.add(state.theta)
        worst_kernel = max(worst_kernel, state.dual_kernel_residual())
        trace.append(clock.sample(problem, t + 1, averages.nodes, averages.center))

    trace.metadata["max_dual_kernel_residual"] = worst_kernel
    return averages.center, trace
