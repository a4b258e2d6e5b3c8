"""Convex objective oracles, Gaussian smoothing and worst-case instances.

Oracles are stateless: each exposes evaluation, a deterministic subgradient
selection, vectorised batch versions of both and, when a closed form exists,
the unconstrained proximal map.
"""

from __future__ import annotations

import logging
import math
from abc import ABC, abstractmethod
from typing import TYPE_CHECKING, Any, Literal

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, computed_field

from nsdopt.numerics import project_ball

if TYPE_CHECKING:
    from nsdopt.network import GossipMatrix

logger = logging.getLogger(__name__)

ObjectiveKind = Literal[
    "abs_deviation",
    "euclidean_distance",
    "linear",
    "max_affine",
    "zero",
    "scaled",
    "worst_case_piece",
]


class DimensionTooSmallError(Exception):
    """Raised when a worst-case instance does not fit in the requested dimension."""

    pass


# --- Oracles ---


class ObjectiveOracle(ABC):
    """Evaluation and subgradient map of one convex function on R^d."""

    kind: ObjectiveKind

    def __init__(self, dimension: int, lipschitz: float):
        self.dimension = int(dimension)
        self.lipschitz = float(lipschitz)

    def evaluate(self, x: np.ndarray) -> float:
        return float(self.evaluate_batch(np.atleast_2d(x))[0])

    def subgradient(self, x: np.ndarray) -> np.ndarray:
        return self.subgradient_batch(np.atleast_2d(x))[0]

    @abstractmethod
    def evaluate_batch(self, points: np.ndarray) -> np.ndarray:
        """Values at the rows of ``points`` (shape m × d)."""

    @abstractmethod
    def subgradient_batch(self, points: np.ndarray) -> np.ndarray:
        """One subgradient per row of ``points``."""

    def prox(self, v: np.ndarray, step: float) -> np.ndarray | None:
        """argmin_x step·f(x) + ½‖x − v‖², or None when no closed form is known."""
        return None

    def params(self) -> dict[str, Any]:
        return {}

    def describe(self) -> dict[str, Any]:
        return {"kind": self.kind, "d": self.dimension, **self.params()}


class ZeroObjective(ObjectiveOracle):
    kind = "zero"

    def __init__(self, dimension: int):
        super().__init__(dimension, 0.0)

    def evaluate_batch(self, points: np.ndarray) -> np.ndarray:
        return np.zeros(points.shape[0])

    def subgradient_batch(self, points: np.ndarray) -> np.ndarray:
        return np.zeros_like(points, dtype=float)

    def prox(self, v: np.ndarray, step: float) -> np.ndarray:
        return np.array(v, dtype=float)


class AbsDeviation(ObjectiveOracle):
    """f(x) = ‖x − a‖₁; the subgradient at a kink is 0 in that coordinate."""

    kind = "abs_deviation"

    def __init__(self, center: np.ndarray):
        self.center = np.atleast_1d(np.asarray(center, dtype=float))
        super().__init__(self.center.size, math.sqrt(self.center.size))

    def evaluate_batch(self, points: np.ndarray) -> np.ndarray:
        return np.abs(points - self.center).sum(axis=1)

    def subgradient_batch(self, points: np.ndarray) -> np.ndarray:
        return np.sign(points - self.center)

    def prox(self, v: np.ndarray, step: float) -> np.ndarray:
        offset = np.asarray(v, dtype=float) - self.center
        return self.center + np.sign(offset) * np.maximum(np.abs(offset) - step, 0.0)

    def params(self) -> dict[str, Any]:
        return {"center": self.center.tolist()}


class EuclideanDistance(ObjectiveOracle):
    """f(x) = scale · ‖x − a‖₂; the subgradient at x = a is 0."""

    kind = "euclidean_distance"

    def __init__(self, center: np.ndarray, scale: float = 1.0):
        if scale < 0:
            raise ValueError(f"scale must be non-negative, got {scale}")
        self.center = np.atleast_1d(np.asarray(center, dtype=float))
        self.scale = float(scale)
        super().__init__(self.center.size, self.scale)

    def evaluate_batch(self, points: np.ndarray) -> np.ndarray:
        return self.scale * np.linalg.norm(points - self.center, axis=1)

    def subgradient_batch(self, points: np.ndarray) -> np.ndarray:
        offset = points - self.center
        norms = np.linalg.norm(offset, axis=1, keepdims=True)
        safe = np.where(norms > 0.0, norms, 1.0)
        return np.where(norms > 0.0, self.scale * offset / safe, 0.0)

    def prox(self, v: np.ndarray, step: float) -> np.ndarray:
        offset = np.asarray(v, dtype=float) - self.center
        norm = float(np.linalg.norm(offset))
        if norm <= step * self.scale:
            return self.center.copy()
        return self.center + (1.0 - step * self.scale / norm) * offset

    def params(self) -> dict[str, Any]:
        return {"center": self.center.tolist(), "scale": self.scale}


class LinearObjective(ObjectiveOracle):
    """f(x) = a · x."""

    kind = "linear"

    def __init__(self, slope: np.ndarray):
        self.slope = np.atleast_1d(np.asarray(slope, dtype=float))
        super().__init__(self.slope.size, float(np.linalg.norm(self.slope)))

    def evaluate_batch(self, points: np.ndarray) -> np.ndarray:
        return points @ self.slope

    def subgradient_batch(self, points: np.ndarray) -> np.ndarray:
        return np.broadcast_to(self.slope, points.shape).astype(float)

    def prox(self, v: np.ndarray, step: float) -> np.ndarray:
        return np.asarray(v, dtype=float) - step * self.slope

    def params(self) -> dict[str, Any]:
        return {"slope": self.slope.tolist()}


class MaxAffine(ObjectiveOracle):
    """f(x) = max_j (s_j · x + b_j); ties resolve to the lowest index."""

    kind = "max_affine"

    def __init__(self, slopes: np.ndarray, offsets: np.ndarray):
        self.slopes = np.atleast_2d(np.asarray(slopes, dtype=float))
        self.offsets = np.asarray(offsets, dtype=float).reshape(-1)
        if self.slopes.shape[0] != self.offsets.size:
            raise ValueError(
                f"{self.slopes.shape[0]} slopes but {self.offsets.size} offsets"
            )
        lipschitz = float(np.max(np.linalg.norm(self.slopes, axis=1)))
        super().__init__(self.slopes.shape[1], lipschitz)

    def evaluate_batch(self, points: np.ndarray) -> np.ndarray:
        return np.max(points @ self.slopes.T + self.offsets, axis=1)

    def subgradient_batch(self, points: np.ndarray) -> np.ndarray:
        active = np.argmax(points @ self.slopes.T + self.offsets, axis=1)
        return self.slopes[active]

    def params(self) -> dict[str, Any]:
        return {"slopes": self.slopes.tolist(), "offsets": self.offsets.tolist()}


class ScaledObjective(ObjectiveOracle):
    """factor · base, used to split one function uniformly over several nodes."""

    kind = "scaled"

    def __init__(self, base: ObjectiveOracle, factor: float):
        if factor < 0:
            raise ValueError(f"factor must be non-negative, got {factor}")
        self.base = base
        self.factor = float(factor)
        super().__init__(base.dimension, self.factor * base.lipschitz)

    def evaluate_batch(self, points: np.ndarray) -> np.ndarray:
        return self.factor * self.base.evaluate_batch(points)

    def subgradient_batch(self, points: np.ndarray) -> np.ndarray:
        return self.factor * self.base.subgradient_batch(points)

    def prox(self, v: np.ndarray, step: float) -> np.ndarray | None:
        return self.base.prox(v, step * self.factor)

    def params(self) -> dict[str, Any]:
        return {"factor": self.factor, "base": self.base.describe()}


class WorstCasePiece(ObjectiveOracle):
    """One node's share of the hard instance.

    f(θ) = γ Σ_{(p, p+1) ∈ pairs} |θ_{p+1} − θ_p| + δ max_{j ∈ block} θ_j
           − β θ_0 + (α/2) ‖θ‖²

    with 0-based coordinates. ``pair_offset`` 0 chains (0,1), (2,3), ...;
    offset 1 chains (1,2), (3,4), ... The block is [2k+1, 2k+1+l).
    """

    kind = "worst_case_piece"

    def __init__(
        self,
        dimension: int,
        k: int,
        l: int,
        wc_gamma: float,
        pair_offset: int,
        delta: float = 0.0,
        beta: float = 0.0,
        alpha: float = 0.0,
        radius: float = 1.0,
    ):
        if 2 * k + l >= dimension:
            raise DimensionTooSmallError(
                f"worst-case piece needs d > 2k + l = {2 * k + l}, got d = {dimension}"
            )
        self.k = int(k)
        self.l = int(l)
        self.wc_gamma = float(wc_gamma)
        self.pair_offset = int(pair_offset)
        self.delta = float(delta)
        self.beta = float(beta)
        self.alpha = float(alpha)
        self.radius = float(radius)
        self._left = np.arange(self.k) * 2 + self.pair_offset
        self._block = np.arange(2 * self.k + 1, 2 * self.k + 1 + self.l)
        lipschitz = (
            self.wc_gamma * math.sqrt(2 * self.k)
            + self.delta
            + self.beta
            + self.alpha * self.radius
        )
        super().__init__(dimension, lipschitz)

    def evaluate_batch(self, points: np.ndarray) -> np.ndarray:
        chain = np.abs(points[:, self._left + 1] - points[:, self._left]).sum(axis=1)
        values = self.wc_gamma * chain - self.beta * points[:, 0]
        if self.delta:
            values = values + self.delta * points[:, self._block].max(axis=1)
        if self.alpha:
            values = values + 0.5 * self.alpha * np.einsum("ij,ij->i", points, points)
        return values

    def subgradient_batch(self, points: np.ndarray) -> np.ndarray:
        grads = np.zeros_like(points, dtype=float)
        signs = np.sign(points[:, self._left + 1] - points[:, self._left])
        grads[:, self._left + 1] += self.wc_gamma * signs
        grads[:, self._left] -= self.wc_gamma * signs
        grads[:, 0] -= self.beta
        if self.delta:
            active = self._block[np.argmax(points[:, self._block], axis=1)]
            grads[np.arange(points.shape[0]), active] += self.delta
        if self.alpha:
            grads += self.alpha * points
        return grads

    def params(self) -> dict[str, Any]:
        return {
            "k": self.k,
            "l": self.l,
            "wc_gamma": self.wc_gamma,
            "pair_offset": self.pair_offset,
            "delta": self.delta,
            "beta": self.beta,
            "alpha": self.alpha,
        }


def make_test_objective(kind: str, d: int, **params: Any) -> ObjectiveOracle:
    """Build a test-corpus oracle.

    Kinds: ``abs_deviation`` (center), ``euclidean_distance`` (center, scale),
    ``linear`` (slope), ``max_affine`` (slopes, offsets), ``zero``. Missing
    vector parameters default to zeros of length ``d``.
    """
    if kind == "abs_deviation":
        oracle: ObjectiveOracle = AbsDeviation(params.get("center", np.zeros(d)))
    elif kind == "euclidean_distance":
        oracle = EuclideanDistance(params.get("center", np.zeros(d)), params.get("scale", 1.0))
    elif kind == "linear":
        oracle = LinearObjective(params.get("slope", np.zeros(d)))
    elif kind == "max_affine":
        oracle = MaxAffine(params["slopes"], params["offsets"])
    elif kind == "zero":
        oracle = ZeroObjective(d)
    else:
        raise ValueError(f"unknown objective kind: {kind!r}")
    if oracle.dimension != d:
        raise ValueError(f"{kind} parameters have dimension {oracle.dimension}, expected {d}")
    return oracle


# --- Problem instances ---


class LowerBoundEnvelope(BaseModel):
    """Time-indexed lower bound on the gap of any black-box procedure."""

    kind: Literal["global", "local"]
    R: float
    L: float
    delta_tau: float = 0.0
    """Diameter times delay (global envelope)."""
    tau: float = 0.0
    eigengap: float = 1.0
    build_time: float = 0.0
    """Target time the instance was built for."""
    horizon: float = math.inf
    """min{l, 2kΔτ}: the construction's validity horizon."""

    def evaluate(self, t: float) -> float:
        if self.kind == "global":
            return envelope_global(t, self.R, self.L, 1.0, self.delta_tau)
        return envelope_local(t, self.R, self.L, self.eigengap, self.tau)

    def floor(self) -> float:
        """Gap lower bound guaranteed for every time ≤ build_time."""
        return self.evaluate(self.build_time)


class ProblemInstance(BaseModel):
    """n local oracles minimised on average over the ball B₂(0, R)."""

    model_config = ConfigDict(arbitrary_types_allowed=True)

    d: int = Field(gt=0)
    locals: list[ObjectiveOracle]
    R: float = Field(gt=0)
    L_g: float = Field(ge=0)
    optimum_value: float | None = None
    optimum_point: np.ndarray | None = None
    kind: str = "custom"
    params: dict[str, Any] = Field(default_factory=dict)
    seed: int | None = None
    envelope: LowerBoundEnvelope | None = None

    def model_post_init(self, __context: Any) -> None:
        for i, oracle in enumerate(self.locals):
            if oracle.dimension != self.d:
                raise ValueError(f"local {i} has dimension {oracle.dimension}, expected {self.d}")
        if self.L_g > self.L_ell + 1e-12:
            raise ValueError(
                f"global Lipschitz constant {self.L_g} exceeds the local average {self.L_ell}"
            )

    @property
    def n(self) -> int:
        return len(self.locals)

    @computed_field
    @property
    def L_ell(self) -> float:
        """ℓ₂-average of the local Lipschitz constants."""
        constants = np.array([f.lipschitz for f in self.locals])
        return float(np.sqrt(np.mean(constants**2)))

    def L_c(self, compute_times: np.ndarray) -> float:
        """sqrt((1/n) Σ ρ_i L_i²) for heterogeneous compute times."""
        constants = np.array([f.lipschitz for f in self.locals])
        return float(np.sqrt(np.mean(np.asarray(compute_times) * constants**2)))

    def objective(self, theta: np.ndarray) -> float:
        return float(self.objective_batch(np.atleast_2d(theta))[0])

    def objective_batch(self, points: np.ndarray) -> np.ndarray:
        total = np.zeros(points.shape[0])
        for oracle in self.locals:
            total += oracle.evaluate_batch(points)
        return total / self.n

    def subgradient(self, theta: np.ndarray) -> np.ndarray:
        theta = np.atleast_2d(theta)
        total = np.zeros_like(theta, dtype=float)
        for oracle in self.locals:
            total += oracle.subgradient_batch(theta)
        return total[0] / self.n

    def gap(self, theta: np.ndarray) -> float:
        if self.optimum_value is None:
            raise ValueError("problem has no known optimum value")
        return self.objective(theta) - self.optimum_value


def average_lipschitz(locals_: list[ObjectiveOracle]) -> float:
    """(1/n) Σ L_i, a valid Lipschitz constant of the average function."""
    return float(np.mean([f.lipschitz for f in locals_]))


def build_problem(
    locals_: list[ObjectiveOracle],
    R: float,
    L_g: float | None = None,
    kind: str = "custom",
    params: dict[str, Any] | None = None,
    seed: int | None = None,
) -> ProblemInstance:
    """Assemble a problem; L_g defaults to the mean of the local constants."""
    if not locals_:
        raise ValueError("a problem needs at least one local function")
    return ProblemInstance(
        d=locals_[0].dimension,
        locals=locals_,
        R=R,
        L_g=average_lipschitz(locals_) if L_g is None else L_g,
        kind=kind,
        params=params or {},
        seed=seed,
    )


def problem_to_document(problem: ProblemInstance) -> dict[str, Any]:
    """JSON-ready description: {kind, d, n, params, R, seed}."""
    params = dict(problem.params)
    if problem.kind == "custom":
        params = {"locals": [f.describe() for f in problem.locals]}
    return {
        "kind": problem.kind,
        "d": problem.d,
        "n": problem.n,
        "params": params,
        "R": problem.R,
        "seed": problem.seed,
    }


# --- Gaussian smoothing ---


class SeededStream(BaseModel):
    """Counter-based Gaussian stream shared by every node.

    The draws for iteration ``t`` depend only on (seed, t); sample k and
    coordinate j are entry (k, j) of the block, so any node regenerates the same
    X_{t,k} without communication.
    """

    model_config = ConfigDict(frozen=True)

    seed: int

    def generator(self, t: int) -> np.random.Generator:
        sequence = np.random.SeedSequence(entropy=self.seed, spawn_key=(int(t),))
        return np.random.Generator(np.random.Philox(sequence))

    def gaussians(self, t: int, K: int, d: int) -> np.ndarray:
        return self.generator(t).standard_normal((K, d))


class SmoothingEstimate(BaseModel):
    """Monte-Carlo estimate of f^γ(θ) and its gradient."""

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    value: float
    gradient: np.ndarray
    sample_count: int
    smoothing_radius: float
    seed: int
    iteration: int
    value_stderr: float


def smoothed_estimate(
    f: ObjectiveOracle,
    theta: np.ndarray,
    smoothing_radius: float,
    K: int,
    stream: SeededStream,
    t: int = 0,
) -> SmoothingEstimate:
    """Average f and ∇f over θ + γ X_k for the K Gaussian draws of iteration t."""
    if smoothing_radius < 0:
        raise ValueError(f"smoothing radius must be non-negative, got {smoothing_radius}")
    if K < 1:
        raise ValueError(f"sample count must be at least 1, got {K}")
    theta = np.asarray(theta, dtype=float).reshape(-1)
    points = theta + smoothing_radius * stream.gaussians(t, K, theta.size)
    values = f.evaluate_batch(points)
    grads = f.subgradient_batch(points)
    stderr = float(np.std(values, ddof=1) / math.sqrt(K)) if K > 1 else 0.0
    return SmoothingEstimate(
        value=float(np.mean(values)),
        gradient=grads.mean(axis=0),
        sample_count=K,
        smoothing_radius=smoothing_radius,
        seed=stream.seed,
        iteration=t,
        value_stderr=stderr,
    )


class SandwichReport(BaseModel):
    """Check of f(θ) ≤ f^γ(θ) ≤ f(θ) + γ L_g √d with Monte-Carlo slack."""

    estimate: float
    half_width: float
    lower: float
    upper: float
    holds: bool


def smoothing_sandwich_check(
    f: ObjectiveOracle,
    theta: np.ndarray,
    smoothing_radius: float,
    L_g: float,
    d: int,
    K: int,
    stream: SeededStream | None = None,
    z: float = 3.0,
) -> SandwichReport:
    """Estimate f^γ(θ) and test it against the smoothing sandwich bounds.

    The half width is ``z`` standard errors of the estimate.
    """
    if smoothing_radius <= 0:
        raise ValueError(f"smoothing radius must be positive, got {smoothing_radius}")
    stream = stream or SeededStream(seed=0)
    estimate = smoothed_estimate(f, theta, smoothing_radius, K, stream)
    half_width = z * estimate.value_stderr
    lower = f.evaluate(np.asarray(theta, dtype=float))
    upper = lower + smoothing_radius * L_g * math.sqrt(d)
    holds = lower - half_width <= estimate.value <= upper + half_width
    return SandwichReport(
        estimate=estimate.value,
        half_width=half_width,
        lower=lower,
        upper=upper,
        holds=holds,
    )


# --- Lower-bound envelopes ---


def _delay_ratio(t: float, scale: float) -> float:
    """t / scale with 0/0 read as 0 and t/0 as +inf."""
    if scale > 0:
        return t / scale
    return 0.0 if t == 0 else math.inf


def envelope_global(t: float, R: float, L_g: float, diameter: float, tau: float) -> float:
    """(R L_g / 36) · sqrt(1/(1 + t/(2Δτ))² + 1/(1 + t))."""
    if t < 0:
        raise ValueError(f"time must be non-negative, got {t}")
    communication = 1.0 / (1.0 + _delay_ratio(t, 2.0 * diameter * tau)) ** 2
    return R * L_g / 36.0 * math.sqrt(communication + 1.0 / (1.0 + t))


def envelope_local(t: float, R: float, L_ell: float, eigengap: float, tau: float) -> float:
    """(R L_ℓ / 108) · sqrt(1/(1 + 2t√γ/τ)² + 1/(1 + t))."""
    if t < 0:
        raise ValueError(f"time must be non-negative, got {t}")
    communication = 1.0 / (1.0 + _delay_ratio(2.0 * t * math.sqrt(eigengap), tau)) ** 2
    return R * L_ell / 108.0 * math.sqrt(communication + 1.0 / (1.0 + t))


# --- Worst-case instances ---


class WorstCaseGlobalInstance(BaseModel):
    """Hard instance for the global-regularity setting, with its closed-form optimum."""

    model_config = ConfigDict(arbitrary_types_allowed=True)

    problem: ProblemInstance
    wc_gamma: float
    delta: float
    beta: float
    alpha: float
    k: int
    l: int
    i0: int
    i1: int
    optimum_value: float
    optimum_point: np.ndarray
    envelope: LowerBoundEnvelope


def _worst_case_parameters(t: float, diameter: float, tau: float) -> tuple[int, int]:
    k = int(math.floor(_delay_ratio(t, 2.0 * diameter * tau))) + 1 if diameter * tau > 0 else 1
    l = int(math.floor(t)) + 1
    return k, l


def worst_case_optimum(
    d: int, k: int, l: int, wc_gamma: float, delta: float, beta: float, alpha: float, n: int
) -> tuple[float, np.ndarray]:
    """Closed-form minimiser of the assembled average and its value."""
    theta = np.zeros(d)
    theta[0] = (beta - wc_gamma) / alpha
    theta[1 : 2 * k + 1] = wc_gamma / (2 * k * alpha)
    theta[2 * k + 1 : 2 * k + 1 + l] = -delta / (l * alpha)
    spread = (beta - wc_gamma) ** 2 + wc_gamma**2 / (2 * k) + delta**2 / l
    return -spread / (2.0 * alpha * n), theta


def worst_case_global(
    t: float,
    diameter: int,
    tau: float,
    L_g: float,
    n: int,
    d: int,
    R: float = 1.0,
    designated: tuple[int, int] | None = None,
) -> WorstCaseGlobalInstance:
    """Hard instance split on two nodes at distance ``diameter``.

    Node i0 holds the odd chain links plus the max block, node i1 the even chain
    links, the linear pull on θ_0 and the quadratic; every other node holds zero.
    α is fixed so that ‖θ*‖₂ = R.

    Raises:
        DimensionTooSmallError: If d ≤ 2k + l for the requested time.
    """
    if t < 0:
        raise ValueError(f"target time must be non-negative, got {t}")
    k, l = _worst_case_parameters(t, diameter, tau)
    if d <= 2 * k + l:
        raise DimensionTooSmallError(
            f"time {t} needs k={k}, l={l}: dimension must exceed 2k + l = {2 * k + l} "
            f"(use d >= {2 * k + l + 1}), got d = {d}"
        )
    i0, i1 = designated if designated is not None else (0, n - 1)

    scale = L_g * n / 9.0
    wc_gamma = scale / math.sqrt(k)
    delta = scale
    beta = wc_gamma * (1.0 + 1.0 / math.sqrt(2 * k))
    spread = (beta - wc_gamma) ** 2 + wc_gamma**2 / (2 * k) + delta**2 / l
    alpha = math.sqrt(spread) / R

    first = WorstCasePiece(d, k, l, wc_gamma, pair_offset=0, delta=delta, radius=R)
    second = WorstCasePiece(d, k, l, wc_gamma, pair_offset=1, beta=beta, alpha=alpha, radius=R)
    locals_: list[ObjectiveOracle] = [ZeroObjective(d) for _ in range(n)]
    locals_[i0] = first
    if i1 == i0:
        locals_[i0] = _SumObjective([first, second])
    else:
        locals_[i1] = second

    actual_lipschitz = (first.lipschitz + second.lipschitz) / n
    if actual_lipschitz > L_g * (1 + 1e-12):
        raise AssertionError(
            f"assembled instance is {actual_lipschitz}-Lipschitz, above the requested {L_g}"
        )

    optimum_value, optimum_point = worst_case_optimum(d, k, l, wc_gamma, delta, beta, alpha, n)
    envelope = LowerBoundEnvelope(
        kind="global",
        R=R,
        L=L_g,
        delta_tau=diameter * tau,
        build_time=t,
        horizon=min(l, 2 * k * diameter * tau) if diameter * tau > 0 else float(l),
    )
    problem = ProblemInstance(
        d=d,
        locals=locals_,
        R=R,
        L_g=actual_lipschitz,
        optimum_value=optimum_value,
        optimum_point=optimum_point,
        kind="worst_case_global",
        params={"t": t, "diameter": diameter, "tau": tau, "L": L_g, "i0": i0, "i1": i1},
        envelope=envelope,
    )
    logger.debug("worst-case global instance: k=%d l=%d alpha=%.4g", k, l, alpha)
    return WorstCaseGlobalInstance(
        problem=problem,
        wc_gamma=wc_gamma,
        delta=delta,
        beta=beta,
        alpha=alpha,
        k=k,
        l=l,
        i0=i0,
        i1=i1,
        optimum_value=optimum_value,
        optimum_point=optimum_point,
        envelope=envelope,
    )


class _SumObjective(ObjectiveOracle):
    """Sum of oracles; used when both hard pieces land on a single node."""

    kind = "scaled"

    def __init__(self, parts: list[ObjectiveOracle]):
        self.parts = parts
        super().__init__(parts[0].dimension, sum(p.lipschitz for p in parts))

    def evaluate_batch(self, points: np.ndarray) -> np.ndarray:
        return sum(p.evaluate_batch(points) for p in self.parts)

    def subgradient_batch(self, points: np.ndarray) -> np.ndarray:
        return sum(p.subgradient_batch(points) for p in self.parts)

    def params(self) -> dict[str, Any]:
        return {"parts": [p.describe() for p in self.parts]}


def worst_case_local(
    target_eigengap: float,
    L_ell: float,
    t: float,
    tau: float,
    d: int,
    R: float = 1.0,
) -> tuple[ProblemInstance, GossipMatrix, LowerBoundEnvelope]:
    """Hard instance for the local-regularity setting.

    Builds the prescribed-eigengap graph, places the global hard pieces on the
    node sets I0 = {0..m-1} and I1 = {n-m..n-1} (m = ⌊(n+1)/3⌋) scaled by 1/m,
    so the average function is unchanged and L_ℓ stays below 3 L_g.
    """
    from nsdopt.network import graph_with_eigengap, set_distance

    network, gossip = graph_with_eigengap(target_eigengap, tau=tau)
    n = network.n
    m = (n + 1) // 3
    first_set = list(range(m))
    second_set = list(range(n - m, n))
    distance = set_distance(network, first_set, second_set)

    L_g = L_ell / 3.0
    base = worst_case_global(t, distance, tau, L_g, n, d, R=R, designated=(0, n - 1))
    first, second = base.problem.locals[0], base.problem.locals[n - 1]
    locals_: list[ObjectiveOracle] = [ZeroObjective(d) for _ in range(n)]
    for i in first_set:
        locals_[i] = ScaledObjective(first, 1.0 / m)
    for i in second_set:
        locals_[i] = ScaledObjective(second, 1.0 / m)

    envelope = LowerBoundEnvelope(
        kind="local",
        R=R,
        L=L_ell,
        tau=tau,
        eigengap=target_eigengap,
        build_time=t,
        horizon=base.envelope.horizon,
    )
    problem = ProblemInstance(
        d=d,
        locals=locals_,
        R=R,
        L_g=base.problem.L_g,
        optimum_value=base.optimum_value,
        optimum_point=base.optimum_point,
        kind="worst_case_local",
        params={
            "t": t,
            "tau": tau,
            "L": L_ell,
            "eigengap": target_eigengap,
            "set_distance": distance,
            "m": m,
        },
        envelope=envelope,
    )
    return problem, gossip, envelope


# --- Reference solvers ---


class OptimumCertificate(BaseModel):
    """Optimum of a problem over B₂(0, R) with an upper bound on its error."""

    model_config = ConfigDict(arbitrary_types_allowed=True)

    value: float
    point: np.ndarray
    residual: float
    method: str


def centralized_subgradient_solve(
    problem: ProblemInstance,
    iterations: int,
    strong_convexity: float | None = None,
) -> OptimumCertificate:
    """Projected subgradient descent on the average function over B₂(0, R).

    With ``strong_convexity`` μ the steps are 2/(μ(t+2)) and the average is
    weighted by t+1; otherwise steps are R/(L_g √(t+1)) with a uniform average.
    The residual is the distance between the best value found and the best
    certified lower bound min_{‖y‖≤R} f(x) + g·(y − x) over the iterates.
    """
    R = problem.R
    lipschitz = max(problem.L_g, 1e-12)
    theta = np.zeros(problem.d)
    average = np.zeros(problem.d)
    weight_total = 0.0
    best_value = math.inf
    best_point = theta.copy()
    lower_bound = -math.inf

    for t in range(iterations):
        value = problem.objective(theta)
        grad = problem.subgradient(theta)
        if value < best_value:
            best_value, best_point = value, theta.copy()
        lower_bound = max(lower_bound, value - grad @ theta - R * float(np.linalg.norm(grad)))
        if strong_convexity:
            step = 2.0 / (strong_convexity * (t + 2))
            weight = t + 1.0
        else:
            step = R / (lipschitz * math.sqrt(t + 1))
            weight = 1.0
        weight_total += weight
        average += (weight / weight_total) * (theta - average)
        theta = project_ball(theta - step * grad, 0.0, R)

    average_value = problem.objective(average)
    if average_value < best_value:
        best_value, best_point = average_value, average
    return OptimumCertificate(
        value=best_value,
        point=best_point,
        residual=max(best_value - lower_bound, 0.0),
        method="projected_subgradient",
    )


def _weiszfeld(
    centers: np.ndarray,
    weights: np.ndarray,
    R: float,
    n: int,
    tol: float = 1e-12,
    max_iter: int = 100_000,
) -> tuple[np.ndarray, float]:
    """Weighted geometric median; returns the point and a gap certificate.

    Zero objectives carry no center but still count in ``n``.
    """

    def gradient_at(x: np.ndarray, skip: int | None = None) -> np.ndarray:
        offsets = x - centers
        norms = np.linalg.norm(offsets, axis=1)
        mask = norms > 0
        if skip is not None:
            mask[skip] = False
        return (weights[mask, None] * offsets[mask] / norms[mask, None]).sum(axis=0)

    for j, anchor in enumerate(centers):
        if np.linalg.norm(gradient_at(anchor, skip=j)) <= weights[j]:
            return anchor.copy(), 0.0

    x = np.average(centers, axis=0, weights=weights)
    for _ in range(max_iter):
        norms = np.maximum(np.linalg.norm(x - centers, axis=1), 1e-300)
        coefficients = weights / norms
        updated = (coefficients[:, None] * centers).sum(axis=0) / coefficients.sum()
        if np.linalg.norm(updated - x) <= tol:
            x = updated
            break
        x = updated
    certificate = float(np.linalg.norm(gradient_at(x))) * 2.0 * R / n
    return x, certificate


def exact_optimum(problem: ProblemInstance, budget: int = 20_000) -> OptimumCertificate:
    """Optimum value of the average function over B₂(0, R).

    Uses the attached closed form when present, the median for 1-d absolute
    deviations, the geometric median for Euclidean distances and the ball
    boundary for linear averages. Anything else falls back to a centralized
    projected subgradient solve at ``budget`` iterations.
    """
    if problem.optimum_value is not None and problem.optimum_point is not None:
        return OptimumCertificate(
            value=problem.optimum_value,
            point=problem.optimum_point,
            residual=0.0,
            method="closed_form",
        )

    active = [f for f in problem.locals if not isinstance(f, ZeroObjective)]
    R = problem.R

    if active and all(isinstance(f, LinearObjective) for f in active):
        slope = sum(f.slope for f in active) / problem.n
        norm = float(np.linalg.norm(slope))
        point = -R * slope / norm if norm > 0 else np.zeros(problem.d)
        return OptimumCertificate(
            value=problem.objective(point), point=point, residual=0.0, method="linear"
        )

    if active and all(isinstance(f, AbsDeviation) for f in active):
        centers = np.array([f.center for f in active])
        point = np.median(centers, axis=0)
        if problem.d == 1:
            point = np.clip(point, -R, R)
        if np.linalg.norm(point) <= R:
            return OptimumCertificate(
                value=problem.objective(point), point=point, residual=0.0, method="median"
            )

    if active and all(isinstance(f, EuclideanDistance) for f in active):
        centers = np.array([f.center for f in active])
        weights = np.array([f.scale for f in active])
        point, certificate = _weiszfeld(centers, weights, R, problem.n)
        if np.linalg.norm(point) <= R:
            return OptimumCertificate(
                value=problem.objective(point),
                point=point,
                residual=certificate,
                method="geometric_median",
            )

    logger.info("no closed form for %s problem; running %d-step reference solve", problem.kind,
                budget)
    return centralized_subgradient_solve(problem, budget)


def with_optimum(problem: ProblemInstance, budget: int = 20_000) -> ProblemInstance:
    """Copy of ``problem`` with its optimum attached."""
    if problem.optimum_value is not None:
        return problem
    certificate = exact_optimum(problem, budget=budget)
    return problem.model_copy(
        update={"optimum_value": certificate.value, "optimum_point": certificate.point}
    )
