"""Communication graphs, spanning trees and gossip matrices."""

from __future__ import annotations

import logging
import math
from collections import deque
from pathlib import Path
from typing import Any

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from nsdopt.numerics import (
    ZERO_EIGENVALUE_RTOL,
    SpectralSummary,
    SymmetricMatrix,
    eigengap,
    symmetric_eigendecomposition,
)

logger = logging.getLogger(__name__)

BISECTION_MAX_ITER = 200
BISECTION_TOL = 1e-8
EIGENGAP_ONE_ATOL = 1e-12


class NetworkError(Exception):
    """Raised for malformed or disconnected networks."""

    pass


class GossipAssumptionError(Exception):
    """Raised when a matrix fails one of the gossip-matrix assumptions."""

    def __init__(self, assumption: str, detail: str):
        super().__init__(f"gossip assumption violated ({assumption}): {detail}")
        self.assumption = assumption


class Network(BaseModel):
    """Undirected connected graph with a uniform edge delay.

    Nodes are 0..n-1. Edges are stored as (u, v) with u < v.
    """

    n: int = Field(gt=0)
    edges: list[tuple[int, int]] = Field(default_factory=list)
    weights: list[float] | None = None
    """Positive per-edge weights used by `laplacian`; defaults to 1."""

    tau: float = Field(default=1.0, ge=0)
    """Time for one vector message along any edge."""

    compute_times: list[float] | None = None
    """Time per subgradient at each node (ρ_i); defaults to 1."""

    name: str = "custom"

    @field_validator("edges", mode="before")
    @classmethod
    def _normalize_edges(cls, value: Any) -> list[tuple[int, int]]:
        edges = []
        for edge in value:
            u, v = (int(x) for x in edge)
            edges.append((min(u, v), max(u, v)))
        return edges

    @model_validator(mode="after")
    def _check(self) -> Network:
        seen: set[tuple[int, int]] = set()
        for u, v in self.edges:
            if u == v:
                raise NetworkError(f"self-loop at node {u}")
            if u < 0 or v >= self.n:
                raise NetworkError(f"edge ({u}, {v}) references a node outside 0..{self.n - 1}")
            if (u, v) in seen:
                raise NetworkError(f"duplicate edge ({u}, {v})")
            seen.add((u, v))
        if self.weights is not None:
            if len(self.weights) != len(self.edges):
                raise NetworkError(f"{len(self.weights)} weights for {len(self.edges)} edges")
            if any(w <= 0 for w in self.weights):
                raise NetworkError("edge weights must be positive")
        if self.compute_times is not None:
            if len(self.compute_times) != self.n:
                raise NetworkError(f"{len(self.compute_times)} compute times for {self.n} nodes")
            if any(rho <= 0 for rho in self.compute_times):
                raise NetworkError("compute times must be positive")
        if not self.is_connected():
            raise NetworkError(f"network {self.name!r} is disconnected")
        return self

    def neighbors(self) -> list[list[int]]:
        adjacency: list[list[int]] = [[] for _ in range(self.n)]
        for u, v in self.edges:
            adjacency[u].append(v)
            adjacency[v].append(u)
        for row in adjacency:
            row.sort()
        return adjacency

    def hop_distances(self, source: int) -> list[int]:
        """BFS hop counts from ``source``; -1 for unreachable nodes."""
        adjacency = self.neighbors()
        distances = [-1] * self.n
        distances[source] = 0
        queue = deque([source])
        while queue:
            u = queue.popleft()
            for v in adjacency[u]:
                if distances[v] < 0:
                    distances[v] = distances[u] + 1
                    queue.append(v)
        return distances

    def is_connected(self) -> bool:
        return min(self.hop_distances(0)) >= 0

    def rho(self) -> np.ndarray:
        if self.compute_times is None:
            return np.ones(self.n)
        return np.asarray(self.compute_times, dtype=float)

    def edge_weights(self) -> list[float]:
        return list(self.weights) if self.weights is not None else [1.0] * len(self.edges)


class SpanningTree(BaseModel):
    """Breadth-first spanning tree used for broadcast and aggregation."""

    root: int
    parent: list[int]
    """Parent of each node; -1 at the root."""

    depth: list[int]

    @property
    def height(self) -> int:
        return max(self.depth)

    def levels(self) -> list[list[int]]:
        """Nodes grouped by depth, root first."""
        grouped: list[list[int]] = [[] for _ in range(self.height + 1)]
        for node, level in enumerate(self.depth):
            grouped[level].append(node)
        return grouped


def eccentricities(net: Network) -> list[int]:
    return [max(net.hop_distances(source)) for source in range(net.n)]


def diameter(net: Network) -> int:
    """Largest shortest-path hop count between two nodes."""
    return max(eccentricities(net))


def set_distance(net: Network, first: list[int], second: list[int]) -> int:
    """Smallest hop count between a node of ``first`` and a node of ``second``."""
    best = math.inf
    targets = set(second)
    for source in first:
        distances = net.hop_distances(source)
        best = min(best, min(distances[j] for j in targets))
    return int(best)


def spanning_tree(net: Network) -> SpanningTree:
    """BFS tree rooted at a center of the graph (lowest id among ties).

    Raises:
        NetworkError: If the network is disconnected.
    """
    if not net.is_connected():
        raise NetworkError("cannot build a spanning tree on a disconnected network")
    ecc = eccentricities(net)
    root = ecc.index(min(ecc))
    adjacency = net.neighbors()
    parent = [-1] * net.n
    depth = [-1] * net.n
    depth[root] = 0
    queue = deque([root])
    while queue:
        u = queue.popleft()
        for v in adjacency[u]:
            if depth[v] < 0:
                depth[v] = depth[u] + 1
                parent[v] = u
                queue.append(v)
    return SpanningTree(root=root, parent=parent, depth=depth)


# --- Gossip matrices ---


class GossipMatrix(BaseModel):
    """Symmetric PSD matrix supported on the network with kernel Span(𝟙)."""

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    matrix: SymmetricMatrix
    spectrum: SpectralSummary
    network: Network | None = None

    @property
    def n(self) -> int:
        return self.matrix.order

    @property
    def entries(self) -> np.ndarray:
        return self.matrix.entries

    @property
    def eigengap(self) -> float:
        return eigengap(self.spectrum)

    @property
    def lambda_max(self) -> float:
        return self.spectrum.lambda_max


def gossip_matrix(entries: np.ndarray, network: Network | None = None) -> GossipMatrix:
    """Validate ``entries`` against the gossip assumptions and wrap them.

    Checks positive semi-definiteness, W𝟙 = 0 with a one-dimensional kernel
    and, when ``network`` is given, that off-diagonal support lies on edges.

    Raises:
        GossipAssumptionError: Naming the first failed assumption.
    """
    try:
        matrix = SymmetricMatrix(entries=entries)
    except ValueError as e:
        raise GossipAssumptionError("symmetry", str(e)) from e
    spectrum = symmetric_eigendecomposition(matrix)
    n = matrix.order
    scale = max(spectrum.lambda_max, 1.0)

    if spectrum.eigenvalues[0] < -ZERO_EIGENVALUE_RTOL * scale:
        raise GossipAssumptionError(
            "positive semi-definite", f"smallest eigenvalue {spectrum.eigenvalues[0]:.3e}"
        )
    row_sums = matrix.entries.sum(axis=1)
    if np.max(np.abs(row_sums)) > ZERO_EIGENVALUE_RTOL * scale:
        raise GossipAssumptionError(
            "kernel is Span(1)", f"W·1 has entry {np.max(np.abs(row_sums)):.3e}"
        )
    if n > 1 and spectrum.zero_count() != 1:
        raise GossipAssumptionError(
            "kernel is Span(1)", f"{spectrum.zero_count()} zero eigenvalues; support disconnected"
        )
    if network is not None:
        if network.n != n:
            raise GossipAssumptionError("support on edges", f"order {n} vs {network.n} nodes")
        allowed = np.eye(n, dtype=bool)
        for u, v in network.edges:
            allowed[u, v] = allowed[v, u] = True
        stray = np.argwhere((matrix.entries != 0) & ~allowed)
        if stray.size:
            i, j = stray[0]
            raise GossipAssumptionError("support on edges", f"W[{i},{j}] != 0 without an edge")
    return GossipMatrix(matrix=matrix, spectrum=spectrum, network=network)


def _laplacian_entries(n: int, edges: list[tuple[int, int]], weights: list[float]) -> np.ndarray:
    entries = np.zeros((n, n))
    for (u, v), w in zip(edges, weights, strict=True):
        entries[u, v] -= w
        entries[v, u] -= w
        entries[u, u] += w
        entries[v, v] += w
    return entries


def laplacian(net: Network, weights: list[float] | None = None) -> GossipMatrix:
    """Weighted graph Laplacian: L_ii = Σ_j w_ij, L_ij = −w_ij."""
    if weights is None:
        weights = net.edge_weights()
    if len(weights) != len(net.edges):
        raise NetworkError(f"{len(weights)} weights for {len(net.edges)} edges")
    if any(w <= 0 for w in weights):
        raise NetworkError("Laplacian weights must be positive")
    return gossip_matrix(_laplacian_entries(net.n, net.edges, list(weights)), net)


# --- Fixtures and edge-list files ---


def path_graph(n: int, tau: float = 1.0, compute_times: list[float] | None = None) -> Network:
    return Network(
        n=n,
        edges=[(i, i + 1) for i in range(n - 1)],
        tau=tau,
        compute_times=compute_times,
        name=f"path{n}",
    )


def ring_graph(n: int, tau: float = 1.0, compute_times: list[float] | None = None) -> Network:
    if n < 3:
        return path_graph(n, tau, compute_times)
    return Network(
        n=n,
        edges=[(i, (i + 1) % n) for i in range(n)],
        tau=tau,
        compute_times=compute_times,
        name=f"ring{n}",
    )


def star_graph(n: int, tau: float = 1.0, compute_times: list[float] | None = None) -> Network:
    """Node 0 is the hub."""
    return Network(
        n=n,
        edges=[(0, i) for i in range(1, n)],
        tau=tau,
        compute_times=compute_times,
        name=f"star{n}",
    )


def complete_graph(n: int, tau: float = 1.0, compute_times: list[float] | None = None) -> Network:
    return Network(
        n=n,
        edges=[(i, j) for i in range(n) for j in range(i + 1, n)],
        tau=tau,
        compute_times=compute_times,
        name=f"complete{n}",
    )


GRAPH_FIXTURES = {
    "path": path_graph,
    "ring": ring_graph,
    "star": star_graph,
    "complete": complete_graph,
}


def read_edge_list(
    path: Path, tau: float = 1.0, compute_times: list[float] | None = None
) -> Network:
    """Read the "n m" header followed by m lines "u v w" (1-indexed nodes)."""
    lines = [line.split() for line in path.read_text().splitlines() if line.strip()]
    if not lines or len(lines[0]) != 2:
        raise NetworkError(f"{path}: first line must be 'n m'")
    n, m = int(lines[0][0]), int(lines[0][1])
    if len(lines) - 1 != m:
        raise NetworkError(f"{path}: header announces {m} edges, found {len(lines) - 1}")
    edges, weights = [], []
    for number, fields in enumerate(lines[1:], start=2):
        if len(fields) not in (2, 3):
            raise NetworkError(f"{path}:{number}: expected 'u v [w]'")
        edges.append((int(fields[0]) - 1, int(fields[1]) - 1))
        weights.append(float(fields[2]) if len(fields) == 3 else 1.0)
    return Network(
        n=n, edges=edges, weights=weights, tau=tau, compute_times=compute_times, name=path.stem
    )


def write_edge_list(net: Network, path: Path) -> None:
    rows = [f"{net.n} {len(net.edges)}"]
    for (u, v), w in zip(net.edges, net.edge_weights(), strict=True):
        rows.append(f"{u + 1} {v + 1} {w!r}")
    path.write_text("\n".join(rows) + "\n")


# --- Prescribed eigengap ---


def _path_eigengap(n: int) -> float:
    """x_n = (1 − cos(π/n)) / (1 + cos(π/n)), the eigengap of the unit path P_n."""
    c = math.cos(math.pi / n)
    return (1.0 - c) / (1.0 + c)


def _raw_gap(entries: np.ndarray) -> float:
    """λ_{n-1}/λ_1 without the connectivity check (0 when disconnected)."""
    values = np.linalg.eigvalsh(entries)
    return float(max(values[1], 0.0) / values[-1])


def _bisect(gap_of: Any, target: float, increasing: bool) -> float:
    lo, hi = 0.0, 1.0
    g_lo, g_hi = gap_of(lo), gap_of(hi)
    low_side, high_side = (g_lo, g_hi) if increasing else (g_hi, g_lo)
    assert low_side <= target + 1e-12 and high_side >= target - 1e-12, (
        f"target {target} not bracketed by [{g_lo}, {g_hi}]"
    )
    for _ in range(BISECTION_MAX_ITER):
        if hi - lo <= BISECTION_TOL:
            break
        mid = 0.5 * (lo + hi)
        below = gap_of(mid) < target
        if below == increasing:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def graph_with_eigengap(target: float, tau: float = 1.0) -> tuple[Network, GossipMatrix]:
    """Graph and Laplacian whose eigengap equals ``target``.

    For target ≥ 1/3: the triangle whose edge (0, 2) has weight a ∈ [0, 1]
    (a = 0 is the path P₃, a = 1 the complete graph). Otherwise the path of
    n_γ nodes, the smallest n with x_n ≥ target > x_{n+1}, whose first edge has
    weight 1 − a. In both cases a is found by bisection.
    """
    if not 0.0 < target <= 1.0:
        raise ValueError(f"target eigengap must lie in (0, 1], got {target}")

    if target >= 1.0 / 3.0:
        def triangle(a: float) -> np.ndarray:
            return _laplacian_entries(3, [(0, 1), (1, 2), (0, 2)], [1.0, 1.0, a])

        a = _bisect(lambda a: _raw_gap(triangle(a)), target, increasing=True)
        if a > 0:
            net = Network(n=3, edges=[(0, 1), (1, 2), (0, 2)], weights=[1.0, 1.0, a], tau=tau,
                          name="triangle")
        else:
            net = Network(n=3, edges=[(0, 1), (1, 2)], tau=tau, name="path3")
    else:
        n = 3
        while _path_eigengap(n + 1) >= target:
            n += 1
        edges = [(i, i + 1) for i in range(n - 1)]

        def path(a: float) -> np.ndarray:
            return _laplacian_entries(n, edges, [1.0 - a] + [1.0] * (n - 2))

        a = _bisect(lambda a: _raw_gap(path(a)), target, increasing=False)
        net = Network(n=n, edges=edges, weights=[1.0 - a] + [1.0] * (n - 2), tau=tau,
                      name=f"path{n}")

    gossip = laplacian(net)
    logger.debug("graph_with_eigengap(%g): n=%d a=%.6g gap=%.9g", target, net.n, a,
                 gossip.eigengap)
    return net, gossip


# --- Chebyshev acceleration ---


def chebyshev_constants(W: GossipMatrix) -> tuple[float, float]:
    """(c₂, c₃): c₂ = (1+γ)/(1−γ) and the rescaling c₃ = 2/((1+γ)λ₁)."""
    gamma = W.eigengap
    c2 = math.inf if gamma >= 1.0 - EIGENGAP_ONE_ATOL else (1.0 + gamma) / (1.0 - gamma)
    c3 = 2.0 / ((1.0 + gamma) * W.lambda_max)
    return c2, c3


def accelerated_gossip(X: np.ndarray, W: GossipMatrix, K: int) -> np.ndarray:
    """Apply P_K(W̃) to the node rows of X (shape n × d).

    P_K(x) = 1 − T_K(c₂(1 − x)) / T_K(c₂) with W̃ = c₃W, computed by the
    three-term Chebyshev recurrence. With eigengap 1 this is one plain
    multiplication by W̃.
    """
    if K < 1:
        raise ValueError(f"number of gossip steps must be at least 1, got {K}")
    X = np.asarray(X, dtype=float)
    if X.shape[0] != W.n:
        raise ValueError(f"expected {W.n} node rows, got {X.shape[0]}")
    if W.n == 1:
        return np.zeros_like(X)

    c2, c3 = chebyshev_constants(W)
    scaled = c3 * W.entries
    if math.isinf(c2):
        return scaled @ X

    def shifted(Z: np.ndarray) -> np.ndarray:
        return Z - scaled @ Z

    a_prev, a_curr = 1.0, c2
    Z_prev, Z_curr = X, c2 * shifted(X)
    for _ in range(K - 1):
        a_prev, a_curr = a_curr, 2.0 * c2 * a_curr - a_prev
        Z_prev, Z_curr = Z_curr, 2.0 * c2 * shifted(Z_curr) - Z_prev
    return X - Z_curr / a_curr


def chebyshev_polynomial_matrix(W: GossipMatrix, K: int) -> GossipMatrix:
    """P_K(W̃) materialised as a gossip matrix on the same network."""
    entries = accelerated_gossip(np.eye(W.n), W, K)
    entries = 0.5 * (entries + entries.T)
    if W.n == 1:
        return GossipMatrix(
            matrix=SymmetricMatrix(entries=entries),
            spectrum=symmetric_eigendecomposition(entries),
            network=W.network,
        )
    # P_K(W̃) is supported on K-hop neighbourhoods, not on edges.
    return gossip_matrix(entries)


def default_gossip_steps(W: GossipMatrix) -> int:
    """K = max(1, ⌊1/√γ(W)⌋)."""
    return max(1, int(math.floor(1.0 / math.sqrt(W.eigengap))))


class GossipAverageResult(BaseModel):
    model_config = ConfigDict(arbitrary_types_allowed=True)

    values: np.ndarray
    rounds: int
    residuals: list[float]
    """Max per-node deviation from the mean, before each round and at the end."""


def averaging_matrix(W: GossipMatrix, K: int) -> np.ndarray:
    """W′ = I − c₃P_K(W̃) with c₃ = 1/λ₁(P_K(W̃)); bi-stochastic and PSD."""
    if W.n == 1:
        return np.eye(1)
    polynomial = chebyshev_polynomial_matrix(W, K)
    return np.eye(W.n) - polynomial.entries / polynomial.lambda_max


def gossip_average(
    values: np.ndarray, W: GossipMatrix, K: int, tol: float, max_rounds: int = 10_000
) -> GossipAverageResult:
    """Multiply by W′ until every node is within ``tol`` of the true mean."""
    if tol <= 0:
        raise ValueError(f"tolerance must be positive, got {tol}")
    current = np.array(values, dtype=float)
    squeeze = current.ndim == 1
    if squeeze:
        current = current[:, None]
    mean = current.mean(axis=0)
    averaging = averaging_matrix(W, K)

    def deviation(Z: np.ndarray) -> float:
        return float(np.max(np.linalg.norm(Z - mean, axis=1)))

    residuals = [deviation(current)]
    rounds = 0
    while residuals[-1] > tol and rounds < max_rounds:
        current = averaging @ current
        rounds += 1
        residuals.append(deviation(current))
    if residuals[-1] > tol:
        logger.warning("gossip averaging stopped at %d rounds with residual %.3e", rounds,
                       residuals[-1])
    return GossipAverageResult(
        values=current[:, 0] if squeeze else current, rounds=rounds, residuals=residuals
    )
