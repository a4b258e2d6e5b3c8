"""Build problems and networks from a config, run seed sweeps and write results."""

from __future__ import annotations

import logging
import math
import os
import tempfile
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import Any

import numpy as np
from pydantic import BaseModel, ConfigDict

from nsdopt.config import ExperimentConfig, NetworkSpec, ProblemSpec, worker_count
from nsdopt.drs import (
    DrsConfig,
    NaiveConfig,
    drs_config,
    naive_config,
    run_drs,
    run_naive_subgradient,
)
from nsdopt.harness import (
    CostModel,
    aggregate_final_gaps,
    compare_bounds,
    drs_time,
    mspd_rate_bound,
    mspd_time,
    mspd_time_bound,
    naive_time,
)
from nsdopt.models import BoundReport, RunSummary, RunTrace, SweepAxis, SweepRow, config_digest
from nsdopt.mspd import MspdConfig, mspd_config, run_chambolle_pock_exact, run_mspd
from nsdopt.network import (
    GRAPH_FIXTURES,
    GossipMatrix,
    Network,
    chebyshev_polynomial_matrix,
    default_gossip_steps,
    diameter,
    eccentricities,
    graph_with_eigengap,
    laplacian,
    read_edge_list,
    spanning_tree,
)
from nsdopt.objectives import (
    AbsDeviation,
    EuclideanDistance,
    LinearObjective,
    MaxAffine,
    ObjectiveOracle,
    ProblemInstance,
    build_problem,
    worst_case_global,
    worst_case_local,
    with_optimum,
)

logger = logging.getLogger(__name__)


class ExperimentSetup(BaseModel):
    """Network, gossip matrix and problem built from one config."""

    model_config = ConfigDict(arbitrary_types_allowed=True)

    net: Network
    W: GossipMatrix
    problem: ProblemInstance


class CpExactConfig(BaseModel):
    """Step sizes of the exact-prox reference run, borrowed from the MSPD constants."""

    model_config = ConfigDict(arbitrary_types_allowed=True)

    mspd: MspdConfig
    inner_tol: float
    bound_name: str = "cp_exact_rate"

    def rate_bound(self, iteration: int) -> float:
        return mspd_rate_bound(
            self.mspd.R, self.mspd.L_ell, self.mspd.polynomial_eigengap, iteration, math.inf
        )

    def constants(self) -> dict[str, float]:
        return {**self.mspd.constants(), "inner_tol": self.inner_tol}


AlgorithmConfig = DrsConfig | NaiveConfig | MspdConfig | CpExactConfig


def build_network(spec: NetworkSpec) -> Network:
    if spec.kind == "file":
        return read_edge_list(spec.file, tau=spec.tau, compute_times=spec.compute_times)
    return GRAPH_FIXTURES[spec.kind](spec.n, tau=spec.tau, compute_times=spec.compute_times)


def _node_matrix(params: dict[str, Any], key: str, n: int, d: int) -> np.ndarray:
    """Explicit n × d parameters, or uniform draws in [−spread, spread] from ``seed``."""
    if key in params:
        values = np.asarray(params[key], dtype=float).reshape(n, d)
        return values
    rng = np.random.default_rng(params.get("seed", 0))
    spread = float(params.get("spread", 1.0))
    return rng.uniform(-spread, spread, size=(n, d))


def build_local_functions(spec: ProblemSpec, n: int) -> list[ObjectiveOracle]:
    params, d = spec.params, spec.d
    if spec.kind == "abs_deviation":
        return [AbsDeviation(c) for c in _node_matrix(params, "centers", n, d)]
    if spec.kind == "euclidean_distance":
        scales = params.get("scales", [1.0] * n)
        centers = _node_matrix(params, "centers", n, d)
        return [EuclideanDistance(c, s) for c, s in zip(centers, scales, strict=True)]
    if spec.kind == "linear":
        return [LinearObjective(a) for a in _node_matrix(params, "slopes", n, d)]
    if spec.kind == "max_affine":
        pieces = params["pieces"]
        if len(pieces) != n:
            raise ValueError(f"max_affine needs {n} pieces, got {len(pieces)}")
        return [MaxAffine(p["slopes"], p["offsets"]) for p in pieces]
    raise ValueError(f"no local functions for kind {spec.kind!r}")


def build_setup(config: ExperimentConfig) -> ExperimentSetup:
    """Network, Laplacian gossip matrix and problem instance for ``config``."""
    spec = config.problem
    if spec.kind == "worst_case_local":
        problem, W, _ = worst_case_local(
            float(spec.params["eigengap"]),
            float(spec.params["L"]),
            float(spec.params["t"]),
            config.network.tau,
            spec.d,
            R=spec.R,
        )
        return ExperimentSetup(net=W.network, W=W, problem=problem)

    net = build_network(config.network)
    W = laplacian(net)
    if spec.kind == "worst_case_global":
        ecc = eccentricities(net)
        far = ecc.index(max(ecc))
        distances = net.hop_distances(far)
        other = distances.index(max(distances))
        instance = worst_case_global(
            float(spec.params["t"]),
            diameter(net),
            net.tau,
            float(spec.params["L"]),
            net.n,
            spec.d,
            R=spec.R,
            designated=(far, other),
        )
        problem = instance.problem
    else:
        problem = build_problem(
            build_local_functions(spec, net.n),
            spec.R,
            L_g=spec.L_g,
            kind=spec.kind,
            params=spec.params,
        )
    return ExperimentSetup(net=net, W=W, problem=problem)


def algorithm_config(config: ExperimentConfig, setup: ExperimentSetup, seed: int
                     ) -> AlgorithmConfig:
    """Constants for the configured algorithm; "auto" derives everything from ε."""
    explicit = config.algorithm.explicit()
    problem, eps = setup.problem, config.epsilon
    name = config.algorithm.name
    if name == "drs":
        return drs_config(eps, problem.R, problem.L_g, problem.d, seed=seed, T=explicit.T,
                          K=explicit.K)
    if name == "naive":
        return naive_config(eps, problem.R, problem.L_g, explicit.iterations)
    cfg = mspd_config(
        eps,
        problem.R,
        problem.L_ell,
        setup.W,
        problem.n,
        tau=setup.net.tau,
        T=explicit.T,
        M=explicit.M,
        K=explicit.K,
        seed=seed,
        heterogeneous=config.algorithm.heterogeneous,
        problem=problem,
    )
    if name == "cp_exact":
        return CpExactConfig(mspd=cfg, inner_tol=config.algorithm.inner_tol)
    return cfg


def closed_form_time(cfg: AlgorithmConfig, setup: ExperimentSetup) -> float:
    tree = spanning_tree(setup.net)
    rho = setup.net.rho()
    if isinstance(cfg, DrsConfig):
        return drs_time(cfg.T, cfg.K, tree.height, setup.net.tau, float(rho.max()))
    if isinstance(cfg, NaiveConfig):
        return naive_time(cfg.iterations, tree.height, setup.net.tau, float(rho.max()))
    if isinstance(cfg, CpExactConfig):
        return float(cfg.mspd.T)
    return mspd_time(cfg.T, cfg.K, cfg.M, cfg.tau, rho, cfg.heterogeneous)


def run_single(config: ExperimentConfig, setup: ExperimentSetup, seed: int) -> RunTrace:
    """One run on its own cost model."""
    cfg = algorithm_config(config, setup, seed)
    clock = CostModel(setup.net)
    every = config.algorithm.record_every
    if isinstance(cfg, DrsConfig):
        _, trace = run_drs(setup.problem, setup.net, cfg, clock, record_every=every)
    elif isinstance(cfg, NaiveConfig):
        _, trace = run_naive_subgradient(setup.problem, setup.net, cfg.eps, clock,
                                         iterations=cfg.iterations, record_every=every)
    elif isinstance(cfg, CpExactConfig):
        polynomial = chebyshev_polynomial_matrix(setup.W, cfg.mspd.K)
        _, trace = run_chambolle_pock_exact(setup.problem, polynomial, cfg.mspd.eta,
                                            cfg.mspd.sigma, cfg.mspd.T, cfg.inner_tol)
    else:
        _, trace = run_mspd(setup.problem, setup.W, cfg, clock, record_every=every,
                            averaging_tol=config.algorithm.averaging_tol)
    trace.seed = seed
    trace.config_digest = config_digest(config.document())
    return trace


def _write_atomic(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "w") as f:
            f.write(text)
        os.replace(tmp, path)
    except BaseException:
        Path(tmp).unlink(missing_ok=True)
        raise


class ExperimentResult(BaseModel):
    summary: RunSummary
    report: BoundReport | None = None
    traces: list[RunTrace]
    output_dir: Path


def reference_budget(cfg: AlgorithmConfig) -> int:
    """Ten times the algorithm's own iteration budget."""
    if isinstance(cfg, DrsConfig):
        return 10 * cfg.T * cfg.K
    if isinstance(cfg, NaiveConfig):
        return 10 * cfg.iterations
    inner = cfg.mspd if isinstance(cfg, CpExactConfig) else cfg
    return 10 * inner.T * inner.M


def run_experiment(
    config: ExperimentConfig,
    seeds: list[int] | None = None,
    output_dir: Path | None = None,
    with_bounds: bool = True,
) -> ExperimentResult:
    """Run every seed, then write trace_<seed>.csv, bounds.json and summary.json.

    Bound violations are recorded in the report and summary; they do not fail
    the run.
    """
    seeds = list(seeds or config.seeds)
    out = output_dir or config.output_dir
    setup = build_setup(config)
    head_cfg = algorithm_config(config, setup, seeds[0])
    if with_bounds:
        setup = setup.model_copy(
            update={"problem": with_optimum(setup.problem, budget=reference_budget(head_cfg))}
        )

    workers = worker_count(len(seeds))
    logger.info("running %s for seeds %s on %d workers", config.algorithm.name, seeds, workers)
    with ThreadPoolExecutor(max_workers=workers) as pool:
        traces = list(pool.map(lambda seed: run_single(config, setup, seed), seeds))

    for seed, trace in zip(seeds, traces, strict=True):
        _write_atomic(out / f"trace_{seed}.csv", trace.to_csv())

    report = None
    gap_mean = gap_stderr = None
    if with_bounds:
        report = compare_bounds(traces, setup.problem, head_cfg)
        _write_atomic(out / "bounds.json", report.model_dump_json(indent=2))
        gap_mean, gap_stderr = aggregate_final_gaps([t.final.gap for t in traces])

    summary = RunSummary(
        algorithm=config.algorithm.name,
        seeds=seeds,
        final_gap_mean=gap_mean,
        final_gap_stderr=gap_stderr,
        total_time=traces[0].total_time,
        closed_form_time=closed_form_time(head_cfg, setup),
        constants=head_cfg.constants(),
        upper_violations=report.upper_violations if report else 0,
        envelope_violations=report.envelope_violations if report else 0,
        config_digest=traces[0].config_digest,
    )
    _write_atomic(out / "summary.json", summary.model_dump_json(indent=2))
    return ExperimentResult(summary=summary, report=report, traces=traces, output_dir=out)


def print_constants(config: ExperimentConfig) -> dict[str, Any]:
    setup = build_setup(config)
    cfg = algorithm_config(config, setup, config.seeds[0])
    return {"algorithm": config.algorithm.name, **cfg.constants()}


# --- Sweeps ---


def sweep(config: ExperimentConfig, axis: SweepAxis, values: list[float]) -> list[SweepRow]:
    """Closed-form time-to-ε of each algorithm along one axis.

    R, L_g and L_ℓ come from the configured problem. The dimension axis only
    changes d in the formulas; the eigengap axis replaces the network by the
    prescribed-eigengap graph.
    """
    if any(v <= 0 for v in values):
        raise ValueError("sweep values must be positive")
    if not values:
        return []
    setup = build_setup(config)
    problem = setup.problem
    R, L_g, L_ell = problem.R, problem.L_g, problem.L_ell
    tau = setup.net.tau
    depth = spanning_tree(setup.net).height
    rows = []
    for value in values:
        eps = value if axis == "epsilon" else config.epsilon
        d = int(value) if axis == "dimension" else problem.d
        times: dict[str, float] = {}
        communication: dict[str, float] = {}
        if axis in ("epsilon", "dimension"):
            drs = drs_config(eps, R, L_g, d)
            times["drs"] = drs_time(drs.T, drs.K, depth, tau)
            communication["drs"] = drs.T * 2 * depth * tau
            naive = naive_config(eps, R, L_g)
            times["naive"] = naive_time(naive.iterations, depth, tau)
            communication["naive"] = naive.iterations * 2 * depth * tau
        W = setup.W if axis != "eigengap" else graph_with_eigengap(value, tau=tau)[1]
        gamma = W.eigengap
        K = default_gossip_steps(W)
        count = math.ceil(4 * R * L_ell / eps)
        times["mspd"] = mspd_time(count, K, count, tau)
        communication["mspd"] = count * K * tau
        communication["mspd_bound"] = count * tau / math.sqrt(gamma)
        times["mspd_bound"] = mspd_time_bound(eps, R, L_ell, gamma, tau)
        rows.append(SweepRow(axis=axis, value=value, times=times, communication=communication))
    return rows


def fit_exponent(xs: list[float], ys: list[float]) -> float:
    """Least-squares slope of log y against log x."""
    slope, _ = np.polyfit(np.log(xs), np.log(ys), 1)
    return float(slope)
