"""Tests for distributed randomized smoothing and the naive subgradient baseline."""

import math

import numpy as np
import pytest

from nsdopt.drs import (
    ConfigMismatchError,
    accelerated_weights,
    drs_config,
    naive_config,
    run_drs,
    run_naive_subgradient,
)
from nsdopt.harness import CostModel, compare_bounds, drs_time, naive_time
from nsdopt.network import path_graph, spanning_tree
from nsdopt.objectives import AbsDeviation, LinearObjective, build_problem, with_optimum


def run(problem, net, cfg):
    return run_drs(problem, net, cfg, CostModel(net))


class TestDrsConfig:
    """Derived constants."""

    def test_unit_problem(self):
        """ε = 1, R = L_g = 1, d = 1 gives T = 20 and K = 5."""
        cfg = drs_config(eps=1.0, R=1.0, L_g=1.0, d=1)
        assert cfg.T == 20
        assert cfg.K == 5

    def test_dimension_scaling(self):
        """d = 16 doubles T and halves K (rounded up)."""
        cfg = drs_config(eps=1.0, R=1.0, L_g=1.0, d=16)
        assert cfg.T == 40
        assert cfg.K == 3

    def test_explicit_constants(self):
        cfg = drs_config(eps=1.0, R=1.0, L_g=1.0, d=4, T=7, K=2)
        assert (cfg.T, cfg.K) == (7, 2)
        assert len(cfg.alphas) == len(cfg.smoothing) == len(cfg.steps) == 8

    def test_schedules(self):
        cfg = drs_config(eps=0.5, R=2.0, L_g=1.5, d=16, T=5, K=4)
        for t, alpha in enumerate(cfg.alphas):
            assert cfg.smoothing[t] == pytest.approx(2.0 / 2.0 * alpha)
            assert cfg.steps[t] == pytest.approx(
                2.0 * alpha / (2 * 1.5 * (2.0 + math.sqrt((t + 1) / 4)))
            )

    @pytest.mark.parametrize("eps, R, L_g", [(0.0, 1.0, 1.0), (1.0, -1.0, 1.0), (1.0, 1.0, 0.0)])
    def test_rejects_nonpositive(self, eps, R, L_g):
        with pytest.raises(ValueError):
            drs_config(eps, R, L_g, d=1)

    def test_rate_bound(self):
        cfg = drs_config(eps=1.0, R=1.0, L_g=1.0, d=1, T=10, K=4)
        assert cfg.rate_bound(10) == pytest.approx(1.0 + 5 / math.sqrt(40))


class TestAcceleratedWeights:
    def test_first_weights(self):
        """α₀ = 1 and α₁ is the inverse golden ratio."""
        alphas = accelerated_weights(3)
        assert alphas[0] == 1.0
        assert alphas[1] == pytest.approx(0.6180339887)

    def test_decay(self):
        """α_t ≤ 2/(t + 2) for every t."""
        for t, alpha in enumerate(accelerated_weights(200)):
            assert alpha <= 2.0 / (t + 2) + 1e-12

    def test_recurrence(self):
        """(1 − α_{t+1})/α_{t+1}² = 1/α_t²."""
        alphas = accelerated_weights(20)
        for a, b in zip(alphas, alphas[1:]):
            assert (1 - b) / b**2 == pytest.approx(1 / a**2)


class TestRunDrs:
    """Runs on small networks."""

    def test_linear_direction(self):
        """For linear locals the smoothed gradient is exact and x points along −slope."""
        problem = build_problem(
            [LinearObjective([1.0, 2.0]), LinearObjective([0.5, -1.0])], R=1.0
        )
        net = path_graph(2)
        cfg = drs_config(eps=0.5, R=1.0, L_g=problem.L_g, d=2, T=10, K=2)
        x, _ = run(problem, net, cfg)
        direction = -np.array([1.5, 1.0]) / np.linalg.norm([1.5, 1.0])
        np.testing.assert_allclose(x / np.linalg.norm(x), direction, atol=1e-12)

    @pytest.mark.parametrize("fixture", ["ring5", "star5", "grid9"])
    def test_time_identity(self, request, fixture):
        """Simulated time equals T(2·depth·τ + K·ρ_max)."""
        net = request.getfixturevalue(fixture)
        problem = request.getfixturevalue(f"{fixture}_problem")
        cfg = drs_config(eps=0.5, R=problem.R, L_g=problem.L_g, d=problem.d, T=6, K=3)
        _, trace = run(problem, net, cfg)
        depth = spanning_tree(net).height
        assert trace.total_time == pytest.approx(drs_time(6, 3, depth, net.tau))
        assert trace.metadata["depth_tau"] == depth * net.tau
        assert trace.final.subgrads == [18] * net.n

    def test_records_every_iteration_by_default(self, ring5, ring5_problem):
        cfg = drs_config(0.5, 1.0, ring5_problem.L_g, 1, T=4, K=2)
        _, trace = run(ring5_problem, ring5, cfg)
        assert [s.iteration for s in trace.samples] == [0, 1, 2, 3, 4]

    def test_record_cadence_keeps_last(self, ring5, ring5_problem):
        cfg = drs_config(0.5, 1.0, ring5_problem.L_g, 1, T=5, K=2)
        _, trace = run_drs(ring5_problem, ring5, cfg, CostModel(ring5), record_every=2)
        assert [s.iteration for s in trace.samples] == [0, 2, 4, 5]

    def test_same_seed_same_run(self, star5, star5_problem):
        """Runs are a pure function of the seed."""
        cfg = drs_config(0.5, 2.0, star5_problem.L_g, 1, seed=4, T=10, K=3)
        x1, trace1 = run(star5_problem, star5, cfg)
        x2, trace2 = run(star5_problem, star5, cfg)
        np.testing.assert_array_equal(x1, x2)
        assert [s.value for s in trace1.samples] == [s.value for s in trace2.samples]

    def test_different_seeds_differ(self, star5, star5_problem):
        first = drs_config(0.5, 2.0, star5_problem.L_g, 1, seed=1, T=10, K=3)
        second = drs_config(0.5, 2.0, star5_problem.L_g, 1, seed=2, T=10, K=3)
        x1, _ = run(star5_problem, star5, first)
        x2, _ = run(star5_problem, star5, second)
        assert not np.array_equal(x1, x2)

    def test_iterates_stay_in_ball(self, grid9, grid9_problem):
        cfg = drs_config(0.5, 1.0, grid9_problem.L_g, 2, T=30, K=4)
        x, trace = run(grid9_problem, grid9, cfg)
        assert np.linalg.norm(x) <= 1.0 + 1e-12
        assert trace.metadata["max_iterate_norm"] <= 1.0 + 1e-12

    def test_rejects_mismatched_config(self, ring5, ring5_problem):
        cfg = drs_config(0.5, 1.0, ring5_problem.L_g, d=3)
        with pytest.raises(ConfigMismatchError, match="derived for"):
            run(ring5_problem, ring5, cfg)

    def test_rejects_wrong_network(self, star5_problem):
        cfg = drs_config(0.5, 2.0, star5_problem.L_g, 1)
        with pytest.raises(ConfigMismatchError, match="nodes"):
            run(star5_problem, path_graph(4), cfg)

    def test_doubling_smoothing_samples(self, star5, star5_problem):
        """Twice the samples per iteration never loosens the final-gap bound."""
        for T, K in [(5, 1), (20, 3), (80, 10)]:
            single = drs_config(0.5, 2.0, star5_problem.L_g, 1, T=T, K=K)
            double = drs_config(0.5, 2.0, star5_problem.L_g, 1, T=T, K=2 * K)
            assert double.rate_bound(T) <= single.rate_bound(T)
        reports = []
        for K in (3, 6):
            traces = [
                run(star5_problem, star5,
                    drs_config(0.5, 2.0, star5_problem.L_g, 1, seed=seed, T=30, K=K))[1]
                for seed in range(1, 9)
            ]
            cfg = drs_config(0.5, 2.0, star5_problem.L_g, 1, T=30, K=K)
            reports.append(compare_bounds(traces, star5_problem, cfg))
        assert all(report.upper_violations == 0 for report in reports)

    def test_single_node_without_delay(self):
        """One node and τ = 0: plain randomized smoothing at cost K per iteration."""
        problem = with_optimum(build_problem([AbsDeviation([0.4])], R=1.0))
        net = path_graph(1, tau=0.0)
        assert spanning_tree(net).height == 0
        traces = []
        for seed in range(1, 11):
            cfg = drs_config(0.5, 1.0, problem.L_g, 1, seed=seed, T=40, K=10)
            _, trace = run(problem, net, cfg)
            assert trace.total_time == pytest.approx(40 * 10)
            assert trace.metadata["depth_tau"] == 0
            traces.append(trace)
        report = compare_bounds(traces, problem, cfg)
        assert report.upper_violations == 0
        assert cfg.rate_bound(40) == pytest.approx(10 / 40 + 5 / math.sqrt(400))
        assert report.final.gap <= cfg.rate_bound(40)

    @pytest.mark.parametrize("eps", [0.5, pytest.param(0.2, marks=pytest.mark.slow)])
    def test_rate_bound_over_seeds(self, star5, star5_problem, eps):
        """Mean gap over ten seeds stays below the convergence bound."""
        traces = []
        for seed in range(1, 11):
            cfg = drs_config(eps, 2.0, star5_problem.L_g, 1, seed=seed)
            traces.append(run(star5_problem, star5, cfg)[1])
        report = compare_bounds(traces, star5_problem, cfg)
        assert report.upper_violations == 0
        assert report.final.gap <= eps


class TestNaive:
    """Projected subgradient baseline."""

    def test_iteration_budget(self):
        """⌈(RL_g/ε)²⌉ iterations."""
        assert naive_config(0.5, 1.0, 1.0).iterations == 4
        assert naive_config(0.3, 1.0, 1.0).iterations == 12

    def test_explicit_iterations(self):
        assert naive_config(0.5, 1.0, 1.0, iterations=50).iterations == 50

    def test_time_identity(self, ring5, ring5_problem):
        """Each iteration costs 2·depth·τ + ρ_max = 5 on the ring."""
        _, trace = run_naive_subgradient(ring5_problem, ring5, 0.5, CostModel(ring5),
                                         iterations=7)
        assert trace.total_time == pytest.approx(naive_time(7, depth=2, tau=1.0))
        assert trace.total_time == pytest.approx(35.0)

    def test_reports_uniform_average(self, ring5, ring5_problem):
        """After one iteration the average is θ₀ = 0."""
        _, trace = run_naive_subgradient(ring5_problem, ring5, 0.5, CostModel(ring5),
                                         iterations=3)
        assert trace.samples[1].value == pytest.approx(ring5_problem.objective(np.zeros(1)))

    def test_rate_bound(self, ring5, ring5_problem):
        _, trace = run_naive_subgradient(ring5_problem, ring5, 0.1, CostModel(ring5))
        cfg = naive_config(0.1, ring5_problem.R, ring5_problem.L_g)
        report = compare_bounds(trace, ring5_problem, cfg)
        assert report.upper_violations == 0
        assert len(trace.samples) == cfg.iterations + 1

    def test_rejects_wrong_network(self, ring5_problem):
        with pytest.raises(ConfigMismatchError):
            run_naive_subgradient(ring5_problem, path_graph(3), 0.5, CostModel(path_graph(3)))
