"""Pytest configuration and fixtures for nsdopt tests."""

import json
from pathlib import Path

import numpy as np
import pytest
from click.testing import CliRunner

from nsdopt.network import Network, laplacian, path_graph, ring_graph, star_graph
from nsdopt.objectives import AbsDeviation, EuclideanDistance, build_problem, with_optimum

RING_CENTERS = [-0.8, -0.3, 0.1, 0.4, 0.9]
STAR_CENTERS = [-1.5, -0.5, 0.2, 0.7, 1.6]


@pytest.fixture
def cli_runner():
    """Create a Click CLI test runner."""
    return CliRunner()


@pytest.fixture
def ring5() -> Network:
    return ring_graph(5, tau=1.0)


@pytest.fixture
def ring5_problem():
    """f_i(θ) = |θ − a_i| on the unit interval, optimum attached (median)."""
    problem = build_problem([AbsDeviation([a]) for a in RING_CENTERS], R=1.0)
    return with_optimum(problem)


@pytest.fixture
def star5() -> Network:
    return star_graph(5, tau=1.0)


@pytest.fixture
def star5_problem():
    problem = build_problem([AbsDeviation([a]) for a in STAR_CENTERS], R=2.0)
    return with_optimum(problem)


@pytest.fixture
def grid9() -> Network:
    """3×3 grid graph."""
    edges = []
    for row in range(3):
        for col in range(3):
            node = 3 * row + col
            if col < 2:
                edges.append((node, node + 1))
            if row < 2:
                edges.append((node, node + 3))
    return Network(n=9, edges=edges, tau=1.0, name="grid9")


@pytest.fixture
def grid9_problem():
    """Nine planar distance functions with anchors inside the unit disc."""
    rng = np.random.default_rng(11)
    anchors = rng.uniform(-0.6, 0.6, size=(9, 2))
    problem = build_problem([EuclideanDistance(a) for a in anchors], R=1.0)
    return with_optimum(problem)


@pytest.fixture
def path20_gossip():
    return laplacian(path_graph(20))


@pytest.fixture
def experiment_dir(tmp_path: Path) -> Path:
    """Write a small ring MSPD config into a temporary directory."""
    config = {
        "problem": {
            "kind": "abs_deviation",
            "d": 1,
            "R": 1.0,
            "params": {"centers": [[a] for a in RING_CENTERS]},
        },
        "network": {"kind": "ring", "n": 5, "tau": 1.0},
        "algorithm": {"name": "mspd", "constants": "auto"},
        "epsilon": 0.5,
        "seeds": [1, 2, 3],
        "output_dir": "out",
    }
    (tmp_path / "ring5_mspd.json").write_text(json.dumps(config))
    return tmp_path


@pytest.fixture
def write_config(tmp_path: Path):
    """Return a helper that writes a config document into tmp_path."""

    def write(name: str, document: dict) -> Path:
        path = tmp_path / name
        path.write_text(json.dumps(document))
        return path

    return write
