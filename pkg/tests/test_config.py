"""Tests for nsdopt experiment configuration."""

from pathlib import Path

import pytest


def _document(**overrides):
    document = {
        "problem": {"kind": "abs_deviation", "d": 1, "params": {"centers": [[0.1], [0.2]]}},
        "network": {"kind": "path", "n": 2},
        "algorithm": {"name": "naive"},
        "epsilon": 0.5,
        "seeds": [1],
    }
    document.update(overrides)
    return document


class TestLoadExperiment:
    """Tests for loading experiment files."""

    def test_load_json(self, experiment_dir: Path):
        """A JSON config loads with its defaults filled in."""
        from nsdopt.config import load_experiment

        config = load_experiment(experiment_dir / "ring5_mspd.json")

        assert config.problem.kind == "abs_deviation"
        assert config.problem.R == 1.0
        assert config.problem.L_g is None
        assert config.network.kind == "ring"
        assert config.network.n == 5
        assert config.algorithm.name == "mspd"
        assert config.algorithm.constants == "auto"
        assert config.algorithm.record_every == 1
        assert config.seeds == [1, 2, 3]

    def test_load_yaml(self, tmp_path: Path):
        """YAML files are accepted too."""
        from nsdopt.config import load_experiment

        config_file = tmp_path / "experiment.yaml"
        config_file.write_text("""
problem:
  kind: euclidean_distance
  d: 2
  params:
    seed: 3
    spread: 0.5
network:
  kind: star
  n: 4
  tau: 0.5
algorithm:
  name: drs
  constants:
    T: 10
    K: 2
epsilon: 0.2
seeds: [7]
""")

        config = load_experiment(config_file)

        assert config.network.tau == 0.5
        assert config.algorithm.explicit().T == 10
        assert config.algorithm.explicit().K == 2
        assert config.algorithm.explicit().M is None

    def test_config_not_found(self, tmp_path: Path):
        """A missing file raises a clear error."""
        from nsdopt.config import ConfigNotFoundError, load_experiment

        with pytest.raises(ConfigNotFoundError) as exc:
            load_experiment(tmp_path / "missing.json")

        assert "nsdopt init" in str(exc.value)

    def test_field_errors_listed(self, write_config):
        """Each invalid field is reported with its dotted path."""
        from nsdopt.config import ConfigError, load_experiment

        path = write_config("bad.json", _document(epsilon=-1.0, seeds=[]))

        with pytest.raises(ConfigError) as exc:
            load_experiment(path)

        fields = [line.split(":")[0] for line in exc.value.errors]
        assert "epsilon" in fields
        assert "seeds" in fields

    def test_unknown_algorithm(self, write_config):
        from nsdopt.config import ConfigError, load_experiment

        path = write_config("bad.json", _document(algorithm={"name": "admm"}))

        with pytest.raises(ConfigError) as exc:
            load_experiment(path)

        assert any(line.startswith("algorithm.name") for line in exc.value.errors)

    def test_worst_case_needs_params(self, write_config):
        from nsdopt.config import ConfigError, load_experiment

        problem = {"kind": "worst_case_local", "d": 20, "params": {"t": 3, "L": 1}}
        path = write_config("bad.json", _document(problem=problem))

        with pytest.raises(ConfigError) as exc:
            load_experiment(path)

        assert "eigengap" in str(exc.value)

    def test_network_needs_size(self, write_config):
        from nsdopt.config import ConfigError, load_experiment

        path = write_config("bad.json", _document(network={"kind": "ring"}))

        with pytest.raises(ConfigError, match="needs n"):
            load_experiment(path)

    def test_not_a_mapping(self, tmp_path: Path):
        from nsdopt.config import ConfigError, load_experiment

        path = tmp_path / "list.yaml"
        path.write_text("- 1\n- 2\n")

        with pytest.raises(ConfigError, match="expected a mapping"):
            load_experiment(path)

    def test_unparseable(self, tmp_path: Path):
        from nsdopt.config import ConfigError, load_experiment

        path = tmp_path / "broken.json"
        path.write_text('{"problem": [1, 2')

        with pytest.raises(ConfigError):
            load_experiment(path)


class TestConfigPaths:
    """Tests for path resolution."""

    def test_paths_resolved_against_config_dir(self, experiment_dir: Path):
        """output_dir is resolved relative to the config file."""
        from nsdopt.config import load_experiment

        config = load_experiment(experiment_dir / "ring5_mspd.json")

        assert config.output_dir == experiment_dir.resolve() / "out"

    def test_network_file_resolved(self, tmp_path: Path, write_config):
        from nsdopt.config import load_experiment

        (tmp_path / "pair.edges").write_text("2 1\n1 2 1.0\n")
        path = write_config("file.json", _document(network={"kind": "file", "file": "pair.edges"}))

        config = load_experiment(path)

        assert config.network.file == tmp_path.resolve() / "pair.edges"

    def test_missing_network_file(self, write_config):
        from nsdopt.config import ConfigError, load_experiment

        path = write_config("file.json", _document(network={"kind": "file", "file": "no.edges"}))

        with pytest.raises(ConfigError) as exc:
            load_experiment(path)

        assert exc.value.errors[0].startswith("network.file")

    def test_absolute_output_dir_kept(self, tmp_path: Path, write_config):
        from nsdopt.config import load_experiment

        target = tmp_path / "elsewhere"
        path = write_config("abs.json", _document(output_dir=str(target)))

        assert load_experiment(path).output_dir == target

    def test_default_output_dir(self, write_config, tmp_path: Path):
        from nsdopt.config import load_experiment

        config = load_experiment(write_config("plain.json", _document()))

        assert config.output_dir == tmp_path.resolve() / "results"


class TestWorkers:
    """Tests for the seed-sweep worker count."""

    def test_default_is_seed_count(self, monkeypatch):
        from nsdopt.config import WORKERS_ENV, worker_count

        monkeypatch.delenv(WORKERS_ENV, raising=False)

        assert worker_count(3) == 3
        assert worker_count(50) == 8

    def test_environment_override(self, monkeypatch):
        """NSDOPT_WORKERS sets the thread count."""
        from nsdopt.config import worker_count

        monkeypatch.setenv("NSDOPT_WORKERS", "2")

        assert worker_count(10) == 2

    def test_invalid_environment_ignored(self, monkeypatch):
        from nsdopt.config import worker_count

        monkeypatch.setenv("NSDOPT_WORKERS", "many")

        assert worker_count(4) == 4


class TestStarterConfig:
    def test_starter_config_validates(self):
        """The config written by `nsdopt init` is valid."""
        from nsdopt.config import STARTER_CONFIG, ExperimentConfig

        config = ExperimentConfig(**STARTER_CONFIG)

        assert config.algorithm.name == "mspd"
        assert config.network.n == 5
