"""Tests for nsdopt data models."""

import json

import pytest


def _sample(time, value=1.0, optimum=0.5, n=2):
    from nsdopt.models import TraceSample

    return TraceSample(
        time=time,
        iteration=int(time),
        node_values=[value + 0.25 * i for i in range(n)],
        value=value,
        consensus=0.125,
        subgrads=[3] * n,
        messages=7,
        optimum=optimum,
    )


class TestTraceSample:
    """Tests for TraceSample."""

    def test_gap_computed(self):
        """gap is value minus optimum and is serialised."""
        sample = _sample(1.0, value=1.5, optimum=0.5)
        assert sample.gap == 1.0
        assert sample.model_dump()["gap"] == 1.0

    def test_gap_without_optimum(self):
        """No optimum means no gaps."""
        sample = _sample(1.0, optimum=None)
        assert sample.gap is None
        assert sample.node_gaps() is None

    def test_node_gaps(self):
        sample = _sample(1.0, value=1.0, optimum=0.5)
        assert sample.node_gaps() == [0.5, 0.75]


class TestRunTrace:
    """Tests for RunTrace."""

    def test_times_must_increase(self):
        """Construction rejects a non-increasing time series."""
        from nsdopt.models import RunTrace

        with pytest.raises(ValueError, match="must increase"):
            RunTrace(algorithm="drs", samples=[_sample(1.0), _sample(1.0)])

    def test_append_checks_time(self):
        from nsdopt.models import RunTrace

        trace = RunTrace(algorithm="mspd", samples=[_sample(2.0)])
        with pytest.raises(ValueError, match="must increase"):
            trace.append(_sample(1.0))
        trace.append(_sample(3.0))
        assert trace.final.time == 3.0
        assert trace.total_time == 3.0

    def test_unknown_algorithm(self):
        from nsdopt.models import RunTrace

        with pytest.raises(ValueError):
            RunTrace(algorithm="gradient_descent")

    def test_empty_total_time(self):
        from nsdopt.models import RunTrace

        assert RunTrace(algorithm="naive").total_time == 0.0

    def test_best_gaps(self):
        """best_gaps is the running minimum of the reported gap."""
        from nsdopt.models import RunTrace

        trace = RunTrace(
            algorithm="naive",
            samples=[_sample(1.0, value=2.0), _sample(2.0, value=1.0), _sample(3.0, value=1.5)],
        )
        assert trace.best_gaps() == [1.5, 0.5, 0.5]

    def test_csv_layout(self):
        """One row per node plus a mean row, under the fixed header."""
        from nsdopt.models import TRACE_HEADER, RunTrace

        trace = RunTrace(algorithm="drs", samples=[_sample(1.0), _sample(2.5)])
        lines = trace.to_csv().splitlines()
        assert lines[0] == ",".join(TRACE_HEADER)
        assert lines[0] == "time,node,gap,consensus,subgrads,messages"
        assert len(lines) == 1 + 2 * 3
        assert lines[1] == "1.0,0,0.5,0.125,3,7"
        assert lines[2] == "1.0,1,0.75,0.125,3,7"
        assert lines[3] == "1.0,mean,0.5,0.125,6,7"
        assert lines[4].startswith("2.5,0,")

    def test_csv_without_optimum(self):
        """Gap columns are empty when no optimum is known."""
        from nsdopt.models import RunTrace

        trace = RunTrace(algorithm="naive", samples=[_sample(1.0, optimum=None)])
        rows = [line.split(",") for line in trace.to_csv().splitlines()[1:]]
        assert all(row[2] == "" for row in rows)

    def test_write_csv(self, tmp_path):
        from nsdopt.models import RunTrace

        trace = RunTrace(algorithm="naive", samples=[_sample(1.0)])
        path = tmp_path / "trace_1.csv"
        trace.write_csv(path)
        assert path.read_text() == trace.to_csv()


class TestConfigDigest:
    """Tests for config_digest."""

    def test_key_order_irrelevant(self):
        from nsdopt.models import config_digest

        assert config_digest({"a": 1, "b": [1, 2]}) == config_digest({"b": [1, 2], "a": 1})

    def test_short_hex(self):
        from nsdopt.models import config_digest

        digest = config_digest({"epsilon": 0.5})
        assert len(digest) == 16
        int(digest, 16)

    def test_changes_with_content(self):
        from nsdopt.models import config_digest

        assert config_digest({"epsilon": 0.5}) != config_digest({"epsilon": 0.25})


class TestBoundReport:
    """Tests for BoundReport."""

    def test_violation_counts(self):
        from nsdopt.models import BoundReport, BoundSample

        report = BoundReport(
            algorithm="mspd",
            upper_bound_name="mspd_rate",
            samples=[
                BoundSample(time=1.0, iteration=1, gap=0.2, min_node_gap=0.1,
                            upper_violation=True),
                BoundSample(time=2.0, iteration=2, gap=0.1, min_node_gap=0.05,
                            envelope=0.2, envelope_violation=True),
                BoundSample(time=3.0, iteration=3, gap=0.05, min_node_gap=0.01),
            ],
        )
        assert report.upper_violations == 1
        assert report.envelope_violations == 1
        assert report.final.time == 3.0

    def test_serialises_counts(self):
        from nsdopt.models import BoundReport

        document = json.loads(BoundReport(algorithm="drs", upper_bound_name="x")
                              .model_dump_json())
        assert document["upper_violations"] == 0
        assert document["envelope_violations"] == 0


class TestSweepCsv:
    """Tests for write_sweep_csv."""

    def test_columns_sorted_by_algorithm(self, tmp_path):
        from nsdopt.models import SweepRow, write_sweep_csv

        rows = [
            SweepRow(axis="epsilon", value=0.1, times={"naive": 4.0, "drs": 2.0},
                     communication={"naive": 1.0, "drs": 0.5}),
            SweepRow(axis="epsilon", value=0.05, times={"naive": 16.0, "drs": 4.0}),
        ]
        path = tmp_path / "sweep.csv"
        text = write_sweep_csv(rows, path)
        lines = text.splitlines()
        assert lines[0] == "axis,value,time_drs,time_naive,comm_drs,comm_naive"
        assert lines[1] == "epsilon,0.1,2.0,4.0,0.5,1.0"
        assert lines[2] == "epsilon,0.05,4.0,16.0,,"
        assert path.read_text() == text

    def test_no_rows(self):
        from nsdopt.models import write_sweep_csv

        assert write_sweep_csv([]) == "axis,value\n"
