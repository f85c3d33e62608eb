import math

import numpy as np
import orjson
import pytest
from typer.testing import CliRunner

from proxlead.cmd.main import app
from proxlead.core.codes import ErrorCode
from proxlead.core.exceptions import ConfigException, DivergenceException
from proxlead.core.constants import METRICS_FIELDS
from proxlead.schemas.metrics import MetricsRow
from proxlead.services import harness

HEADER = ",".join(METRICS_FIELDS) + "\n"


def rows_from(values, step=1):
    return [
        MetricsRow(
            k=1 + i * step,
            suboptimality=v,
            consensus_err=0.0,
            phi=v,
            bits_cum=10 * i,
            grad_evals_cum=5 * i,
        )
        for i, v in enumerate(values)
    ]


def test_zero_iterations_write_header_only(small_config, tmp_path):
    config = small_config.with_value("iterations", 0)
    result = harness.run(config, tmp_path)
    assert result.rows == [[]]
    assert result.paths[0].read_text() == HEADER


def test_rows_follow_the_stride(small_config, reference_repository):
    rows = harness.simulate(small_config, repository=reference_repository)
    assert [row.k for row in rows] == [1, 10, 20, 30, 40]
    assert rows[0].bits_cum == 0
    assert rows[-1].bits_cum > rows[1].bits_cum
    assert all(row.wall_ns == 0 for row in rows)


def test_final_iteration_is_always_recorded(small_config, reference_repository):
    config = small_config.with_value("iterations", 25)
    rows = harness.simulate(config, repository=reference_repository)
    assert [row.k for row in rows] == [1, 10, 20, 25]


def test_runs_are_reproducible(small_config, reference_repository, tmp_path):
    first = harness.run(small_config, tmp_path / "a", reference_repository)
    second = harness.run(small_config, tmp_path / "b", reference_repository)
    assert first.paths[0].name == second.paths[0].name
    assert first.paths[0].read_bytes() == second.paths[0].read_bytes()


def test_replicas_write_an_aggregate(small_config, reference_repository, tmp_path):
    config = small_config.with_value("replicas", 3)
    result = harness.run(config, tmp_path, reference_repository)
    assert [path.name.rsplit("-", 1)[-1] for path in result.paths] == ["r0.csv", "r1.csv", "r2.csv"]
    assert result.aggregate_path is not None
    assert result.aggregate_path.name.endswith("-aggregate.csv")
    assert result.rows[0] != result.rows[1]
    lines = result.aggregate_path.read_text().splitlines()
    assert lines[0].startswith("k,suboptimality_mean,suboptimality_stderr")
    assert len(lines) == 1 + len(result.rows[0])


def test_divergence_is_raised(small_config, reference_repository):
    config = small_config.with_value("algorithm.params", "experimental").with_value(
        "algorithm.eta", 50.0
    )
    with pytest.raises(DivergenceException):
        harness.simulate(config.with_value("iterations", 500), repository=reference_repository)


def test_sweep_needs_values(small_config):
    with pytest.raises(ConfigException) as e:
        harness.sweep(small_config, "eta", [])
    assert e.value.error_code == ErrorCode.EMPTY_SWEEP


def test_sweep_rejects_unknown_axis(small_config):
    with pytest.raises(ConfigException) as e:
        harness.sweep(small_config, "momentum", [0.1])
    assert e.value.error_code == ErrorCode.INVALID_AXIS


def test_sweep_over_bits(small_config, reference_repository, tmp_path):
    points = harness.sweep(small_config, "bits", [2, 4], tmp_path, reference_repository)
    assert [p.config.compressor.bits for p in points] == [2, 4]
    assert points[0].c_param == pytest.approx(8 / 16)
    assert points[1].c_param == pytest.approx(8 / 256)
    assert points[0].config.seed != points[1].config.seed
    assert points[0].config.problem == points[1].config.problem
    assert points[0].result.rows[0][-1].bits_cum < points[1].result.rows[0][-1].bits_cum


def test_compare_rejects_different_problems(small_config):
    other = small_config.with_value("problem.seed", 99)
    with pytest.raises(ConfigException) as e:
        harness.compare([small_config, other])
    assert e.value.error_code == ErrorCode.MISMATCHED_PROBLEMS


def test_compare_single_config_passes_through(small_config, reference_repository, tmp_path):
    result = harness.compare([small_config], "bits", tmp_path, reference_repository)
    assert result.header == ["bits", "small"]
    assert [row[0] for row in result.rows] == [row.bits_cum for row in harness.simulate(
        small_config, repository=reference_repository
    )]
    assert result.path is not None and result.path.exists()


def test_compare_on_bits(small_config, reference_repository, tmp_path):
    exact = small_config.with_value("compressor.kind", "identity").with_value(
        "name", "exact"
    ).with_value("algorithm.params", "cor6")
    result = harness.compare([small_config, exact], "bits", tmp_path, reference_repository)
    assert result.header == ["bits", "small", "exact"]
    xs = [row[0] for row in result.rows]
    assert xs == sorted(xs)


def test_align_curves_uses_step_interpolation():
    a = [(0, 1.0), (10, 0.5), (20, 0.25)]
    b = [(5, 2.0), (15, 1.0), (30, 0.1)]
    table = harness.align_curves([a, b])
    assert table == [[5, 1.0, 2.0], [10, 0.5, 2.0], [15, 0.5, 1.0], [20, 0.25, 1.0]]


def test_log_slope_of_a_geometric_sequence():
    ks = np.arange(1, 50)
    slope, r2 = harness.log_slope(ks, 0.5**ks)
    assert slope == pytest.approx(math.log(0.5))
    assert r2 == pytest.approx(1.0)


def test_first_reaching_and_plateau():
    rows = rows_from([1.0, 0.1, 0.01, 0.01, 0.01], step=10)
    assert harness.first_reaching(rows, 0.05) == 21
    assert harness.first_reaching(rows, 0.05, axis="bits") == 20
    assert harness.first_reaching(rows, 1e-9) is None
    assert harness.plateau(rows, tail=0.4) == pytest.approx(0.01)


def test_final_decades():
    rows = rows_from([10.0, 1.0, 0.1, 0.01, 0.001])
    tail = harness.final_decades(rows, 2.0)
    assert [row.suboptimality for row in tail] == [0.1, 0.01, 0.001]


def test_estimate_compressor(small_config):
    estimate = harness.estimate_compressor(small_config, trials=20, repeats=50)
    assert 0.0 < estimate.c_hat <= 0.5
    assert estimate.trials == 20


def write_config(path, config):
    path.write_bytes(orjson.dumps(config.model_dump(mode="json")))
    return path


def test_cli_exit_codes(small_config, tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    runner = CliRunner()
    good = write_config(tmp_path / "good.json", small_config)
    result = runner.invoke(app, ["run", str(good), "--output", str(tmp_path / "out")])
    assert result.exit_code == 0, result.output
    assert ".csv" in result.output

    bad = tmp_path / "bad.json"
    bad.write_text('{"topology": {"n": 5}, "problem": {"n": 8}}')
    assert runner.invoke(app, ["run", str(bad)]).exit_code == 3

    diverging = small_config.with_value("algorithm.params", "experimental").with_value(
        "algorithm.eta", 50.0
    ).with_value("iterations", 500)
    path = write_config(tmp_path / "diverging.json", diverging)
    assert runner.invoke(app, ["run", str(path)]).exit_code == 2


def test_cli_estimate_c_prints_csv(small_config, tmp_path):
    path = write_config(tmp_path / "config.json", small_config)
    result = CliRunner().invoke(app, ["estimate-c", str(path), "--trials", "5", "--repeats", "10"])
    assert result.exit_code == 0, result.output
    lines = result.output.strip().splitlines()
    assert lines[-2] == "c_hat,bias,skipped"
    assert lines[-1].endswith(",0")
