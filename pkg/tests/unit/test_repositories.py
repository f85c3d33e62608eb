import pytest
from numpy.testing import assert_array_equal

from proxlead.repositories.metrics import MetricsRepository, aggregate, aggregate_header
from proxlead.schemas.metrics import MetricsRow


def make_rows(scale: float) -> list[MetricsRow]:
    return [
        MetricsRow(
            k=k,
            suboptimality=scale / k,
            consensus_err=0.1 * scale,
            phi=2.0 * scale / k,
            bits_cum=100 * (k - 1),
            grad_evals_cum=10 * k,
        )
        for k in (1, 10, 20)
    ]


def test_reference_round_trip(reference_repository, quadratic_ref):
    assert reference_repository.get("abc", 0.1) is None
    reference_repository.save("abc", quadratic_ref)
    loaded = reference_repository.get("abc", 0.1)
    assert loaded is not None
    assert_array_equal(loaded.x_star, quadratic_ref.x_star)
    assert_array_equal(loaded.grad_star, quadratic_ref.grad_star)
    assert loaded.eta == 0.1
    assert loaded.obj_star == quadratic_ref.obj_star


def test_unreadable_reference_is_ignored(reference_repository, quadratic_ref):
    reference_repository.save("abc", quadratic_ref)
    reference_repository.meta_path("abc").write_text("{broken")
    assert reference_repository.get("abc", 0.1) is None


def test_metrics_rows_round_trip(tmp_path):
    repository = MetricsRepository(tmp_path)
    rows = make_rows(1.0)
    path = repository.write_rows("run", rows)
    assert path.read_text().splitlines()[0] == "k,suboptimality,consensus_err,phi,bits_cum,grad_evals_cum,wall_ns"
    assert repository.read_rows("run") == rows


def test_empty_run_writes_header_only(tmp_path):
    path = MetricsRepository(tmp_path).write_rows("empty", [])
    assert path.read_text() == "k,suboptimality,consensus_err,phi,bits_cum,grad_evals_cum,wall_ns\n"


def test_aggregate_mean_and_stderr():
    table = aggregate([make_rows(1.0), make_rows(3.0)])
    header = aggregate_header()
    assert header[:3] == ["k", "suboptimality_mean", "suboptimality_stderr"]
    assert len(table[0]) == len(header)
    first = dict(zip(header, table[0]))
    assert first["k"] == 1
    assert first["suboptimality_mean"] == pytest.approx(2.0)
    assert first["suboptimality_stderr"] == pytest.approx(1.0)
    assert first["bits_cum_stderr"] == 0.0


def test_single_replica_has_zero_stderr():
    table = aggregate([make_rows(1.0)])
    assert all(value == 0.0 for value in table[1][2::2])


def test_aggregate_needs_matching_iterations():
    shifted = make_rows(1.0)[:2]
    with pytest.raises(ValueError):
        aggregate([make_rows(1.0), shifted])
