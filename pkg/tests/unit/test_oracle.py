import numpy as np
import pytest
from numpy.testing import assert_allclose

from proxlead.core.codes import ErrorCode
from proxlead.core.exceptions import SimulationException
from proxlead.models.oracle import OracleState
from proxlead.models.problem import QuadraticBatches
from proxlead.services import oracle as oracles
from proxlead.services.problem import grad_nodes


@pytest.mark.parametrize("kind", ["full", "sgd", "lsvrg", "saga"])
@pytest.mark.parametrize("non_uniform", [False, True])
def test_expectation_by_enumeration_is_the_gradient(logistic, kind, non_uniform):
    rng = np.random.default_rng(17)
    sampling = None
    if non_uniform:
        weights = rng.uniform(0.5, 2.0, (logistic.n, logistic.m))
        sampling = weights / weights.sum(axis=1, keepdims=True)
    X0 = rng.standard_normal((logistic.n, logistic.p))
    oracle = oracles.init(kind, logistic, X0, sampling=sampling, lsvrg_p=0.3)

    for _ in range(50):
        # move the memory to a random state before checking
        oracles.sample(oracle, logistic, rng.standard_normal(X0.shape), rng)
        X = rng.standard_normal(X0.shape)
        assert_allclose(
            oracles.expectation(oracle, logistic, X), grad_nodes(logistic, X), rtol=0, atol=1e-12
        )


def test_full_oracle_counts_every_batch(quadratic, rng):
    X = np.zeros((quadratic.n, quadratic.p))
    oracle = oracles.init("full", quadratic, X)
    G = oracles.sample(oracle, quadratic, X, rng)
    assert_allclose(G, grad_nodes(quadratic, X))
    assert oracle.grad_evals == quadratic.n * quadratic.m


def test_sgd_counts_one_batch_per_node(quadratic, rng):
    X = np.zeros((quadratic.n, quadratic.p))
    oracle = oracles.init("sgd", quadratic, X)
    for _ in range(3):
        oracles.sample(oracle, quadratic, X, rng)
    assert oracle.grad_evals == 3 * quadratic.n


def test_lsvrg_refreshes_cost_full_gradients(quadratic, rng):
    X = rng.standard_normal((quadratic.n, quadratic.p))
    oracle = oracles.init("lsvrg", quadratic, X, lsvrg_p=0.5)
    start = oracle.grad_evals
    for _ in range(20):
        oracles.sample(oracle, quadratic, rng.standard_normal(X.shape), rng)
    expected = start + 20 * 2 * quadratic.n + oracle.refreshes * quadratic.m
    assert oracle.refreshes > 0
    assert oracle.grad_evals == expected
    assert oracles.check_memory(oracle, quadratic) <= 1e-12


def test_saga_table_mean_tracks_table(logistic, rng):
    X = rng.standard_normal((logistic.n, logistic.p))
    oracle = oracles.init("saga", logistic, X)
    for _ in range(200):
        oracles.sample(oracle, logistic, rng.standard_normal(X.shape), rng)
    assert oracles.check_memory(oracle, logistic) <= 1e-12


def test_lsvrg_refresh_evaluates_only_refreshed_nodes(quadratic, rng, monkeypatch):
    X = rng.standard_normal((quadratic.n, quadratic.p))
    oracle = oracles.init("lsvrg", quadratic, X, lsvrg_p=0.5)
    evaluated: list[int] = []
    node_gradients = QuadraticBatches.node_gradients

    def counting(self, Y, nodes=None):
        evaluated.append(Y.shape[0])
        return node_gradients(self, Y, nodes)

    monkeypatch.setattr(QuadraticBatches, "node_gradients", counting)
    for _ in range(20):
        before = oracle.refreshes
        evaluated.clear()
        oracles.sample(oracle, quadratic, rng.standard_normal(X.shape), rng)
        refreshed = oracle.refreshes - before
        assert evaluated == ([refreshed] if refreshed else [])
    monkeypatch.undo()
    assert oracle.refreshes > 0
    assert oracles.check_memory(oracle, quadratic) <= 1e-12


def test_saga_running_mean_survives_the_periodic_check(quadratic, rng):
    X = rng.standard_normal((quadratic.n, quadratic.p))
    oracle = oracles.init("saga", quadratic, X)
    for k in range(1, oracles.SAGA_CHECK_EVERY + 1):
        oracles.sample(oracle, quadratic, X + 0.1 * rng.standard_normal(X.shape), rng)
        assert oracle.updates_since_check == k % oracles.SAGA_CHECK_EVERY
    assert oracle.grad_evals == quadratic.n * (quadratic.m + oracles.SAGA_CHECK_EVERY)
    assert oracles.check_memory(oracle, quadratic) <= 1e-10


def test_saga_drift_is_caught_at_the_periodic_check(quadratic, rng):
    X = rng.standard_normal((quadratic.n, quadratic.p))
    oracle = oracles.init("saga", quadratic, X)
    oracle.table_mean[0, 0] += 1e-6
    oracle.updates_since_check = oracles.SAGA_CHECK_EVERY - 1
    with pytest.raises(SimulationException) as e:
        oracles.sample(oracle, quadratic, X, rng)
    assert e.value.error_code == ErrorCode.STATE_CORRUPTION


def test_variance_reduced_estimators_are_exact_at_their_anchor(quadratic, rng):
    X = rng.standard_normal((quadratic.n, quadratic.p))
    for kind in ("lsvrg", "saga"):
        oracle = oracles.init(kind, quadratic, X)
        G = oracles.sample(oracle, quadratic, X, rng)
        assert_allclose(G, grad_nodes(quadratic, X), atol=1e-12)


def test_variance_at_optimum(quadratic, quadratic_ref):
    X = np.tile(quadratic_ref.x_star, (quadratic.n, 1))
    sgd = oracles.init("sgd", quadratic, X)
    saga = oracles.init("saga", quadratic, X)
    assert oracles.variance_at(sgd, quadratic, quadratic_ref.x_star) > 1e-3
    assert oracles.variance_at(saga, quadratic, quadratic_ref.x_star) == pytest.approx(0.0, abs=1e-20)


def test_reference_bregman_vanishes_at_the_optimum(quadratic, quadratic_ref):
    X = np.tile(quadratic_ref.x_star, (quadratic.n, 1))
    for kind in ("lsvrg", "saga"):
        oracle = oracles.init(kind, quadratic, X)
        assert oracles.reference_bregman(oracle, quadratic, quadratic_ref.x_star) == pytest.approx(
            0.0, abs=1e-10
        )


def test_uninitialized_oracle_is_rejected(quadratic, rng):
    oracle = OracleState(kind="lsvrg", probs=np.full((quadratic.n, quadratic.m), 1.0 / quadratic.m))
    with pytest.raises(SimulationException) as e:
        oracles.sample(oracle, quadratic, np.zeros((quadratic.n, quadratic.p)), rng)
    assert e.value.error_code == ErrorCode.ORACLE_NOT_INITIALIZED


def test_bad_sampling_distribution(quadratic):
    X = np.zeros((quadratic.n, quadratic.p))
    with pytest.raises(SimulationException) as e:
        oracles.init("sgd", quadratic, X, sampling=np.ones((quadratic.n, quadratic.m)))
    assert e.value.error_code == ErrorCode.INVALID_PARAMETER


def test_bad_refresh_probability(quadratic):
    X = np.zeros((quadratic.n, quadratic.p))
    with pytest.raises(SimulationException) as e:
        oracles.init("lsvrg", quadratic, X, lsvrg_p=1.5)
    assert e.value.error_code == ErrorCode.INVALID_PARAMETER
