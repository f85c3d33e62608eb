import math

import pytest

from proxlead.core.codes import ErrorCode
from proxlead.core.exceptions import SimulationException
from proxlead.models.algorithm import Params
from proxlead.services.algorithms.params import (
    contraction_factor,
    lyapunov_weight,
    select_params,
    validate_params,
)


def test_variance_reduced_choice(ring_spectral):
    params = select_params("thm8", mu=1.0, L=10.0, C=0.0, spectral=ring_spectral, lsvrg_p=0.1)
    assert params.eta == pytest.approx(1.0 / 60.0)
    assert params.alpha == pytest.approx(1.0 / 120.0)
    assert params.gamma == pytest.approx(1.0 / 32.0)


def test_variance_reduced_choice_with_compression(ring_spectral):
    C = 1.25
    params = select_params("thm9", mu=1.0, L=10.0, C=C, spectral=ring_spectral, m=15)
    lam_max = ring_spectral.lam_max
    assert params.alpha == pytest.approx(1.0 / (12.0 * (1.0 + C) * 10.0))
    assert params.gamma == pytest.approx(
        min(
            1.0 / (24.0 * math.sqrt(C) * (1.0 + C) * lam_max * 10.0),
            1.0 / (24.0 * (1.0 + C) * lam_max),
        )
    )


def test_uncompressed_choice(ring_spectral):
    params = select_params("cor6", mu=1.0, L=4.0, C=0.0, spectral=ring_spectral)
    assert (params.eta, params.alpha, params.gamma) == (0.125, 1.0, 1.0)
    assert select_params("thm5", mu=1.0, L=4.0, C=0.0, spectral=ring_spectral).alpha == 1.0


def test_uncompressed_choice_needs_exact_compressor(ring_spectral):
    with pytest.raises(SimulationException) as e:
        select_params("cor6", mu=1.0, L=4.0, C=0.5, spectral=ring_spectral)
    assert e.value.error_code == ErrorCode.PRECONDITION_VIOLATED


def test_compressed_choice_is_valid(ring_spectral):
    C = 0.625
    params = select_params("thm5", mu=1.0, L=5.0, C=C, spectral=ring_spectral)
    assert params.eta == pytest.approx(0.1)
    assert params.alpha == pytest.approx(0.5 * min(0.1 / math.sqrt(C), 1.0 / (1.0 + C)))
    assert 0.0 < params.gamma < 2.0 / ring_spectral.lam_max
    assert 0.0 < lyapunov_weight(params, C, ring_spectral.lam_max) <= 1.0
    factors = contraction_factor(params, 1.0, 5.0, C, ring_spectral)
    assert 0.0 < factors.rho < 1.0


def test_eta_above_half_inverse_smoothness_is_rejected(ring_spectral):
    with pytest.raises(SimulationException) as e:
        select_params("thm5", mu=1.0, L=5.0, C=0.5, spectral=ring_spectral, eta=0.2)
    assert e.value.error_code == ErrorCode.PRECONDITION_VIOLATED


def test_experimental_needs_eta(ring_spectral):
    with pytest.raises(SimulationException):
        select_params("experimental", mu=1.0, L=5.0, C=0.5, spectral=ring_spectral)
    params = select_params("experimental", mu=1.0, L=5.0, C=0.5, spectral=ring_spectral, eta=0.05)
    assert (params.eta, params.alpha, params.gamma) == (0.05, 0.5, 1.0)


def test_diminishing_schedule(ring_spectral):
    params = select_params("thm7", mu=1.0, L=5.0, C=0.5, spectral=ring_spectral)
    assert params.schedule == "diminishing"
    first = params.at(1)
    assert (first.eta, first.alpha, first.gamma) == (params.eta, params.alpha, params.gamma)
    etas = [params.at(k).eta for k in (1, 10, 1000, 100_000)]
    assert etas == sorted(etas, reverse=True)
    assert etas[0] <= 1.0 / (2.0 * 5.0)
    late = params.at(10**7)
    assert late.eta * 10**7 == pytest.approx(
        8.0 * 1.5**2 * ring_spectral.kappa_g * 5.0 / 5.0, rel=1e-3
    )
    validate_params(late, ring_spectral)


def test_unknown_source(ring_spectral):
    with pytest.raises(SimulationException) as e:
        select_params("thm99", mu=1.0, L=5.0, C=0.0, spectral=ring_spectral)  # type: ignore[arg-type]
    assert e.value.error_code == ErrorCode.INVALID_PARAMETER


def test_bad_curvature(ring_spectral):
    with pytest.raises(SimulationException) as e:
        select_params("cor6", mu=0.0, L=5.0, C=0.0, spectral=ring_spectral)
    assert e.value.error_code == ErrorCode.PRECONDITION_VIOLATED


@pytest.mark.parametrize(
    "params",
    [
        Params(eta=0.0, alpha=0.5, gamma=1.0),
        Params(eta=0.1, alpha=0.0, gamma=1.0),
        Params(eta=0.1, alpha=1.5, gamma=1.0),
        Params(eta=0.1, alpha=0.5, gamma=2.0),
    ],
)
def test_validate_params(ring_spectral, params):
    with pytest.raises(SimulationException) as e:
        validate_params(params, ring_spectral)
    assert e.value.error_code == ErrorCode.INVALID_PARAMETER


def test_variance_reduced_contraction(ring_spectral):
    params = select_params("thm8", mu=1.0, L=10.0, C=0.0, spectral=ring_spectral, lsvrg_p=0.1)
    factors = contraction_factor(
        params, 1.0, 10.0, 0.0, ring_spectral, oracle_kind="lsvrg", lsvrg_p=0.1
    )
    expected = max(120.0, 2820.0 / 23.0, 48.0 * ring_spectral.kappa_g, 20.0)
    assert factors.rho == pytest.approx(1.0 - 1.0 / expected)
    saga = contraction_factor(params, 1.0, 10.0, 0.0, ring_spectral, oracle_kind="saga", m=200)
    assert saga.rho == pytest.approx(1.0 - 1.0 / max(expected, 400.0))
    assert factors.M_tilde == 1.0
