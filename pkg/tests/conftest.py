from pathlib import Path

import numpy as np
import pytest

from proxlead.core.streams import StreamFactory
from proxlead.models.network import Network, SpectralInfo
from proxlead.models.problem import CompositeProblem, ReferenceSolution
from proxlead.repositories.reference import ReferenceRepository
from proxlead.schemas.config import CompressorSpec, ExperimentConfig, parse_config
from proxlead.services import topology
from proxlead.services.problem import generate_synthetic, solve_reference


@pytest.fixture
def ring() -> Network:
    return topology.build_ring(8, 1.0 / 3.0)


@pytest.fixture
def ring_spectral(ring: Network) -> SpectralInfo:
    return topology.validate(ring)


@pytest.fixture
def quadratic() -> CompositeProblem:
    return generate_synthetic(seed=3, n=8, m=5, p=10, kind="quadratic", heterogeneity=1.0)


@pytest.fixture
def lasso() -> CompositeProblem:
    """l1-regularized heterogeneous quadratic on 8 nodes."""
    return generate_synthetic(seed=5, n=8, m=5, p=10, kind="quadratic", heterogeneity=1.0, l1=0.2)


@pytest.fixture
def logistic() -> CompositeProblem:
    return generate_synthetic(
        seed=7, n=8, m=15, p=20, kind="logistic", heterogeneity=1.0, l1=0.005, l2=0.005
    )


@pytest.fixture
def quadratic_ref(quadratic: CompositeProblem) -> ReferenceSolution:
    return solve_reference(quadratic, 1.0 / (2.0 * quadratic.L))


@pytest.fixture
def lasso_ref(lasso: CompositeProblem) -> ReferenceSolution:
    return solve_reference(lasso, 1.0 / (2.0 * lasso.L))


@pytest.fixture
def two_bit() -> CompressorSpec:
    return CompressorSpec(kind="quant_inf_norm", bits=2, block_size=64)


@pytest.fixture
def identity() -> CompressorSpec:
    return CompressorSpec(kind="identity")


@pytest.fixture
def streams() -> StreamFactory:
    return StreamFactory(11)


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(1234)


@pytest.fixture
def reference_repository(tmp_path: Path) -> ReferenceRepository:
    return ReferenceRepository(tmp_path / "reference-cache")


@pytest.fixture
def small_config(tmp_path: Path) -> ExperimentConfig:
    """Short quadratic run that finishes in well under a second."""
    return parse_config(
        {
            "name": "small",
            "topology": {"kind": "ring", "n": 6},
            "problem": {"kind": "quadratic", "n": 6, "m": 4, "p": 8, "seed": 2, "l1": 0.05},
            "compressor": {"kind": "quant_inf_norm", "bits": 2, "block_size": 8},
            "oracle": {"kind": "sgd"},
            "algorithm": {"name": "prox_lead", "params": "thm5"},
            "iterations": 40,
            "metrics_stride": 10,
            "seed": 9,
            "output": str(tmp_path / "runs"),
        }
    )
