"""Factories wiring an ExperimentConfig into the objects a run needs."""

from dataclasses import replace
from pathlib import Path
from typing import Optional

import numpy as np

from proxlead.core.codes import ErrorCode
from proxlead.core.exceptions import ConfigException, SimulationException
from proxlead.core.logger import LogCategory, get_logger
from proxlead.core.settings import settings
from proxlead.core.streams import StreamFactory
from proxlead.models.algorithm import Params
from proxlead.models.network import Network, SpectralInfo
from proxlead.models.oracle import OracleState
from proxlead.models.problem import CompositeProblem, ReferenceSolution
from proxlead.repositories.reference import ReferenceRepository
from proxlead.schemas.config import ExperimentConfig, OracleSpec, ProblemSpec, TopologySpec
from proxlead.services import oracle as oracles
from proxlead.services import topology
from proxlead.services.algorithms.params import select_params, validate_params
from proxlead.services.algorithms.runners import Algorithm, RunContext, build_algorithm
from proxlead.services.compression import check_spec, resolve_c
from proxlead.services.problem import generate_synthetic, solve_reference

logger = get_logger(__name__, LogCategory.HARNESS)

CONFIG_ERRORS = {
    ErrorCode.INVALID_TOPOLOGY,
    ErrorCode.INVALID_MIXING_WEIGHT,
    ErrorCode.INVALID_BITS,
    ErrorCode.PRECONDITION_VIOLATED,
    ErrorCode.INVALID_PARAMETER,
    ErrorCode.NOT_STRONGLY_CONVEX,
}


def _as_config_error(e: SimulationException) -> SimulationException:
    if e.error_code in CONFIG_ERRORS and not isinstance(e, ConfigException):
        return ConfigException(e.message, e.error_code)
    return e


def get_network(spec: TopologySpec) -> tuple[Network, SpectralInfo]:
    """Build and validate the mixing matrix; bad topology settings are config errors."""
    try:
        if spec.kind == "ring":
            net = topology.build_ring(spec.n, spec.neighbor_weight)
        elif spec.kind == "complete":
            net = topology.build_complete(spec.n)
        else:
            net = topology.build_from_edges(spec.n, spec.edges or [])
        return net, topology.validate(net)
    except SimulationException as e:
        raise _as_config_error(e) from e


def get_problem(spec: ProblemSpec) -> CompositeProblem:
    try:
        return generate_synthetic(
            seed=spec.seed,
            n=spec.n,
            m=spec.m,
            p=spec.p,
            kind=spec.kind,
            heterogeneity=spec.heterogeneity,
            l1=spec.l1,
            l2=spec.l2,
            batch_size=spec.batch_size,
        )
    except SimulationException as e:
        raise _as_config_error(e) from e


def get_reference_repository(root: Optional[Path] = None) -> ReferenceRepository:
    return ReferenceRepository(root or settings.REFERENCE_CACHE_DIR)


def get_reference(
    config: ExperimentConfig,
    prob: CompositeProblem,
    eta: float,
    repository: Optional[ReferenceRepository] = None,
) -> ReferenceSolution:
    """Cached centralized optimum for the configured problem, solved on a miss."""
    repository = repository or get_reference_repository()
    key = config.problem_hash
    cached = repository.get(key, eta)
    if cached is not None:
        return cached
    solution = solve_reference(prob, eta)
    repository.save(key, solution)
    return solution


def get_params(
    config: ExperimentConfig, prob: CompositeProblem, spectral: SpectralInfo, C: float
) -> Params:
    """Parameters of the configured source, with the alpha/gamma overrides applied."""
    spec = config.algorithm
    try:
        params = select_params(
            spec.params,
            prob.mu,
            prob.L,
            C,
            spectral,
            m=prob.m,
            lsvrg_p=config.oracle.lsvrg_p,
            eta=spec.eta,
        )
        overrides = {
            name: float(value)
            for name, value in (("alpha", spec.alpha), ("gamma", spec.gamma))
            if value is not None
        }
        if overrides:
            if params.schedule == "diminishing":
                raise ConfigException(
                    "alpha/gamma overrides do not apply to the diminishing schedule",
                    ErrorCode.INVALID_PARAMETER,
                )
            params = replace(params, **overrides)
            validate_params(params, spectral)
            logger.info("Applied parameter overrides", operation="get_params", **overrides)
        return params
    except SimulationException as e:
        raise _as_config_error(e) from e


def get_oracle(
    spec: OracleSpec, prob: CompositeProblem, X0: np.ndarray, algorithm: str
) -> OracleState:
    kind = spec.kind
    if algorithm == "nids" and kind != "full":
        logger.warning(
            "NIDS runs with full gradients; ignoring the configured oracle",
            operation="get_oracle",
            configured=kind,
        )
        kind = "full"
    sampling = np.asarray(spec.sampling, dtype=float) if spec.sampling is not None else None
    try:
        return oracles.init(kind, prob, X0, sampling=sampling, lsvrg_p=spec.lsvrg_p)
    except SimulationException as e:
        raise _as_config_error(e) from e


def build_run(
    config: ExperimentConfig,
    replica_id: int = 0,
    ref: Optional[ReferenceSolution] = None,
    repository: Optional[ReferenceRepository] = None,
) -> tuple[RunContext, Algorithm, ReferenceSolution]:
    """Object graph of one replica: context, algorithm and reference solution."""
    try:
        check_spec(config.compressor)
    except SimulationException as e:
        raise _as_config_error(e) from e

    net, spectral = get_network(config.topology)
    prob = get_problem(config.problem)
    C = resolve_c(config.compressor, prob.p)
    params = get_params(config, prob, spectral, C)
    if ref is None:
        ref = get_reference(config, prob, params.eta, repository)

    X0 = np.zeros((prob.n, prob.p))
    ctx = RunContext(
        prob=prob,
        net=net,
        spectral=spectral,
        compressor=config.compressor,
        oracle=get_oracle(config.oracle, prob, X0, config.algorithm.name),
        params=params,
        C=C,
        streams=StreamFactory(config.seed, replica_id),
        X0=X0,
    )
    return ctx, build_algorithm(config.algorithm.name, config.algorithm.dual_step), ref
