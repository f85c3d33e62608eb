"""Experiment orchestration: runs, sweeps, budget-aligned comparisons and analysis."""

import hashlib
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Optional, Sequence

import numpy as np
from scipy import stats

from proxlead.core.codes import ErrorCode
from proxlead.core.exceptions import ConfigException, DivergenceException
from proxlead.core.logger import LogCategory, get_logger, log_context, timed_operation
from proxlead.core.settings import settings
from proxlead.core.streams import StreamFactory, derive_seed
from proxlead.core.telemetry import get_tracer
from proxlead.dependencies.experiment import (
    build_run,
    get_network,
    get_params,
    get_problem,
    get_reference,
)
from proxlead.models.algorithm import AlgorithmState
from proxlead.models.compression import CEstimate
from proxlead.models.problem import ReferenceSolution
from proxlead.repositories.metrics import MetricsRepository
from proxlead.repositories.reference import ReferenceRepository
from proxlead.schemas.config import ExperimentConfig
from proxlead.schemas.metrics import MetricsRow
from proxlead.services import oracle as oracles
from proxlead.services.algorithms.lyapunov import check_state, one_step_identity
from proxlead.services.algorithms.params import contraction_factor, lyapunov_weight
from proxlead.services.algorithms.runners import Algorithm, RunContext
from proxlead.services.compression import estimate_c, resolve_c
from proxlead.services.problem import fixed_point_residual, solve_reference
from proxlead.tasks.replica import ReplicaTask

logger = get_logger(__name__, LogCategory.HARNESS)
tracer = get_tracer(__name__)

IDENTITY_TOL = 1e-10

AXIS_ALIASES = {
    "eta": "algorithm.eta",
    "alpha": "algorithm.alpha",
    "gamma": "algorithm.gamma",
    "bits": "compressor.bits",
    "block_size": "compressor.block_size",
    "lsvrg_p": "oracle.lsvrg_p",
}

ALIGN_COLUMNS = {
    "iterations": "k",
    "bits": "bits_cum",
    "grad_evals": "grad_evals_cum",
}


@dataclass
class RunResult:
    config: ExperimentConfig
    rows: list[list[MetricsRow]]
    paths: list[Path] = field(default_factory=list)
    aggregate_path: Optional[Path] = None


@dataclass
class SweepPoint:
    value: Any
    config: ExperimentConfig
    result: RunResult
    c_param: float


@dataclass
class CompareResult:
    align: str
    header: list[str]
    rows: list[list[float | int]]
    path: Optional[Path] = None


def metrics_row(
    state: AlgorithmState,
    ctx: RunContext,
    algorithm: Algorithm,
    ref: ReferenceSolution,
    wall_ns: int = 0,
) -> MetricsRow:
    X = state.X
    return MetricsRow(
        k=state.k,
        suboptimality=float(np.sum((X - ref.X_star) ** 2)) / ctx.prob.n,
        consensus_err=float(np.linalg.norm(X - X.mean(axis=0))),
        phi=algorithm.phi(ctx, state, ref),
        bits_cum=state.bits_sent,
        grad_evals_cum=ctx.oracle.grad_evals,
        wall_ns=wall_ns,
    )


def _check_step(
    ctx: RunContext,
    previous: Optional[AlgorithmState],
    state: AlgorithmState,
    ref: ReferenceSolution,
) -> None:
    check_state(state, ctx.net)
    if ctx.oracle.kind == "saga":
        drift = oracles.check_memory(ctx.oracle, ctx.prob)
        if drift > settings.INVARIANT_TOL:
            logger.warning("SAGA running average drifted", operation="simulate", k=state.k, drift=drift)
    if previous is not None:
        identity = one_step_identity(previous, state, ref, ctx.params)
        residual = identity.relative_error
        if residual > IDENTITY_TOL:
            logger.warning(
                "One-step identity residual above tolerance",
                operation="simulate",
                k=state.k,
                residual=residual,
            )
        else:
            logger.debug("One-step identity holds", operation="simulate", k=state.k, residual=residual)
    if ctx.params.schedule == "diminishing":
        weight = lyapunov_weight(ctx.params.at(state.k), ctx.C, ctx.spectral.lam_max)
        logger.debug("Lyapunov weight", operation="simulate", k=state.k, M=weight)


def simulate(
    config: ExperimentConfig,
    replica_id: int = 0,
    ref: Optional[ReferenceSolution] = None,
    repository: Optional[ReferenceRepository] = None,
) -> list[MetricsRow]:
    """Run one replica and return its metrics rows.

    Rows are recorded at k = 1, at every multiple of the stride and at the
    final iteration.

    Raises:
        DivergenceException: the iterate blew up
    """
    iterations = config.iterations
    if iterations == 0:
        return []
    ctx, algorithm, ref = build_run(config, replica_id, ref, repository)
    stride = config.metrics_stride
    check = config.algorithm.check_invariants and algorithm.primal_dual
    rows: list[MetricsRow] = []
    start = time.perf_counter_ns()
    previous: list[AlgorithmState] = []

    def observe(state: AlgorithmState) -> None:
        if state.k == 1 or state.k % stride == 0 or state.k == iterations:
            if check:
                _check_step(ctx, previous[0] if previous else None, state, ref)
            wall = time.perf_counter_ns() - start if config.record_wall_time else 0
            rows.append(metrics_row(state, ctx, algorithm, ref, wall))
        previous[:] = [state]

    try:
        algorithm.run(ctx, iterations, observe)
    except DivergenceException as e:
        logger.error(
            "Run diverged",
            operation="simulate",
            error=e,
            replica=replica_id,
            iteration=e.iteration,
            last_suboptimality=rows[-1].suboptimality if rows else None,
        )
        raise
    return rows


def _replica_key(config: ExperimentConfig, replica_id: Optional[int]) -> str:
    key = f"{config.name}-{config.config_hash}"
    if replica_id is None:
        return key
    return f"{key}-r{replica_id}"


def _run_replicas(config: ExperimentConfig, ref: ReferenceSolution) -> list[list[MetricsRow]]:
    payload = config.canonical_json()
    tasks = [
        ReplicaTask(config_json=payload, replica_id=r, ref=ref, run_id=config.config_hash)
        for r in range(config.replicas)
    ]
    if settings.parallel and config.replicas > 1:
        with ProcessPoolExecutor(**settings.worker_config) as executor:
            futures = [executor.submit(task) for task in tasks]
            return [future.result() for future in futures]
    return [task() for task in tasks]


@tracer.start_as_current_span("run")
def run(
    config: ExperimentConfig,
    output_dir: Optional[Path] = None,
    repository: Optional[ReferenceRepository] = None,
) -> RunResult:
    """Execute every replica and write the CSV files.

    One replica writes a single file; several write one file each plus a
    mean/stderr aggregate.
    """
    output = Path(output_dir or config.output or settings.OUTPUT_DIR)
    metrics = MetricsRepository(output)

    with log_context(config.config_hash), timed_operation(
        logger, "run", name=config.name, replicas=config.replicas, iterations=config.iterations
    ):
        if config.iterations == 0:
            replicas: list[list[MetricsRow]] = [[] for _ in range(config.replicas)]
        else:
            ctx, _, ref = build_run(config, 0, repository=repository)
            factors = contraction_factor(
                ctx.params,
                ctx.prob.mu,
                ctx.prob.L,
                ctx.C,
                ctx.spectral,
                oracle_kind=ctx.oracle.kind,
                m=ctx.prob.m,
                lsvrg_p=ctx.oracle.lsvrg_p,
            )
            logger.info(
                "Starting run",
                operation="run",
                algorithm=config.algorithm.name,
                params=ctx.params.to_dict(),
                C=ctx.C,
                rho=factors.rho,
                M=factors.M,
                M_tilde=factors.M_tilde,
            )
            replicas = _run_replicas(config, ref)

        result = RunResult(config=config, rows=replicas)
        if config.replicas == 1:
            result.paths.append(metrics.write_rows(_replica_key(config, None), replicas[0]))
        else:
            for r, rows in enumerate(replicas):
                result.paths.append(metrics.write_rows(_replica_key(config, r), rows))
            result.aggregate_path = metrics.write_aggregate(
                f"{_replica_key(config, None)}-aggregate", replicas
            )
    return result


def resolve_axis(axis: str) -> str:
    return AXIS_ALIASES.get(axis, axis)


@tracer.start_as_current_span("sweep")
def sweep(
    base: ExperimentConfig,
    axis: str,
    values: Sequence[Any],
    output_dir: Optional[Path] = None,
    repository: Optional[ReferenceRepository] = None,
) -> list[SweepPoint]:
    """One run per value of `axis`, with seeds derived from the base seed.

    `axis` is a dotted config key or one of the short aliases (eta, bits, ...).
    Every point is validated before the first one runs.
    """
    if not values:
        raise ConfigException(f"Sweep over '{axis}' has no values", ErrorCode.EMPTY_SWEEP)
    path = resolve_axis(axis)
    configs = [
        base.with_value(path, value)
        .with_value("seed", derive_seed(base.seed, i))
        .with_value("name", f"{base.name}-{axis}-{value}")
        for i, value in enumerate(values)
    ]

    points = []
    with timed_operation(logger, "sweep", axis=path, points=len(configs)):
        for value, config in zip(values, configs):
            points.append(
                SweepPoint(
                    value=value,
                    config=config,
                    result=run(config, output_dir, repository),
                    c_param=resolve_c(config.compressor, config.problem.p),
                )
            )
    return points


def _mean_curve(result: RunResult, column: str) -> list[tuple[float | int, float]]:
    replicas = [rows for rows in result.rows if rows]
    if not replicas:
        return []
    curve = []
    for position in range(len(replicas[0])):
        xs = [float(getattr(rows[position], column)) for rows in replicas]
        subs = [rows[position].suboptimality for rows in replicas]
        x = float(np.mean(xs))
        curve.append((int(x) if x.is_integer() else x, float(np.mean(subs))))
    return curve


def align_curves(
    curves: Sequence[Sequence[tuple[float | int, float]]],
) -> list[list[float | int]]:
    """Merge curves onto the union of their budget values within the shared range.

    Each curve is read as a step function: at budget x it holds the value of
    its last point at or before x. A single curve passes through unchanged.
    """
    if len(curves) == 1:
        return [[x, value] for x, value in curves[0]]
    if any(not curve for curve in curves):
        return []
    low = max(curve[0][0] for curve in curves)
    high = min(curve[-1][0] for curve in curves)
    grid = sorted({x for curve in curves for x, _ in curve if low <= x <= high})

    table: list[list[float | int]] = []
    for x in grid:
        row: list[float | int] = [x]
        for curve in curves:
            xs = np.array([point[0] for point in curve], dtype=float)
            index = int(np.searchsorted(xs, float(x), side="right")) - 1
            row.append(curve[index][1])
        table.append(row)
    return table


def _labels(configs: Sequence[ExperimentConfig]) -> list[str]:
    labels: list[str] = []
    for i, config in enumerate(configs):
        label = config.name if config.name not in labels else f"{config.name}#{i}"
        labels.append(label)
    return labels


@tracer.start_as_current_span("compare")
def compare(
    configs: Sequence[ExperimentConfig],
    align: str = "iterations",
    output_dir: Optional[Path] = None,
    repository: Optional[ReferenceRepository] = None,
) -> CompareResult:
    """Run each config and tabulate suboptimality against a shared budget axis.

    Raises:
        ConfigException: MISMATCHED_PROBLEMS when the configs differ in
            problem or topology
    """
    if align not in ALIGN_COLUMNS:
        raise ConfigException(
            f"Unknown alignment '{align}'; choose one of {sorted(ALIGN_COLUMNS)}",
            ErrorCode.INVALID_AXIS,
        )
    if not configs:
        raise ConfigException("Nothing to compare", ErrorCode.EMPTY_SWEEP)
    first = configs[0]
    for config in configs[1:]:
        if config.problem != first.problem or config.topology != first.topology:
            raise ConfigException(
                f"'{config.name}' solves a different problem or network than '{first.name}'",
                ErrorCode.MISMATCHED_PROBLEMS,
            )

    column = ALIGN_COLUMNS[align]
    with timed_operation(logger, "compare", align=align, configs=len(configs)):
        curves = [_mean_curve(run(config, output_dir, repository), column) for config in configs]
        header = [align] + _labels(configs)
        rows = align_curves(curves)

        digest = hashlib.sha256("".join(c.config_hash for c in configs).encode()).hexdigest()[:12]
        output = Path(output_dir or first.output or settings.OUTPUT_DIR)
        path = MetricsRepository(output).write_table(f"compare-{align}-{digest}", header, rows)
    return CompareResult(align=align, header=header, rows=rows, path=path)


@tracer.start_as_current_span("estimate_compressor")
def estimate_compressor(
    config: ExperimentConfig, trials: int = 1000, repeats: int = 200
) -> CEstimate:
    """Empirical C of the configured compressor on Gaussian p-vectors."""
    p = config.problem.p
    streams = StreamFactory(config.seed)
    return estimate_c(
        config.compressor,
        lambda rng: rng.standard_normal(p),
        trials,
        streams.sampler,
        repeats=repeats,
    )


@tracer.start_as_current_span("reference")
def reference(
    config: ExperimentConfig,
    repository: Optional[ReferenceRepository] = None,
    refresh: bool = False,
) -> ReferenceSolution:
    """Solve (or load) and cache the centralized optimum of the configured problem."""
    prob = get_problem(config.problem)
    _, spectral = get_network(config.topology)
    eta = get_params(config, prob, spectral, resolve_c(config.compressor, prob.p)).eta
    if refresh:
        solution = solve_reference(prob, eta)
        (repository or ReferenceRepository(settings.REFERENCE_CACHE_DIR)).save(
            config.problem_hash, solution
        )
    else:
        solution = get_reference(config, prob, eta, repository)
    logger.info(
        "Reference ready",
        operation="reference",
        key=config.problem_hash,
        obj_star=solution.obj_star,
        residual=fixed_point_residual(prob, solution),
    )
    return solution


def log_slope(ks: Sequence[float], values: Sequence[float]) -> tuple[float, float]:
    """Least-squares slope of log(values) against ks, and its R^2."""
    x = np.asarray(ks, dtype=float)
    y = np.asarray(values, dtype=float)
    keep = y > 0.0
    if keep.sum() < 3:
        raise ValueError("Need at least three positive values to fit a slope")
    fit = stats.linregress(x[keep], np.log(y[keep]))
    return float(fit.slope), float(fit.rvalue**2)


def first_reaching(
    rows: Sequence[MetricsRow], threshold: float, axis: str = "iterations"
) -> Optional[float | int]:
    """Budget at which suboptimality first drops to `threshold`, or None."""
    column = ALIGN_COLUMNS.get(axis, axis)
    for row in rows:
        if row.suboptimality <= threshold:
            return getattr(row, column)
    return None


def plateau(rows: Sequence[MetricsRow], tail: float = 0.2) -> float:
    """Mean suboptimality over the last `tail` fraction of rows."""
    if not rows:
        raise ValueError("No rows")
    count = max(1, math.ceil(tail * len(rows)))
    return float(np.mean([row.suboptimality for row in rows[-count:]]))


def final_decades(rows: Sequence[MetricsRow], decades: float = 2.0) -> list[MetricsRow]:
    """Trailing rows whose suboptimality stays within `decades` of the final value."""
    if not rows:
        return []
    ceiling = rows[-1].suboptimality * 10.0**decades
    start = len(rows) - 1
    while start > 0 and rows[start - 1].suboptimality <= ceiling:
        start -= 1
    return list(rows[start:])
