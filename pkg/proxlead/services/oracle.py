"""Stochastic gradient oracles: full, plain stochastic, loopless SVRG and SAGA.

Every estimator returns one row per node and is unbiased for the stacked
local gradients grad F(X) given the oracle memory.
"""

import numpy as np

from proxlead.core.codes import ErrorCode
from proxlead.core.exceptions import SimulationException
from proxlead.core.logger import LogCategory, get_logger
from proxlead.core.settings import settings
from proxlead.models.oracle import OracleDraw, OracleKind, OracleState
from proxlead.models.problem import CompositeProblem
from proxlead.services.problem import grad_nodes, grad_sampled

logger = get_logger(__name__, LogCategory.ORACLE)

SAGA_CHECK_EVERY = 10_000


def init(
    kind: OracleKind,
    prob: CompositeProblem,
    X0: np.ndarray,
    sampling: np.ndarray | None = None,
    lsvrg_p: float | None = None,
) -> OracleState:
    """Fresh oracle with its memory anchored at X0.

    Args:
        kind: estimator kind
        prob: problem the oracle samples from
        X0: starting iterate, n x p
        sampling: per-node batch distribution (n, m); uniform when None
        lsvrg_p: reference refresh probability; defaults to 1/m
    """
    probs = _sampling(prob, sampling)
    p_refresh = 1.0 / prob.m if lsvrg_p is None else float(lsvrg_p)
    if kind == "lsvrg" and not 0.0 < p_refresh <= 1.0:
        raise SimulationException(
            f"Loopless SVRG refresh probability must lie in (0, 1], got {p_refresh}",
            ErrorCode.INVALID_PARAMETER,
        )

    oracle = OracleState(kind=kind, probs=probs, lsvrg_p=p_refresh)
    if kind == "lsvrg":
        oracle.ref_points = X0.copy()
        oracle.ref_grads = grad_nodes(prob, X0)
        oracle.grad_evals = prob.n * prob.m
    elif kind == "saga":
        oracle.table = prob.smooth.all_batch_gradients(X0)
        oracle.table_mean = oracle.table.mean(axis=1)
        oracle.table_points = np.repeat(X0[:, None, :], prob.m, axis=1)
        oracle.grad_evals = prob.n * prob.m

    logger.debug(
        "Initialized oracle",
        operation="init",
        kind=kind,
        grad_evals=oracle.grad_evals,
        lsvrg_p=p_refresh if kind == "lsvrg" else None,
    )
    return oracle


def _sampling(prob: CompositeProblem, sampling: np.ndarray | None) -> np.ndarray:
    if sampling is None:
        return np.full((prob.n, prob.m), 1.0 / prob.m)
    probs = np.asarray(sampling, dtype=float)
    if probs.shape != (prob.n, prob.m):
        raise SimulationException(
            f"Sampling distribution has shape {probs.shape}, expected ({prob.n}, {prob.m})",
            ErrorCode.DIMENSION_MISMATCH,
        )
    if np.any(probs <= 0.0) or np.abs(probs.sum(axis=1) - 1.0).max() > 1e-12:
        raise SimulationException(
            "Sampling distributions must be positive and sum to one per node",
            ErrorCode.INVALID_PARAMETER,
        )
    return probs


def draw(oracle: OracleState, rng: np.random.Generator) -> OracleDraw:
    """One batch index per node (inverse CDF), then the lsvrg refresh coins."""
    if oracle.uniform:
        batches = rng.integers(0, oracle.m, size=oracle.n)
    else:
        cdf = np.cumsum(oracle.probs, axis=1)
        cdf[:, -1] = 1.0
        u = rng.random(oracle.n)
        batches = (u[:, None] < cdf).argmax(axis=1)
    refresh = rng.random(oracle.n) < oracle.lsvrg_p if oracle.kind == "lsvrg" else None
    return OracleDraw(batches=batches, refresh=refresh)


def _estimate(
    oracle: OracleState, prob: CompositeProblem, X: np.ndarray, batches: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    nodes = np.arange(prob.n)
    fresh = grad_sampled(prob, batches, X)
    weight = (1.0 / (oracle.m * oracle.probs[nodes, batches]))[:, None]
    if oracle.kind == "sgd":
        return weight * fresh, fresh
    if oracle.kind == "lsvrg":
        stale = prob.smooth.batch_gradients(nodes, batches, oracle.ref_points)
        return weight * (fresh - stale) + oracle.ref_grads, fresh
    stale = oracle.table[nodes, batches]
    return weight * (fresh - stale) + oracle.table_mean, fresh


def estimate(
    oracle: OracleState, prob: CompositeProblem, X: np.ndarray, batches: np.ndarray
) -> np.ndarray:
    """Estimator value for given batch choices, without touching the memory."""
    _require_ready(oracle)
    if oracle.kind == "full":
        return grad_nodes(prob, X)
    return _estimate(oracle, prob, X, batches)[0]


def sample(
    oracle: OracleState, prob: CompositeProblem, X: np.ndarray, rng: np.random.Generator
) -> np.ndarray:
    """Draw G with E[G] = grad F(X), then update the oracle memory."""
    _require_ready(oracle)
    if not np.all(np.isfinite(X)):
        raise SimulationException(
            "Oracle sampled at a non-finite iterate", ErrorCode.NON_FINITE_INPUT
        )

    if oracle.kind == "full":
        oracle.grad_evals += prob.n * prob.m
        return grad_nodes(prob, X)

    choice = draw(oracle, rng)
    G, fresh = _estimate(oracle, prob, X, choice.batches)

    if oracle.kind == "sgd":
        oracle.grad_evals += prob.n
    elif oracle.kind == "lsvrg":
        oracle.grad_evals += 2 * prob.n
        mask = choice.refresh
        count = int(mask.sum())
        if count:
            refreshed = np.flatnonzero(mask)
            oracle.ref_points[refreshed] = X[refreshed]
            oracle.ref_grads[refreshed] = grad_nodes(prob, X[refreshed], refreshed)
            oracle.grad_evals += prob.m * count
            oracle.refreshes += count
    else:
        nodes = np.arange(prob.n)
        oracle.table_mean += (fresh - oracle.table[nodes, choice.batches]) / prob.m
        oracle.table[nodes, choice.batches] = fresh
        oracle.table_points[nodes, choice.batches] = X
        oracle.grad_evals += prob.n
        oracle.updates_since_check += 1
        if oracle.updates_since_check >= SAGA_CHECK_EVERY:
            drift = check_memory(oracle, prob)
            if drift > settings.INVARIANT_TOL:
                raise SimulationException(
                    f"SAGA running average drifted by {drift:.3e}",
                    ErrorCode.STATE_CORRUPTION,
                )
            oracle.updates_since_check = 0
    return G


def expectation(oracle: OracleState, prob: CompositeProblem, X: np.ndarray) -> np.ndarray:
    """Exact conditional mean of `sample` by enumerating every batch choice.

    The lsvrg refresh coin is drawn after G is formed, so both of its
    branches yield the same G.
    """
    _require_ready(oracle)
    if oracle.kind == "full":
        return grad_nodes(prob, X)
    total = np.zeros_like(X, dtype=float)
    for batch in range(prob.m):
        batches = np.full(prob.n, batch)
        total += oracle.probs[:, batch, None] * _estimate(oracle, prob, X, batches)[0]
    return total


def variance_at(
    oracle: OracleState,
    prob: CompositeProblem,
    x: np.ndarray,
    trials: int = 1000,
    rng: np.random.Generator | None = None,
) -> float:
    """(1/n) sum_i E||g_i - grad f_i(x)||^2 at the consensual point x.

    Exact enumeration over batches when m is small, Monte-Carlo otherwise.
    """
    if oracle.kind == "full" or prob.m == 1:
        return 0.0
    X = np.tile(x, (prob.n, 1))
    exact = grad_nodes(prob, X)

    if prob.m <= settings.VARIANCE_ENUMERATION_LIMIT:
        total = np.zeros(prob.n)
        for batch in range(prob.m):
            G = _estimate(oracle, prob, X, np.full(prob.n, batch))[0]
            total += oracle.probs[:, batch] * np.sum((G - exact) ** 2, axis=1)
        return float(total.mean())

    if rng is None:
        raise SimulationException(
            "Monte-Carlo variance estimate needs a random stream",
            ErrorCode.INVALID_PARAMETER,
        )
    acc = 0.0
    for _ in range(trials):
        G = _estimate(oracle, prob, X, draw(oracle, rng).batches)[0]
        acc += float(np.sum((G - exact) ** 2)) / prob.n
    return acc / trials


def check_memory(oracle: OracleState, prob: CompositeProblem) -> float:
    """Largest deviation of the stored memory from its recomputed value."""
    if oracle.kind == "lsvrg":
        return float(np.abs(oracle.ref_grads - grad_nodes(prob, oracle.ref_points)).max())
    if oracle.kind == "saga":
        return float(np.abs(oracle.table_mean - oracle.table.mean(axis=1)).max())
    return 0.0


def reference_bregman(
    oracle: OracleState, prob: CompositeProblem, x_star: np.ndarray
) -> float:
    """Bregman distances of the stored reference points to x*.

    lsvrg: sum_i V_{f_i}(xref_i, x*); saga: sum_ij V_{f_ij}(xref_ij, x*);
    zero for memoryless oracles.
    """
    smooth = prob.smooth
    X_star = np.tile(x_star, (prob.n, 1))
    if oracle.kind == "lsvrg":
        gap = oracle.ref_points - X_star
        values = smooth.node_values(oracle.ref_points) - smooth.node_values(X_star)
        return float(values.sum() - np.sum(smooth.node_gradients(X_star) * gap))
    if oracle.kind == "saga":
        nodes = np.repeat(np.arange(prob.n), prob.m)
        batches = np.tile(np.arange(prob.m), prob.n)
        points = oracle.table_points.reshape(prob.n * prob.m, prob.p)
        anchor = np.repeat(X_star, prob.m, axis=0)
        values = smooth.batch_values(nodes, batches, points) - smooth.batch_values(
            nodes, batches, anchor
        )
        grads = smooth.all_batch_gradients(X_star).reshape(prob.n * prob.m, prob.p)
        return float(values.sum() - np.sum(grads * (points - anchor)))
    return 0.0


def _require_ready(oracle: OracleState) -> None:
    if not oracle.initialized:
        raise SimulationException(
            f"{oracle.kind} oracle used before init", ErrorCode.ORACLE_NOT_INITIALIZED
        )
