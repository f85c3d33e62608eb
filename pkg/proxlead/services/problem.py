"""Composite objectives (1/n) sum_i f_i(x) + r(x) and their reference solutions."""

from typing import Literal

import numpy as np

from proxlead.core.codes import ErrorCode
from proxlead.core.exceptions import SimulationException
from proxlead.core.logger import LogCategory, get_logger, timed_operation
from proxlead.core.settings import settings
from proxlead.core.streams import Purpose, make_stream
from proxlead.core.telemetry import get_tracer
from proxlead.models.problem import (
    CompositeProblem,
    LogisticBatches,
    QuadraticBatches,
    ReferenceSolution,
    Regularizer,
    SmoothBatches,
)

logger = get_logger(__name__, LogCategory.PROBLEM)
tracer = get_tracer(__name__)


def build_problem(
    smooth: SmoothBatches,
    regularizer: Regularizer | None = None,
    seed: int | None = None,
    heterogeneity: float = 0.0,
) -> CompositeProblem:
    """Wrap batch data into a problem, computing (mu, L) from the data."""
    n, m, p = smooth.shape
    mu, L = _curvature(smooth)
    return CompositeProblem(
        n=n,
        m=m,
        p=p,
        smooth=smooth,
        regularizer=regularizer or Regularizer(),
        mu=mu,
        L=L,
        seed=seed,
        heterogeneity=heterogeneity,
    )


def constants(prob: CompositeProblem) -> tuple[float, float]:
    """Strong-convexity and smoothness constants shared by every f_ij."""
    return _curvature(prob.smooth)


def _curvature(smooth: SmoothBatches) -> tuple[float, float]:
    mu, L = smooth.curvature()
    if mu <= 0.0:
        raise SimulationException(
            f"Smooth part is not strongly convex (mu = {mu:.3e})",
            ErrorCode.NOT_STRONGLY_CONVEX,
        )
    return mu, L


def _check_point(prob: CompositeProblem, x: np.ndarray) -> None:
    if x.shape[-1] != prob.p:
        raise SimulationException(
            f"Point has dimension {x.shape[-1]}, problem has p = {prob.p}",
            ErrorCode.DIMENSION_MISMATCH,
        )
    if not np.all(np.isfinite(x)):
        raise SimulationException(
            "Gradient requested at a non-finite point", ErrorCode.NON_FINITE_INPUT
        )


def _check_index(prob: CompositeProblem, i: int, j: int | None = None) -> None:
    if not 0 <= i < prob.n:
        raise SimulationException(
            f"Node {i} outside [0, {prob.n})", ErrorCode.INDEX_OUT_OF_RANGE
        )
    if j is not None and not 0 <= j < prob.m:
        raise SimulationException(
            f"Batch {j} outside [0, {prob.m})", ErrorCode.INDEX_OUT_OF_RANGE
        )


def grad_batch(prob: CompositeProblem, i: int, j: int, x: np.ndarray) -> np.ndarray:
    """Gradient of f_ij at x."""
    _check_index(prob, i, j)
    _check_point(prob, x)
    return prob.smooth.batch_gradients(np.array([i]), np.array([j]), x[None, :])[0]


def grad_full(prob: CompositeProblem, i: int, x: np.ndarray) -> np.ndarray:
    """Gradient of f_i = (1/m) sum_j f_ij at x."""
    _check_index(prob, i)
    _check_point(prob, x)
    X = np.zeros((prob.n, prob.p))
    X[i] = x
    return prob.smooth.node_gradients(X)[i]


def grad_nodes(
    prob: CompositeProblem, X: np.ndarray, nodes: np.ndarray | None = None
) -> np.ndarray:
    """Stacked local gradients: row i is grad f_i(x_i).

    With `nodes`, X holds only those rows and so does the result.
    """
    return prob.smooth.node_gradients(X, nodes)


def grad_sampled(prob: CompositeProblem, batches: np.ndarray, X: np.ndarray) -> np.ndarray:
    """Row i is grad f_{i, batches[i]}(x_i)."""
    return prob.smooth.batch_gradients(np.arange(prob.n), batches, X)


def average_gradient(prob: CompositeProblem, x: np.ndarray) -> np.ndarray:
    return prob.smooth.node_gradients(np.tile(x, (prob.n, 1))).mean(axis=0)


def value_batch(prob: CompositeProblem, i: int, j: int, x: np.ndarray) -> float:
    _check_index(prob, i, j)
    return float(prob.smooth.batch_values(np.array([i]), np.array([j]), x[None, :])[0])


def value_full(prob: CompositeProblem, i: int, x: np.ndarray) -> float:
    _check_index(prob, i)
    return float(prob.smooth.node_values(np.tile(x, (prob.n, 1)))[i])


def objective(prob: CompositeProblem, x: np.ndarray) -> float:
    """(1/n) sum_i f_i(x) + r(x)."""
    smooth = prob.smooth.node_values(np.tile(x, (prob.n, 1))).mean()
    return float(smooth) + prob.regularizer.value(x)


def bregman(
    prob: CompositeProblem, i: int, j: int | None, x: np.ndarray, y: np.ndarray
) -> float:
    """V_f(x, y) = f(x) - f(y) - <grad f(y), x - y> for f = f_ij, or f_i when j is None."""
    if j is None:
        return value_full(prob, i, x) - value_full(prob, i, y) - float(
            grad_full(prob, i, y) @ (x - y)
        )
    return value_batch(prob, i, j, x) - value_batch(prob, i, j, y) - float(
        grad_batch(prob, i, j, y) @ (x - y)
    )


def hessian_vector(
    prob: CompositeProblem, i: int, j: int, x: np.ndarray, v: np.ndarray
) -> np.ndarray:
    _check_index(prob, i, j)
    return prob.smooth.hessian_vector(i, j, x, v)


def prox(prob: CompositeProblem, eta: float, V: np.ndarray) -> np.ndarray:
    """Row-wise prox of eta * r."""
    if eta <= 0.0:
        raise SimulationException(
            f"Prox step must be positive, got {eta}", ErrorCode.INVALID_PARAMETER
        )
    return prob.regularizer.prox(V, eta)


@tracer.start_as_current_span("solve_reference")
def solve_reference(
    prob: CompositeProblem,
    eta: float,
    tol: float | None = None,
    max_iter: int | None = None,
) -> ReferenceSolution:
    """Centralized optimum of (1/n) sum_i f_i + r.

    FISTA with gradient-based adaptive restart brings the iterate close,
    then plain proximal-gradient steps polish it until consecutive iterates
    differ by at most `tol`. Both use the step 1/L.

    Raises:
        SimulationException: REFERENCE_NOT_CONVERGED when the iteration cap
            is hit first
    """
    tol = settings.REFERENCE_TOL if tol is None else tol
    max_iter = settings.REFERENCE_MAX_ITER if max_iter is None else max_iter
    step = 1.0 / prob.L
    polish_below = 1e3 * tol

    with timed_operation(logger, "solve_reference", n=prob.n, p=prob.p, kind=prob.kind):
        x = np.zeros(prob.p)
        y = x.copy()
        t = 1.0
        accelerate = True
        delta = np.inf
        it = 0
        restarts = 0
        for it in range(1, max_iter + 1):
            x_new = prob.regularizer.prox(y - step * average_gradient(prob, y), step)
            delta = float(np.linalg.norm(x_new - x))

            if accelerate:
                if float((y - x_new) @ (x_new - x)) > 0.0:
                    t = 1.0
                    restarts += 1
                t_new = 0.5 * (1.0 + np.sqrt(1.0 + 4.0 * t * t))
                y = x_new + ((t - 1.0) / t_new) * (x_new - x)
                t = t_new
                if delta <= polish_below:
                    accelerate = False
                    y = x_new
            else:
                y = x_new
                if delta <= tol:
                    x = x_new
                    break
            x = x_new
        else:
            raise SimulationException(
                f"Reference solver stopped at {max_iter} iterations with step change "
                f"{delta:.3e} > {tol:.1e}",
                ErrorCode.REFERENCE_NOT_CONVERGED,
            )

        grad_star = prob.smooth.node_gradients(np.tile(x, (prob.n, 1)))
        solution = ReferenceSolution(
            x_star=x,
            grad_star=grad_star,
            obj_star=objective(prob, x),
            tol=delta,
            eta=float(eta),
            iterations=it,
        )
        logger.info(
            "Reference solution found",
            operation="solve_reference",
            iterations=it,
            restarts=restarts,
            achieved_tol=delta,
            obj_star=solution.obj_star,
            dual_norm=float(np.linalg.norm(solution.D_star)),
        )
    return solution


def fixed_point_residual(prob: CompositeProblem, ref: ReferenceSolution) -> float:
    """||x* - prox_{eta r}(x* - eta * mean grad f_i(x*))||."""
    return float(np.linalg.norm(ref.x_star - prob.regularizer.prox(ref.z_star, ref.eta)))


@tracer.start_as_current_span("generate_synthetic")
def generate_synthetic(
    seed: int,
    n: int,
    m: int,
    p: int,
    kind: Literal["quadratic", "logistic"] = "quadratic",
    heterogeneity: float = 0.0,
    l1: float = 0.0,
    l2: float = 0.005,
    batch_size: int = 10,
) -> CompositeProblem:
    """Deterministic synthetic instance whose node data differ with `heterogeneity`.

    Quadratic: every f_i is minimized exactly at ``c + heterogeneity * xi_i``
    while the batches of a node disagree through centered offsets, so the
    stochastic gradients keep nonzero variance at the optimum.

    Logistic: node i draws positive labels with a probability that moves
    linearly across nodes, and its features are shifted by a node-specific
    mean; rows are normalized to unit length.
    """
    if min(n, m, p, batch_size) < 1:
        raise SimulationException(
            f"Dimensions must be positive, got n={n}, m={m}, p={p}, s={batch_size}",
            ErrorCode.INVALID_PARAMETER,
        )
    rng = make_stream(seed, 0, Purpose.DATA)
    regularizer = Regularizer(kind="l1", weight=l1) if l1 > 0.0 else Regularizer()

    smooth: SmoothBatches
    if kind == "quadratic":
        center = rng.standard_normal(p)
        spread = rng.standard_normal((n, p))
        G = rng.standard_normal((n, m, p, p))
        A = np.einsum("ijkp,ijkq->ijpq", G, G) / p + np.eye(p)
        noise = 0.5 * rng.standard_normal((n, m, p))
        noise -= noise.mean(axis=1, keepdims=True)
        optima = center + heterogeneity * spread
        b = np.einsum("ijpq,iq->ijp", A, optima) + noise
        smooth = QuadraticBatches(A=A, b=b)
    elif kind == "logistic":
        direction = rng.standard_normal(p)
        direction /= np.linalg.norm(direction)
        tilt = np.linspace(-0.5, 0.5, n) if n > 1 else np.zeros(1)
        positive = np.clip(0.5 + heterogeneity * tilt, 0.05, 0.95)
        labels = (rng.random((n, m, batch_size)) < positive[:, None, None]).astype(float)
        shift = heterogeneity * rng.standard_normal((n, p)) / np.sqrt(p)
        features = (
            (labels - 0.5)[..., None] * direction
            + rng.standard_normal((n, m, batch_size, p)) / np.sqrt(p)
            + shift[:, None, None, :]
        )
        features /= np.linalg.norm(features, axis=-1, keepdims=True)
        smooth = LogisticBatches(features=features, labels=labels, l2=l2)
    else:
        raise SimulationException(f"Unknown problem kind '{kind}'", ErrorCode.INVALID_PARAMETER)

    prob = build_problem(smooth, regularizer, seed=seed, heterogeneity=heterogeneity)
    logger.info(
        "Generated synthetic problem",
        operation="generate_synthetic",
        kind=kind,
        n=n,
        m=m,
        p=p,
        mu=prob.mu,
        L=prob.L,
        heterogeneity=heterogeneity,
    )
    return prob
