"""One-iteration updates of Prox-LEAD, LEAD and the uncompressed baselines.

Every stepper returns a fresh AlgorithmState and leaves its input untouched.
The dual variable D is stored directly; its rows always sum to zero because
each update adds a multiple of (I - W) applied to something.
"""

import numpy as np

from proxlead.core.constants import FLOAT_BITS
from proxlead.core.exceptions import DivergenceException
from proxlead.core.settings import settings
from proxlead.models.algorithm import AlgorithmState, Params
from proxlead.models.network import Network
from proxlead.models.oracle import OracleState
from proxlead.models.problem import CompositeProblem
from proxlead.schemas.config import CompressorSpec
from proxlead.services import oracle as oracles
from proxlead.services.algorithms.comm import comm
from proxlead.services.problem import grad_nodes, prox


def check_divergence(X: np.ndarray, k: int) -> None:
    if not np.all(np.isfinite(X)):
        raise DivergenceException(
            f"Iterate became non-finite at iteration {k}; the step sizes are too large",
            iteration=k,
        )
    norm = float(np.linalg.norm(X))
    if norm > settings.DIVERGENCE_NORM:
        raise DivergenceException(
            f"||X||_F = {norm:.3e} exceeds {settings.DIVERGENCE_NORM:.1e} at iteration {k}",
            iteration=k,
        )


def _gradient(
    prob: CompositeProblem,
    X: np.ndarray,
    oracle: OracleState | None,
    rng: np.random.Generator | None,
) -> np.ndarray:
    if oracle is None:
        return grad_nodes(prob, X)
    return oracles.sample(oracle, prob, X, rng)


def init_prox_lead(
    prob: CompositeProblem,
    oracle: OracleState,
    net: Network,
    params: Params,
    rng: np.random.Generator,
    X0: np.ndarray | None = None,
) -> AlgorithmState:
    """Bootstrap: X^1 = prox(X^0 - eta G^0), H^1 = X^0, D^1 = 0.

    The oracle must already be anchored at X^0; the bootstrap gradient is
    one ordinary sample from it.
    """
    X0 = np.zeros((prob.n, prob.p)) if X0 is None else np.asarray(X0, dtype=float)
    eta = params.at(0).eta
    G0 = oracles.sample(oracle, prob, X0, rng)
    Z1 = X0 - eta * G0
    state = AlgorithmState.at(prox(prob, eta, Z1), np.zeros_like(X0), X0, net.W, k=1)
    state.G, state.Z = G0, Z1
    check_divergence(state.X, 1)
    return state


def init_lead(
    prob: CompositeProblem,
    oracle: OracleState,
    net: Network,
    params: Params,
    rng: np.random.Generator,
    X0: np.ndarray | None = None,
) -> AlgorithmState:
    """Bootstrap without prox: X^1 = X^0 - eta G^0."""
    X0 = np.zeros((prob.n, prob.p)) if X0 is None else np.asarray(X0, dtype=float)
    eta = params.at(0).eta
    G0 = oracles.sample(oracle, prob, X0, rng)
    state = AlgorithmState.at(X0 - eta * G0, np.zeros_like(X0), X0, net.W, k=1)
    state.G, state.Z = G0, state.X.copy()
    check_divergence(state.X, 1)
    return state


def prox_lead_step(
    state: AlgorithmState,
    prob: CompositeProblem,
    oracle: OracleState,
    compressor: CompressorSpec,
    net: Network,
    params: Params,
    rng: np.random.Generator,
    oracle_rng: np.random.Generator | None = None,
) -> AlgorithmState:
    """One Prox-LEAD iteration.

    `rng` drives the compressor; the oracle draws from `oracle_rng` when
    given, otherwise from `rng` before the compressor does.
    """
    step = params.at(state.k)
    eta, gamma = step.eta, step.gamma

    G = oracles.sample(oracle, prob, state.X, oracle_rng or rng)
    Z = state.X - eta * G - eta * state.D
    sent = comm(Z, state.H, state.H_w, step.alpha, compressor, net, rng)
    diff = sent.Z_hat - sent.Z_hat_w
    D = state.D + (gamma / (2.0 * eta)) * diff
    V = Z - 0.5 * gamma * diff
    X = prox(prob, eta, V)
    check_divergence(X, state.k + 1)

    return AlgorithmState(
        X=X,
        D=D,
        H=sent.H,
        H_w=sent.H_w,
        k=state.k + 1,
        bits_sent=state.bits_sent + sent.bits,
        G=G,
        Z=Z,
        V=V,
        Z_hat=sent.Z_hat,
        Z_hat_w=sent.Z_hat_w,
    )


def lead_step(
    state: AlgorithmState,
    prob: CompositeProblem,
    oracle: OracleState,
    compressor: CompressorSpec,
    net: Network,
    params: Params,
    rng: np.random.Generator,
    oracle_rng: np.random.Generator | None = None,
) -> AlgorithmState:
    """One LEAD iteration; the gradient of the first line is reused for X'."""
    step = params.at(state.k)
    eta, gamma = step.eta, step.gamma

    G = oracles.sample(oracle, prob, state.X, oracle_rng or rng)
    Z = state.X - eta * G - eta * state.D
    sent = comm(Z, state.H, state.H_w, step.alpha, compressor, net, rng)
    D = state.D + (gamma / (2.0 * eta)) * (sent.Z_hat - sent.Z_hat_w)
    X = state.X - eta * G - eta * D
    check_divergence(X, state.k + 1)

    return AlgorithmState(
        X=X,
        D=D,
        H=sent.H,
        H_w=sent.H_w,
        k=state.k + 1,
        bits_sent=state.bits_sent + sent.bits,
        G=G,
        Z=Z,
        V=X,
        Z_hat=sent.Z_hat,
        Z_hat_w=sent.Z_hat_w,
    )


def dgd_step(
    X: np.ndarray,
    prob: CompositeProblem,
    net: Network,
    eta: float,
    G: np.ndarray | None = None,
) -> np.ndarray:
    """X' = W X - eta G, followed by prox of eta * r when r is active.

    G defaults to the full local gradients at X. The prox after the
    mixing-gradient step is a convention for the nonsmooth case.
    """
    G = grad_nodes(prob, X) if G is None else G
    X_next = net.W @ X - eta * G
    if prob.regularizer.active:
        X_next = prox(prob, eta, X_next)
    return X_next


def nids_step(
    state: AlgorithmState,
    prob: CompositeProblem,
    net: Network,
    eta: float,
    dual_step: float = 1.0,
) -> AlgorithmState:
    """NIDS with full gradients and an uncompressed exchange of X_bar.

    The dual update is D' = D + (dual_step / 2)(I - W) X_bar, which is
    Prox-LEAD with the identity compressor and gamma = dual_step * eta.
    """
    G = grad_nodes(prob, state.X)
    X_bar = state.X - eta * G - eta * state.D
    D = state.D + 0.5 * dual_step * (X_bar - net.W @ X_bar)
    V = state.X - eta * G - eta * D
    X = prox(prob, eta, V)
    check_divergence(X, state.k + 1)
    return AlgorithmState(
        X=X,
        D=D,
        H=state.H,
        H_w=state.H_w,
        k=state.k + 1,
        bits_sent=state.bits_sent + net.n * FLOAT_BITS * prob.p,
        G=G,
        Z=X_bar,
        V=V,
    )


def pdhg_step(
    state: AlgorithmState,
    prob: CompositeProblem,
    net: Network,
    eta: float,
    dual_step: float,
    oracle: OracleState | None = None,
    rng: np.random.Generator | None = None,
) -> AlgorithmState:
    """Uncompressed primal-dual iteration that LEAD perturbs by compression.

    X_bar = X - eta G - eta D; D' = D + (dual_step / 2)(I - W) X_bar;
    X' = X - eta G - eta D'. Full gradients unless an oracle is given.
    """
    G = _gradient(prob, state.X, oracle, rng)
    X_bar = state.X - eta * G - eta * state.D
    D = state.D + 0.5 * dual_step * (X_bar - net.W @ X_bar)
    X = state.X - eta * G - eta * D
    check_divergence(X, state.k + 1)
    return AlgorithmState(
        X=X, D=D, H=state.H, H_w=state.H_w, k=state.k + 1, bits_sent=state.bits_sent, G=G, Z=X_bar
    )


def puda_step(
    state: AlgorithmState,
    prob: CompositeProblem,
    net: Network,
    eta: float,
    dual_step: float,
    oracle: OracleState | None = None,
    rng: np.random.Generator | None = None,
) -> AlgorithmState:
    """Proximal variant of `pdhg_step`: X' = prox(X - eta G - eta D')."""
    G = _gradient(prob, state.X, oracle, rng)
    X_bar = state.X - eta * G - eta * state.D
    D = state.D + 0.5 * dual_step * (X_bar - net.W @ X_bar)
    V = state.X - eta * G - eta * D
    X = prox(prob, eta, V)
    check_divergence(X, state.k + 1)
    return AlgorithmState(
        X=X,
        D=D,
        H=state.H,
        H_w=state.H_w,
        k=state.k + 1,
        bits_sent=state.bits_sent,
        G=G,
        Z=X_bar,
        V=V,
    )
