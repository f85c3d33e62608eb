"""Runtime diagnostics: the Lyapunov function, the one-step identity and state invariants."""

import math

import numpy as np

from proxlead.core.codes import ErrorCode
from proxlead.core.exceptions import SimulationException
from proxlead.core.logger import LogCategory, get_logger
from proxlead.core.settings import settings
from proxlead.models.algorithm import AlgorithmState, LyapunovSnapshot, Params, StepIdentity
from proxlead.models.network import Network, SpectralInfo
from proxlead.models.oracle import OracleState
from proxlead.models.problem import CompositeProblem, ReferenceSolution
from proxlead.services.algorithms.params import lyapunov_weight
from proxlead.services.oracle import reference_bregman
from proxlead.services.topology import pinv_norm_sq

logger = get_logger(__name__, LogCategory.ALGORITHM)


def dual_row_sum(D: np.ndarray) -> float:
    """Largest entry of |1'D|."""
    return float(np.abs(D.sum(axis=0)).max())


def lyapunov(
    state: AlgorithmState,
    ref: ReferenceSolution,
    params: Params,
    C: float,
    spectral: SpectralInfo,
    prob: CompositeProblem | None = None,
    oracle: OracleState | None = None,
) -> LyapunovSnapshot:
    """Phi = M ||X - X*||^2 + (2 eta^2 / gamma) ||D - D*||^2_{(I-W)^+} + sqrt(C) ||H - Z*||^2.

    With an lsvrg or saga oracle (and the problem) phi_tilde adds the
    weighted Bregman distances of the oracle reference points to x*.

    Raises:
        SimulationException: STATE_CORRUPTION when the rows of D do not sum
            to zero, since the (I-W)^+ norm is then meaningless
    """
    drift = dual_row_sum(state.D)
    if drift > settings.DUAL_ROW_SUM_TOL:
        raise SimulationException(
            f"Dual variable rows sum to {drift:.3e} at iteration {state.k}",
            ErrorCode.STATE_CORRUPTION,
        )
    step = params.at(state.k)
    fixed = ref.with_eta(step.eta)
    M = lyapunov_weight(step, C, spectral.lam_max)

    primal = M * float(np.sum((state.X - fixed.X_star) ** 2))
    dual = (2.0 * step.eta**2 / step.gamma) * pinv_norm_sq(spectral, state.D - fixed.D_star)
    compression = math.sqrt(C) * float(np.sum((state.H - fixed.Z_star) ** 2))
    phi = primal + dual + compression

    reference = 0.0
    if oracle is not None and prob is not None and oracle.kind in ("lsvrg", "saga"):
        distance = reference_bregman(oracle, prob, ref.x_star)
        if oracle.kind == "lsvrg":
            reference = 2.0 / (9.0 * oracle.lsvrg_p * prob.L) * distance
        else:
            reference = 2.0 / (9.0 * prob.L) * distance

    return LyapunovSnapshot(
        phi=phi,
        phi_tilde=phi + reference,
        M=M,
        primal=primal,
        dual=dual,
        compression=compression,
        reference=reference,
    )


def one_step_identity(
    state: AlgorithmState, next_state: AlgorithmState, ref: ReferenceSolution, params: Params
) -> StepIdentity:
    """Both sides of the expansion of ||Z' - Z*||^2 for the step state -> next_state.

    With a = X - X* - eta G + eta grad F(X*):
    ||Z' - Z*||^2 = ||a||^2 + eta^2 ||D - D*||^2 - 2 eta <D - D*, a>.
    """
    if next_state.G is None or next_state.Z is None:
        raise SimulationException(
            "Step identity needs the gradient and transient of the step",
            ErrorCode.INVALID_PARAMETER,
        )
    eta = params.at(state.k).eta
    fixed = ref.with_eta(eta)
    a = state.X - fixed.X_star - eta * next_state.G + eta * fixed.grad_star
    gap = state.D - fixed.D_star
    lhs = float(np.sum((next_state.Z - fixed.Z_star) ** 2))
    rhs = float(np.sum(a**2) + eta**2 * np.sum(gap**2) - 2.0 * eta * np.sum(gap * a))
    return StepIdentity(lhs=lhs, rhs=rhs)


def check_state(state: AlgorithmState, net: Network, tol: float | None = None) -> None:
    """H_w tracks W H and the rows of D sum to zero.

    Raises:
        SimulationException: STATE_CORRUPTION on either violation
    """
    tol = settings.INVARIANT_TOL if tol is None else tol
    scale = max(1.0, float(np.abs(state.H).max(initial=0.0)))
    tracking = float(np.abs(state.H_w - net.W @ state.H).max(initial=0.0))
    if tracking > tol * scale:
        raise SimulationException(
            f"H_w drifted from W H by {tracking:.3e} at iteration {state.k}",
            ErrorCode.STATE_CORRUPTION,
        )
    drift = dual_row_sum(state.D)
    if drift > settings.DUAL_ROW_SUM_TOL:
        raise SimulationException(
            f"Dual variable rows sum to {drift:.3e} at iteration {state.k}",
            ErrorCode.STATE_CORRUPTION,
        )
    logger.debug(
        "State invariants hold",
        operation="check_state",
        k=state.k,
        tracking=tracking,
        dual_row_sum=drift,
    )
