"""Theorem-driven step sizes and the contraction factors they guarantee."""

import math

from proxlead.core.codes import ErrorCode
from proxlead.core.exceptions import SimulationException
from proxlead.core.logger import LogCategory, get_logger
from proxlead.models.algorithm import ContractionFactors, Params, Theorem
from proxlead.models.network import SpectralInfo

logger = get_logger(__name__, LogCategory.ALGORITHM)

EXPERIMENTAL_ETA_RANGE = (0.01, 0.1)


def select_params(
    theorem: Theorem,
    mu: float,
    L: float,
    C: float,
    spectral: SpectralInfo,
    m: int | None = None,
    lsvrg_p: float | None = None,
    eta: float | None = None,
) -> Params:
    """Step sizes (eta, alpha, gamma) prescribed by one of the convergence results.

    Args:
        theorem: which result to instantiate
        mu: strong-convexity constant
        L: smoothness constant
        C: compressor noise-to-signal ratio
        spectral: spectrum summary of I - W
        m: batches per node (variance-reduced oracles)
        lsvrg_p: loopless SVRG refresh probability
        eta: primal step override where the result allows a range

    Raises:
        SimulationException: PRECONDITION_VIOLATED when the inputs fall
            outside the result's hypotheses
    """
    if mu <= 0.0 or L < mu or C < 0.0 or not math.isfinite(C):
        raise SimulationException(
            f"Need mu > 0, L >= mu and finite C >= 0; got mu={mu}, L={L}, C={C}",
            ErrorCode.PRECONDITION_VIOLATED,
        )
    lam_max = spectral.lam_max
    kappa_f = L / mu

    if theorem == "cor6" or (theorem == "thm5" and C == 0.0):
        if C > 0.0:
            raise SimulationException(
                "The uncompressed parameter choice needs C = 0", ErrorCode.PRECONDITION_VIOLATED
            )
        params = Params(eta=_bounded_eta(eta, L), alpha=1.0, gamma=1.0, theorem=theorem)

    elif theorem == "thm5":
        step = _bounded_eta(eta, L)
        root_c = math.sqrt(C)
        alpha = 0.5 * min(step * mu / root_c, 1.0 / (1.0 + C))
        slack = alpha - (1.0 + C) * alpha**2
        gamma = min(
            (2.0 * step * mu - 2.0 * root_c * alpha) / (lam_max * step * mu),
            slack / (root_c * lam_max),
        )
        params = Params(eta=step, alpha=alpha, gamma=gamma, theorem=theorem)

    elif theorem == "thm7":
        params = Params(
            eta=0.0,
            alpha=0.0,
            gamma=0.0,
            theorem=theorem,
            schedule="diminishing",
            mu=mu,
            L=L,
            c_param=C,
            kappa_g=spectral.kappa_g,
            lam_max=lam_max,
        )
        first = params.at(1)
        params = Params(
            eta=first.eta,
            alpha=first.alpha,
            gamma=first.gamma,
            theorem=theorem,
            schedule="diminishing",
            mu=mu,
            L=L,
            c_param=C,
            kappa_g=spectral.kappa_g,
            lam_max=lam_max,
        )

    elif theorem in ("thm8", "thm9"):
        if theorem == "thm8" and lsvrg_p is not None and not 0.0 < lsvrg_p <= 1.0:
            raise SimulationException(
                f"Refresh probability must lie in (0, 1], got {lsvrg_p}",
                ErrorCode.PRECONDITION_VIOLATED,
            )
        if theorem == "thm9" and m is not None and m < 1:
            raise SimulationException(
                f"Need at least one batch per node, got m={m}", ErrorCode.PRECONDITION_VIOLATED
            )
        if eta is not None:
            logger.warning(
                "Ignoring eta override; the variance-reduced choice fixes eta = 1/(6L)",
                operation="select_params",
                theorem=theorem,
            )
        compressed = (
            1.0 / (24.0 * math.sqrt(C) * (1.0 + C) * lam_max * kappa_f) if C > 0.0 else math.inf
        )
        params = Params(
            eta=1.0 / (6.0 * L),
            alpha=1.0 / (12.0 * (1.0 + C) * kappa_f),
            gamma=min(compressed, 1.0 / (24.0 * (1.0 + C) * lam_max)),
            theorem=theorem,
        )

    elif theorem == "experimental":
        if eta is None:
            raise SimulationException(
                "The experimental choice needs an explicit eta", ErrorCode.PRECONDITION_VIOLATED
            )
        low, high = EXPERIMENTAL_ETA_RANGE
        if not low <= eta <= high:
            logger.warning(
                "eta outside the usual tuning range",
                operation="select_params",
                eta=eta,
                low=low,
                high=high,
            )
        params = Params(eta=float(eta), alpha=0.5, gamma=1.0, theorem=theorem)

    else:
        raise SimulationException(
            f"Unknown parameter source '{theorem}'", ErrorCode.INVALID_PARAMETER
        )

    validate_params(params, spectral)
    logger.info(
        "Selected parameters",
        operation="select_params",
        theorem=theorem,
        eta=params.eta,
        alpha=params.alpha,
        gamma=params.gamma,
        schedule=params.schedule,
        C=C,
        kappa_f=kappa_f,
        kappa_g=spectral.kappa_g,
    )
    return params


def _bounded_eta(eta: float | None, L: float) -> float:
    top = 1.0 / (2.0 * L)
    if eta is None:
        return top
    if not 0.0 < eta <= top * (1.0 + 1e-12):
        raise SimulationException(
            f"eta = {eta} outside (0, 1/(2L)] = (0, {top:.6g}]",
            ErrorCode.PRECONDITION_VIOLATED,
        )
    return float(eta)


def validate_params(params: Params, spectral: SpectralInfo) -> None:
    """eta > 0, alpha in (0, 1], gamma in (0, 2 / lam_max)."""
    if not params.eta > 0.0:
        raise SimulationException(f"eta must be positive, got {params.eta}", ErrorCode.INVALID_PARAMETER)
    if not 0.0 < params.alpha <= 1.0:
        raise SimulationException(
            f"alpha must lie in (0, 1], got {params.alpha}", ErrorCode.INVALID_PARAMETER
        )
    if not 0.0 < params.gamma < 2.0 / spectral.lam_max:
        raise SimulationException(
            f"gamma must lie in (0, {2.0 / spectral.lam_max:.6g}), got {params.gamma}",
            ErrorCode.INVALID_PARAMETER,
        )


def lyapunov_weight(params: Params, C: float, lam_max: float) -> float:
    """M = 1 - sqrt(C) alpha / (1 - gamma lam_max / 2)."""
    return 1.0 - math.sqrt(C) * params.alpha / (1.0 - 0.5 * params.gamma * lam_max)


def contraction_factor(
    params: Params,
    mu: float,
    L: float,
    C: float,
    spectral: SpectralInfo,
    oracle_kind: str = "full",
    m: int | None = None,
    lsvrg_p: float | None = None,
) -> ContractionFactors:
    """Per-iteration contraction factor guaranteed for these parameters.

    The generic bound is max{(1 - eta mu)/M, 1 - gamma lam_min / 2, 1 - alpha};
    thm8/thm9 parameters use the variance-reduced bounds instead, which also
    account for the reference refresh rate.
    """
    kappa_f = L / mu
    kappa_g = spectral.kappa_g
    M = lyapunov_weight(params, C, spectral.lam_max)
    M_tilde = 1.0 - 2.0 * math.sqrt(C) / (3.0 * (1.0 + C) * kappa_f)

    if params.theorem in ("thm8", "thm9") and oracle_kind in ("lsvrg", "saga"):
        memory = (
            2.0 / (lsvrg_p if lsvrg_p is not None else 1.0 / (m or 1))
            if oracle_kind == "lsvrg"
            else 2.0 * (m or 1)
        )
        terms = (
            48.0 * math.sqrt(C) * (1.0 + C) * kappa_f * kappa_g,
            12.0 * (1.0 + C) * kappa_f,
            282.0 * kappa_f / 23.0,
            48.0 * (1.0 + C) * kappa_g,
            memory,
        )
        return ContractionFactors(rho=1.0 - 1.0 / max(terms), M=M, M_tilde=M_tilde, terms=terms)

    terms = (
        (1.0 - params.eta * mu) / M,
        1.0 - 0.5 * params.gamma * spectral.lam_min_nz,
        1.0 - params.alpha,
    )
    return ContractionFactors(rho=max(terms), M=M, M_tilde=M_tilde, terms=terms)
