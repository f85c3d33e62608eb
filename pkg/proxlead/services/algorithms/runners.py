"""Algorithm objects driven by the harness run loop.

Each algorithm owns no state of its own between runs: `initialize` builds the
first iterate from a RunContext and `step` maps one AlgorithmState to the next.
"""

from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from typing import Callable, final

import numpy as np

from proxlead.core.codes import ErrorCode
from proxlead.core.constants import FLOAT_BITS
from proxlead.core.exceptions import ConfigException
from proxlead.core.streams import StreamFactory
from proxlead.models.algorithm import AlgorithmState, Params
from proxlead.models.network import Network, SpectralInfo
from proxlead.models.oracle import OracleState
from proxlead.models.problem import CompositeProblem, ReferenceSolution
from proxlead.schemas.config import CompressorSpec
from proxlead.services import oracle as oracles
from proxlead.services.algorithms.lyapunov import lyapunov
from proxlead.services.algorithms.steppers import (
    check_divergence,
    dgd_step,
    init_lead,
    init_prox_lead,
    lead_step,
    nids_step,
    prox_lead_step,
)


@dataclass(eq=False)
class RunContext:
    """Everything one replica needs; nothing in it is shared with other replicas."""

    prob: CompositeProblem
    net: Network
    spectral: SpectralInfo
    compressor: CompressorSpec
    oracle: OracleState
    params: Params
    C: float
    streams: StreamFactory
    X0: np.ndarray | None = field(default=None, repr=False)

    @property
    def start(self) -> np.ndarray:
        if self.X0 is None:
            return np.zeros((self.prob.n, self.prob.p))
        return self.X0


class Algorithm(ABC):
    """Decentralized method simulated on stacked n x p matrices."""

    name: str = "algorithm"
    # whether the iterate carries the dual and compression states
    primal_dual: bool = True

    @abstractmethod
    def initialize(self, ctx: RunContext) -> AlgorithmState:
        """Iterate at k = 1."""

    @abstractmethod
    def step(self, ctx: RunContext, state: AlgorithmState) -> AlgorithmState:
        """Iterate k -> k + 1."""

    def phi(self, ctx: RunContext, state: AlgorithmState, ref: ReferenceSolution) -> float:
        """Lyapunov value recorded in the metrics (phi_tilde with variance reduction)."""
        snapshot = lyapunov(state, ref, ctx.params, ctx.C, ctx.spectral, ctx.prob, ctx.oracle)
        return snapshot.phi_tilde

    def finalize(self, ctx: RunContext, state: AlgorithmState) -> None:  # noqa: ARG002
        return

    @final
    def run(
        self,
        ctx: RunContext,
        iterations: int,
        callback: Callable[[AlgorithmState], None] | None = None,
    ) -> AlgorithmState | None:
        """initialize, then step until k reaches `iterations`, then finalize."""
        if iterations < 1:
            return None
        state = self.initialize(ctx)
        if callback is not None:
            callback(state)
        while state.k < iterations:
            state = self.step(ctx, state)
            if callback is not None:
                callback(state)
        self.finalize(ctx, state)
        return state


class ProxLead(Algorithm):
    name = "prox_lead"

    def initialize(self, ctx: RunContext) -> AlgorithmState:
        return init_prox_lead(ctx.prob, ctx.oracle, ctx.net, ctx.params, ctx.streams.oracle, ctx.start)

    def step(self, ctx: RunContext, state: AlgorithmState) -> AlgorithmState:
        return prox_lead_step(
            state,
            ctx.prob,
            ctx.oracle,
            ctx.compressor,
            ctx.net,
            ctx.params,
            rng=ctx.streams.compressor,
            oracle_rng=ctx.streams.oracle,
        )


class Lead(Algorithm):
    """Smooth variant; the regularizer of the problem is ignored."""

    name = "lead"

    def initialize(self, ctx: RunContext) -> AlgorithmState:
        return init_lead(ctx.prob, ctx.oracle, ctx.net, ctx.params, ctx.streams.oracle, ctx.start)

    def step(self, ctx: RunContext, state: AlgorithmState) -> AlgorithmState:
        return lead_step(
            state,
            ctx.prob,
            ctx.oracle,
            ctx.compressor,
            ctx.net,
            ctx.params,
            rng=ctx.streams.compressor,
            oracle_rng=ctx.streams.oracle,
        )


@dataclass(eq=False)
class Nids(Algorithm):
    """Uncompressed full-gradient baseline sharing the Prox-LEAD bootstrap."""

    dual_step: float = 1.0
    name: str = "nids"

    def initialize(self, ctx: RunContext) -> AlgorithmState:
        return init_prox_lead(ctx.prob, ctx.oracle, ctx.net, ctx.params, ctx.streams.oracle, ctx.start)

    def step(self, ctx: RunContext, state: AlgorithmState) -> AlgorithmState:
        eta = ctx.params.at(state.k).eta
        next_state = nids_step(state, ctx.prob, ctx.net, eta, self.dual_step)
        ctx.oracle.grad_evals += ctx.prob.n * ctx.prob.m
        return next_state


class Dgd(Algorithm):
    """W X - eta G with whatever oracle the context carries."""

    name = "dgd"
    primal_dual = False

    def initialize(self, ctx: RunContext) -> AlgorithmState:
        zeros = np.zeros((ctx.prob.n, ctx.prob.p))
        start = AlgorithmState(X=ctx.start.copy(), D=zeros, H=zeros.copy(), H_w=zeros.copy(), k=0)
        return self.step(ctx, start)

    def step(self, ctx: RunContext, state: AlgorithmState) -> AlgorithmState:
        eta = ctx.params.at(state.k).eta
        G = oracles.sample(ctx.oracle, ctx.prob, state.X, ctx.streams.oracle)
        X = dgd_step(state.X, ctx.prob, ctx.net, eta, G)
        check_divergence(X, state.k + 1)
        return AlgorithmState(
            X=X,
            D=state.D,
            H=state.H,
            H_w=state.H_w,
            k=state.k + 1,
            bits_sent=state.bits_sent + ctx.net.n * FLOAT_BITS * ctx.prob.p,
            G=G,
        )

    def phi(self, ctx: RunContext, state: AlgorithmState, ref: ReferenceSolution) -> float:
        return float(np.sum((state.X - ref.X_star) ** 2))


def build_algorithm(name: str, dual_step: float = 1.0) -> Algorithm:
    if name == "prox_lead":
        return ProxLead()
    if name == "lead":
        return Lead()
    if name == "nids":
        return Nids(dual_step=dual_step)
    if name == "dgd":
        return Dgd()
    raise ConfigException(f"Unknown algorithm '{name}'", ErrorCode.INVALID_PARAMETER)
