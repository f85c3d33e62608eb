from dataclasses import dataclass
from functools import cached_property
from typing import Literal

import numpy as np

from proxlead.models.base import BaseModel

OracleKind = Literal["full", "sgd", "lsvrg", "saga"]


@dataclass(eq=False)
class OracleState(BaseModel):
    """Gradient-oracle memory owned by a single run.

    probs is the per-node sampling distribution over batches, shape (n, m).
    lsvrg keeps one reference point per node; saga keeps one gradient per
    (node, batch) together with the point it was evaluated at.
    """

    kind: OracleKind
    probs: np.ndarray
    lsvrg_p: float = 1.0
    ref_points: np.ndarray | None = None
    ref_grads: np.ndarray | None = None
    table: np.ndarray | None = None
    table_mean: np.ndarray | None = None
    table_points: np.ndarray | None = None
    grad_evals: int = 0
    refreshes: int = 0
    updates_since_check: int = 0

    @property
    def n(self) -> int:
        return int(self.probs.shape[0])

    @property
    def m(self) -> int:
        return int(self.probs.shape[1])

    @cached_property
    def uniform(self) -> bool:
        return bool(np.allclose(self.probs, 1.0 / self.m, rtol=0.0, atol=1e-15))

    @property
    def initialized(self) -> bool:
        if self.kind == "lsvrg":
            return self.ref_points is not None and self.ref_grads is not None
        if self.kind == "saga":
            return self.table is not None and self.table_mean is not None
        return True


@dataclass(frozen=True)
class OracleDraw:
    """Random choices for one oracle call: one batch per node, plus lsvrg coins."""

    batches: np.ndarray
    refresh: np.ndarray | None = None
