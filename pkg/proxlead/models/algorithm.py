from dataclasses import dataclass, field, replace
from typing import Literal

import numpy as np

from proxlead.models.base import BaseModel

Theorem = Literal["thm5", "cor6", "thm7", "thm8", "thm9", "experimental"]


@dataclass(eq=False)
class AlgorithmState(BaseModel):
    """Iterate of the primal-dual methods, all matrices n x p.

    G, Z, V, Z_hat and Z_hat_w are transients of the last step, kept for
    diagnostics only.
    """

    X: np.ndarray
    D: np.ndarray
    H: np.ndarray
    H_w: np.ndarray
    k: int = 0
    bits_sent: int = 0
    G: np.ndarray | None = field(default=None, repr=False)
    Z: np.ndarray | None = field(default=None, repr=False)
    V: np.ndarray | None = field(default=None, repr=False)
    Z_hat: np.ndarray | None = field(default=None, repr=False)
    Z_hat_w: np.ndarray | None = field(default=None, repr=False)

    def copy(self) -> "AlgorithmState":
        return AlgorithmState(
            X=self.X.copy(),
            D=self.D.copy(),
            H=self.H.copy(),
            H_w=self.H_w.copy(),
            k=self.k,
            bits_sent=self.bits_sent,
        )

    @classmethod
    def at(
        cls,
        X: np.ndarray,
        D: np.ndarray,
        H: np.ndarray,
        W: np.ndarray,
        k: int = 1,
    ) -> "AlgorithmState":
        """State with H_w derived from H."""
        return cls(X=X.copy(), D=D.copy(), H=H.copy(), H_w=W @ H, k=k)


@dataclass(frozen=True)
class Params(BaseModel):
    """Step sizes for one iteration.

    For the diminishing schedule `eta`, `alpha`, `gamma` hold the k = 1
    values; use `at(k)` to get the values for iteration k.
    """

    eta: float
    alpha: float
    gamma: float
    theorem: Theorem = "experimental"
    schedule: Literal["fixed", "diminishing"] = "fixed"
    # schedule constants (diminishing only)
    mu: float = 0.0
    L: float = 0.0
    c_param: float = 0.0
    kappa_g: float = 1.0
    lam_max: float = 1.0

    def at(self, k: int) -> "Params":
        if self.schedule == "fixed":
            return self
        kappa_f = self.L / self.mu
        scale = 8.0 * (1.0 + self.c_param) ** 2 * self.kappa_g * kappa_f
        eta = scale / (k + 2.0 * scale) / self.L
        return replace(
            self,
            eta=eta,
            alpha=eta * self.mu / (1.0 + self.c_param),
            gamma=eta * self.mu / (2.0 * (1.0 + self.c_param) ** 2 * self.lam_max),
            schedule="fixed",
        )


@dataclass(frozen=True)
class LyapunovSnapshot(BaseModel):
    phi: float
    phi_tilde: float
    M: float
    primal: float
    dual: float
    compression: float
    reference: float = 0.0

    @property
    def components(self) -> dict[str, float]:
        return {
            "primal": self.primal,
            "dual": self.dual,
            "compression": self.compression,
            "reference": self.reference,
        }


@dataclass(frozen=True)
class StepIdentity(BaseModel):
    """Both sides of the one-step expansion of ||Z' - Z*||^2."""

    lhs: float
    rhs: float

    @property
    def relative_error(self) -> float:
        return abs(self.lhs - self.rhs) / max(abs(self.lhs), abs(self.rhs), 1e-300)


@dataclass(frozen=True)
class ContractionFactors(BaseModel):
    rho: float
    M: float
    M_tilde: float
    terms: tuple[float, ...]
