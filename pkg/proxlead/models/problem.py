from dataclasses import dataclass, field, replace
from typing import Literal, Union

import numpy as np
from scipy.special import expit

from proxlead.models.base import BaseModel


@dataclass(frozen=True, eq=False)
class QuadraticBatches(BaseModel):
    """f_ij(x) = 0.5 x'A_ij x - b_ij'x with A of shape (n, m, p, p)."""

    A: np.ndarray
    b: np.ndarray
    kind: Literal["quadratic"] = "quadratic"
    A_node: np.ndarray = field(init=False, repr=False)
    b_node: np.ndarray = field(init=False, repr=False)

    def __post_init__(self) -> None:
        object.__setattr__(self, "A_node", self.A.mean(axis=1))
        object.__setattr__(self, "b_node", self.b.mean(axis=1))

    @property
    def shape(self) -> tuple[int, int, int]:
        n, m, p = self.b.shape
        return n, m, p

    def batch_gradients(self, nodes: np.ndarray, batches: np.ndarray, Y: np.ndarray) -> np.ndarray:
        A = self.A[nodes, batches]
        return np.einsum("kpq,kq->kp", A, Y) - self.b[nodes, batches]

    def all_batch_gradients(self, X: np.ndarray) -> np.ndarray:
        return np.einsum("ijpq,iq->ijp", self.A, X) - self.b

    def node_gradients(self, X: np.ndarray, nodes: np.ndarray | None = None) -> np.ndarray:
        if nodes is None:
            return np.einsum("ipq,iq->ip", self.A_node, X) - self.b_node
        return np.einsum("ipq,iq->ip", self.A_node[nodes], X) - self.b_node[nodes]

    def batch_values(self, nodes: np.ndarray, batches: np.ndarray, Y: np.ndarray) -> np.ndarray:
        A = self.A[nodes, batches]
        return 0.5 * np.einsum("kp,kpq,kq->k", Y, A, Y) - np.einsum(
            "kp,kp->k", self.b[nodes, batches], Y
        )

    def node_values(self, X: np.ndarray) -> np.ndarray:
        return 0.5 * np.einsum("ip,ipq,iq->i", X, self.A_node, X) - np.einsum(
            "ip,ip->i", self.b_node, X
        )

    def hessian_vector(self, i: int, j: int, x: np.ndarray, v: np.ndarray) -> np.ndarray:
        return self.A[i, j] @ v

    def curvature(self) -> tuple[float, float]:
        eigs = np.linalg.eigvalsh(self.A)
        return float(eigs[..., 0].min()), float(eigs[..., -1].max())

    def to_dict(self) -> dict:
        return {"kind": self.kind, "A": self.A, "b": self.b}


@dataclass(frozen=True, eq=False)
class LogisticBatches(BaseModel):
    """Binary logistic loss per batch plus the ridge term l2*||x||^2.

    features has shape (n, m, s, p); labels (n, m, s) with entries in {0, 1}.
    """

    features: np.ndarray
    labels: np.ndarray
    l2: float
    kind: Literal["logistic"] = "logistic"

    @property
    def shape(self) -> tuple[int, int, int]:
        n, m, _, p = self.features.shape
        return n, m, p

    @property
    def batch_size(self) -> int:
        return int(self.features.shape[2])

    def _node_data(self, nodes: np.ndarray | None = None) -> tuple[np.ndarray, np.ndarray]:
        features, labels = self.features, self.labels
        if nodes is not None:
            features, labels = features[nodes], labels[nodes]
        k, m, s, p = features.shape
        return features.reshape(k, m * s, p), labels.reshape(k, m * s)

    def batch_gradients(self, nodes: np.ndarray, batches: np.ndarray, Y: np.ndarray) -> np.ndarray:
        F = self.features[nodes, batches]
        residual = expit(np.einsum("ksp,kp->ks", F, Y)) - self.labels[nodes, batches]
        return np.einsum("ksp,ks->kp", F, residual) / self.batch_size + 2.0 * self.l2 * Y

    def all_batch_gradients(self, X: np.ndarray) -> np.ndarray:
        residual = expit(np.einsum("ijsp,ip->ijs", self.features, X)) - self.labels
        grads = np.einsum("ijsp,ijs->ijp", self.features, residual) / self.batch_size
        return grads + 2.0 * self.l2 * X[:, None, :]

    def node_gradients(self, X: np.ndarray, nodes: np.ndarray | None = None) -> np.ndarray:
        F, y = self._node_data(nodes)
        residual = expit(np.einsum("isp,ip->is", F, X)) - y
        return np.einsum("isp,is->ip", F, residual) / F.shape[1] + 2.0 * self.l2 * X

    def batch_values(self, nodes: np.ndarray, batches: np.ndarray, Y: np.ndarray) -> np.ndarray:
        F = self.features[nodes, batches]
        z = np.einsum("ksp,kp->ks", F, Y)
        loss = np.logaddexp(0.0, z) - self.labels[nodes, batches] * z
        return loss.mean(axis=1) + self.l2 * np.einsum("kp,kp->k", Y, Y)

    def node_values(self, X: np.ndarray) -> np.ndarray:
        F, y = self._node_data()
        z = np.einsum("isp,ip->is", F, X)
        loss = np.logaddexp(0.0, z) - y * z
        return loss.mean(axis=1) + self.l2 * np.einsum("ip,ip->i", X, X)

    def hessian_vector(self, i: int, j: int, x: np.ndarray, v: np.ndarray) -> np.ndarray:
        F = self.features[i, j]
        sig = expit(F @ x)
        return F.T @ (sig * (1.0 - sig) * (F @ v)) / self.batch_size + 2.0 * self.l2 * v

    def curvature(self) -> tuple[float, float]:
        gram = np.einsum("ijsp,ijsq->ijpq", self.features, self.features)
        top = float(np.linalg.eigvalsh(gram)[..., -1].max())
        return 2.0 * self.l2, top / (4.0 * self.batch_size) + 2.0 * self.l2

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "features": self.features,
            "labels": self.labels,
            "l2": self.l2,
        }


SmoothBatches = Union[QuadraticBatches, LogisticBatches]


@dataclass(frozen=True)
class Regularizer(BaseModel):
    """Nonsmooth term shared by every node: zero or weight*||x||_1."""

    kind: Literal["zero", "l1"] = "zero"
    weight: float = 0.0

    @property
    def active(self) -> bool:
        return self.kind == "l1" and self.weight > 0.0

    def prox(self, V: np.ndarray, eta: float) -> np.ndarray:
        if not self.active:
            return V.copy()
        threshold = eta * self.weight
        return np.sign(V) * np.maximum(np.abs(V) - threshold, 0.0)

    def value(self, x: np.ndarray) -> float:
        if not self.active:
            return 0.0
        return float(self.weight * np.abs(x).sum())


@dataclass(frozen=True, eq=False)
class CompositeProblem(BaseModel):
    n: int
    m: int
    p: int
    smooth: SmoothBatches
    regularizer: Regularizer
    mu: float
    L: float
    seed: int | None = None
    heterogeneity: float = 0.0

    @property
    def kind(self) -> str:
        return self.smooth.kind

    @property
    def kappa_f(self) -> float:
        return self.L / self.mu


@dataclass(frozen=True, eq=False)
class ReferenceSolution(BaseModel):
    """Centralized optimum and the fixed points the algorithms converge to.

    `grad_star` holds the local gradients at the optimum, one row per node.
    The transient and dual fixed points depend on the step size and are
    derived on demand for `eta`.
    """

    x_star: np.ndarray
    grad_star: np.ndarray
    obj_star: float
    tol: float
    eta: float
    iterations: int = 0

    @property
    def n(self) -> int:
        return int(self.grad_star.shape[0])

    @property
    def X_star(self) -> np.ndarray:
        return np.tile(self.x_star, (self.n, 1))

    @property
    def mean_grad(self) -> np.ndarray:
        return self.grad_star.mean(axis=0)

    @property
    def z_star(self) -> np.ndarray:
        return self.x_star - self.eta * self.mean_grad

    @property
    def Z_star(self) -> np.ndarray:
        return np.tile(self.z_star, (self.n, 1))

    @property
    def D_star(self) -> np.ndarray:
        """Stationary dual of Z = X - eta G - eta D: Z* - X* = -eta (grad_star + D*)."""
        return self.mean_grad - self.grad_star

    def with_eta(self, eta: float) -> "ReferenceSolution":
        return replace(self, eta=float(eta))
