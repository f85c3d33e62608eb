from dataclasses import dataclass, field

import numpy as np

from proxlead.models.base import BaseModel


@dataclass(frozen=True, eq=False)
class Network(BaseModel):
    """Communication graph over nodes 0..n-1 with its mixing matrix.

    `edges` holds each undirected edge once as ``(i, j)`` with ``i < j``.
    """

    n: int
    edges: tuple[tuple[int, int], ...]
    W: np.ndarray
    kind: str = "edges"

    @property
    def degrees(self) -> np.ndarray:
        deg = np.zeros(self.n, dtype=np.int64)
        for i, j in self.edges:
            deg[i] += 1
            deg[j] += 1
        return deg

    @property
    def laplacian(self) -> np.ndarray:
        """I - W."""
        return np.eye(self.n) - self.W


@dataclass(frozen=True, eq=False)
class SpectralInfo(BaseModel):
    lam_max: float
    lam_min_nz: float
    kappa_g: float
    # full eigendecomposition of I - W, ascending
    eigenvalues: np.ndarray = field(repr=False)
    eigenvectors: np.ndarray = field(repr=False)

    def to_dict(self) -> dict:
        return {
            "lam_max": self.lam_max,
            "lam_min_nz": self.lam_min_nz,
            "kappa_g": self.kappa_g,
            "eigenvalues": self.eigenvalues,
        }
