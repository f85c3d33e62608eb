"""Mixing matrices over undirected communication graphs."""

from typing import Iterable

import networkx as nx
import numpy as np

from proxlead.core.codes import ErrorCode
from proxlead.core.exceptions import SimulationException
from proxlead.core.logger import LogCategory, get_logger
from proxlead.core.settings import settings
from proxlead.core.telemetry import get_tracer
from proxlead.models.network import Network, SpectralInfo

logger = get_logger(__name__, LogCategory.TOPOLOGY)
tracer = get_tracer(__name__)


@tracer.start_as_current_span("build_ring")
def build_ring(n: int, neighbor_weight: float = 1.0 / 3.0) -> Network:
    """Ring where every node averages itself with its two 1-hop neighbors.

    Args:
        n: number of nodes, at least 3
        neighbor_weight: weight on each neighbor, in (0, 1/2); the self
            weight is ``1 - 2 * neighbor_weight``

    Returns:
        The ring network
    """
    if n < 3:
        raise SimulationException(
            f"A ring needs at least 3 nodes, got {n}", ErrorCode.INVALID_TOPOLOGY
        )
    if not 0.0 < neighbor_weight < 0.5:
        raise SimulationException(
            f"Ring neighbor weight must lie in (0, 1/2), got {neighbor_weight}",
            ErrorCode.INVALID_MIXING_WEIGHT,
        )

    W = np.zeros((n, n))
    edges = []
    for i in range(n):
        W[i, (i + 1) % n] = neighbor_weight
        W[i, (i - 1) % n] = neighbor_weight
        W[i, i] = 1.0 - 2.0 * neighbor_weight
        j = (i + 1) % n
        edges.append((min(i, j), max(i, j)))

    logger.debug("Built ring", operation="build_ring", n=n, neighbor_weight=neighbor_weight)
    return Network(n=n, edges=tuple(sorted(set(edges))), W=W, kind="ring")


@tracer.start_as_current_span("build_complete")
def build_complete(n: int) -> Network:
    if n < 2:
        raise SimulationException(
            f"A complete graph needs at least 2 nodes, got {n}", ErrorCode.INVALID_TOPOLOGY
        )
    edges = tuple((i, j) for i in range(n) for j in range(i + 1, n))
    return Network(n=n, edges=edges, W=np.full((n, n), 1.0 / n), kind="complete")


@tracer.start_as_current_span("build_from_edges")
def build_from_edges(n: int, edges: Iterable[tuple[int, int]]) -> Network:
    """Metropolis-Hastings weights ``1 / (1 + max(deg_i, deg_j))`` on a given graph."""
    graph = nx.Graph()
    graph.add_nodes_from(range(n))
    for i, j in edges:
        if not (0 <= i < n and 0 <= j < n) or i == j:
            raise SimulationException(
                f"Edge ({i}, {j}) is not a valid edge over {n} nodes",
                ErrorCode.INVALID_TOPOLOGY,
            )
        graph.add_edge(int(i), int(j))

    if n < 2 or not nx.is_connected(graph):
        raise SimulationException(
            f"Graph over {n} nodes is not connected", ErrorCode.INVALID_TOPOLOGY
        )

    deg = dict(graph.degree())
    W = np.zeros((n, n))
    for i, j in graph.edges():
        W[i, j] = W[j, i] = 1.0 / (1.0 + max(deg[i], deg[j]))
    np.fill_diagonal(W, 1.0 - W.sum(axis=1))

    canonical = tuple(sorted((min(i, j), max(i, j)) for i, j in graph.edges()))
    logger.debug(
        "Built Metropolis network",
        operation="build_from_edges",
        n=n,
        edge_count=len(canonical),
    )
    return Network(n=n, edges=canonical, W=W, kind="edges")


def spectrum(net: Network) -> tuple[np.ndarray, np.ndarray]:
    """Ascending eigenvalues and orthonormal eigenvectors of I - W."""
    return np.linalg.eigh(net.laplacian)


@tracer.start_as_current_span("validate_network")
def validate(net: Network, tol: float | None = None) -> SpectralInfo:
    """Check that W is a valid mixing matrix and summarize the spectrum of I - W.

    Raises:
        SimulationException: ASSUMPTION_VIOLATED when W is asymmetric, not
            row-stochastic, has weight outside the graph, a spectrum outside
            (-1, 1], or describes a disconnected graph
    """
    tol = settings.ASSUMPTION_TOL if tol is None else tol
    W = net.W
    if W.shape != (net.n, net.n):
        raise SimulationException(
            f"W has shape {W.shape}, expected ({net.n}, {net.n})",
            ErrorCode.DIMENSION_MISMATCH,
        )
    if not np.all(np.isfinite(W)):
        raise SimulationException("W has non-finite entries", ErrorCode.NON_FINITE_INPUT)

    row_err = float(np.abs(W.sum(axis=1) - 1.0).max())
    if row_err > tol:
        raise _violation(f"W row sums differ from 1 (max error {row_err:.3e})")

    asym = float(np.abs(W - W.T).max())
    if asym > tol:
        raise _violation(f"W is not symmetric (max |W - W'| = {asym:.3e})")

    allowed = np.eye(net.n, dtype=bool)
    for i, j in net.edges:
        allowed[i, j] = allowed[j, i] = True
    outside = float(np.abs(np.where(allowed, 0.0, W)).max())
    if outside > tol:
        raise _violation(f"W has weight {outside:.3e} between non-adjacent nodes")

    eigenvalues, eigenvectors = spectrum(net)
    if eigenvalues[0] < -tol or eigenvalues[-1] >= 2.0 - tol:
        raise _violation(
            "Spectrum of W leaves (-1, 1]: eigenvalues of I - W span "
            f"[{eigenvalues[0]:.3e}, {eigenvalues[-1]:.6f}]"
        )

    zero = np.abs(eigenvalues) < settings.EIGEN_ZERO_TOL
    if int(zero.sum()) != 1:
        raise _violation(
            f"Eigenvalue 1 of W has multiplicity {int(zero.sum())}; graph is disconnected"
        )

    lam_max = float(eigenvalues[-1])
    lam_min_nz = float(eigenvalues[~zero].min())
    info = SpectralInfo(
        lam_max=lam_max,
        lam_min_nz=lam_min_nz,
        kappa_g=lam_max / lam_min_nz,
        eigenvalues=eigenvalues,
        eigenvectors=eigenvectors,
    )
    logger.info(
        "Validated network",
        operation="validate",
        n=net.n,
        kind=net.kind,
        lam_max=info.lam_max,
        lam_min_nz=info.lam_min_nz,
        kappa_g=info.kappa_g,
    )
    return info


def mix(net: Network, M: np.ndarray) -> np.ndarray:
    """One gossip round: W @ M."""
    if M.ndim != 2 or M.shape[0] != net.n:
        raise SimulationException(
            f"Cannot mix a matrix of shape {M.shape} over {net.n} nodes",
            ErrorCode.DIMENSION_MISMATCH,
        )
    return net.W @ M


def laplacian_pinv(spectral: SpectralInfo) -> np.ndarray:
    """(I - W)^+ assembled from the nonzero part of the spectrum."""
    keep = np.abs(spectral.eigenvalues) >= settings.EIGEN_ZERO_TOL
    U = spectral.eigenvectors[:, keep]
    return (U / spectral.eigenvalues[keep]) @ U.T


def pinv_norm_sq(spectral: SpectralInfo, M: np.ndarray) -> float:
    """||M||^2 in the (I - W)^+ metric, using only the nonzero eigenvalues."""
    coeffs = spectral.eigenvectors.T @ M
    keep = np.abs(spectral.eigenvalues) >= settings.EIGEN_ZERO_TOL
    return float(np.sum(coeffs[keep] ** 2 / spectral.eigenvalues[keep, None]))


def _violation(message: str) -> SimulationException:
    logger.warning(message, operation="validate")
    return SimulationException(message, ErrorCode.ASSUMPTION_VIOLATED)
