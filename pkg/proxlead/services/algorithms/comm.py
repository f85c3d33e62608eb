"""Compressed communication with difference compression against a local state H."""

from dataclasses import dataclass

import numpy as np

from proxlead.core.codes import ErrorCode
from proxlead.core.exceptions import SimulationException
from proxlead.models.network import Network
from proxlead.schemas.config import CompressorSpec
from proxlead.services.compression import bit_count, compress_rows


@dataclass(frozen=True, eq=False)
class CommResult:
    Z_hat: np.ndarray
    Z_hat_w: np.ndarray
    H: np.ndarray
    H_w: np.ndarray
    bits: int


def comm(
    Z: np.ndarray,
    H: np.ndarray,
    H_w: np.ndarray,
    alpha: float,
    compressor: CompressorSpec,
    net: Network,
    rng: np.random.Generator,
) -> CommResult:
    """One round of compressed gossip.

    Every node compresses Z_i - H_i, sends it to its neighbors, and both
    sides move their copy of H towards the reconstructed Z_hat. Only the
    compressed difference is mixed, so W @ H never has to be recomputed.
    """
    if not Z.shape == H.shape == H_w.shape or Z.ndim != 2 or Z.shape[0] != net.n:
        raise SimulationException(
            f"COMM got Z {Z.shape}, H {H.shape}, H_w {H_w.shape} over {net.n} nodes",
            ErrorCode.DIMENSION_MISMATCH,
        )
    if not 0.0 < alpha <= 1.0:
        raise SimulationException(
            f"alpha must lie in (0, 1], got {alpha}", ErrorCode.INVALID_PARAMETER
        )

    Q = compress_rows(compressor, Z - H, rng)
    Z_hat = H + Q
    Z_hat_w = H_w + net.W @ Q
    return CommResult(
        Z_hat=Z_hat,
        Z_hat_w=Z_hat_w,
        H=(1.0 - alpha) * H + alpha * Z_hat,
        H_w=(1.0 - alpha) * H_w + alpha * Z_hat_w,
        bits=net.n * bit_count(compressor, Z.shape[1]),
    )
