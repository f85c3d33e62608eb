from dataclasses import dataclass

import numpy as np

from proxlead.models.base import BaseModel


@dataclass(frozen=True, eq=False)
class CompressedBlock(BaseModel):
    """One quantized block: its infinity norm, per-entry sign bits and levels."""

    norm: float
    negative: np.ndarray
    levels: np.ndarray


@dataclass(frozen=True, eq=False)
class CompressedMessage(BaseModel):
    """Payload a node transmits for one p-vector.

    Identity messages carry the raw vector in `raw` and no blocks.
    """

    kind: str
    p: int
    bits: int
    block_size: int
    blocks: tuple[CompressedBlock, ...]
    total_bits: int
    raw: np.ndarray | None = None


@dataclass(frozen=True)
class CEstimate(BaseModel):
    c_hat: float
    bias: float
    skipped: int
    trials: int
