"""Unbiased stochastic compressors and their bit accounting.

The quantizer works blockwise: each block of at most B entries is sent as
its infinity norm, one sign bit per entry and an integer level in
[0, 2^(b-1)] per entry, with stochastic rounding so that E[y] = x.
"""

import math
from typing import Callable

import numpy as np

from proxlead.core.codes import ErrorCode
from proxlead.core.constants import FLOAT_BITS, NORM_BITS
from proxlead.core.exceptions import SimulationException
from proxlead.core.logger import LogCategory, get_logger
from proxlead.core.telemetry import get_tracer
from proxlead.models.compression import CEstimate, CompressedBlock, CompressedMessage
from proxlead.schemas.config import CompressorSpec

logger = get_logger(__name__, LogCategory.COMPRESSION)
tracer = get_tracer(__name__)

Sampler = Callable[[np.random.Generator], np.ndarray]


def check_spec(spec: CompressorSpec) -> None:
    if spec.kind == "quant_inf_norm":
        if spec.bits < 1:
            raise SimulationException(
                f"Quantizer needs at least 1 bit, got {spec.bits}", ErrorCode.INVALID_BITS
            )
        if spec.block_size < 1:
            raise SimulationException(
                f"Block size must be positive, got {spec.block_size}",
                ErrorCode.INVALID_PARAMETER,
            )


def bit_count(spec: CompressorSpec, p: int) -> int:
    """Bits one node transmits for one compressed p-vector."""
    if spec.kind == "identity":
        return FLOAT_BITS * p
    return math.ceil(p / spec.block_size) * NORM_BITS + p * spec.bits


def analytic_c(spec: CompressorSpec, p: int) -> float:
    """Worst-case noise-to-signal ratio B_eff / 4^b of the quantizer."""
    if spec.kind == "identity":
        return 0.0
    return min(spec.block_size, p) / 4.0**spec.bits


def resolve_c(spec: CompressorSpec, p: int) -> float:
    """C used by the parameter formulas: the override if given, else the analytic bound."""
    if spec.c_param is not None:
        return float(spec.c_param)
    return analytic_c(spec, p)


def _encode_rows(
    spec: CompressorSpec, X: np.ndarray, u: np.ndarray
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Quantize each row of X with uniforms u.

    Returns:
        norms of shape (rows, blocks), levels and negative flags of shape (rows, p)
    """
    rows, p = X.shape
    B = spec.block_size
    blocks = math.ceil(p / B)
    top = 2 ** (spec.bits - 1)

    magnitude = np.abs(X)
    padded = np.zeros((rows, blocks * B))
    padded[:, :p] = magnitude
    norms = padded.reshape(rows, blocks, B).max(axis=2)

    per_entry = np.repeat(norms, B, axis=1)[:, :p]
    safe = np.where(per_entry > 0.0, per_entry, 1.0)
    levels = np.floor(top * magnitude / safe + u)
    levels = np.clip(levels, 0, top)
    levels[per_entry == 0.0] = 0
    return norms, levels.astype(np.int64), X < 0.0


def _decode_rows(
    spec: CompressorSpec, norms: np.ndarray, levels: np.ndarray, negative: np.ndarray
) -> np.ndarray:
    p = levels.shape[1]
    scale = np.repeat(norms, spec.block_size, axis=1)[:, :p] * 2.0 ** -(spec.bits - 1)
    return np.where(negative, -1.0, 1.0) * scale * levels


def _check_finite(x: np.ndarray) -> None:
    if not np.all(np.isfinite(x)):
        raise SimulationException(
            "Cannot compress a vector with non-finite entries", ErrorCode.NON_FINITE_INPUT
        )


def compress_rows(
    spec: CompressorSpec, X: np.ndarray, rng: np.random.Generator
) -> np.ndarray:
    """Compress every row of X independently; returns the decoded rows.

    Consumes exactly one uniform per entry of X, row-major, from `rng`
    (none for the identity).
    """
    check_spec(spec)
    _check_finite(X)
    if spec.kind == "identity":
        return X.copy()
    u = rng.random(X.shape)
    norms, levels, negative = _encode_rows(spec, X, u)
    return _decode_rows(spec, norms, levels, negative)


def compress(
    spec: CompressorSpec, x: np.ndarray, rng: np.random.Generator
) -> tuple[np.ndarray, CompressedMessage]:
    """Compress one p-vector.

    Returns:
        The decoded vector y and the message it decodes from
    """
    check_spec(spec)
    x = np.asarray(x, dtype=float)
    _check_finite(x)
    p = x.shape[0]
    if spec.kind == "identity":
        message = CompressedMessage(
            kind=spec.kind,
            p=p,
            bits=FLOAT_BITS,
            block_size=p,
            blocks=(),
            total_bits=bit_count(spec, p),
            raw=x.copy(),
        )
        return x.copy(), message

    u = rng.random((1, p))
    norms, levels, negative = _encode_rows(spec, x[None, :], u)
    B = spec.block_size
    blocks = tuple(
        CompressedBlock(
            norm=float(norms[0, k]),
            negative=negative[0, k * B : (k + 1) * B].copy(),
            levels=levels[0, k * B : (k + 1) * B].copy(),
        )
        for k in range(norms.shape[1])
    )
    message = CompressedMessage(
        kind=spec.kind,
        p=p,
        bits=spec.bits,
        block_size=B,
        blocks=blocks,
        total_bits=bit_count(spec, p),
    )
    return _decode_rows(spec, norms, levels, negative)[0], message


def decode(msg: CompressedMessage) -> np.ndarray:
    """Receiver side: rebuild y from (norm, signs, levels) block by block."""
    if msg.kind == "identity":
        if msg.raw is None or msg.raw.shape != (msg.p,):
            raise SimulationException(
                "Identity message carries no payload", ErrorCode.MALFORMED_MESSAGE
            )
        return msg.raw.copy()

    top = 2 ** (msg.bits - 1)
    spec = CompressorSpec(kind="quant_inf_norm", bits=msg.bits, block_size=msg.block_size)
    if sum(block.levels.shape[0] for block in msg.blocks) != msg.p:
        raise SimulationException(
            f"Blocks cover a different dimension than p={msg.p}", ErrorCode.MALFORMED_MESSAGE
        )

    out = np.empty(msg.p)
    start = 0
    for block in msg.blocks:
        if block.levels.size and (block.levels.max() > top or block.levels.min() < 0):
            raise SimulationException(
                f"Level outside [0, {top}] in message", ErrorCode.MALFORMED_MESSAGE
            )
        if block.norm < 0.0:
            raise SimulationException("Negative block norm", ErrorCode.MALFORMED_MESSAGE)
        size = block.levels.shape[0]
        out[start : start + size] = _decode_rows(
            spec,
            np.array([[block.norm]]),
            block.levels[None, :],
            block.negative[None, :],
        )[0]
        start += size
    return out


def sample_many(
    spec: CompressorSpec, x: np.ndarray, draws: int, rng: np.random.Generator
) -> np.ndarray:
    """`draws` independent compressions of the same vector, shape (draws, p)."""
    x = np.asarray(x, dtype=float)
    return compress_rows(spec, np.broadcast_to(x, (draws, x.shape[0])).copy(), rng)


@tracer.start_as_current_span("estimate_c")
def estimate_c(
    spec: CompressorSpec,
    sampler: Sampler,
    trials: int,
    rng: np.random.Generator,
    repeats: int = 200,
) -> CEstimate:
    """Empirical noise-to-signal ratio and bias over `trials` sampled vectors.

    For each sampled x the ratio E||Q(x) - x||^2 / ||x||^2 is estimated from
    `repeats` compressions; C_hat is the largest such ratio and the reported
    bias the largest ||mean Q(x) - x||. Zero vectors are skipped and counted.
    """
    check_spec(spec)
    if trials < 1 or repeats < 2:
        raise SimulationException(
            f"estimate_c needs trials >= 1 and repeats >= 2, got {trials}, {repeats}",
            ErrorCode.INVALID_PARAMETER,
        )
    if trials < 1000:
        logger.warning(
            "Few trials; C_hat may underestimate the worst case",
            operation="estimate_c",
            trials=trials,
        )
    c_hat = 0.0
    bias = 0.0
    skipped = 0
    p = 0
    for _ in range(trials):
        x = np.asarray(sampler(rng), dtype=float)
        p = x.shape[0]
        norm_sq = float(x @ x)
        if norm_sq == 0.0:
            skipped += 1
            continue
        Y = sample_many(spec, x, repeats, rng)
        errors = Y - x
        c_hat = max(c_hat, float(np.mean(np.sum(errors**2, axis=1))) / norm_sq)
        bias = max(bias, float(np.linalg.norm(errors.mean(axis=0))))

    if skipped:
        logger.warning(
            "Skipped zero vectors while estimating C",
            operation="estimate_c",
            skipped=skipped,
        )
    logger.info(
        "Estimated noise-to-signal ratio",
        operation="estimate_c",
        kind=spec.kind,
        bits=spec.bits,
        c_hat=c_hat,
        bias=bias,
        analytic=analytic_c(spec, p) if p else None,
    )
    return CEstimate(c_hat=c_hat, bias=bias, skipped=skipped, trials=trials)
