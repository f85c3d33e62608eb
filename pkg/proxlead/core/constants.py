# proxlead-sim constants

FLOAT_BITS = 32
NORM_BITS = 32

DEFAULT_BLOCK_SIZE = 256
DEFAULT_NEIGHBOR_WEIGHT = 1.0 / 3.0

METRICS_FIELDS = (
    "k",
    "suboptimality",
    "consensus_err",
    "phi",
    "bits_cum",
    "grad_evals_cum",
    "wall_ns",
)

AGGREGATE_SUFFIXES = ("mean", "stderr")
