from enum import StrEnum


class ErrorCode(StrEnum):
    # Common
    INVALID_PARAMETER = "INVALID_PARAMETER"
    DIMENSION_MISMATCH = "DIMENSION_MISMATCH"
    NON_FINITE_INPUT = "NON_FINITE_INPUT"
    INDEX_OUT_OF_RANGE = "INDEX_OUT_OF_RANGE"

    # Topology
    INVALID_TOPOLOGY = "INVALID_TOPOLOGY"
    INVALID_MIXING_WEIGHT = "INVALID_MIXING_WEIGHT"
    ASSUMPTION_VIOLATED = "ASSUMPTION_VIOLATED"

    # Compression
    INVALID_BITS = "INVALID_BITS"
    MALFORMED_MESSAGE = "MALFORMED_MESSAGE"

    # Problem
    NOT_STRONGLY_CONVEX = "NOT_STRONGLY_CONVEX"
    REFERENCE_NOT_CONVERGED = "REFERENCE_NOT_CONVERGED"

    # Oracle
    ORACLE_NOT_INITIALIZED = "ORACLE_NOT_INITIALIZED"

    # Algorithms
    DIVERGENCE = "DIVERGENCE"
    STATE_CORRUPTION = "STATE_CORRUPTION"
    PRECONDITION_VIOLATED = "PRECONDITION_VIOLATED"

    # Harness
    CONFIG_ERROR = "CONFIG_ERROR"
    INVALID_AXIS = "INVALID_AXIS"
    EMPTY_SWEEP = "EMPTY_SWEEP"
    MISMATCHED_PROBLEMS = "MISMATCHED_PROBLEMS"
