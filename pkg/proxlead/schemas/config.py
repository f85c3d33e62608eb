import hashlib
from pathlib import Path
from typing import Any, Literal, Optional

import orjson
from pydantic import Field, ValidationError, model_validator

from proxlead.core.codes import ErrorCode
from proxlead.core.constants import DEFAULT_BLOCK_SIZE, DEFAULT_NEIGHBOR_WEIGHT
from proxlead.core.exceptions import ConfigException
from proxlead.schemas.base import FrozenSchema


class TopologySpec(FrozenSchema):
    kind: Literal["ring", "complete", "edges"] = "ring"
    n: int = 8
    neighbor_weight: float = DEFAULT_NEIGHBOR_WEIGHT
    edges: Optional[list[tuple[int, int]]] = None

    @model_validator(mode="after")
    def _edges_for_edge_graphs(self) -> "TopologySpec":
        if self.kind == "edges" and not self.edges:
            raise ValueError("topology.kind 'edges' requires a non-empty edge list")
        return self


class CompressorSpec(FrozenSchema):
    kind: Literal["identity", "quant_inf_norm"] = "quant_inf_norm"
    bits: int = 2
    block_size: int = DEFAULT_BLOCK_SIZE
    c_param: Optional[float] = Field(default=None, ge=0.0)

    @model_validator(mode="after")
    def _identity_is_exact(self) -> "CompressorSpec":
        if self.kind == "identity" and self.c_param not in (None, 0.0):
            raise ValueError("identity compressor has c_param = 0")
        return self


class ProblemSpec(FrozenSchema):
    kind: Literal["quadratic", "logistic"] = "quadratic"
    n: int = Field(default=8, ge=1)
    m: int = Field(default=15, ge=1)
    p: int = Field(default=20, ge=1)
    batch_size: int = Field(default=10, ge=1)
    l1: float = Field(default=0.0, ge=0.0)
    l2: float = Field(default=0.005, ge=0.0)
    heterogeneity: float = Field(default=1.0, ge=0.0)
    seed: int = 0


class OracleSpec(FrozenSchema):
    kind: Literal["full", "sgd", "lsvrg", "saga"] = "full"
    lsvrg_p: Optional[float] = None
    sampling: Optional[list[list[float]]] = None


class AlgorithmSpec(FrozenSchema):
    name: Literal["prox_lead", "lead", "dgd", "nids"] = "prox_lead"
    params: Literal["thm5", "cor6", "thm7", "thm8", "thm9", "experimental"] = "experimental"
    eta: Optional[float] = Field(default=None, gt=0.0)
    alpha: Optional[float] = None
    gamma: Optional[float] = None
    dual_step: float = Field(default=1.0, gt=0.0)
    check_invariants: bool = True


class ExperimentConfig(FrozenSchema):
    name: str = "experiment"
    topology: TopologySpec = TopologySpec()
    problem: ProblemSpec = ProblemSpec()
    compressor: CompressorSpec = CompressorSpec()
    oracle: OracleSpec = OracleSpec()
    algorithm: AlgorithmSpec = AlgorithmSpec()
    iterations: int = Field(default=1000, ge=0)
    replicas: int = Field(default=1, ge=1)
    seed: int = 0
    metrics_stride: int = Field(default=10, ge=1)
    record_wall_time: bool = False
    output: Optional[str] = None

    @model_validator(mode="after")
    def _problem_matches_network(self) -> "ExperimentConfig":
        if self.problem.n != self.topology.n:
            raise ValueError(
                f"problem.n={self.problem.n} differs from topology.n={self.topology.n}"
            )
        return self

    def canonical_json(self) -> bytes:
        """Sorted-key JSON of everything that determines the results."""
        return orjson.dumps(
            self.model_dump(mode="json", exclude={"output"}), option=orjson.OPT_SORT_KEYS
        )

    @property
    def config_hash(self) -> str:
        return hashlib.sha256(self.canonical_json()).hexdigest()[:12]

    @property
    def problem_hash(self) -> str:
        payload = orjson.dumps(self.problem.model_dump(mode="json"), option=orjson.OPT_SORT_KEYS)
        return hashlib.sha256(payload).hexdigest()[:12]

    def with_value(self, path: str, value: Any) -> "ExperimentConfig":
        """Copy with the dotted config key `path` set to `value`."""
        data = self.model_dump(mode="json")
        *parents, leaf = path.split(".")
        node = data
        for key in parents:
            if not isinstance(node.get(key), dict):
                raise ConfigException(f"Unknown sweep axis '{path}'", ErrorCode.INVALID_AXIS)
            node = node[key]
        if leaf not in node:
            raise ConfigException(f"Unknown sweep axis '{path}'", ErrorCode.INVALID_AXIS)
        node[leaf] = value
        return parse_config(data)


def parse_config(data: dict[str, Any]) -> ExperimentConfig:
    try:
        return ExperimentConfig.model_validate(data)
    except ValidationError as e:
        raise ConfigException(f"Invalid configuration: {e}") from e


def load_config(path: str | Path) -> ExperimentConfig:
    try:
        raw = Path(path).read_bytes()
    except OSError as e:
        raise ConfigException(f"Cannot read config {path}: {e}") from e
    try:
        data = orjson.loads(raw)
    except orjson.JSONDecodeError as e:
        raise ConfigException(f"Config {path} is not valid JSON: {e}") from e
    if not isinstance(data, dict):
        raise ConfigException(f"Config {path} must be a JSON object")
    return parse_config(data)
