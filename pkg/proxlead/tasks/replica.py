"""One replica of an experiment, runnable in a worker process."""

from dataclasses import dataclass
from typing import Optional

import orjson

from proxlead.core.logger import get_logger
from proxlead.core.telemetry import get_tracer
from proxlead.models.problem import ReferenceSolution
from proxlead.schemas.config import parse_config
from proxlead.schemas.metrics import MetricsRow
from proxlead.tasks.base import BaseTaskWithRunContext

logger = get_logger(__name__)
tracer = get_tracer(__name__)


@dataclass
class ReplicaTask(BaseTaskWithRunContext):
    """Rebuilds its own object graph from the canonical config bytes.

    The reference solution is solved once by the parent and passed in, so
    workers never race on the reference cache.
    """

    config_json: bytes
    replica_id: Optional[int]
    ref: ReferenceSolution
    run_id: Optional[str] = None

    @tracer.start_as_current_span("replica_task")
    def run(self) -> list[MetricsRow]:
        # harness imports this module
        from proxlead.services.harness import simulate

        config = parse_config(orjson.loads(self.config_json))
        logger.debug("Starting replica", operation="replica_task", replica=self.replica_id)
        return simulate(config, self.replica_id or 0, self.ref)
