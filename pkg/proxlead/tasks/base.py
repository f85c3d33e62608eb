import gc
from typing import Any, Optional

from proxlead.core.logger import log_context


class BaseTaskWithRunContext:
    """Worker unit that runs inside the run/replica logging context."""

    run_id: Optional[str] = None
    replica_id: Optional[int] = None

    def run(self, *args: Any, **kwargs: Any) -> Any:
        raise NotImplementedError

    def __call__(self, *args: Any, **kwargs: Any) -> Any:
        try:
            with log_context(self.run_id, self.replica_id):
                result = self.run(*args, **kwargs)
                gc.collect()
                return result
        except Exception:
            gc.collect()
            raise
