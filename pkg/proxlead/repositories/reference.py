from pathlib import Path
from typing import Optional

import numpy as np
import orjson

from proxlead.core.logger import LogCategory, get_logger
from proxlead.core.telemetry import get_tracer
from proxlead.models.problem import ReferenceSolution
from proxlead.repositories.base import BaseRepository

logger = get_logger(__name__, LogCategory.STORAGE)
tracer = get_tracer(__name__)


class ReferenceRepository(BaseRepository):
    """Reference solutions cached as .npz arrays plus a JSON sidecar.

    Keys are problem hashes; the fixed points that depend on eta are
    derived again after loading.
    """

    suffix = ".npz"

    def meta_path(self, key: str) -> Path:
        return self.path_for(key, ".json")

    @tracer.start_as_current_span("reference_get")
    def get(self, key: str, eta: float) -> Optional[ReferenceSolution]:
        path, meta_path = self.path_for(key), self.meta_path(key)
        if not (path.exists() and meta_path.exists()):
            return None
        try:
            meta = orjson.loads(meta_path.read_bytes())
            with np.load(path) as arrays:
                solution = ReferenceSolution(
                    x_star=arrays["x_star"].copy(),
                    grad_star=arrays["grad_star"].copy(),
                    obj_star=float(meta["obj_star"]),
                    tol=float(meta["tol"]),
                    eta=float(eta),
                    iterations=int(meta.get("iterations", 0)),
                )
        except (OSError, KeyError, ValueError, orjson.JSONDecodeError) as e:
            logger.warning(
                "Ignoring unreadable reference cache entry",
                operation="reference_get",
                key=key,
                error=str(e),
            )
            return None
        logger.debug("Loaded cached reference", operation="reference_get", key=key)
        return solution

    @tracer.start_as_current_span("reference_save")
    def save(self, key: str, solution: ReferenceSolution) -> Path:
        self.ensure_root()
        path = self.path_for(key)
        with path.open("wb") as fh:
            np.savez(fh, x_star=solution.x_star, grad_star=solution.grad_star)
        meta = {
            "obj_star": solution.obj_star,
            "tol": solution.tol,
            "iterations": solution.iterations,
            "p": int(solution.x_star.shape[0]),
            "n": solution.n,
        }
        self.meta_path(key).write_bytes(orjson.dumps(meta, option=orjson.OPT_SORT_KEYS))
        logger.info("Cached reference solution", operation="reference_save", key=key, path=str(path))
        return path
