from .base import BaseRepository
from .metrics import MetricsRepository
from .reference import ReferenceRepository

__all__ = ["BaseRepository", "MetricsRepository", "ReferenceRepository"]
