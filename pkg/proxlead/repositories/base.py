from pathlib import Path

from proxlead.core.logger import LogCategory, get_logger

logger = get_logger(__name__, LogCategory.STORAGE)


class BaseRepository:
    """Files under one root directory, addressed by key."""

    suffix: str = ""

    def __init__(self, root: str | Path):
        self.root = Path(root)

    def path_for(self, key: str, suffix: str | None = None) -> Path:
        return self.root / f"{key}{self.suffix if suffix is None else suffix}"

    def exists(self, key: str) -> bool:
        return self.path_for(key).exists()

    def ensure_root(self) -> Path:
        self.root.mkdir(parents=True, exist_ok=True)
        return self.root

    def delete(self, key: str) -> bool:
        path = self.path_for(key)
        if path.exists():
            path.unlink()
            logger.debug("Deleted file", operation="delete", path=str(path))
            return True
        return False
