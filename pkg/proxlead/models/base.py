import dataclasses
from typing import Any, TypeVar

import numpy as np
import orjson

T = TypeVar("T", bound="BaseModel")


class BaseModel:
    """Mixin for dataclass domain models holding numpy arrays."""

    def to_dict(self) -> dict[str, Any]:
        result: dict[str, Any] = {}
        for field in dataclasses.fields(self):  # type: ignore[arg-type]
            value = getattr(self, field.name)
            if hasattr(value, "to_dict"):
                result[field.name] = value.to_dict()
            elif isinstance(value, (list, tuple)) and value and hasattr(value[0], "to_dict"):
                result[field.name] = [item.to_dict() for item in value]
            else:
                result[field.name] = value
        return result

    def to_json(self) -> str:
        return orjson.dumps(
            self.to_dict(),
            option=orjson.OPT_SERIALIZE_NUMPY | orjson.OPT_SORT_KEYS,
            default=_default,
        ).decode("utf-8")

    @classmethod
    def from_dict(cls: type[T], data: dict[str, Any]) -> T:
        names = {f.name for f in dataclasses.fields(cls)}  # type: ignore[arg-type]
        return cls(**{k: v for k, v in data.items() if k in names})

    @classmethod
    def from_json(cls: type[T], data: str) -> T:
        return cls.from_dict(orjson.loads(data))


def _default(value: Any) -> Any:
    if isinstance(value, np.generic):
        return value.item()
    if isinstance(value, (set, frozenset)):
        return sorted(value)
    raise TypeError(f"Cannot serialize {type(value).__name__}")
