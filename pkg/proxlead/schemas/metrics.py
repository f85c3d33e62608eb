from pydantic import BaseModel, Field

from proxlead.core.constants import METRICS_FIELDS


class MetricsRow(BaseModel):
    k: int = Field(ge=0)
    suboptimality: float = Field(ge=0.0)
    consensus_err: float = Field(ge=0.0)
    phi: float
    bits_cum: int = Field(ge=0)
    grad_evals_cum: int = Field(ge=0)
    wall_ns: int = Field(default=0, ge=0)

    def as_record(self) -> list[str]:
        """CSV cells; floats use repr so output bytes are reproducible."""
        return [format_cell(getattr(self, name)) for name in METRICS_FIELDS]


def format_cell(value: object) -> str:
    if isinstance(value, float):
        return repr(value)
    return str(value)
