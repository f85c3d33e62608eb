from pydantic import BaseModel, ConfigDict


class FrozenSchema(BaseModel):
    """Base for configuration sections: immutable and strict about unknown keys."""

    model_config = ConfigDict(frozen=True, extra="forbid")


class ErrorSchema(BaseModel):
    code: str | None = None
    message: str | None = None
