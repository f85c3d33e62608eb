"""
Custom exception classes for the simulator
"""

from enum import StrEnum
from typing import Any

from proxlead.core.codes import ErrorCode
from proxlead.schemas.base import ErrorSchema


class SimulationException(Exception):
    exit_code: int = 1

    def __init__(
        self,
        message: str,
        error_code: StrEnum,
        exit_code: int | None = None,
    ):
        super().__init__(message)
        self.message = message
        self.error_code = error_code
        if exit_code is not None:
            self.exit_code = exit_code

    def __reduce__(self) -> tuple:
        return (type(self), (self.message, self.error_code, self.exit_code))

    def to_dict(self) -> dict[str, Any]:
        return ErrorSchema(code=self.error_code, message=self.message).model_dump()


class ConfigException(SimulationException):
    exit_code = 3

    def __init__(self, message: str, error_code: StrEnum = ErrorCode.CONFIG_ERROR):
        super().__init__(message, error_code)

    def __reduce__(self) -> tuple:
        return (type(self), (self.message, self.error_code))


class DivergenceException(SimulationException):
    exit_code = 2

    def __init__(self, message: str, iteration: int):
        super().__init__(message, ErrorCode.DIVERGENCE)
        self.iteration = iteration

    def __reduce__(self) -> tuple:
        return (type(self), (self.message, self.iteration))
