from __future__ import annotations

from typing import Any

from click import ClickException

__all__ = (
    "ForgeError",
    "CurveError",
    "TooFewSamples",
    "NotClosed",
    "CurvatureVanishes",
    "UnknownFamily",
    "InvalidParams",
    "NoSignChange",
    "NotQuantized",
    "CircleObstruction",
    "UmbilicOnCycle",
    "IdenticallyZero",
    "Mismatch",
    "NonHyperbolic",
    "NumericalError",
    "OutOfStrip",
    "DegenerateMetric",
    "SeamMismatch",
    "EpsTooLarge",
    "BranchAmbiguity",
    "LeftStrip",
)


class ForgeError(ClickException):
    """所有错误的基类.

    `exit_code` 即命令行的退出码, `details` 会原样写入 JSON 报告.
    """

    def __init__(self, message: str, **details: Any) -> None:
        super().__init__(message)
        self.details = details

    def to_dict(self) -> dict[str, Any]:
        return {
            "type": type(self).__name__,
            "message": self.message,
            "exit_code": self.exit_code,
            "details": self.details,
        }


class CurveError(ForgeError, ValueError):
    exit_code = 3


class TooFewSamples(CurveError):
    pass


class NotClosed(CurveError):
    pass


class CurvatureVanishes(CurveError):
    pass


class UnknownFamily(CurveError):
    pass


class InvalidParams(CurveError):
    pass


class NoSignChange(CurveError):
    pass


class NotQuantized(ForgeError, ValueError):
    exit_code = 4


class CircleObstruction(ForgeError):
    exit_code = 5


class UmbilicOnCycle(ForgeError, ArithmeticError):
    exit_code = 6


class IdenticallyZero(UmbilicOnCycle):
    pass


class Mismatch(ForgeError):
    exit_code = 7


class NonHyperbolic(ForgeError):
    exit_code = 8


class NumericalError(ForgeError, ArithmeticError):
    exit_code = 9


class OutOfStrip(NumericalError, ValueError):
    pass


class DegenerateMetric(NumericalError):
    pass


class SeamMismatch(NumericalError):
    pass


class EpsTooLarge(NumericalError):
    pass


class BranchAmbiguity(NumericalError):
    pass


class LeftStrip(NumericalError):
    pass
