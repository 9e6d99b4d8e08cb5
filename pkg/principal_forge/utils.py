from __future__ import annotations

import sys
import logging
import warnings
from typing import TypeVar
from functools import wraps
from collections.abc import Callable, Iterable

import click
from loguru import logger

if sys.version_info >= (3, 10):
    from typing import ParamSpec
else:
    from typing_extensions import ParamSpec

__all__ = (
    "LOG_FORMAT",
    "LoguruHandler",
    "init_logger",
    "return_progressbar",
)

_T = TypeVar("_T")
_P = ParamSpec("_P")

_log_level: str = "INFO"

LOG_FORMAT = (
    "<g>{time:HH:mm:ss}</g> [<lvl>{level}</lvl>] "
    "<c><u>{name}</u></c> | {message}"
)


class LoguruHandler(logging.Handler):
    def emit(self, record: logging.LogRecord):
        try:
            level = logger.level(record.levelname).name
            if record.levelno <= logging.INFO:
                level = {"DEBUG": "TRACE", "INFO": "DEBUG"}.get(level, level)
        except ValueError:
            level = record.levelno

        # NOTE: py.warnings 的记录经过 warnings 模块转发, 需要一并跳过
        frame, depth = logging.currentframe(), 2
        while frame and frame.f_code.co_filename in (
            logging.__file__,
            warnings.__file__,
        ):
            frame = frame.f_back
            depth += 1

        logger.opt(depth=depth, exception=record.exc_info).log(
            level, record.getMessage()
        )


def init_logger(level: str = "INFO") -> None:
    """重置 loguru 的输出.

    参数:
        level: 日志等级, 如 "DEBUG", "INFO", "WARNING"
    """

    global _log_level

    _log_level = level.upper()
    logger.remove()
    logger.add(sys.stderr, level=_log_level, format=LOG_FORMAT, diagnose=False)


def return_progressbar(func: Callable[_P, Iterable[_T]]) -> Callable[_P, Iterable[_T]]:
    @wraps(func)
    def wrapper(*args: _P.args, **kwargs: _P.kwargs) -> Iterable[_T]:
        if logger.level(_log_level).no <= logger.level("INFO").no:
            yield from func(*args, **kwargs)
            return

        with click.progressbar(
            func(*args, **kwargs), label="扫描 θ₀ 中", item_show_func=str, file=sys.stderr
        ) as bar:
            yield from bar

    return wrapper
