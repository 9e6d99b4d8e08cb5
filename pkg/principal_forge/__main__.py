from __future__ import annotations

import sys
import logging
from pathlib import Path
from typing import TypeVar
from functools import wraps
from argparse import Namespace
from collections.abc import Callable

import click

from . import pipeline
from .utils import init_logger
from .config import load_config
from .pipeline import ForgeContext

if sys.version_info >= (3, 10):
    from typing import ParamSpec, Concatenate
else:
    from typing_extensions import ParamSpec, Concatenate

_P = ParamSpec("_P")
_R = TypeVar("_R")


@click.group()
@click.option(
    "--log-level",
    envvar="FORGE_LOG_LEVEL",
    default="INFO",
    type=click.Choice(
        ["TRACE", "DEBUG", "INFO", "SUCCESS", "WARNING", "ERROR"], case_sensitive=False
    ),
    help="日志等级; 高于 INFO 时扫描会显示进度条",
)
@click.option(
    "-o",
    "--output-dir",
    envvar="FORGE_OUTPUT_DIR",
    type=click.Path(file_okay=False, writable=True, path_type=Path),
    help="输出目录; 默认为 FORGE_OUTPUT_DIR 环境变量的值, 或者配置文件中的 outputs.directory",
)
@click.option("-q", "--quiet", is_flag=True, help="不要输出进度到标准输出")
@click.pass_context
def forge(ctx: click.Context, log_level: str, **kwargs) -> None:
    ctx.show_default = True
    init_logger(log_level)
    ctx.obj = Namespace(**kwargs)


def with_context(
    f: Callable[Concatenate[ForgeContext, _P], _R]
) -> Callable[_P, _R]:
    @wraps(f)
    @click.pass_context
    def wrapper(ctx: click.Context, *args: _P.args, **kwargs: _P.kwargs) -> _R:
        overrides = {}
        for key in ("theta0", "workers", "oracle"):
            value = kwargs.pop(key, None)
            if value is not None:
                overrides[key] = value

        config = load_config(kwargs.pop("config"), **overrides)  # type: ignore
        forge_ctx = ForgeContext(config, ctx.obj.output_dir, quiet=ctx.obj.quiet)
        ctx.call_on_close(forge_ctx.close)

        return f(forge_ctx, *args, **kwargs)

    return wrapper


config_option = click.option(
    "-c",
    "--config",
    required=True,
    type=click.Path(exists=True, dir_okay=False, path_type=Path),
    help="JSON 配置文件",
)
theta0_option = click.option(
    "--theta0", type=float, default=None, help="初始角 θ₀, 覆盖配置文件中的值"
)


@forge.command()
@config_option
@theta0_option
@click.option(
    "--oracle/--no-oracle",
    default=None,
    help="是否用回归映射验证结果, 覆盖配置文件中的值",
)
@with_context
def run(*args, **kwargs) -> None:
    """完整流程: 判定主曲率环的双曲性并输出全部文件."""

    pipeline.run(*args, **kwargs)


@forge.command()
@config_option
@theta0_option
@click.option("-j", "--workers", type=click.IntRange(min=1), help="并行线程数")
@with_context
def sweep(*args, **kwargs) -> None:
    """在 [0, 2π) 上扫描 θ₀, 输出 Λ(θ₀) 的 CSV."""

    pipeline.sweep(*args, **kwargs)


@forge.command()
@config_option
@theta0_option
@with_context
def mesh(*args, **kwargs) -> None:
    """用默认 profile 构造曲面芽, 输出 OBJ 网格."""

    pipeline.mesh(*args, **kwargs)


def main(*args, **kwargs) -> None:
    logging.captureWarnings(True)
    forge(*args, **kwargs)


if __name__ == "__main__":
    main()
