from __future__ import annotations

import sys
from pathlib import Path
from dataclasses import replace
from typing import Any, TextIO
from contextlib import ExitStack, contextmanager
from collections.abc import Generator

import click
from loguru import logger

from .germ import (
    SurfaceGerm,
    GermProfiles,
    build_germ,
    build_mesh,
    random_profiles,
    zero_a_profiles,
    default_profiles,
)
from .utils import LOG_FORMAT
from .theta import ThetaField, solve_theta
from .config import SCHEMA_VERSION, RunConfig, SweepSpec
from .exception import (
    Mismatch,
    ForgeError,
    NonHyperbolic,
    UmbilicOnCycle,
    CircleObstruction,
)
from .oracle import cross_validate, integrate_principal_lines
from .curve import (
    FrenetCurve,
    total_torsion,
    ingest_samples,
    ingest_analytic,
    frenet_residual,
    calibrate_total_torsion,
)
from .hyperbolicity import (
    Verdict,
    SweepRow,
    HyperbolicityReport,
    lambda_sweep,
    assess_profiles,
    certify_hyperbolic,
)
from .artifacts import (
    write_obj,
    write_json,
    read_samples,
    germ_descriptor,
    write_sweep_csv,
    write_theta_csv,
    write_trace_csv,
)

if sys.version_info >= (3, 11):
    from typing import Self
else:
    from typing_extensions import Self

__all__ = (
    "ForgeContext",
    "load_curve",
    "emit_sweep",
    "run",
    "sweep",
    "mesh",
)


class ForgeContext:
    """一次命令执行的上下文: 配置, 输出目录, 以及最终写出的 JSON 报告."""

    _exit_stack: ExitStack

    def __init__(
        self,
        config: RunConfig,
        output_dir: Path | None = None,
        stdout: TextIO | None = None,
        quiet: bool = False,
    ) -> None:
        self._exit_stack = ExitStack()
        self.config = config
        self.output_dir = output_dir or config.outputs.directory
        self.stdout = stdout
        self.quiet = quiet
        self.report: dict[str, Any] = {
            "schema_version": SCHEMA_VERSION,
            "command": None,
            "config": config.model_dump(mode="json"),
            "artifacts": {},
        }

    def __enter__(self: Self) -> Self:
        return self

    def __exit__(self, *_) -> None:
        self.close()

    def close(self) -> None:
        self._exit_stack.close()

    def print_stdout(self, text: str, *arg, **kwargs) -> None:
        if not self.quiet:
            click.secho(text % arg if arg else text, self.stdout, **kwargs)

    @contextmanager
    def status(self, status_msg: str) -> Generator[None, Any, None]:
        self.print_stdout(f"{status_msg} ...", nl=False)

        try:
            yield
        except:
            self.print_stdout(" 失败", fg="red")
            raise
        else:
            self.print_stdout(" 成功", fg="green")

    def output_path(self, path: Path | None, *parts: str) -> Path | None:
        """相对路径以输出目录为基准; `path` 为空表示不输出."""

        if path is None:
            return None
        path = path.joinpath(*parts)
        return path if path.is_absolute() else self.output_dir / path

    def csv_path(self, name: str) -> Path | None:
        return self.output_path(self.config.outputs.csv_dir, name)

    def record_artifact(self, kind: str, path: Path) -> None:
        self.report["artifacts"][kind] = path.as_posix()

    @contextmanager
    def reporting(self, command: str) -> Generator[None, Any, None]:
        """无论成功与否都写出报告, 出错时把错误记入报告后继续抛出."""

        self.report["command"] = command
        log_path = self.output_path(self.config.outputs.log)
        if log_path is not None:
            log_path.parent.mkdir(parents=True, exist_ok=True)
            sink = logger.add(log_path, level="DEBUG", format=LOG_FORMAT, mode="w")
            self._exit_stack.callback(logger.remove, sink)

        error: dict[str, Any] | None = None
        try:
            yield
        except ForgeError as e:
            error = e.to_dict()
            raise
        except click.ClickException as e:
            error = {
                "type": type(e).__name__,
                "message": e.message,
                "exit_code": e.exit_code,
                "details": {},
            }
            raise
        except Exception as e:
            error = {
                "type": type(e).__name__,
                "message": str(e),
                "exit_code": 1,
                "details": {},
            }
            raise
        finally:
            self.report["error"] = error
            self.report["exit_code"] = error["exit_code"] if error else 0
            path = self.output_path(self.config.outputs.report)
            assert path is not None
            write_json(path, self.report)
            if error:
                logger.error(f"{error['type']}: {error['message']}")


def load_curve(ctx: ForgeContext) -> FrenetCurve:
    """按配置读取采样点或构造解析曲线, 需要时先校准参数.

    参数:
        ctx: `ForgeContext` 对象
    """

    source = ctx.config.curve

    with ctx.status("读取曲线"):
        if source.path is not None:
            points, closed, tol = read_samples(source.path)
            resolution = (
                source.resolution if "resolution" in source.model_fields_set else None
            )
            curve = ingest_samples(points, closed, tol, resolution)
        else:
            assert source.family is not None
            params = dict(source.params)
            if source.calibrate is not None:
                spec = source.calibrate
                params = calibrate_total_torsion(
                    source.family,
                    params,
                    (spec.param, spec.low, spec.high),
                    spec.target_m,
                    source.resolution,
                )
            curve = ingest_analytic(source.family, params, source.resolution)

    summary = total_torsion(curve)
    ctx.report["curve"] = {
        "source": curve.source,
        "length": curve.length,
        "resolution": curve.resolution,
        "total_torsion": summary.total,
        "winding": summary.m,
        "quantization_residual": summary.residual,
        "frenet_residual": frenet_residual(curve),
        "arc_length_residual": curve.arc_length_residual(),
    }
    logger.info(
        f"曲线长度 {curve.length:.12g}, 总挠率 {summary.total:.12g} (m = {summary.m})"
    )
    return curve


def _solve_theta(ctx: ForgeContext, curve: FrenetCurve) -> ThetaField:
    with ctx.status("检查总挠率并求解 θ"):
        theta = solve_theta(
            curve, ctx.config.theta0, ctx.config.tolerances.quantization
        )

    path = ctx.csv_path("theta.csv")
    if path is not None:
        ctx.record_artifact("theta_csv", write_theta_csv(path, curve, theta))
    return theta


def emit_sweep(ctx: ForgeContext, curve: FrenetCurve) -> list[SweepRow]:
    """在 [0, 2π) 上等距扫描 θ₀, 输出 (θ₀, Λ, Λ′, 脐点个数) 的 CSV.

    参数:
        ctx: `ForgeContext` 对象
        curve: 已通过量子化检查的曲线
    """

    config = ctx.config
    spec = config.sweep or SweepSpec()
    mode = "zero" if config.profiles.a_mode == "zero" else spec.mode

    rows = list(
        lambda_sweep(
            curve,
            spec.thetas(),
            mode,
            reference_theta0=config.theta0,
            threshold=config.tolerances.quantization,
            workers=config.workers,
        )
    )

    path = ctx.csv_path("sweep.csv")
    if path is not None:
        ctx.record_artifact("sweep_csv", write_sweep_csv(path, rows))

    umbilic_rows = sum(1 for row in rows if row.lambda_ is None)
    ctx.report["sweep"] = {
        "count": spec.count,
        "mode": mode,
        "umbilic_rows": umbilic_rows,
    }
    ctx.print_stdout(f"扫描了 {len(rows)} 个 θ₀, 其中 {umbilic_rows} 个在曲线上有脐点")
    return rows


def _overridden(
    ctx: ForgeContext, curve: FrenetCurve, profiles: GermProfiles
) -> GermProfiles:
    overrides = ctx.config.profiles
    if overrides.b_random or overrides.c_random:
        profiles = random_profiles(
            profiles, curve, overrides.seed, overrides.b_random, overrides.c_random
        )
    return profiles


def _certify(
    ctx: ForgeContext, curve: FrenetCurve, theta: ThetaField
) -> HyperbolicityReport:
    config = ctx.config
    tolerances = config.tolerances

    with ctx.status("判定主曲率环的双曲性"):
        if config.profiles.a_mode == "zero":
            profiles = zero_a_profiles(default_profiles(curve, theta))
            if config.profiles.eps is not None:
                profiles = replace(profiles, eps=config.profiles.eps)
            report = assess_profiles(curve, theta, profiles, tolerances.hyperbolicity)
        else:
            report = certify_hyperbolic(
                curve,
                config.theta0,
                tolerances.hyperbolicity,
                tolerances.quantization,
                config.profiles.eps,
            )

    assert report.profiles is not None
    return replace(report, profiles=_overridden(ctx, curve, report.profiles))


def _emit_germ(ctx: ForgeContext, germ: SurfaceGerm) -> None:
    outputs = ctx.config.outputs

    path = ctx.output_path(outputs.germ)
    if path is not None:
        ctx.record_artifact("germ", write_json(path, germ_descriptor(germ)))

    path = ctx.output_path(outputs.mesh)
    if path is not None:
        with ctx.status("生成网格"):
            strip = build_mesh(
                germ, *outputs.mesh_resolution, ctx.config.tolerances.seam
            )
        ctx.report["mesh"] = {
            "resolution": list(strip.resolution),
            "seam_gap": strip.seam_gap,
            "min_area_element": strip.min_area_element,
            "euler_characteristic": strip.euler_characteristic(),
        }
        ctx.record_artifact("mesh", write_obj(path, strip))


def _validate(
    ctx: ForgeContext, germ: SurfaceGerm, report: HyperbolicityReport
) -> None:
    tolerances = ctx.config.tolerances

    with ctx.status("沿主曲率线积分回归映射"):
        validation = cross_validate(
            germ,
            report,
            tolerances.hyperbolicity,
            tolerances.validation_abs,
            tolerances.validation_rel,
        )

    report = replace(report, oracle_log_pi_prime=validation.shooting)
    ctx.report["hyperbolicity"] = report.to_dict()
    ctx.report["validation"] = validation.to_dict()

    path = ctx.csv_path("trace.csv")
    if path is not None:
        offset = validation.offsets[0]
        traces = integrate_principal_lines(germ, [offset, -offset])
        ctx.record_artifact("trace_csv", write_trace_csv(path, traces))

    if not validation.confirmed:
        raise Mismatch(
            f"回归映射给出 {validation.verdict.value}, 与 {report.verdict.value} 不符",
            **validation.to_dict(),
        )


def run(ctx: ForgeContext) -> HyperbolicityReport:
    """完整流程: 读取曲线, 检查量子化, 求解 θ, 判定双曲性, 可选的回归映射验证, 输出文件.

    参数:
        ctx: `ForgeContext` 对象
    """

    with ctx.reporting("run"):
        curve = load_curve(ctx)
        theta = _solve_theta(ctx, curve)

        if ctx.config.sweep is not None:
            emit_sweep(ctx, curve)

        report = _certify(ctx, curve, theta)
        ctx.report["hyperbolicity"] = report.to_dict()

        if report.verdict is Verdict.CIRCLE_OBSTRUCTION:
            raise CircleObstruction(
                "k sinθ 沿曲线为常数, 任何 A 与 ε 下 Λ 都为零",
                theta0=report.theta0,
            )
        if report.verdict is Verdict.UMBILIC_OBSTRUCTION:
            raise UmbilicOnCycle(
                f"曲线上有 {len(report.umbilic_roots)} 个脐点",
                roots=list(report.umbilic_roots),
            )

        germ = build_germ(curve, theta, report.profiles)
        _emit_germ(ctx, germ)

        if report.verdict is Verdict.NON_HYPERBOLIC:
            raise NonHyperbolic(
                f"|Λ| = {abs(report.lambda_):.3e} 不超过阈值",
                lambda_=report.lambda_,
            )

        if ctx.config.oracle:
            _validate(ctx, germ, report)

        ctx.print_stdout(
            f"Λ = {report.lambda_:.9g} (ε = {report.eps_used:.6g}), 主曲率环是双曲的",
            fg="green",
        )
        return report


def sweep(ctx: ForgeContext) -> list[SweepRow]:
    """只做 Λ(θ₀) 扫描.

    参数:
        ctx: `ForgeContext` 对象
    """

    with ctx.reporting("sweep"):
        curve = load_curve(ctx)
        _solve_theta(ctx, curve)
        return emit_sweep(ctx, curve)


def mesh(ctx: ForgeContext) -> SurfaceGerm:
    """用默认 profile 构造曲面芽, 输出 OBJ 网格和芽描述.

    参数:
        ctx: `ForgeContext` 对象
    """

    with ctx.reporting("mesh"):
        curve = load_curve(ctx)
        theta = _solve_theta(ctx, curve)
        profiles = default_profiles(curve, theta)
        if ctx.config.profiles.eps is not None:
            profiles = replace(profiles, eps=ctx.config.profiles.eps)
        germ = build_germ(curve, theta, _overridden(ctx, curve, profiles))
        _emit_germ(ctx, germ)
        return germ
