# cli.py
# Командная строка: python cli.py <команда> ...
import json
import sys
from pathlib import Path
from typing import List, Optional

import click

import config
from errors import ConfigError, DomainError, KSFluxError
from harness import run_single, run_sweep, summarize, write_primal_snapshot
from models import concentration_gap, critical_alpha, gamma_window, lemma6_k, odi_exponents
from schemas import RunConfig, SweepConfig
from solver_primal import crosscheck as run_crosscheck
from solver_w import RunStatus
from validation import SUITES, run_suite

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_RUN_FAILURE = 2
EXIT_ACCEPTANCE = 3

CONFIG_PATH = click.Path(exists=True, dir_okay=False, path_type=Path)
OUTPUT_DIR = click.Path(file_okay=False, path_type=Path)


@click.group()
@click.option("--log-level", default=config.LOG_LEVEL, show_default=True, help="Уровень логирования")
def main(log_level: str) -> None:
    """Радиальная модель хемотаксиса с ограничением потока."""
    config.configure_logging(log_level)


@main.command()
@click.argument("config_path", type=CONFIG_PATH)
@click.option("--output", type=OUTPUT_DIR, default=None, help="Корень результатов (по умолчанию KSFLUX_OUTPUT_ROOT)")
def simulate(config_path: Path, output: Optional[Path]) -> int:
    """Одиночный прогон по YAML-конфигурации."""
    cfg = config.load_config(config_path, RunConfig)
    bundle = run_single(cfg, output_dir=output)
    click.echo(summarize(bundle).model_dump_json(indent=2))
    if bundle.outcome.status == RunStatus.STEP_FAILURE:
        return EXIT_RUN_FAILURE
    return EXIT_OK


@main.command()
@click.argument("config_path", type=CONFIG_PATH)
@click.option("--output", type=OUTPUT_DIR, default=None, help="Корень результатов")
@click.option("--workers", type=click.IntRange(min=1), default=None, help="Число процессов (по умолчанию KSFLUX_WORKERS)")
def sweep(config_path: Path, output: Optional[Path], workers: Optional[int]) -> int:
    """Развёртка по alpha: список значений или бисекция."""
    cfg = config.load_config(config_path, SweepConfig)
    if workers is None and cfg.workers == 1:
        workers = config.WORKERS
    if workers is not None:
        cfg = cfg.model_copy(update={"workers": workers})

    report = run_sweep(cfg, output_dir=output)
    for verdict in report.verdicts:
        click.echo(f"alpha={verdict.alpha:g}: {verdict.verdict.value}" + (f" ({verdict.reason})" if verdict.reason else ""))
    if report.bracket is not None:
        lo, hi = report.bracket
        click.echo(f"bracket: [{lo:g}, {hi:g}]")
    if report.critical_alpha is not None:
        click.echo(f"critical alpha: {report.critical_alpha:.6f}")
    return EXIT_OK


@main.command()
@click.option("--n", "n", type=int, required=True, help="Размерность пространства")
@click.option("--alpha", type=float, required=True, help="Показатель ограничителя")
@click.option("--kappa", type=float, default=1.0, show_default=True, help="Нижняя константа ограничителя")
def gamma(n: int, alpha: float, kappa: float) -> int:
    """Окно допустимых gamma и показатели ОДН в его середине."""
    crit = critical_alpha(n)
    window = gamma_window(n, alpha)
    if window.empty:
        click.echo(f"empty (alpha ≥ critical {crit:g})")
        return EXIT_OK

    click.echo(f"window ({window.lower:.6f}, {window.upper:.6f})")
    g = window.midpoint
    click.echo(f"gamma = {g:.6f}")
    a1, lam = odi_exponents(n, alpha, g)
    click.echo(f"a1 = {a1:.6f}")
    click.echo(f"lambda = {lam:.6f}")
    click.echo(f"concentration gap = {concentration_gap(n, alpha, g):.6f}")
    click.echo(f"k = {lemma6_k(n, alpha, g, kappa):.6f}")
    return EXIT_OK


@main.command()
@click.option("--suite", type=click.Choice(sorted(SUITES)), default="lemmas", show_default=True)
def validate(suite: str) -> int:
    """Наборы проверок неравенств и воспроизводящих прогонов."""
    results = run_suite(suite)
    for result in results:
        mark = "ok" if result.passed else "FAIL"
        click.echo(f"[{mark}] {result.name}: {result.detail}")
    return EXIT_OK if all(r.passed for r in results) else EXIT_ACCEPTANCE


@main.command()
@click.argument("config_path", type=CONFIG_PATH)
@click.option("--t-check", type=float, required=True, help="Момент сравнения")
@click.option("--grids", default="128,256,512", show_default=True, help="Размеры сеток через запятую")
@click.option("--grading", type=float, default=None, help="Сгущение сетки по s; по умолчанию n (равномерно по r)")
@click.option("--output", type=OUTPUT_DIR, default=None, help="Корень результатов")
def crosscheck(config_path: Path, t_check: float, grids: str, grading: Optional[float],
               output: Optional[Path]) -> int:
    """Сравнение решателя в r и решателя для накопленной массы."""
    cfg = config.load_config(config_path, RunConfig)
    try:
        sizes = [int(item) for item in grids.split(",") if item.strip()]
    except ValueError as e:
        raise click.BadParameter(f"grids: {e}") from e

    report = run_crosscheck(cfg.profile, cfg.params, t_check, sizes, cfg.controls, grading)
    directory = (output or config.output_root()) / cfg.name / "crosscheck"
    for state, grid in zip(report.primal, report.grids):
        write_primal_snapshot(state, grid, cfg.params, directory / f"primal_N{grid.N}.csv")

    levels = [{"N": level.N, "discrepancy": level.discrepancy} for level in report.levels]
    try:
        (directory / "crosscheck.json").write_text(
            json.dumps({"t_check": t_check, "levels": levels, "ratios": report.ratios}, indent=2),
            encoding="utf-8",
        )
    except OSError as e:
        raise KSFluxError(f"cannot write {directory / 'crosscheck.json'}: {e}") from e

    for level in report.levels:
        click.echo(f"N={level.N}: discrepancy {level.discrepancy:.6g}")
    for ratio in report.ratios:
        click.echo(f"ratio {ratio:.3f}")
    return EXIT_OK


def cli(argv: Optional[List[str]] = None) -> int:
    """Точка входа с кодами возврата: 0 успех, 1 ошибка вызова, 2 сбой прогона, 3 проверки не пройдены."""
    try:
        result = main.main(args=argv, prog_name="ksflux", standalone_mode=False)
    except click.UsageError as e:
        e.show()
        return EXIT_USAGE
    except click.Abort:
        return EXIT_USAGE
    except (ConfigError, DomainError) as e:
        click.echo(f"Ошибка: {e}", err=True)
        return EXIT_USAGE
    except KSFluxError as e:
        click.echo(f"Сбой прогона: {e}", err=True)
        return EXIT_RUN_FAILURE
    return result if isinstance(result, int) else EXIT_OK


if __name__ == "__main__":
    sys.exit(cli())
