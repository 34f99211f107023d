"""Command-line interface."""

from __future__ import annotations

import logging
import sys
from collections.abc import Callable, Iterator
from contextlib import contextmanager
from functools import wraps
from pathlib import Path
from typing import Any, TypeVar

import click
from ruamel.yaml import YAML

from .config import (
    Config,
    Strategy,
    parse_config,
    parse_generation_spec,
)
from .exceptions import FewShotDagError
from .experiment import ExperimentRunner
from .models.metrics import ReportRow
from .verification import (
    GRADCHECK_TOLERANCE,
    available_checks,
    run_gradcheck_suite,
)

__all__ = [
    "ablation",
    "evaluate",
    "gen_data",
    "gradcheck",
    "help",
    "main",
    "overlay",
    "pretrain",
    "reproduce_table",
    "train_ssl",
]

F = TypeVar("F", bound=Callable[..., Any])

_config_option = click.option(
    "--config",
    "config_path",
    type=click.Path(path_type=Path),
    default=None,
    help="Experiment configuration (default: every setting at its default).",
)

_checkpoint_option = click.option(
    "--checkpoint",
    type=click.Path(path_type=Path),
    required=True,
    help="Checkpoint to load.",
)


def print_yaml(results: Any) -> None:
    """Print some results to stdout as YAML."""
    yaml = YAML()
    yaml.indent(mapping=2, sequence=4, offset=2)
    yaml.dump(results, sys.stdout)


def _reported(func: F) -> F:
    """Turn domain and file errors into a one-line diagnostic."""

    @wraps(func)
    def wrapper(*args: Any, **kwargs: Any) -> Any:
        with _errors_reported():
            return func(*args, **kwargs)

    return wrapper  # type: ignore[return-value]


@contextmanager
def _errors_reported() -> Iterator[None]:
    try:
        yield
    except (FewShotDagError, OSError) as e:
        raise click.ClickException(str(e)) from e


def _runner(config_path: Path | None) -> ExperimentRunner:
    return ExperimentRunner(parse_config(config_path))


@click.group(context_settings={"help_option_names": ["-h", "--help"]})
@click.option(
    "--log-level",
    type=click.Choice(
        ["DEBUG", "INFO", "WARNING", "ERROR"], case_sensitive=False
    ),
    default=None,
    help="Logging level (default: FEWSHOTDAG_LOG_LEVEL or WARNING).",
)
@click.version_option(message="%(version)s")
def main(log_level: str | None) -> None:
    """Command-line interface for fewshotdag."""
    level = log_level or Config().log_level
    logging.basicConfig(
        level=level.upper(), format="%(levelname)s %(name)s: %(message)s"
    )


@main.command()
@click.argument("topic", default=None, required=False, nargs=1)
@click.pass_context
def help(ctx: click.Context, topic: str | None) -> None:
    """Show help for any command."""
    # The help command implementation is taken from
    # https://www.burgundywall.com/post/having-click-help-subcommand
    if topic:
        if topic in main.commands:
            ctx.info_name = topic
            click.echo(main.commands[topic].get_help(ctx))
        else:
            raise click.UsageError(f"Unknown help topic {topic}", ctx)
    else:
        if not ctx.parent:
            raise RuntimeError("help called without topic or parent")
        click.echo(ctx.parent.get_help())


@main.command("gen-data")
@_config_option
@click.option(
    "--spec",
    type=click.Path(path_type=Path),
    default=None,
    help="Generation settings (default: data.generation of the config).",
)
@click.option("--seed", type=int, default=None, help="Override the seed.")
@click.option(
    "--out",
    type=click.Path(path_type=Path),
    default=Path("data"),
    help="Dataset directory inside the output directory (default: data).",
)
@_reported
def gen_data(
    config_path: Path | None, spec: Path | None, seed: int | None, out: Path
) -> None:
    """Generate a synthetic dataset."""
    config = parse_config(config_path)
    generation = (
        parse_generation_spec(spec)
        if spec is not None
        else config.data.generation
    )
    if seed is not None:
        generation = generation.copy(update={"seed": seed})
    directory = ExperimentRunner(config).gen_data(generation, out)
    print_yaml({"dataset": str(directory)})


@main.command()
@_config_option
@_reported
def pretrain(config_path: Path | None) -> None:
    """Pretrain a model on the labeled samples."""
    outputs = _runner(config_path).pretrain()
    print_yaml(outputs.to_dict())


@main.command("train-ssl")
@_config_option
@click.option(
    "--pretrained",
    type=click.Path(path_type=Path),
    default=None,
    help="Pretrained checkpoint (default: pretrain first).",
)
@click.option(
    "--strategy",
    type=click.Choice([s.value for s in Strategy]),
    default=None,
    help="Strategy (default: trainer.strategy of the config).",
)
@_reported
def train_ssl(
    config_path: Path | None, pretrained: Path | None, strategy: str | None
) -> None:
    """Train with a semi-supervised strategy."""
    chosen = Strategy(strategy) if strategy else None
    outputs = _runner(config_path).train_ssl(pretrained, chosen)
    print_yaml(outputs.to_dict())


@main.command("eval")
@_config_option
@_checkpoint_option
@_reported
def evaluate(config_path: Path | None, checkpoint: Path) -> None:
    """Evaluate a checkpoint on the test samples."""
    summary, directory = _runner(config_path).evaluate(checkpoint)
    data = summary.to_dict()
    del data["errors"]
    print_yaml({"report": str(directory), **data})


@main.command()
@_config_option
@_checkpoint_option
@click.option(
    "--count",
    type=click.IntRange(min=0),
    default=None,
    help="Number of test samples (default: evaluation.overlay_count).",
)
@_reported
def overlay(
    config_path: Path | None, checkpoint: Path, count: int | None
) -> None:
    """Write SVG overlays of predictions on test samples."""
    paths = _runner(config_path).overlays(checkpoint, count)
    print_yaml({"overlays": [str(p) for p in paths]})


@main.command()
@click.option(
    "--instances",
    type=click.IntRange(min=1),
    default=50,
    help="Random instances per operation (default: 50).",
)
@click.option("--seed", type=int, default=0, help="Seed (default: 0).")
@click.argument("names", type=click.Choice(available_checks()), nargs=-1)
@_reported
def gradcheck(instances: int, seed: int, names: tuple[str, ...]) -> None:
    """Check analytic gradients against finite differences.

    Exits with status 1 if any operation exceeds the tolerance.
    """
    results = run_gradcheck_suite(
        instances, seed, names=list(names) if names else None
    )
    print_yaml({r.name: r.to_dict() for r in results})
    failed = [r.name for r in results if not r.passed()]
    if failed:
        sys.stderr.write(
            f"Gradient check above {GRADCHECK_TOLERANCE}:"
            f" {', '.join(failed)}\n"
        )
        sys.exit(1)


@main.command("reproduce-table")
@_config_option
@click.option(
    "--seed",
    "seeds",
    type=int,
    multiple=True,
    help="Seed to run; may be repeated (default: 0, 1 and 2).",
)
@click.option(
    "--jobs",
    type=click.IntRange(min=1),
    default=1,
    help="Seeds run in parallel (default: 1).",
)
@_reported
def reproduce_table(
    config_path: Path | None, seeds: tuple[int, ...], jobs: int
) -> None:
    """Compare every strategy over several seeds."""
    runner = _runner(config_path)
    rows, directory = runner.reproduce_table(seeds or (0, 1, 2), jobs)
    print_yaml(
        {"report": str(directory), "rows": [_row(r) for r in rows]}
    )


@main.command()
@_config_option
@click.option(
    "--labeled",
    "sizes",
    type=click.IntRange(min=1),
    multiple=True,
    required=True,
    help="Number of labeled samples; may be repeated.",
)
@_reported
def ablation(config_path: Path | None, sizes: tuple[int, ...]) -> None:
    """Compare strategies for several labeled set sizes."""
    rows, directory = _runner(config_path).run_ablation(sizes)
    print_yaml(
        {"report": str(directory), "rows": [_row(r) for r in rows]}
    )


def _row(row: ReportRow) -> dict[str, Any]:
    data = row.to_dict()
    del data["errors"]
    return data
