"""Tests for running experiments end to end."""

from __future__ import annotations

import json
from pathlib import Path

import pytest

from fewshotdag.config import (
    SNAPSHOT_NAME,
    DataConfig,
    ExperimentConfig,
    Strategy,
    parse_config,
)
from fewshotdag.evaluation.report import REPORT_JSON, read_report
from fewshotdag.exceptions import InvalidArgumentError, OutputPathError
from fewshotdag.experiment import (
    CHECKPOINT_NAME,
    HISTORY_NAME,
    ExperimentRunner,
)
from fewshotdag.models.metrics import ReportRow
from fewshotdag.synthdata.storage import read_dataset
from fewshotdag.training.checkpoint import read_checkpoint

from .support.builders import tiny_architecture, tiny_config


def test_resolve_output(tmp_path: Path) -> None:
    runner = ExperimentRunner(tiny_config(tmp_path))
    base = tmp_path.resolve()

    assert runner.resolve_output("data") == base / "data"
    assert runner.resolve_output(base / "a" / "b") == base / "a" / "b"
    assert runner.resolve_output("a/../b") == base / "b"
    with pytest.raises(OutputPathError):
        runner.resolve_output("../escape")
    with pytest.raises(OutputPathError):
        runner.resolve_output(tmp_path.parent / "elsewhere")


def test_gen_data(tmp_path: Path) -> None:
    config = tiny_config(tmp_path)
    runner = ExperimentRunner(config)

    directory = runner.gen_data()
    assert directory == tmp_path.resolve() / "data"
    assert (directory / SNAPSHOT_NAME).is_file()
    dataset = read_dataset(directory)
    assert dataset.counts() == {
        "labeled": 3,
        "unlabeled": 4,
        "validation": 2,
        "test": 3,
    }
    assert dataset.generator_seed == 11

    # A configuration pointing at the written dataset loads the same data.
    stored = config.copy(update={"data": DataConfig(path=directory)})
    loaded = ExperimentRunner(stored).load_dataset()
    assert [s.id for s in loaded.samples] == [s.id for s in dataset.samples]

    with pytest.raises(OutputPathError):
        runner.gen_data(out="../outside")


def test_pretrain(tmp_path: Path) -> None:
    outputs = ExperimentRunner(tiny_config(tmp_path)).pretrain()

    assert outputs.directory == tmp_path.resolve() / "pretrain"
    assert outputs.checkpoint == outputs.directory / CHECKPOINT_NAME
    assert len(outputs.history.epochs) == 2
    history = json.loads((outputs.directory / HISTORY_NAME).read_text())
    assert len(history["epochs"]) == 2
    snapshot = outputs.directory / SNAPSHOT_NAME
    assert parse_config(snapshot) == tiny_config(tmp_path)

    checkpoint = read_checkpoint(outputs.checkpoint)
    assert checkpoint.strategy is None
    assert checkpoint.teacher is None
    assert checkpoint.architecture.num_landmarks == 8

    summary = outputs.to_dict()
    assert summary["checkpoint"] == str(outputs.checkpoint)
    assert summary["final_loss"] == outputs.history.epochs[-1].mean_loss


def test_train_ssl(tmp_path: Path) -> None:
    runner = ExperimentRunner(tiny_config(tmp_path))
    pretrained = runner.pretrain()

    outputs = runner.train_ssl(pretrained.checkpoint, Strategy.mean_teacher)
    assert outputs.directory == tmp_path.resolve() / "mean_teacher"
    checkpoint = read_checkpoint(outputs.checkpoint)
    assert checkpoint.strategy == "mean_teacher"
    assert checkpoint.teacher is not None
    assert checkpoint.optimizer is not None
    assert checkpoint.step > 0

    # Without a checkpoint, pretraining runs first.
    fresh = ExperimentRunner(tiny_config(tmp_path / "fresh")).train_ssl()
    assert fresh.directory.name == Strategy.mean_teacher_js.value
    assert (tmp_path / "fresh" / "pretrain" / CHECKPOINT_NAME).is_file()


def test_train_ssl_architecture_mismatch(tmp_path: Path) -> None:
    other = tiny_config(
        tmp_path / "other",
        architecture=tiny_architecture(num_landmarks=8, gcn_width=4),
    )
    checkpoint = ExperimentRunner(other).pretrain().checkpoint

    runner = ExperimentRunner(tiny_config(tmp_path / "run"))
    with pytest.raises(InvalidArgumentError):
        runner.train_ssl(checkpoint)


def test_evaluate_and_overlays(tmp_path: Path) -> None:
    runner = ExperimentRunner(tiny_config(tmp_path))
    outputs = runner.train_ssl(strategy=Strategy.pi_model)

    summary, directory = runner.evaluate(outputs.checkpoint)
    assert directory == tmp_path.resolve() / "eval"
    assert summary.sample_count == 3
    assert summary.mean >= 0
    rows = read_report(directory / REPORT_JSON)
    assert [r.method for r in rows] == ["pi_model"]
    assert rows[0].summary.mean == pytest.approx(summary.mean)

    pretrained = tmp_path / "pretrain" / CHECKPOINT_NAME
    _, directory = runner.evaluate(pretrained)
    rows = read_report(directory / REPORT_JSON)
    assert [r.method for r in rows] == ["pretrain"]

    paths = runner.overlays(outputs.checkpoint, count=2)
    assert len(paths) == 2
    for path in paths:
        assert path.parent == tmp_path.resolve() / "overlays"
        assert "<svg" in path.read_text()
    assert runner.overlays(outputs.checkpoint, count=0) == []


def test_run_methods(tmp_path: Path) -> None:
    runner = ExperimentRunner(tiny_config(tmp_path))
    strategies = [Strategy.supervised_only, Strategy.mean_teacher_js]

    rows = runner.run_methods(strategies, labeled_count=3)
    assert [r.method for r in rows] == [s.value for s in strategies]
    assert all(r.labeled_count == 3 for r in rows)
    assert all(r.summary.sample_count == 3 for r in rows)
    for name in ("pretrain", "supervised_only", "mean_teacher_js"):
        assert (tmp_path / name / CHECKPOINT_NAME).is_file()


def test_reproduce_table(tmp_path: Path) -> None:
    runner = ExperimentRunner(tiny_config(tmp_path))

    rows, directory = runner.reproduce_table(seeds=[3])
    assert directory == tmp_path.resolve() / "table"
    assert [r.method for r in rows] == [s.value for s in Strategy]
    assert all(r.seed == 3 for r in rows)
    assert (directory / "seed-3" / "pretrain" / CHECKPOINT_NAME).is_file()
    assert len(read_report(directory / REPORT_JSON)) == len(Strategy)

    snapshot = directory / "seed-3" / "pretrain" / SNAPSHOT_NAME
    seeded = parse_config(snapshot)
    assert seeded.seed == 3
    assert seeded.trainer.rng_seed == 3

    with pytest.raises(InvalidArgumentError):
        runner.reproduce_table(seeds=[])


def test_run_ablation(tmp_path: Path) -> None:
    runner = ExperimentRunner(tiny_config(tmp_path))
    strategies = (Strategy.supervised_only, Strategy.mean_teacher)

    rows, directory = runner.run_ablation([2, 3], strategies)
    assert directory == tmp_path.resolve() / "ablation"
    assert [(r.labeled_count, r.method) for r in rows] == [
        (2, "supervised_only"),
        (2, "mean_teacher"),
        (3, "supervised_only"),
        (3, "mean_teacher"),
    ]
    assert (directory / "labeled-2" / "pretrain" / CHECKPOINT_NAME).is_file()
    assert (directory / REPORT_JSON).is_file()

    with pytest.raises(InvalidArgumentError):
        runner.run_ablation([4], strategies)
    with pytest.raises(InvalidArgumentError):
        runner.run_ablation([0], strategies)
    with pytest.raises(InvalidArgumentError):
        runner.run_ablation([], strategies)


def test_default_output_dir(
    tmp_path: Path, monkeypatch: pytest.MonkeyPatch
) -> None:
    monkeypatch.setenv("FEWSHOTDAG_DEFAULT_OUTPUT_DIR", str(tmp_path))
    config = ExperimentConfig()
    assert ExperimentRunner(config).output_dir == tmp_path


def test_reproduce_table_parallel(tmp_path: Path) -> None:
    serial = ExperimentRunner(tiny_config(tmp_path / "serial"))
    parallel = ExperimentRunner(tiny_config(tmp_path / "parallel"))

    serial_rows, serial_dir = serial.reproduce_table(seeds=[3, 4], jobs=1)
    parallel_rows, parallel_dir = parallel.reproduce_table(
        seeds=[3, 4], jobs=2
    )

    def _key(rows: list[ReportRow]) -> list[tuple[str, int, float]]:
        return [(r.method, r.seed, r.summary.mean) for r in rows]

    assert _key(parallel_rows) == _key(serial_rows)
    count = len(Strategy)
    assert [r.seed for r in parallel_rows] == [3] * count + [4] * count
    for directory in (serial_dir, parallel_dir):
        for seed in (3, 4):
            seed_dir = directory / f"seed-{seed}"
            assert (seed_dir / "pretrain" / CHECKPOINT_NAME).is_file()
            for strategy in Strategy:
                path = seed_dir / strategy.value / CHECKPOINT_NAME
                assert path.is_file()
    assert _key(read_report(parallel_dir / REPORT_JSON)) == _key(
        read_report(serial_dir / REPORT_JSON)
    )
