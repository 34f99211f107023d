"""pytest fixtures for fewshotdag testing."""

from __future__ import annotations

from collections.abc import Iterator

import pytest

__all__ = ["clean_environment"]


@pytest.fixture(autouse=True)
def clean_environment(monkeypatch: pytest.MonkeyPatch) -> Iterator[None]:
    """Remove fewshotdag settings from the environment of every test."""
    for name in ("FEWSHOTDAG_LOG_LEVEL", "FEWSHOTDAG_DEFAULT_OUTPUT_DIR"):
        monkeypatch.delenv(name, raising=False)
    yield
