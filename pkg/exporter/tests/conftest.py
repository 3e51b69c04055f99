"""Shared fixtures: tiny captioned WAV datasets built from scratch."""

from __future__ import annotations

from pathlib import Path

import pytest

from wav_helpers import build_smoke_dataset


@pytest.fixture()
def smoke_root(tmp_path) -> Path:
    return build_smoke_dataset(tmp_path / "clotho_like")
