from __future__ import annotations

import tomllib
from pathlib import Path

MANIFEST = Path(__file__).resolve().parents[1] / "pyproject.toml"


def test_manifest_leaves_pydantic_internals_to_the_resolver() -> None:
    dependencies = tomllib.loads(MANIFEST.read_text())["tool"]["poetry"]["dependencies"]

    assert "pydantic" in dependencies
    assert "pydantic-core" not in dependencies
    assert "typing-extensions" not in dependencies
