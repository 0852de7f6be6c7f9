import importlib.resources
from pathlib import Path

import pytest

from oblicalc.parser import parse_theory
from oblicalc.theory import validate_theory

DATA = Path(importlib.resources.files("oblicalc") / "data")


@pytest.fixture(scope="session")
def door_path() -> Path:
    return DATA / "door.bat"


@pytest.fixture(scope="session")
def door_text(door_path) -> str:
    return door_path.read_text(encoding="utf-8")


@pytest.fixture(scope="session")
def door(door_text):
    bat, diags = parse_theory(door_text, name="door")
    assert bat is not None and not diags, [d.render() for d in diags or []]
    assert not validate_theory(bat)
    return bat


@pytest.fixture(scope="session")
def fulfilled_trace_path() -> Path:
    return DATA / "door_fulfilled.trace"


@pytest.fixture(scope="session")
def violation_trace_path() -> Path:
    return DATA / "door_violation.trace"
