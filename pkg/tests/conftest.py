from __future__ import annotations

import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from blockmerge import demo


@pytest.fixture(scope="session")
def handles():
    return demo.build_base()


@pytest.fixture(scope="session")
def base_doc(handles):
    return handles.doc


@pytest.fixture(scope="session")
def figures():
    return demo.build_figures()


@pytest.fixture(scope="session")
def demo_logs():
    return demo.build_logs()


@pytest.fixture(scope="session")
def fixtures_dir():
    path = Path(__file__).resolve().parents[1] / "fixtures"
    assert path.is_dir(), "run `blockmerge fixtures` first"
    return path
