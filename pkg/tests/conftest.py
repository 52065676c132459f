import os
import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from mcdiffusion.ingestion import DATA_DIR_ENV, resolve_dataset  # noqa: E402

ROOT = Path(__file__).resolve().parents[1]

# acceptance criteria outcomes, filled by test_acceptance and printed at the end
ACCEPTANCE: dict[str, tuple[bool, str]] = {}


def ml100k_path() -> Path:
    os.environ.setdefault(DATA_DIR_ENV, str(ROOT / "data"))
    return resolve_dataset("ml100k")[0]


@pytest.fixture(scope="session")
def ml100k():
    """MovieLens 100k, or skip. Acceptance tests use their own strict loader."""
    from mcdiffusion import load_movielens

    path = ml100k_path()
    if not path.exists():
        pytest.skip(f"MovieLens 100k not found at {path}; see scripts/fetch_ml100k.py")
    return load_movielens(path)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for name in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[name]
        terminalreporter.write_line(f"[{'PASS' if ok else 'FAIL'}] {name}: {detail}")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    if rep.when == "call":
        item.rep_call_failed = rep.failed
