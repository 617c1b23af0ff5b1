"""Shared fixtures and comparison helpers."""

import math
import os
import tempfile

import pytest

from crossview.executor import SQLiteExecutor


def values_close(a, b, rel=1e-9, abs_tol=1e-12):
    if a is None or b is None:
        return a is None and b is None
    if isinstance(a, str) or isinstance(b, str):
        return a == b
    return a == b or math.isclose(a, b, rel_tol=rel, abs_tol=abs_tol)


def rows_close(ra, rb, rel=1e-9, abs_tol=1e-12):
    """Multiset comparison of row sequences with per-value tolerance."""
    if len(ra) != len(rb):
        return False
    key = lambda r: tuple((x is None, x if x is not None else 0) for x in r)
    for x, y in zip(sorted(ra, key=key), sorted(rb, key=key)):
        if len(x) != len(y) or not all(values_close(u, v, rel, abs_tol)
                                       for u, v in zip(x, y)):
            return False
    return True


CRITERIA = []


def criterion(name: str, ok: bool, detail: str = ""):
    """Record and assert one acceptance criterion outcome."""
    line = f"[{'PASS' if ok else 'FAIL'}] {name}" + (f": {detail}" if detail else "")
    CRITERIA.append(line)
    print(line)
    assert ok, line


def pytest_terminal_summary(terminalreporter):
    if CRITERIA:
        terminalreporter.section("acceptance criteria")
        for line in CRITERIA:
            terminalreporter.write_line(line)


@pytest.fixture
def executor():
    exe = SQLiteExecutor()
    yield exe
    exe.close()


@pytest.fixture
def db_dir(tmp_path):
    return str(tmp_path)


@pytest.fixture
def file_executor(tmp_path):
    exe = SQLiteExecutor(str(tmp_path / "test.db"))
    yield exe
    exe.close()
