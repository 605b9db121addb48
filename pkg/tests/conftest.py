from __future__ import annotations

import pytest

from _support import ACCEPTANCE, t1_chain


@pytest.fixture
def t1():
    return t1_chain()


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for num in sorted(ACCEPTANCE):
        ok, text = ACCEPTANCE[num]
        terminalreporter.write_line(f"criterion {num:2d}: {'PASS' if ok else 'FAIL'}  {text}")
