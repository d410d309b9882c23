from __future__ import annotations

import numpy as np
import pytest

from helpers import M2M, M2O, make_hin
from hinfraud.hin import Hin


@pytest.fixture
def toy_hin() -> Hin:
    """T(100) -> U(10) -> C(3), T -> S(5); all many-to-one."""
    rng = np.random.default_rng(3)
    counts = {"T": 100, "U": 10, "C": 3, "S": 5}
    t = np.arange(100)
    edges = {
        "toU": (t, rng.integers(0, 10, 100)),
        "toC": (np.arange(10), rng.integers(0, 3, 10)),
        "toS": (t, rng.integers(0, 5, 100)),
    }
    return make_hin(["T", "U", "C", "S"], [("toU", "T", "U", M2O), ("toC", "U", "C", M2O), ("toS", "T", "S", M2O)], counts, edges)


@pytest.fixture
def title_hin() -> Hin:
    """4 transactions, 3 items, 2 titles.

    t0: items {a, b}; t1: {a}; t2: {c}; t3: {b, c}
    a, b -> title X (popular); c -> title Y (rare)
    """
    counts = {"transaction": 4, "item": 3, "title": 2}
    edges = {
        "containsItem": (np.array([0, 0, 1, 2, 3, 3]), np.array([0, 1, 0, 2, 1, 2])),
        "isTitle": (np.array([0, 1, 2]), np.array([0, 0, 1])),
    }
    return make_hin(
        ["transaction", "item", "title"],
        [("containsItem", "transaction", "item", M2M), ("isTitle", "item", "title", M2O)],
        counts,
        edges,
    )


def pytest_terminal_summary(terminalreporter):
    from helpers import ACCEPTANCE

    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for num, title, ok, detail in sorted(ACCEPTANCE):
        terminalreporter.write_line(f"criterion {num} {'PASS' if ok else 'FAIL'}: {title} ({detail})")
