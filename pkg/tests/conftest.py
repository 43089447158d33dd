import itertools
from collections import deque

import numpy as np
import pytest

from ligocr.alphabet import default_alphabet


def py_components(mask: np.ndarray, eight: bool = True) -> list[set]:
    """Plain-Python BFS labeling; components in first row-major occurrence."""
    h, w = mask.shape
    steps = [(dy, dx) for dy in (-1, 0, 1) for dx in (-1, 0, 1) if (dy or dx) and (eight or not (dy and dx))]
    seen, comps = set(), []
    for y, x in itertools.product(range(h), range(w)):
        if not mask[y, x] or (y, x) in seen:
            continue
        comp, q = set(), deque([(y, x)])
        seen.add((y, x))
        while q:
            cy, cx = q.popleft()
            comp.add((cy, cx))
            for dy, dx in steps:
                ny, nx = cy + dy, cx + dx
                if 0 <= ny < h and 0 <= nx < w and mask[ny, nx] and (ny, nx) not in seen:
                    seen.add((ny, nx))
                    q.append((ny, nx))
        comps.append(comp)
    return comps


def py_count(raster: np.ndarray, eight: bool = True) -> int:
    return len(py_components(np.asarray(raster) >= 128, eight))


@pytest.fixture(scope="session")
def alphabet():
    return default_alphabet()


# acceptance lines collected by tests/test_acceptance.py
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
