import itertools

import pytest

from anchorstream.tableau import CellCounts, IndividualRecord, design_context

WORKED_EXAMPLE = (6, 5, 100, 46, 33, 6, 304)

# (stream1, stream2, case) for cells 1..6
CELL_FLAGS = {
    1: (True, True, False),
    2: (True, True, True),
    3: (True, False, False),
    4: (True, False, True),
    5: (False, True, False),
    6: (False, True, True),
}

ACCEPTANCE_LINES = []


@pytest.fixture
def worked_example():
    cells = CellCounts(*WORKED_EXAMPLE)
    return cells, design_context(cells)


def roster_from_cells(counts, x_of=None, include_unsampled=True):
    """Records realizing the given 7 cell counts.

    `x_of(cell, k)` supplies X for the k-th record of an observed cell.
    """
    records = []
    ids = itertools.count()
    for cell in range(1, 7):
        s1, s2, case = CELL_FLAGS[cell]
        for k in range(counts[cell - 1]):
            x = None if x_of is None else x_of(cell, k)
            records.append(IndividualRecord(next(ids), s1, s2, case, x))
    if include_unsampled:
        for _ in range(counts[6]):
            records.append(IndividualRecord(next(ids), False, False))
    return records


def record_acceptance(number, passed, detail):
    ACCEPTANCE_LINES.append(f"[{'PASS' if passed else 'FAIL'}] criterion {number}: {detail}")


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[2].rstrip(":"))):
            terminalreporter.write_line(line)
