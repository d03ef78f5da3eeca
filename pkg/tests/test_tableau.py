import random

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from anchorstream.tableau import (
    CellCounts,
    DesignError,
    IndividualRecord,
    cells_from_flags,
    design_context,
    tabulate,
    validate_design,
)

from conftest import WORKED_EXAMPLE, roster_from_cells


def test_worked_example_roster_round_trips():
    records = roster_from_cells(WORKED_EXAMPLE)
    cells, ctx = tabulate(records, 500)
    assert cells.as_tuple() == WORKED_EXAMPLE
    assert ctx.n_rs == 50
    assert ctx.psi == 0.1
    assert (ctx.n11, ctx.n10, ctx.n01) == (5, 46, 6)
    assert (ctx.n1_dot, ctx.n_dot1, ctx.n_rs_pos, ctx.n_c) == (51, 11, 11, 57)


def test_unsampled_records_may_be_omitted():
    records = roster_from_cells(WORKED_EXAMPLE, include_unsampled=False)
    cells, _ = tabulate(records, 500)
    assert cells.n7 == 304


def test_empty_roster():
    cells, ctx = tabulate([], 10)
    assert cells.as_tuple() == (0, 0, 0, 0, 0, 0, 10)
    assert ctx.n_rs == 0
    assert any("stream 2 sample is empty" in w for w in validate_design(cells, ctx))


def test_three_positive_double_captures():
    records = [IndividualRecord(i, True, True, True) for i in range(3)]
    cells, ctx = tabulate(records, 5)
    assert cells.n2 == 3 and cells.n7 == 2
    assert ctx.n_c == 3


def test_duplicate_id_rejected():
    records = [IndividualRecord(1, True, False, True), IndividualRecord(1, False, True, False)]
    with pytest.raises(DesignError, match="duplicate"):
        tabulate(records, 10)


def test_sampled_record_needs_case_status():
    with pytest.raises(DesignError, match="case status missing"):
        IndividualRecord("a", True, False)


def test_unsampled_record_cannot_carry_observations():
    with pytest.raises(DesignError):
        IndividualRecord("a", False, False, is_case=True)
    with pytest.raises(DesignError):
        IndividualRecord("a", False, False, x_value=1.0)


def test_too_many_sampled_records():
    records = [IndividualRecord(i, False, True, False) for i in range(4)]
    with pytest.raises(DesignError, match="exceed"):
        tabulate(records, 3)


def test_design_context_checks_total():
    with pytest.raises(DesignError, match="sum to"):
        design_context(CellCounts(*WORKED_EXAMPLE), 499)


def test_negative_cell_rejected():
    with pytest.raises(DesignError):
        CellCounts(1, 1, 1, 1, 1, -1, 1)


def test_validate_design_clean_on_worked_example(worked_example):
    assert validate_design(*worked_example) == []


def test_validate_design_flags_degenerate_tables():
    cells = CellCounts(3, 2, 5, 5, 0, 0, 10)
    assert any(w.startswith("Stream-2-only cell empty") for w in validate_design(cells, design_context(cells)))
    cells = CellCounts(0, 1, 5, 5, 0, 0, 10)
    assert any(w.startswith("FPC denominator zero") for w in validate_design(cells, design_context(cells)))


cell_tables = st.lists(st.integers(0, 12), min_size=7, max_size=7).filter(
    lambda c: c[0] + c[1] + c[4] + c[5] > 0)


@settings(max_examples=200, deadline=None)
@given(cell_tables, st.randoms(use_true_random=False))
def test_tabulate_partition_and_permutation(counts, rnd):
    records = roster_from_cells(counts)
    n_tot = sum(counts)
    cells, ctx = tabulate(records, n_tot)
    assert cells.total == n_tot
    assert cells.as_tuple() == tuple(counts)
    rnd.shuffle(records)
    assert tabulate(records, n_tot)[0] == cells
    assert ctx.psi * ctx.n_tot == pytest.approx(ctx.n_rs, abs=1e-9)
    assert ctx.n_rs == cells.n1 + cells.n2 + cells.n5 + cells.n6


def test_vectorised_tally_matches_records():
    rng = np.random.default_rng(3)
    for _ in range(50):
        n = 40
        s1, s2, case = rng.random(n) < 0.3, rng.random(n) < 0.4, rng.random(n) < 0.2
        records = [IndividualRecord(i, bool(a), bool(b), bool(c) if (a or b) else None)
                   for i, (a, b, c) in enumerate(zip(s1, s2, case))]
        random.Random(1).shuffle(records)
        assert cells_from_flags(s1, s2, case, n) == tabulate(records, n)[0]
