"""Individual records, their reduction to the seven design cells, and design checks.

Cell layout (``n1`` .. ``n7``)::

    n1  both streams, negative         n2  both streams, positive
    n3  stream 1 only, negative        n4  stream 1 only, positive
    n5  stream 2 only, negative        n6  stream 2 only, positive
    n7  not sampled in either stream

Stream 2 is the random "anchor" sample; stream 1 is voluntary testing.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Hashable, Iterable, Optional, Sequence

import numpy as np

__all__ = [
    "DesignError",
    "IndividualRecord",
    "CellCounts",
    "DesignContext",
    "design_context",
    "cells_from_flags",
    "tabulate",
    "validate_design",
]


class DesignError(ValueError):
    """Input violates the anchor-stream design or an estimator precondition."""


@dataclass(frozen=True)
class IndividualRecord:
    """One member of the enumerated population.

    ``is_case`` is required for anyone tested in either stream and must be
    left as ``None`` for people who were never sampled, since their status
    is unobserved. The same observability rule applies to ``x_value``.
    """

    id: Hashable
    in_stream1: bool
    in_stream2: bool
    is_case: Optional[bool] = None
    x_value: Optional[float] = None

    def __post_init__(self):
        if self.sampled:
            if self.is_case is None:
                raise DesignError(f"record {self.id!r}: case status missing on a sampled record")
        else:
            if self.is_case is not None:
                raise DesignError(f"record {self.id!r}: case status given for an unsampled record")
            if self.x_value is not None:
                raise DesignError(f"record {self.id!r}: x_value given for an unsampled record")

    @property
    def sampled(self) -> bool:
        return bool(self.in_stream1 or self.in_stream2)

    @property
    def cell(self) -> int:
        """Cell index 1..7 of this record."""
        if not self.sampled:
            return 7
        base = 1 if self.in_stream1 and self.in_stream2 else 3 if self.in_stream1 else 5
        return base + int(bool(self.is_case))


@dataclass(frozen=True)
class CellCounts:
    n1: int
    n2: int
    n3: int
    n4: int
    n5: int
    n6: int
    n7: int

    def __post_init__(self):
        for name, value in zip(("n1", "n2", "n3", "n4", "n5", "n6", "n7"), self.as_tuple()):
            if int(value) != value or value < 0:
                raise DesignError(f"{name} must be a non-negative integer, got {value!r}")

    @classmethod
    def from_sequence(cls, values: Sequence[int]) -> "CellCounts":
        if len(values) != 7:
            raise DesignError(f"expected 7 cell counts, got {len(values)}")
        return cls(*(int(v) for v in values))

    def as_tuple(self) -> tuple:
        return (self.n1, self.n2, self.n3, self.n4, self.n5, self.n6, self.n7)

    @property
    def total(self) -> int:
        return sum(self.as_tuple())

    # capture-recapture notation for the case cells
    @property
    def n11(self) -> int:
        return self.n2

    @property
    def n10(self) -> int:
        return self.n4

    @property
    def n01(self) -> int:
        return self.n6

    @property
    def n_c(self) -> int:
        """Distinct cases identified by either stream."""
        return self.n2 + self.n4 + self.n6


@dataclass(frozen=True)
class DesignContext:
    """Population size and the stream-2 sampling rate it implies.

    Build it with :func:`design_context`; ``psi`` is always ``n_rs / n_tot``.
    """

    n_tot: int
    n_rs: int
    n11: int
    n10: int
    n01: int
    n_rs_pos: int

    @property
    def psi(self) -> float:
        return self.n_rs / self.n_tot

    @property
    def n1_dot(self) -> int:
        return self.n11 + self.n10

    @property
    def n_dot1(self) -> int:
        return self.n11 + self.n01

    @property
    def n_c(self) -> int:
        return self.n11 + self.n10 + self.n01


def design_context(cells: CellCounts, n_tot: Optional[int] = None) -> DesignContext:
    """Derive the design context from cell counts.

    If `n_tot` is given it must equal the sum of the seven cells. An empty
    stream-2 sample is allowed here (``psi == 0``); the estimators that
    need one reject it.
    """
    total = cells.total
    if n_tot is not None and int(n_tot) != total:
        raise DesignError(f"cell counts sum to {total}, but n_tot = {n_tot}")
    if total <= 0:
        raise DesignError("population is empty")
    n_rs = cells.n1 + cells.n2 + cells.n5 + cells.n6
    return DesignContext(
        n_tot=total,
        n_rs=n_rs,
        n11=cells.n2,
        n10=cells.n4,
        n01=cells.n6,
        n_rs_pos=cells.n2 + cells.n6,
    )


def cells_from_flags(in_stream1, in_stream2, is_case, n_tot: int) -> CellCounts:
    """Vectorised tally from boolean arrays over the sampled individuals.

    Rows with neither stream flag set are ignored (they fall into ``n7``),
    so full-population arrays may be passed as well.
    """
    s1 = np.asarray(in_stream1, dtype=bool)
    s2 = np.asarray(in_stream2, dtype=bool)
    case = np.asarray(is_case, dtype=bool)
    code = np.where(s1 & s2, 1, np.where(s1, 3, np.where(s2, 5, 7))) + (case & (s1 | s2))
    counts = np.bincount(code, minlength=9)[1:8]
    observed = int(counts[:6].sum())
    if observed > n_tot:
        raise DesignError(f"{observed} sampled records exceed n_tot = {n_tot}")
    return CellCounts(*(int(c) for c in counts[:6]), n_tot - observed)


def tabulate(records: Iterable[IndividualRecord], n_tot: int):
    """Reduce records to ``(CellCounts, DesignContext)``.

    Unsampled records may be included or omitted; ``n7`` is always
    ``n_tot`` minus the six observed cells.
    """
    seen = set()
    counts = [0] * 7
    for rec in records:
        if rec.id in seen:
            raise DesignError(f"duplicate record id {rec.id!r}")
        seen.add(rec.id)
        if rec.sampled and rec.is_case is None:
            raise DesignError(f"record {rec.id!r}: case status missing on a sampled record")
        counts[rec.cell - 1] += 1
    observed = sum(counts[:6])
    if observed > n_tot:
        raise DesignError(f"{observed} sampled records exceed n_tot = {n_tot}")
    counts[6] = n_tot - observed
    cells = CellCounts(*counts)
    return cells, design_context(cells, n_tot)


def validate_design(cells: CellCounts, ctx: DesignContext) -> list:
    """Advisory warnings for configurations some estimators will reject."""
    warnings = []
    if ctx.n_rs == 0:
        warnings.append("stream 2 sample is empty (n_rs = 0); only the Chapman estimator is defined")
    if cells.n5 + cells.n6 == 0:
        warnings.append("Stream-2-only cell empty; psi-star estimator undefined")
    if ctx.n_rs <= 1:
        warnings.append("FPC denominator zero; stream-2 variance undefined (n_rs <= 1)")
    if ctx.n01 == 0:
        warnings.append("no Stream-2-only cases (n01 = 0); psi-estimator variance is zero")
    return warnings
