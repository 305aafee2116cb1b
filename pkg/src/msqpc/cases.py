"""Per-particle case table: preparation basis x user mode x TP2 mode."""
from __future__ import annotations

import enum

from .qudit import Basis


class Mode(enum.IntEnum):
    REFLECT = 0
    MEASURE = 1


class Case(enum.IntEnum):
    CASE1 = 1
    CASE2 = 2
    CASE3 = 3
    CASE4 = 4
    CASE5 = 5
    CASE6 = 6
    CASE7 = 7
    CASE8 = 8

    @property
    def ignored(self) -> bool:
        return self in (Case.CASE5, Case.CASE6, Case.CASE7)

    @property
    def tp1_basis(self) -> Basis | None:
        """Basis TP1 uses on the returned particle, or None when ignored."""
        if self.ignored:
            return None
        return Basis.T2 if self is Case.CASE2 else Basis.T1


class CheckRole(enum.Enum):
    STEP4_CHECK = "step4-check"
    STEP5_CHECK = "step5-check"
    COMPARISON = "comparison"
    IGNORED = "ignored"
    # Case-8 surplus beyond the 2L that the check and comparison sets use
    UNUSED = "unused"


CASE_TABLE = {
    (Basis.T1, Mode.REFLECT, Mode.REFLECT): Case.CASE1,
    (Basis.T2, Mode.REFLECT, Mode.REFLECT): Case.CASE2,
    (Basis.T1, Mode.MEASURE, Mode.REFLECT): Case.CASE3,
    (Basis.T1, Mode.REFLECT, Mode.MEASURE): Case.CASE4,
    (Basis.T2, Mode.REFLECT, Mode.MEASURE): Case.CASE5,
    (Basis.T2, Mode.MEASURE, Mode.REFLECT): Case.CASE6,
    (Basis.T2, Mode.MEASURE, Mode.MEASURE): Case.CASE7,
    (Basis.T1, Mode.MEASURE, Mode.MEASURE): Case.CASE8,
}


def classify_case(prep_basis: Basis, r: Mode, v: Mode) -> Case:
    return CASE_TABLE[Basis(prep_basis), Mode(r), Mode(v)]


def scenario_of(case: Case) -> tuple[Basis, Mode, Mode]:
    for key, value in CASE_TABLE.items():
        if value is case:
            return key
    raise KeyError(case)


class ChannelSegment(enum.Enum):
    """The three quantum transmissions of one particle, in wire order."""

    TP1_TO_PN = "tp1-pn"
    PN_TO_TP2 = "pn-tp2"
    TP2_TO_TP1 = "tp2-tp1"

    @property
    def order(self) -> int:
        return _SEGMENT_ORDER[self]


_SEGMENT_ORDER = {ChannelSegment.TP1_TO_PN: 0, ChannelSegment.PN_TO_TP2: 1, ChannelSegment.TP2_TO_TP1: 2}
