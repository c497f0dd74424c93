"""The four-state gate example: a start cell, a gate cell, a goal and a wall.

Cells: ``0`` start, ``1`` gate, ``2`` goal, ``3`` wall (goal and wall are
absorbing). One input, forward. From the gate, moving forward may hit the
wall until more data rules that out.
"""
from __future__ import annotations

from .abstraction import ApproxTable

START, GATE, GOAL, WALL = 0, 1, 2, 3
FORWARD = 0
B = frozenset({GOAL})


def gate_tables() -> tuple[ApproxTable, ApproxTable]:
    """(initial table, table after the wall is ruled out from the gate)."""
    before = ApproxTable(4, 1, absorbing={GOAL, WALL})
    before.set_entry(START, FORWARD, {GATE}, {START, GATE})
    before.set_entry(GATE, FORWARD, {GOAL}, {GATE, GOAL, WALL}, slots=[GATE, WALL])
    after = before.copy()
    after.refine(GATE, FORWARD, {GOAL}, {GATE, GOAL})
    return before, after
