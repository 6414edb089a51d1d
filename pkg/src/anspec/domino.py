"""HV-domino constraint satisfaction: grid assignments under per-cell
horizontal and vertical pair constraints.

Indexing convention, shared with the line-gadget compiler: a[i][j] is read as
a_{i,j} with i the column inside a row-block (1..n) and j the row index
(1..n); H_{i,j} constrains (a_{i,j}, a_{i+1,j}) for i < n and V_{i,j}
constrains (a_{i,j}, a_{i,j+1}) for j < n.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

from anspec.core import BudgetExceeded, InputError, State

Grid = dict[tuple[int, int], State]  # keys (i, j), 1-based


@dataclass(frozen=True)
class HVDominoInstance:
    n: int
    alphabet: tuple[State, ...]
    horizontal: dict[tuple[int, int], frozenset[tuple[State, State]]]  # i < n
    vertical: dict[tuple[int, int], frozenset[tuple[State, State]]]    # j < n

    def __post_init__(self) -> None:
        if self.n < 1:
            raise InputError("grid size must be >= 1")
        universe = set(self.alphabet)
        for (i, j) in itertools.product(range(1, self.n + 1), repeat=2):
            if i < self.n and (i, j) not in self.horizontal:
                raise InputError(f"missing H constraint at ({i},{j})")
            if j < self.n and (i, j) not in self.vertical:
                raise InputError(f"missing V constraint at ({i},{j})")
        for table in (self.horizontal, self.vertical):
            for (i, j), pairs in table.items():
                if not (1 <= i <= self.n and 1 <= j <= self.n):
                    raise InputError(f"constraint index ({i},{j}) out of range")
                for a, b in pairs:
                    if a not in universe or b not in universe:
                        raise InputError(f"constraint pair ({a},{b}) outside alphabet")

    @staticmethod
    def permissive(n: int, alphabet: tuple[State, ...]) -> "HVDominoInstance":
        """All constraints equal to Q x Q."""
        full = frozenset(itertools.product(alphabet, repeat=2))
        h = {(i, j): full for i in range(1, n) for j in range(1, n + 1)}
        v = {(i, j): full for i in range(1, n + 1) for j in range(1, n)}
        return HVDominoInstance(n, alphabet, h, v)

    def with_constraint(self, kind: str, i: int, j: int,
                        pairs: frozenset[tuple[State, State]]) -> "HVDominoInstance":
        h = dict(self.horizontal)
        v = dict(self.vertical)
        if kind == "H":
            h[(i, j)] = pairs
        elif kind == "V":
            v[(i, j)] = pairs
        else:
            raise InputError(f"constraint kind must be H or V, got {kind!r}")
        return HVDominoInstance(self.n, self.alphabet, h, v)


def check(inst: HVDominoInstance, grid: Grid) -> bool:
    """Do all applicable H and V constraints hold for this assignment?"""
    n = inst.n
    cells = {(i, j) for i in range(1, n + 1) for j in range(1, n + 1)}
    if set(grid) != cells:
        raise InputError("assignment shape mismatch")
    for q in grid.values():
        if q not in inst.alphabet:
            raise InputError(f"assignment state {q!r} outside alphabet")
    for (i, j) in cells:
        if i < n and (grid[(i, j)], grid[(i + 1, j)]) not in inst.horizontal[(i, j)]:
            return False
        if j < n and (grid[(i, j)], grid[(i, j + 1)]) not in inst.vertical[(i, j)]:
            return False
    return True


def _cells_column_order(n: int) -> list[tuple[int, int]]:
    # Column-within-block first: (1,1), (2,1), ..., (n,1), (1,2), ...
    return [(i, j) for j in range(1, n + 1) for i in range(1, n + 1)]


def solve(inst: HVDominoInstance, method: str = "backtracking",
          budget: int = 2_000_000) -> Grid | None:
    """Find a satisfying assignment or return None (UNSAT).

    brute        : enumerate Q^(n^2) assignments (budget-refused when too big).
    backtracking : column-order variable selection with forward checking.
    """
    if method == "brute":
        total = len(inst.alphabet) ** (inst.n * inst.n)
        if total > budget:
            raise BudgetExceeded(f"{total} assignments exceed budget {budget}")
        cells = _cells_column_order(inst.n)
        for values in itertools.product(inst.alphabet, repeat=len(cells)):
            grid = dict(zip(cells, values))
            if check(inst, grid):
                return grid
        return None
    if method != "backtracking":
        raise InputError(f"unknown method {method!r}")

    n = inst.n
    cells = _cells_column_order(n)
    domains: dict[tuple[int, int], set[State]] = {c: set(inst.alphabet) for c in cells}
    grid: Grid = {}

    def neighbors_forward(cell: tuple[int, int]) -> list[tuple[tuple[int, int], frozenset, bool]]:
        i, j = cell
        out = []
        if i < n:
            out.append(((i + 1, j), inst.horizontal[(i, j)], True))
        if j < n:
            out.append(((i, j + 1), inst.vertical[(i, j)], True))
        return out

    def consistent(cell: tuple[int, int], q: State) -> bool:
        i, j = cell
        if i > 1 and (i - 1, j) in grid:
            if (grid[(i - 1, j)], q) not in inst.horizontal[(i - 1, j)]:
                return False
        if j > 1 and (i, j - 1) in grid:
            if (grid[(i, j - 1)], q) not in inst.vertical[(i, j - 1)]:
                return False
        return True

    def backtrack(k: int) -> bool:
        if k == len(cells):
            return True
        cell = cells[k]
        for q in sorted(domains[cell]):
            if not consistent(cell, q):
                continue
            grid[cell] = q
            removed: list[tuple[tuple[int, int], State]] = []
            dead = False
            for other, pairs, _ in neighbors_forward(cell):
                if other in grid:
                    continue
                for cand in list(domains[other]):
                    if (q, cand) not in pairs:
                        domains[other].discard(cand)
                        removed.append((other, cand))
                if not domains[other]:
                    dead = True
                    break
            if not dead and backtrack(k + 1):
                return True
            for other, cand in removed:
                domains[other].add(cand)
            del grid[cell]
        return False

    if backtrack(0):
        assert check(inst, grid)
        return dict(grid)
    return None
