"""Exact rational linear programming: two-phase tableau simplex with Bland's rule.

Variables are nonnegative.  Every number is a :class:`fractions.Fraction`,
so "feasible" means feasible, not "feasible up to a tolerance".
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional

from .errors import InternalError

LE, GE, EQ = "<=", ">=", "="


@dataclass
class LinearProgram:
    """``rows`` holds ``(coeffs, sense, rhs)`` with ``coeffs`` a sparse ``{var: value}`` map.

    ``objective`` (also sparse) is maximized; ``None`` asks for any feasible point.
    """

    n_vars: int
    rows: list = field(default_factory=list)
    objective: Optional[dict] = None

    def add(self, coeffs: dict, sense: str, rhs) -> None:
        if sense not in (LE, GE, EQ):
            raise ValueError(f"unknown sense {sense!r}")
        clean = {j: Fraction(c) for j, c in coeffs.items() if c}
        if any(not 0 <= j < self.n_vars for j in clean):
            raise ValueError("variable index out of range")
        self.rows.append((clean, sense, Fraction(rhs)))

    def satisfied_by(self, x) -> bool:
        if len(x) != self.n_vars or any(v < 0 for v in x):
            return False
        for coeffs, sense, rhs in self.rows:
            lhs = sum(c * x[j] for j, c in coeffs.items())
            if sense == LE and lhs > rhs or sense == GE and lhs < rhs or \
                    sense == EQ and lhs != rhs:
                return False
        return True


@dataclass(frozen=True)
class LpResult:
    feasible: bool
    x: Optional[tuple] = None
    value: Optional[Fraction] = None
    pivots: int = 0


class _Tableau:
    def __init__(self, rows, n_cols):
        self.rows = rows  # each row: list of Fractions, last entry is the rhs
        self.n_cols = n_cols
        self.basis = []
        self.pivots = 0

    def pivot(self, r: int, c: int, obj: list) -> None:
        self.pivots += 1
        row = self.rows[r]
        p = row[c]
        if p != 1:
            inv = 1 / p
            for j, v in enumerate(row):
                if v:
                    row[j] = v * inv
        nz = [j for j, v in enumerate(row) if v]
        for other in self.rows + [obj]:
            if other is row:
                continue
            f = other[c]
            if f:
                for j in nz:
                    other[j] -= f * row[j]
        self.basis[r] = c

    def optimize(self, obj: list, allowed) -> None:
        """Maximize with reduced-cost row ``obj`` (entries ``-c_j`` style: negative = improving)."""
        while True:
            enter = next((j for j in range(self.n_cols) if allowed[j] and obj[j] < 0), None)
            if enter is None:
                return
            best = None
            for i, row in enumerate(self.rows):
                a = row[enter]
                if a > 0:
                    ratio = row[-1] / a
                    key = (ratio, self.basis[i])
                    if best is None or key < best[0]:
                        best = (key, i)
            if best is None:
                raise InternalError("unbounded direction in a bounded program")
            self.pivot(best[1], enter, obj)


def solve_lp(lp: LinearProgram) -> LpResult:
    """Two-phase simplex.  Bland's rule (lowest index enters, lowest basic leaves) prevents cycling."""
    n = lp.n_vars
    m = len(lp.rows)
    n_slack = sum(1 for _, sense, _ in lp.rows if sense != EQ)
    art_start = n + n_slack
    rows = []
    basis = []
    slack = n
    artificial = []
    for coeffs, sense, rhs in lp.rows:
        sign = 1
        if rhs < 0:
            sign = -1
            sense = {LE: GE, GE: LE, EQ: EQ}[sense]
        row = [Fraction(0)] * (art_start + m + 1)
        for j, c in coeffs.items():
            row[j] = sign * c
        row[-1] = sign * rhs
        if sense == LE:
            row[slack] = Fraction(1)
            basis.append(slack)
            slack += 1
        else:
            if sense == GE:
                row[slack] = Fraction(-1)
                slack += 1
            a = art_start + len(artificial)
            row[a] = Fraction(1)
            artificial.append(a)
            basis.append(a)
        rows.append(row)
    n_cols = art_start + len(artificial)
    for row in rows:
        del row[n_cols:-1]
    tab = _Tableau(rows, n_cols)
    tab.basis = basis

    # Phase I: maximize -(sum of artificials).
    obj = [Fraction(0)] * (n_cols + 1)
    for a in artificial:
        obj[a] = Fraction(1)
    for i, b in enumerate(basis):
        if b >= art_start:
            for j in range(n_cols + 1):
                obj[j] -= rows[i][j]
    tab.optimize(obj, [True] * n_cols)
    if obj[-1] != 0:
        return LpResult(False, pivots=tab.pivots)

    # Drive remaining (zero-valued) artificials out of the basis.
    keep = []
    for i in range(len(tab.rows)):
        if tab.basis[i] >= art_start:
            col = next((j for j in range(art_start) if tab.rows[i][j] != 0), None)
            if col is None:
                continue  # redundant row
            tab.pivot(i, col, [Fraction(0)] * (n_cols + 1))
        keep.append(i)
    tab.rows = [tab.rows[i] for i in keep]
    tab.basis = [tab.basis[i] for i in keep]
    allowed = [j < art_start for j in range(n_cols)]

    if lp.objective:
        obj = [Fraction(0)] * (n_cols + 1)
        for j, c in lp.objective.items():
            obj[j] = -Fraction(c)
        for i, b in enumerate(tab.basis):
            f = obj[b]
            if f:
                for j in range(n_cols + 1):
                    obj[j] -= f * tab.rows[i][j]
        tab.optimize(obj, allowed)

    x = [Fraction(0)] * n
    for i, b in enumerate(tab.basis):
        if b < n:
            x[b] = tab.rows[i][-1]
    x = tuple(x)
    if not lp.satisfied_by(x):
        raise InternalError("simplex returned a point violating the program")
    value = None
    if lp.objective:
        value = sum(Fraction(c) * x[j] for j, c in lp.objective.items())
    return LpResult(True, x, value, tab.pivots)
