"""
Exact rational linear programming: a two-phase dense-tableau simplex over
fractions.Fraction with Bland's anti-cycling rule, plus exact Gaussian elimination.
All variables are nonnegative.
"""

import logging
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Dict, List, Optional, Sequence, Tuple

logger = logging.getLogger(__name__)

ZERO = Fraction(0)

OPTIMAL = "optimal"
INFEASIBLE = "infeasible"
UNBOUNDED = "unbounded"

SENSES = ("<=", ">=", "==")


@dataclass(frozen=True)
class LPResult:
    status: str
    value: Optional[Fraction] = None
    x: List[Fraction] = field(default_factory=list)

    @property
    def optimal(self) -> bool:
        return self.status == OPTIMAL


class LinearProgram:
    """Constraints over nonnegative variables x_0..x_{n-1}; objectives are solved exactly"""

    def __init__(self, num_vars: int = 0):
        self.num_vars = num_vars
        self.rows: List[Tuple[Dict[int, Fraction], str, Fraction]] = []

    def new_var(self) -> int:
        self.num_vars += 1
        return self.num_vars - 1

    def add(self, coeffs: Dict[int, Fraction], sense: str, rhs) -> None:
        if sense not in SENSES:
            raise ValueError(f"Unknown constraint sense '{sense}'")
        for j in coeffs:
            if not 0 <= j < self.num_vars:
                raise IndexError(f"Variable {j} is not defined")
        cleaned = {j: Fraction(c) for j, c in coeffs.items() if c != 0}
        self.rows.append((cleaned, sense, Fraction(rhs)))

    def copy(self) -> "LinearProgram":
        other = LinearProgram(self.num_vars)
        other.rows = list(self.rows)
        return other

    def maximize(self, objective: Dict[int, Fraction]) -> LPResult:
        return _solve(self, {j: Fraction(c) for j, c in objective.items()})

    def minimize(self, objective: Dict[int, Fraction]) -> LPResult:
        result = _solve(self, {j: -Fraction(c) for j, c in objective.items()})
        if result.optimal:
            return LPResult(OPTIMAL, -result.value, result.x)
        return result

    def feasible(self) -> bool:
        return _solve(self, {}).optimal


def _pivot(tableau: List[List[Fraction]], basis: List[int], row: int, col: int) -> None:
    pivot_row = tableau[row]
    inv = 1 / pivot_row[col]
    support = [j for j, v in enumerate(pivot_row) if v]
    for j in support:
        pivot_row[j] *= inv
    for i, other in enumerate(tableau):
        if i == row:
            continue
        factor = other[col]
        if factor:
            for j in support:
                other[j] -= factor * pivot_row[j]
    basis[row] = col


def _simplex(
    tableau: List[List[Fraction]], basis: List[int], cost: List[Fraction], allowed: Sequence[bool]
) -> str:
    """Maximise cost.x from a canonical basis; Bland's rule on entering and leaving columns"""
    width = len(cost)
    while True:
        entering = None
        for j in range(width):
            if not allowed[j] or j in basis:
                continue
            reduced = cost[j] - sum((cost[b] * tableau[i][j] for i, b in enumerate(basis)), ZERO)
            if reduced > 0:
                entering = j
                break
        if entering is None:
            return OPTIMAL
        leaving = None
        best = None
        for i, row in enumerate(tableau):
            if row[entering] > 0:
                ratio = row[-1] / row[entering]
                if best is None or ratio < best or (ratio == best and basis[i] < basis[leaving]):
                    best, leaving = ratio, i
        if leaving is None:
            return UNBOUNDED
        _pivot(tableau, basis, leaving, entering)


def _solve(lp: LinearProgram, objective: Dict[int, Fraction]) -> LPResult:
    n = lp.num_vars
    rows = []
    for coeffs, sense, rhs in lp.rows:
        if rhs < 0:
            coeffs = {j: -c for j, c in coeffs.items()}
            rhs = -rhs
            sense = {"<=": ">=", ">=": "<=", "==": "=="}[sense]
        rows.append((coeffs, sense, rhs))

    num_slack = sum(1 for _, sense, _ in rows if sense != "==")
    num_art = sum(1 for _, sense, _ in rows if sense != "<=")
    width = n + num_slack + num_art
    tableau: List[List[Fraction]] = []
    basis: List[int] = []
    artificial = [False] * width
    slack_col = n
    art_col = n + num_slack
    for coeffs, sense, rhs in rows:
        row = [ZERO] * (width + 1)
        for j, c in coeffs.items():
            row[j] = c
        row[-1] = rhs
        if sense == "<=":
            row[slack_col] = Fraction(1)
            basis.append(slack_col)
            slack_col += 1
        else:
            if sense == ">=":
                row[slack_col] = Fraction(-1)
                slack_col += 1
            row[art_col] = Fraction(1)
            artificial[art_col] = True
            basis.append(art_col)
            art_col += 1
        tableau.append(row)

    if num_art:
        phase_one = [Fraction(-1) if artificial[j] else ZERO for j in range(width)]
        _simplex(tableau, basis, phase_one, [True] * width)
        infeasibility = sum((tableau[i][-1] for i, b in enumerate(basis) if artificial[b]), ZERO)
        if infeasibility > 0:
            return LPResult(INFEASIBLE)
        # drive zero-level artificials out of the basis; rows with no other support are redundant
        i = 0
        while i < len(tableau):
            if artificial[basis[i]]:
                col = next(
                    (j for j in range(width) if not artificial[j] and tableau[i][j] != 0), None
                )
                if col is None:
                    del tableau[i]
                    del basis[i]
                    continue
                _pivot(tableau, basis, i, col)
            i += 1

    cost = [objective.get(j, ZERO) if j < n else ZERO for j in range(width)]
    status = _simplex(tableau, basis, cost, [not a for a in artificial])
    if status == UNBOUNDED:
        return LPResult(UNBOUNDED)
    x = [ZERO] * n
    for i, b in enumerate(basis):
        if b < n:
            x[b] = tableau[i][-1]
    value = sum((objective.get(j, ZERO) * x[j] for j in range(n)), ZERO)
    return LPResult(OPTIMAL, value, x)


def solve_linear_system(
    matrix: Sequence[Sequence[Fraction]], rhs: Sequence[Fraction]
) -> Optional[List[Fraction]]:
    """Unique solution of a square-or-tall system by exact elimination, None when singular or inconsistent"""
    rows = [list(map(Fraction, r)) + [Fraction(b)] for r, b in zip(matrix, rhs)]
    if not rows:
        return []
    cols = len(rows[0]) - 1
    pivot_row = 0
    for col in range(cols):
        found = next((r for r in range(pivot_row, len(rows)) if rows[r][col] != 0), None)
        if found is None:
            return None
        rows[pivot_row], rows[found] = rows[found], rows[pivot_row]
        inv = 1 / rows[pivot_row][col]
        rows[pivot_row] = [v * inv for v in rows[pivot_row]]
        for r in range(len(rows)):
            if r != pivot_row and rows[r][col] != 0:
                factor = rows[r][col]
                rows[r] = [a - factor * b for a, b in zip(rows[r], rows[pivot_row])]
        pivot_row += 1
    if any(row[-1] != 0 for row in rows[pivot_row:]):
        return None
    return [rows[i][-1] for i in range(cols)]
