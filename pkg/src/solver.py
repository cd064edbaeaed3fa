from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

from pysat.card import CardEnc, EncType
from pysat.solvers import Solver

from src.config import Config
from src.errors import SolverBudgetExceeded, TSFormatError, UnsatisfiableError


# Literals are signed ints: +v means variable v is true, -v means false.
Clause = tuple[int, ...]

SOLVER_NAME = "glucose4"


@dataclass
class Formula:
    """
    A CNF formula. Variables are numbered 1..num_vars.
    """
    clauses: list[Clause] = field(default_factory=list)
    num_vars: int = 0
    has_empty_clause: bool = False

    def new_var(self) -> int:
        self.num_vars += 1
        return self.num_vars

    def add_clause(self, literals: Iterable[int]) -> None:
        """
        Add a clause. Duplicate literals are dropped, tautologies are skipped,
        and an empty clause marks the formula unsatisfiable.
        """
        clause: list[int] = []
        for lit in literals:
            if lit == 0:
                raise ValueError("literal 0 is not allowed")
            if -lit in clause:
                return
            if lit not in clause:
                clause.append(lit)
            self.num_vars = max(self.num_vars, abs(lit))
        if not clause:
            self.has_empty_clause = True
        self.clauses.append(tuple(clause))

    def copy(self) -> "Formula":
        return Formula(list(self.clauses), self.num_vars, self.has_empty_clause)


@dataclass(frozen=True)
class Model:
    assignment: dict[int, bool]

    def value(self, lit: int) -> bool:
        v = self.assignment.get(abs(lit), False)
        return v if lit > 0 else not v

    def satisfies(self, formula: Formula) -> bool:
        if formula.has_empty_clause:
            return False
        return all(any(self.value(lit) for lit in clause) for clause in formula.clauses)

    def count_true(self, literals: Iterable[int]) -> int:
        return sum(1 for lit in literals if self.value(lit))


def solve(formula: Formula, budget: int | None = None) -> Model | None:
    """
    Run Glucose 4 on the formula.

    Returns None when unsatisfiable. More than `budget` conflicts raises
    SolverBudgetExceeded. Variables the solver leaves out of its model are
    reported as false.
    """
    budget = budget if budget is not None else Config().solver_budget
    if formula.has_empty_clause:
        return None

    with Solver(name=SOLVER_NAME, bootstrap_with=[list(c) for c in formula.clauses]) as solver:
        solver.conf_budget(budget)
        status = solver.solve_limited()
        if status is None:
            raise SolverBudgetExceeded(f"solver gave up after {budget} conflicts")
        if not status:
            return None
        model = solver.get_model() or []

    assignment = {v: False for v in range(1, formula.num_vars + 1)}
    for lit in model:
        if abs(lit) in assignment:
            assignment[abs(lit)] = lit > 0
    return Model(assignment)


def add_at_most_k(formula: Formula, literals: Sequence[int], k: int) -> Formula:
    """
    Return a copy of `formula` that also says: at most k of `literals` are true.

    Sequential counter encoding, fresh variables numbered after the
    formula's own.
    """
    if k < 0:
        raise ValueError("k must be >= 0")
    out = formula.copy()
    lits = list(literals)
    if k >= len(lits):
        return out
    if k == 0:
        for lit in lits:
            out.add_clause([-lit])
        return out

    cnf = CardEnc.atmost(lits=lits, bound=k, top_id=out.num_vars, encoding=EncType.seqcounter)
    for clause in cnf.clauses:
        out.add_clause(clause)
    out.num_vars = max(out.num_vars, cnf.nv)
    return out


@dataclass(frozen=True)
class MinimizeResult:
    """
    model: an optimal model (original variables only)
    count: number of true literals in it
    unsat_below: True once "at most count-1" was shown unsatisfiable
                 (or count is 0)
    """
    model: Model
    count: int
    unsat_below: bool


def minimize_true_count(
    formula: Formula,
    literals: Sequence[int],
    budget: int | None = None,
) -> MinimizeResult:
    """
    Find a model with as few true `literals` as possible.

    Binary search on the bound k, each probe a SAT call on
    add_at_most_k(formula, literals, k).
    """
    first = solve(formula, budget)
    if first is None:
        raise UnsatisfiableError("formula has no model")

    best = first
    lo, hi = 0, first.count_true(literals)
    proved_below = hi == 0
    while lo < hi:
        mid = (lo + hi) // 2
        model = solve(add_at_most_k(formula, literals, mid), budget)
        if model is None:
            lo = mid + 1
            proved_below = True
        else:
            best = model
            hi = model.count_true(literals)

    original = Model({v: best.assignment.get(v, False) for v in range(1, formula.num_vars + 1)})
    return MinimizeResult(original, hi, proved_below or hi == 0)


def check_certificate(
    formula: Formula,
    literals: Sequence[int],
    result: MinimizeResult,
    budget: int | None = None,
) -> bool:
    """
    Re-check an optimum: SAT at `count`, UNSAT at `count - 1`.
    """
    if not result.model.satisfies(formula):
        return False
    if result.model.count_true(literals) != result.count:
        return False
    if result.count == 0:
        return True
    return solve(add_at_most_k(formula, literals, result.count - 1), budget) is None


# ---------------------------------------------------------------------------
# DIMACS


def to_dimacs(formula: Formula) -> str:
    clauses = list(formula.clauses)
    lines = [f"p cnf {formula.num_vars} {len(clauses)}"]
    lines += [" ".join(str(lit) for lit in clause) + " 0" for clause in clauses]
    return "\n".join(lines) + "\n"


def parse_dimacs(text: str) -> Formula:
    formula = Formula()
    declared_vars: int | None = None
    current: list[int] = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("c") or line.startswith("%"):
            continue
        if line.startswith("p"):
            parts = line.split()
            if len(parts) != 4 or parts[1] != "cnf":
                raise TSFormatError(lineno, line, "expected 'p cnf <vars> <clauses>'")
            try:
                declared_vars = int(parts[2])
                int(parts[3])
            except ValueError:
                raise TSFormatError(lineno, line, "header counts must be integers")
            continue
        if declared_vars is None:
            raise TSFormatError(lineno, line, "clause before 'p cnf' header")
        for token in line.split():
            try:
                lit = int(token)
            except ValueError:
                raise TSFormatError(lineno, token, "bad literal")
            if lit == 0:
                formula.add_clause(current)
                current = []
            else:
                if abs(lit) > declared_vars:
                    raise TSFormatError(lineno, token, "variable above header count")
                current.append(lit)
    if current:
        formula.add_clause(current)
    formula.num_vars = max(formula.num_vars, declared_vars or 0)
    return formula
