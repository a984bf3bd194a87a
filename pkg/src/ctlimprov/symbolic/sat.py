"""SAT back ends: a built-in DPLL solver and an external DIMACS solver process.

Both implement :class:`SatOracle`: ``solve(n_vars, clauses)`` returns ``None``
for UNSAT or a model as a list ``model[v]`` of booleans indexed from 1.
"""

from __future__ import annotations

import os
import shlex
import subprocess
import tempfile
from typing import Optional, Protocol, Sequence

from ..errors import ImprovError

SOLVER_ENV = "CI_SAT_SOLVER"


class SatOracle(Protocol):
    def solve(self, n_vars: int, clauses: Sequence[Sequence[int]]) -> Optional[list]: ...


class SolverError(ImprovError):
    pass


class DpllSolver:
    """Complete DPLL with two watched literals and chronological backtracking.

    Meant for desk-scale formulas (tens to a few hundred variables).  The
    branching order is fixed (lowest unassigned variable, false first) so
    models are reproducible.
    """

    def __init__(self):
        self.calls = 0

    def solve(self, n_vars: int, clauses) -> Optional[list]:
        self.calls += 1
        value = [None] * (n_vars + 1)  # None / True / False per variable
        watches = {}
        units = []
        cls = []
        for clause in clauses:
            clause = list(dict.fromkeys(clause))
            if any(-lit in clause for lit in clause):
                continue
            if not clause:
                return None
            if len(clause) == 1:
                units.append(clause[0])
                continue
            idx = len(cls)
            cls.append(clause)
            watches.setdefault(clause[0], []).append(idx)
            watches.setdefault(clause[1], []).append(idx)

        trail = []

        def lit_value(lit):
            v = value[abs(lit)]
            if v is None:
                return None
            return v if lit > 0 else not v

        def assign(lit):
            value[abs(lit)] = lit > 0
            trail.append(lit)

        def propagate(start):
            """Unit propagation from trail position ``start``; False on conflict."""
            head = start
            while head < len(trail):
                false_lit = -trail[head]
                head += 1
                watching = watches.get(false_lit)
                if not watching:
                    continue
                keep = []
                conflict = False
                for idx in watching:
                    if conflict:
                        keep.append(idx)
                        continue
                    clause = cls[idx]
                    if clause[0] == false_lit:
                        clause[0], clause[1] = clause[1], clause[0]
                    if lit_value(clause[0]) is True:
                        keep.append(idx)
                        continue
                    for k in range(2, len(clause)):
                        if lit_value(clause[k]) is not False:
                            clause[1], clause[k] = clause[k], clause[1]
                            watches.setdefault(clause[1], []).append(idx)
                            break
                    else:
                        keep.append(idx)
                        other = lit_value(clause[0])
                        if other is False:
                            conflict = True
                        elif other is None:
                            assign(clause[0])
                watches[false_lit] = keep
                if conflict:
                    return False
            return True

        for lit in units:
            current = lit_value(lit)
            if current is False:
                return None
            if current is None:
                assign(lit)
        if not propagate(0):
            return None

        # Decision stack entries: (trail length before decision, literal, flipped?)
        decisions = []
        next_var = 1
        while True:
            while next_var <= n_vars and value[next_var] is not None:
                next_var += 1
            if next_var > n_vars:
                return [False] + [bool(v) for v in value[1:]]
            decisions.append((len(trail), -next_var, False, next_var))
            assign(-next_var)
            ok = propagate(len(trail) - 1)
            while not ok:
                while decisions and decisions[-1][2]:
                    decisions.pop()
                if not decisions:
                    return None
                mark, lit, _, var = decisions.pop()
                for undone in trail[mark:]:
                    value[abs(undone)] = None
                del trail[mark:]
                next_var = var
                decisions.append((mark, -lit, True, var))
                assign(-lit)
                ok = propagate(len(trail) - 1)


def write_dimacs(n_vars: int, clauses, fh, comments=()) -> None:
    for line in comments:
        fh.write(f"c {line}\n")
    clauses = list(clauses)
    fh.write(f"p cnf {n_vars} {len(clauses)}\n")
    for clause in clauses:
        fh.write(" ".join(str(l) for l in clause) + " 0\n")


class ExternalSolver:
    """Runs a SAT solver executable on a DIMACS file.

    The solver must follow the competition output convention: an
    ``s SATISFIABLE``/``s UNSATISFIABLE`` line and ``v`` lines with the model.
    """

    def __init__(self, command: str, timeout: Optional[float] = None):
        self.argv = shlex.split(command)
        if not self.argv:
            raise SolverError("empty solver command")
        self.timeout = timeout
        self.calls = 0

    def solve(self, n_vars: int, clauses) -> Optional[list]:
        self.calls += 1
        with tempfile.NamedTemporaryFile("w", suffix=".cnf", delete=False) as fh:
            write_dimacs(n_vars, clauses, fh)
            path = fh.name
        try:
            proc = subprocess.run(self.argv + [path], capture_output=True, text=True,
                                  timeout=self.timeout)
        except (OSError, subprocess.TimeoutExpired) as exc:
            raise SolverError(f"solver {self.argv[0]!r} failed: {exc}") from exc
        finally:
            os.unlink(path)
        status = None
        lits = []
        for line in proc.stdout.splitlines():
            parts = line.split()
            if not parts:
                continue
            if parts[0] == "s":
                status = " ".join(parts[1:])
            elif parts[0] == "v":
                lits.extend(int(t) for t in parts[1:])
        if status == "UNSATISFIABLE":
            return None
        if status != "SATISFIABLE":
            raise SolverError(f"solver gave no verdict (exit {proc.returncode}): "
                              f"{proc.stderr.strip()[:200]}")
        model = [False] * (n_vars + 1)
        for lit in lits:
            if lit and abs(lit) <= n_vars:
                model[abs(lit)] = lit > 0
        return model


def default_oracle() -> SatOracle:
    """External solver when ``CI_SAT_SOLVER`` is set, the built-in DPLL otherwise."""
    command = os.environ.get(SOLVER_ENV)
    if command:
        return ExternalSolver(command)
    return DpllSolver()


def check_model(clauses, model) -> bool:
    return all(any(model[abs(l)] == (l > 0) for l in clause) for clause in clauses)
