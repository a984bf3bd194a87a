"""Symbolic specifications: CNF formulas with a projected word vector.

A :class:`SymbolicSpec` describes the fixed-length language
``{w : exists a. phi(w, a)}`` where ``w`` is the first ``n*k`` projected
variables (``k`` bits per symbol, most significant bit first) and every
other variable is an existentially quantified auxiliary.
"""

from __future__ import annotations

import io
import itertools
import math
from dataclasses import dataclass
from typing import Optional

from ..automata import Dfa
from ..errors import CapExceeded, ShapeMismatch, SpecParseError, UnknownSymbol
from .sat import DpllSolver, SatOracle, write_dimacs

XOR_CHUNK = 4  # literals per parity constraint after chunking


@dataclass(frozen=True)
class SymbolicSpec:
    k: int
    n: int
    n_vars: int
    clauses: tuple
    projected: tuple = None
    symbols: tuple = None  # symbol token per code; defaults to k-bit strings

    def __post_init__(self):
        object.__setattr__(self, "clauses", tuple(tuple(c) for c in self.clauses))
        if self.k < 1 or self.n < 0:
            raise ValueError("need k >= 1 and n >= 0")
        if self.projected is None:
            object.__setattr__(self, "projected", tuple(range(1, self.n * self.k + 1)))
        object.__setattr__(self, "projected", tuple(self.projected))
        if len(self.projected) != self.n * self.k:
            raise ShapeMismatch(f"expected {self.n * self.k} projected variables, "
                                f"got {len(self.projected)}")
        if len(set(self.projected)) != len(self.projected):
            raise ValueError("projected variables repeat")
        top = max([self.n_vars] + [abs(l) for c in self.clauses for l in c]
                  + list(self.projected))
        object.__setattr__(self, "n_vars", top)
        if self.symbols is None:
            object.__setattr__(self, "symbols", tuple(
                format(c, f"0{self.k}b") for c in range(2 ** self.k)))
        object.__setattr__(self, "symbols", tuple(self.symbols))
        if len(self.symbols) > 2 ** self.k:
            raise ValueError("more symbols than codes")

    @property
    def aux(self) -> tuple:
        proj = set(self.projected)
        return tuple(v for v in range(1, self.n_vars + 1) if v not in proj)

    def decode(self, bits) -> tuple:
        """Projected bit vector (word order) to a word of symbol tokens."""
        word = []
        for t in range(self.n):
            code = 0
            for b in bits[t * self.k:(t + 1) * self.k]:
                code = code * 2 + int(b)
            if code >= len(self.symbols):
                raise UnknownSymbol(code)
            word.append(self.symbols[code])
        return tuple(word)

    def encode(self, word) -> tuple:
        word = tuple(word)
        if len(word) != self.n:
            raise ShapeMismatch(f"word length {len(word)} differs from n={self.n}")
        index = {s: i for i, s in enumerate(self.symbols)}
        bits = []
        for s in word:
            if s not in index:
                raise UnknownSymbol(s)
            bits.extend(int(b) for b in format(index[s], f"0{self.k}b"))
        return tuple(bits)

    def word_units(self, word) -> list:
        """Unit clauses fixing the projected vector to ``word``."""
        return [[v if b else -v] for v, b in zip(self.projected, self.encode(word))]

    def symbol_clauses(self) -> list:
        """Clauses forbidding codes that have no symbol attached."""
        out = []
        for t in range(self.n):
            block = self.projected[t * self.k:(t + 1) * self.k]
            for code in range(len(self.symbols), 2 ** self.k):
                bits = format(code, f"0{self.k}b")
                out.append([-v if b == "1" else v for v, b in zip(block, bits)])
        return out


@dataclass(frozen=True)
class SymbolicAutomaton:
    """State bits ``x = 1..m``, input bits ``c = m+1..m+k``, next state ``y = m+k+1..2m+k``.

    ``init`` and ``acc`` mention ``x`` only (higher indices are local
    auxiliaries); ``delta`` mentions ``x, c, y`` plus its own auxiliaries
    above ``2m+k``.  Auxiliaries are renamed apart at every use.
    """

    m: int
    k: int
    init: tuple
    acc: tuple
    delta: tuple
    symbols: tuple = None

    def __post_init__(self):
        for name in ("init", "acc", "delta"):
            object.__setattr__(self, name, tuple(tuple(c) for c in getattr(self, name)))
        if self.symbols is not None:
            object.__setattr__(self, "symbols", tuple(self.symbols))


class _Fresh:
    def __init__(self, start: int):
        self.top = start

    def new(self) -> int:
        self.top += 1
        return self.top


def _instantiate(clauses, mapping: dict, local_from: int, fresh: _Fresh) -> list:
    """Rename variables via ``mapping``; variables above ``local_from`` get fresh ids."""
    local = {}
    out = []
    for clause in clauses:
        new = []
        for lit in clause:
            v = abs(lit)
            if v <= local_from:
                w = mapping[v]
            else:
                if v not in local:
                    local[v] = fresh.new()
                w = local[v]
            new.append(w if lit > 0 else -w)
        out.append(new)
    return out


def unroll(a: SymbolicAutomaton, n: int) -> SymbolicSpec:
    """Accepting runs of length ``n``: ``init(x0) & delta(x_t, c_t, x_t+1) & acc(x_n)``."""
    if n < 0:
        raise ValueError("n must be nonnegative")
    nk = n * a.k
    fresh = _Fresh(nk + (n + 1) * a.m)

    def state(t):
        return [nk + t * a.m + b + 1 for b in range(a.m)]

    def inputs(t):
        return [t * a.k + b + 1 for b in range(a.k)]

    clauses = []
    clauses += _instantiate(a.init, dict(enumerate(state(0), 1)), a.m, fresh)
    for t in range(n):
        mapping = dict(enumerate(state(t) + inputs(t) + state(t + 1), 1))
        clauses += _instantiate(a.delta, mapping, 2 * a.m + a.k, fresh)
    clauses += _instantiate(a.acc, dict(enumerate(state(n), 1)), a.m, fresh)
    return SymbolicSpec(a.k, n, fresh.top, clauses, tuple(range(1, nk + 1)), a.symbols)


def conjoin(h: SymbolicSpec, s: SymbolicSpec) -> SymbolicSpec:
    """Intersection: projected vectors identified, auxiliaries of ``s`` renamed apart."""
    if (h.k, h.n) != (s.k, s.n):
        raise ShapeMismatch(f"cannot conjoin k={h.k},n={h.n} with k={s.k},n={s.n}")
    if h.symbols != s.symbols:
        raise ShapeMismatch("symbol tables differ")
    mapping = dict(zip(s.projected, h.projected))
    fresh = _Fresh(h.n_vars)
    for v in range(1, s.n_vars + 1):
        if v not in mapping:
            mapping[v] = fresh.new()
    clauses = list(h.clauses)
    for clause in s.clauses:
        clauses.append([mapping[abs(l)] if l > 0 else -mapping[abs(l)] for l in clause])
    return SymbolicSpec(h.k, h.n, fresh.top, clauses, h.projected, h.symbols)


def true_spec(k: int, n: int, symbols=None) -> SymbolicSpec:
    return SymbolicSpec(k, n, n * k, (), None, symbols)


def encode_dfa(d: Dfa) -> SymbolicAutomaton:
    """Binary encoding of an explicit DFA; symbol ``i`` of the alphabet gets code ``i``."""
    m = max(1, math.ceil(math.log2(d.n_states)))
    k = max(1, math.ceil(math.log2(len(d.alphabet))))

    def bits(value, width):
        return [(value >> (width - 1 - b)) & 1 for b in range(width)]

    def equal(vars_, value, width):
        # literals that are false exactly when vars_ encode value
        return [-v if bit else v for v, bit in zip(vars_, bits(value, width))]

    x = list(range(1, m + 1))
    c = list(range(m + 1, m + k + 1))
    y = list(range(m + k + 1, 2 * m + k + 1))
    init = [[-l] for l in equal(x, d.initial, m)]
    acc = [equal(x, s, m) for s in range(2 ** m) if s not in d.accepting]
    delta = []
    for s in range(2 ** m):
        for code in range(2 ** k):
            guard = equal(x, s, m) + equal(c, code, k)
            if s >= d.n_states or code >= len(d.alphabet):
                delta.append(guard)
                continue
            target = d.delta[s][code]
            for v, bit in zip(y, bits(target, m)):
                delta.append(guard + [v if bit else -v])
    return SymbolicAutomaton(m, k, init, acc, delta, d.alphabet)


def dfa_spec(d: Dfa, n: int) -> SymbolicSpec:
    return unroll(encode_dfa(d), n)


def xor_clauses(variables, parity: int, fresh: _Fresh) -> list:
    """CNF for ``XOR(variables) == parity``, chunked to ``XOR_CHUNK`` literals per piece."""
    variables = list(variables)
    if not variables:
        return [] if parity == 0 else [[]]
    clauses = []
    while len(variables) > XOR_CHUNK:
        head, variables = variables[:XOR_CHUNK - 1], variables[XOR_CHUNK - 1:]
        t = fresh.new()
        clauses += _xor_direct(head + [t], 0)  # t == XOR(head)
        variables.append(t)
    return clauses + _xor_direct(variables, parity)


def _xor_direct(variables, parity: int) -> list:
    out = []
    for signs in itertools.product((0, 1), repeat=len(variables)):
        if sum(signs) % 2 != parity:
            out.append([-v if s else v for v, s in zip(variables, signs)])
    return out


def projected_solutions(spec: SymbolicSpec, oracle: Optional[SatOracle] = None,
                        cap: int = 2 ** 16, extra=(), n_vars: Optional[int] = None) -> list:
    """All projected bit vectors, found one model at a time with blocking clauses.

    Returns at most ``cap + 1`` vectors: the caller detects overflow by length.
    """
    oracle = oracle or DpllSolver()
    clauses = list(spec.clauses) + spec.symbol_clauses() + [list(c) for c in extra]
    top = max(spec.n_vars, n_vars or 0)
    found = []
    while len(found) <= cap:
        model = oracle.solve(top, clauses)
        if model is None:
            break
        bits = tuple(int(model[v]) for v in spec.projected)
        found.append(bits)
        clauses.append([-v if b else v for v, b in zip(spec.projected, bits)])
        if not spec.projected:
            break
    return found


def projected_count_exact(spec: SymbolicSpec, oracle: Optional[SatOracle] = None,
                          cap: int = 2 ** 16) -> int:
    sols = projected_solutions(spec, oracle, cap)
    if len(sols) > cap:
        raise CapExceeded(f"more than {cap} projected solutions")
    return len(sols)


def language(spec: SymbolicSpec, oracle: Optional[SatOracle] = None, cap: int = 2 ** 16) -> list:
    """Sorted list of words in the language (exact, desk scale)."""
    sols = projected_solutions(spec, oracle, cap)
    if len(sols) > cap:
        raise CapExceeded(f"more than {cap} projected solutions")
    return [spec.decode(b) for b in sorted(sols)]


def member(spec: SymbolicSpec, word, oracle: Optional[SatOracle] = None) -> bool:
    oracle = oracle or DpllSolver()
    return oracle.solve(spec.n_vars, list(spec.clauses) + spec.word_units(word)) is not None


# --- file formats ---------------------------------------------------------------

def _clause_line(line, path, lineno):
    try:
        lits = [int(t) for t in line.split()]
    except ValueError:
        raise SpecParseError(f"bad clause line {line!r}", path, lineno) from None
    if not lits or lits[-1] != 0 or 0 in lits[:-1]:
        raise SpecParseError("clause must end with a single 0", path, lineno)
    return lits[:-1]


def parse_cnf(text: str, path=None) -> SymbolicSpec:
    k = n = None
    projected = None
    symbols = None
    header = None
    clauses = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line:
            continue
        parts = line.split()
        if parts[0] == "c":
            if len(parts) >= 3 and parts[1] in ("k", "n"):
                try:
                    value = int(parts[2])
                except ValueError:
                    raise SpecParseError(f"bad {parts[1]} value", path, lineno) from None
                if parts[1] == "k":
                    k = value
                else:
                    n = value
            elif len(parts) >= 2 and parts[1] == "ind":
                if parts[-1] != "0":
                    raise SpecParseError("projection line must end with 0", path, lineno)
                projected = (projected or []) + [int(t) for t in parts[2:-1]]
            elif len(parts) >= 2 and parts[1] == "symbols":
                symbols = parts[2:]
            continue
        if parts[0] == "p":
            if len(parts) != 4 or parts[1] != "cnf":
                raise SpecParseError("header must be 'p cnf V C'", path, lineno)
            header = (int(parts[2]), int(parts[3]))
            continue
        if header is None:
            raise SpecParseError("clause before 'p cnf' header", path, lineno)
        clauses.append(_clause_line(line, path, lineno))
    if header is None:
        raise SpecParseError("missing 'p cnf' header", path)
    if k is None or n is None:
        raise SpecParseError("missing 'c k' or 'c n' comment", path)
    if header[1] != len(clauses):
        raise SpecParseError(f"header announces {header[1]} clauses, found {len(clauses)}", path)
    if any(abs(l) > header[0] for c in clauses for l in c):
        raise SpecParseError("literal exceeds declared variable count", path)
    try:
        return SymbolicSpec(k, n, header[0], clauses, projected, symbols)
    except (ValueError, ShapeMismatch) as exc:
        raise SpecParseError(str(exc), path) from exc


def format_cnf(spec: SymbolicSpec) -> str:
    buf = io.StringIO()
    comments = [f"k {spec.k}", f"n {spec.n}"]
    default = tuple(format(c, f"0{spec.k}b") for c in range(2 ** spec.k))
    if spec.symbols != default:
        comments.append("symbols " + " ".join(spec.symbols))
    comments.append("ind " + " ".join(str(v) for v in spec.projected) + " 0")
    write_dimacs(spec.n_vars, spec.clauses, buf, comments)
    return buf.getvalue()


def parse_saut(text: str, path=None) -> SymbolicAutomaton:
    m = k = None
    symbols = None
    sections = {"init": [], "acc": [], "delta": []}
    current = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line or line.startswith("c "):
            continue
        if line.startswith("[") and line.endswith("]"):
            current = line[1:-1].strip()
            if current not in sections:
                raise SpecParseError(f"unknown section {line}", path, lineno)
            continue
        if current is None:
            key, sep, value = line.partition(":")
            if not sep:
                raise SpecParseError(f"expected 'key: value', got {line!r}", path, lineno)
            key = key.strip()
            if key in ("m", "k"):
                try:
                    number = int(value)
                except ValueError:
                    raise SpecParseError(f"{key} must be an integer", path, lineno) from None
                if key == "m":
                    m = number
                else:
                    k = number
            elif key == "symbols":
                symbols = value.split()
            else:
                raise SpecParseError(f"unknown key {key!r}", path, lineno)
            continue
        sections[current].append(_clause_line(line, path, lineno))
    if m is None or k is None:
        raise SpecParseError("missing 'm:' or 'k:' line", path)
    if m < 1 or k < 1:
        raise SpecParseError("m and k must be positive", path)
    return SymbolicAutomaton(m, k, sections["init"], sections["acc"], sections["delta"], symbols)


def format_saut(a: SymbolicAutomaton) -> str:
    lines = [f"m: {a.m}", f"k: {a.k}"]
    if a.symbols is not None:
        lines.append("symbols: " + " ".join(a.symbols))
    for name in ("init", "acc", "delta"):
        lines.append(f"[{name}]")
        lines += [" ".join(str(l) for l in c) + " 0" for c in getattr(a, name)]
    return "\n".join(lines) + "\n"


def load_cnf(path) -> SymbolicSpec:
    with open(path, encoding="utf-8") as fh:
        return parse_cnf(fh.read(), path)


def load_saut(path) -> SymbolicAutomaton:
    with open(path, encoding="utf-8") as fh:
        return parse_saut(fh.read(), path)
