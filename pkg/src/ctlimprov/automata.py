"""Explicit finite automata: products, length restriction, exact counting and uniform sampling.

DFAs are always complete (a dead sink is added when a file leaves
transitions out), so complementing is a flip of the accepting set.
Counting follows the usual DAG path-count recurrence over the pruned
automaton; sampling walks that DAG with edge weights ``p_v / p_u``,
realised with a single uniform integer draw per word.
"""

from __future__ import annotations

import bisect
import logging
import math
import random
from collections import deque
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable

from .errors import (AlphabetMismatch, EmptyLanguage, InfiniteLanguage, SpecParseError,
                     StateBlowup, UnknownSymbol)

logger = logging.getLogger(__name__)

EPS_TOKEN = "<eps>"
INFINITE = math.inf


class _Cyclic:
    def __repr__(self):
        return "CYCLIC"


CYCLIC = _Cyclic()
END = None  # label of the sink edge leaving an accepting state

AND = "and"
DIFF = "diff"


@dataclass(frozen=True)
class Dfa:
    alphabet: tuple
    delta: tuple  # delta[state][symbol index] -> state
    initial: int
    accepting: frozenset
    index: dict = field(default=None, compare=False, repr=False, hash=False)

    def __post_init__(self):
        object.__setattr__(self, "alphabet", tuple(self.alphabet))
        object.__setattr__(self, "delta", tuple(tuple(row) for row in self.delta))
        object.__setattr__(self, "accepting", frozenset(self.accepting))
        object.__setattr__(self, "index", {a: i for i, a in enumerate(self.alphabet)})
        n = len(self.delta)
        if len(self.index) != len(self.alphabet):
            raise ValueError("duplicate alphabet symbols")
        if EPS_TOKEN in self.index:
            raise ValueError(f"{EPS_TOKEN} is reserved and cannot be an alphabet symbol")
        if n == 0 or not 0 <= self.initial < n:
            raise ValueError("initial state out of range")
        for row in self.delta:
            if len(row) != len(self.alphabet):
                raise ValueError("transition function is not complete")
            if any(not 0 <= t < n for t in row):
                raise ValueError("transition target out of range")
        if any(not 0 <= s < n for s in self.accepting):
            raise ValueError("accepting state out of range")

    @property
    def n_states(self) -> int:
        return len(self.delta)

    @classmethod
    def from_transitions(cls, alphabet, n_states, initial, accepting, transitions):
        """Build from a partial map ``{(state, symbol): target}``, adding a sink if needed."""
        alphabet = tuple(alphabet)
        index = {a: i for i, a in enumerate(alphabet)}
        rows = [[None] * len(alphabet) for _ in range(n_states)]
        for (s, a), t in transitions.items():
            rows[s][index[a]] = t
        if any(t is None for row in rows for t in row):
            sink = n_states
            rows.append([sink] * len(alphabet))
            rows = [[sink if t is None else t for t in row] for row in rows]
        return cls(alphabet, rows, initial, accepting)

    def step(self, state: int, symbol) -> int:
        try:
            return self.delta[state][self.index[symbol]]
        except KeyError:
            raise UnknownSymbol(symbol) from None


def run(d: Dfa, word: Iterable) -> bool:
    state = d.initial
    for symbol in word:
        state = d.step(state, symbol)
    return state in d.accepting


def complement(d: Dfa) -> Dfa:
    return Dfa(d.alphabet, d.delta, d.initial, frozenset(range(d.n_states)) - d.accepting)


def _symbol_map(a: Dfa, b: Dfa):
    if set(a.alphabet) != set(b.alphabet):
        raise AlphabetMismatch(f"alphabets differ: {a.alphabet} vs {b.alphabet}")
    return [b.index[s] for s in a.alphabet]


def product(a: Dfa, b: Dfa, mode: str = AND) -> Dfa:
    """Reachable part of the product automaton.

    ``mode`` is ``AND`` for intersection or ``DIFF`` for ``L(a) \\ L(b)``.
    """
    if mode not in (AND, DIFF):
        raise ValueError(f"unknown product mode {mode!r}")
    bmap = _symbol_map(a, b)
    start = (a.initial, b.initial)
    ids = {start: 0}
    order = [start]
    rows = []
    queue = deque([start])
    while queue:
        p, q = queue.popleft()
        row = []
        for i, j in enumerate(bmap):
            nxt = (a.delta[p][i], b.delta[q][j])
            if nxt not in ids:
                ids[nxt] = len(order)
                order.append(nxt)
                queue.append(nxt)
            row.append(ids[nxt])
        rows.append(row)
    if mode == AND:
        accepting = {ids[s] for s in order if s[0] in a.accepting and s[1] in b.accepting}
    else:
        accepting = {ids[s] for s in order if s[0] in a.accepting and s[1] not in b.accepting}
    return Dfa(a.alphabet, rows, 0, accepting)


def intersect(a: Dfa, b: Dfa) -> Dfa:
    return product(a, b, AND)


def difference(a: Dfa, b: Dfa) -> Dfa:
    return product(a, b, DIFF)


def counter_dfa(alphabet, m: int, n: int) -> Dfa:
    """Accepts exactly the words with length in [m, n]; states count up to n+1."""
    if m > n:
        raise ValueError(f"m={m} exceeds n={n}")
    k = len(tuple(alphabet))
    rows = [[min(s + 1, n + 1)] * k for s in range(n + 2)]
    return Dfa(alphabet, rows, 0, range(m, n + 1))


def length_restrict(d: Dfa, m: int, n: int) -> Dfa:
    return product(d, counter_dfa(d.alphabet, m, n), AND)


def universal_dfa(alphabet) -> Dfa:
    alphabet = tuple(alphabet)
    return Dfa(alphabet, [[0] * len(alphabet)], 0, {0})


def empty_dfa(alphabet) -> Dfa:
    alphabet = tuple(alphabet)
    return Dfa(alphabet, [[0] * len(alphabet)], 0, ())


def prefix_dfa(alphabet, prefix) -> Dfa:
    """Accepts every word that starts with ``prefix``."""
    alphabet = tuple(alphabet)
    k = len(prefix)
    done, dead = k, k + 1
    rows = []
    for pos in range(k):
        rows.append([pos + 1 if a == prefix[pos] else dead for a in alphabet])
    rows.append([done] * len(alphabet))
    rows.append([dead] * len(alphabet))
    for a in prefix:
        if a not in alphabet:
            raise UnknownSymbol(a)
    return Dfa(alphabet, rows, 0, {done})


@dataclass(frozen=True)
class Dag:
    """Pruned, acyclic view of a DFA.

    ``order`` lists the surviving states in topological order; ``edges[s]``
    holds ``(symbol index, target)`` pairs in symbol order.  Every accepting
    state additionally owns an implicit edge to a fresh sink.
    """

    dfa: Dfa
    order: tuple
    edges: dict
    accepting: frozenset

    @property
    def empty(self) -> bool:
        return not self.order

    def to_dfa(self) -> Dfa:
        if self.empty:
            return empty_dfa(self.dfa.alphabet)
        ids = {s: i for i, s in enumerate(self.order)}
        transitions = {}
        for s in self.order:
            for i, t in self.edges[s]:
                transitions[(ids[s], self.dfa.alphabet[i])] = ids[t]
        return Dfa.from_transitions(self.dfa.alphabet, len(self.order), ids[self.dfa.initial],
                                    {ids[s] for s in self.accepting}, transitions)


def _reachable(start: Iterable[int], succ) -> set:
    seen = set(start)
    queue = deque(seen)
    while queue:
        s = queue.popleft()
        for t in succ(s):
            if t not in seen:
                seen.add(t)
                queue.append(t)
    return seen


def prune(d: Dfa):
    """Drop states that are unreachable or cannot reach acceptance.

    Returns a :class:`Dag`, or ``CYCLIC`` if a cycle survives (infinite language).
    """
    forward = _reachable([d.initial], lambda s: d.delta[s])
    preds = {s: set() for s in range(d.n_states)}
    for s in range(d.n_states):
        for t in d.delta[s]:
            preds[t].add(s)
    backward = _reachable(d.accepting, lambda s: preds[s])
    live = forward & backward
    if d.initial not in live:
        return Dag(d, (), {}, frozenset())

    edges = {s: [(i, t) for i, t in enumerate(d.delta[s]) if t in live] for s in live}
    indeg = {s: 0 for s in live}
    for s in live:
        for _, t in edges[s]:
            indeg[t] += 1
    # Kahn's algorithm; ties broken by state id so the order is reproducible.
    ready = sorted(s for s in live if indeg[s] == 0)
    order = []
    while ready:
        s = ready.pop(0)
        order.append(s)
        for _, t in edges[s]:
            indeg[t] -= 1
            if indeg[t] == 0:
                bisect.insort(ready, t)
    if len(order) != len(live):
        return CYCLIC
    return Dag(d, tuple(order), {s: tuple(edges[s]) for s in order},
               frozenset(s for s in live if s in d.accepting))


def path_counts(dag: Dag) -> dict:
    """Number of accepting paths (= accepted words) from each DAG state."""
    counts = {}
    for s in reversed(dag.order):
        counts[s] = (1 if s in dag.accepting else 0) + sum(counts[t] for _, t in dag.edges[s])
    return counts


def count_language(d: Dfa):
    """Exact ``|L(d)|``, or ``INFINITE``."""
    dag = prune(d)
    if dag is CYCLIC:
        return INFINITE
    if dag.empty:
        return 0
    return path_counts(dag)[d.initial]


class WalkSampler:
    """Exactly uniform sampler over a finite, nonempty DFA language."""

    def __init__(self, dag: Dag):
        self.dag = dag
        self.dfa = dag.dfa
        self.counts = path_counts(dag)
        self.total = self.counts[self.dfa.initial]
        # Per state: labels (END or symbol index), successor states, cumulative bounds.
        self._choices = {}
        for s in dag.order:
            labels, targets, bounds = [], [], []
            acc = 0
            if s in dag.accepting:
                acc += 1
                labels.append(END)
                targets.append(None)
                bounds.append(acc)
            for i, t in dag.edges[s]:
                acc += self.counts[t]
                labels.append(i)
                targets.append(t)
                bounds.append(acc)
            self._choices[s] = (labels, targets, bounds)

    def edge_weights(self, state: int) -> list:
        """``(label, p_v / p_u)`` for every outgoing edge, ``label`` END for the sink."""
        p_u = self.counts[state]
        out = []
        if state in self.dag.accepting:
            out.append((END, Fraction(1, p_u)))
        for i, t in self.dag.edges[state]:
            out.append((self.dfa.alphabet[i], Fraction(self.counts[t], p_u)))
        return out

    def path_probability(self, word) -> Fraction:
        """Product of edge weights along the path spelling ``word`` (0 if none)."""
        state = self.dfa.initial
        prob = Fraction(1)
        for symbol in word:
            i = self.dfa.index.get(symbol)
            if i is None:
                raise UnknownSymbol(symbol)
            nxt = dict(self.dag.edges[state]).get(i)
            if nxt is None:
                return Fraction(0)
            prob *= Fraction(self.counts[nxt], self.counts[state])
            state = nxt
        if state not in self.dag.accepting:
            return Fraction(0)
        return prob * Fraction(1, self.counts[state])

    def unrank(self, r: int) -> tuple:
        """The word with rank ``r`` in [0, total); ranks follow the walk's edge order."""
        alphabet = self.dfa.alphabet
        state = self.dfa.initial
        word = []
        while True:
            labels, targets, bounds = self._choices[state]
            k = bisect.bisect_right(bounds, r)
            if k:
                r -= bounds[k - 1]
            if labels[k] is END:
                return tuple(word)
            word.append(alphabet[labels[k]])
            state = targets[k]

    def sample(self, rng: random.Random) -> tuple:
        # One draw in [0, p_root) resolves every edge choice on the walk.
        return self.unrank(rng.randrange(self.total))

    __call__ = sample


def build_sampler(d: Dfa) -> WalkSampler:
    dag = prune(d)
    if dag is CYCLIC:
        raise InfiniteLanguage("cannot sample uniformly from an infinite language")
    if dag.empty:
        raise EmptyLanguage("cannot sample from an empty language")
    return WalkSampler(dag)


class DfaOperations:
    """The generic scheme's five operations, instantiated for DFAs."""

    def length_restrict(self, spec, m, n):
        return length_restrict(spec, m, n)

    def intersect(self, x, y):
        return product(x, y, AND)

    def difference(self, x, y):
        return product(x, y, DIFF)

    def count(self, spec):
        return count_language(spec)

    def sampler(self, spec):
        return build_sampler(spec)


# --- NFAs -------------------------------------------------------------------

@dataclass(frozen=True)
class Nfa:
    alphabet: tuple
    delta: tuple  # delta[state][symbol index] -> frozenset of states
    initials: frozenset
    accepting: frozenset
    index: dict = field(default=None, compare=False, repr=False, hash=False)

    def __post_init__(self):
        object.__setattr__(self, "alphabet", tuple(self.alphabet))
        object.__setattr__(self, "delta",
                           tuple(tuple(frozenset(ts) for ts in row) for row in self.delta))
        object.__setattr__(self, "initials", frozenset(self.initials))
        object.__setattr__(self, "accepting", frozenset(self.accepting))
        object.__setattr__(self, "index", {a: i for i, a in enumerate(self.alphabet)})
        n = len(self.delta)
        if EPS_TOKEN in self.index:
            raise ValueError(f"{EPS_TOKEN} is reserved; epsilon moves are not supported")
        for row in self.delta:
            if len(row) != len(self.alphabet):
                raise ValueError("transition rows must cover the alphabet")
            if any(not 0 <= t < n for ts in row for t in ts):
                raise ValueError("transition target out of range")
        if any(not 0 <= s < n for s in self.initials | self.accepting):
            raise ValueError("state out of range")

    @property
    def n_states(self) -> int:
        return len(self.delta)

    @classmethod
    def from_transitions(cls, alphabet, n_states, initials, accepting, transitions):
        """``transitions`` is an iterable of ``(state, symbol, target)`` triples."""
        alphabet = tuple(alphabet)
        index = {a: i for i, a in enumerate(alphabet)}
        rows = [[set() for _ in alphabet] for _ in range(n_states)]
        for s, a, t in transitions:
            rows[s][index[a]].add(t)
        return cls(alphabet, rows, initials, accepting)

    def transitions(self):
        for s, row in enumerate(self.delta):
            for i, ts in enumerate(row):
                for t in sorted(ts):
                    yield s, self.alphabet[i], t


def run_nfa(n: Nfa, word) -> bool:
    current = set(n.initials)
    for symbol in word:
        i = n.index.get(symbol)
        if i is None:
            raise UnknownSymbol(symbol)
        current = set().union(*(n.delta[s][i] for s in current)) if current else set()
    return bool(current & n.accepting)


def determinize(n: Nfa, cap: int = 2 ** 20, warn_at: int = 2 ** 16) -> Dfa:
    """Subset construction over reachable subsets (the empty subset is the sink)."""
    start = frozenset(n.initials)
    ids = {start: 0}
    order = [start]
    rows = []
    queue = deque([start])
    warned = False
    while queue:
        subset = queue.popleft()
        row = []
        for i in range(len(n.alphabet)):
            nxt = frozenset().union(*(n.delta[s][i] for s in subset))
            if nxt not in ids:
                if len(order) >= cap:
                    raise StateBlowup(f"subset construction exceeded {cap} states")
                ids[nxt] = len(order)
                order.append(nxt)
                queue.append(nxt)
                if len(order) > warn_at and not warned:
                    logger.warning("determinization passed %d subsets", warn_at)
                    warned = True
            row.append(ids[nxt])
        rows.append(row)
    accepting = {ids[s] for s in order if s & n.accepting}
    return Dfa(n.alphabet, rows, 0, accepting)


def dfa_to_nfa(d: Dfa) -> Nfa:
    rows = [[{t} for t in row] for row in d.delta]
    return Nfa(d.alphabet, rows, {d.initial}, d.accepting)


# --- text format ------------------------------------------------------------

def _tokens(text: str):
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if line:
            key, sep, rest = line.partition(":")
            if not sep:
                yield lineno, None, line
            else:
                yield lineno, key.strip(), rest.split()


def _int(tok, lineno, path):
    try:
        value = int(tok)
    except ValueError:
        raise SpecParseError(f"expected a state number, got {tok!r}", path, lineno) from None
    if value < 0:
        raise SpecParseError(f"negative state {value}", path, lineno)
    return value


def _parse_common(text: str, path, nondeterministic: bool):
    alphabet = None
    n_states = None
    initials = None
    accepting = None
    trans = []
    init_key = "initials" if nondeterministic else "initial"
    for lineno, key, rest in _tokens(text):
        if key is None:
            raise SpecParseError(f"expected 'key: value', got {rest!r}", path, lineno)
        if key == "alphabet":
            if EPS_TOKEN in rest:
                raise SpecParseError(f"{EPS_TOKEN} cannot appear in an alphabet", path, lineno)
            if len(set(rest)) != len(rest):
                raise SpecParseError("duplicate alphabet symbol", path, lineno)
            alphabet = tuple(rest)
        elif key == "states":
            if len(rest) != 1:
                raise SpecParseError("states takes one number", path, lineno)
            n_states = _int(rest[0], lineno, path)
        elif key == init_key:
            if not nondeterministic and len(rest) != 1:
                raise SpecParseError("a DFA has exactly one initial state", path, lineno)
            initials = [_int(t, lineno, path) for t in rest]
        elif key == "accepting":
            accepting = [_int(t, lineno, path) for t in rest]
        elif key == "trans":
            if len(rest) != 3:
                raise SpecParseError("trans takes 'from symbol to'", path, lineno)
            src, sym, dst = rest
            if sym == EPS_TOKEN:
                raise SpecParseError("epsilon moves are not supported", path, lineno)
            trans.append((lineno, _int(src, lineno, path), sym, _int(dst, lineno, path)))
        else:
            raise SpecParseError(f"unknown key {key!r}", path, lineno)
    for name, value in (("alphabet", alphabet), ("states", n_states), (init_key, initials),
                        ("accepting", accepting)):
        if value is None:
            raise SpecParseError(f"missing '{name}:' line", path)
    if n_states == 0:
        raise SpecParseError("an automaton needs at least one state", path)
    symbols = set(alphabet)
    for lineno, s, a, t in trans:
        if a not in symbols:
            raise SpecParseError(f"symbol {a!r} not in alphabet", path, lineno)
        if s >= n_states or t >= n_states:
            raise SpecParseError("state out of range", path, lineno)
    for s in list(initials) + list(accepting):
        if s >= n_states:
            raise SpecParseError(f"state {s} out of range", path)
    return alphabet, n_states, initials, accepting, trans


def parse_dfa(text: str, path=None) -> Dfa:
    alphabet, n_states, initials, accepting, trans = _parse_common(text, path, False)
    table = {}
    for lineno, s, a, t in trans:
        if table.get((s, a), t) != t:
            raise SpecParseError(f"nondeterministic transition on ({s}, {a})", path, lineno)
        table[(s, a)] = t
    return Dfa.from_transitions(alphabet, n_states, initials[0], accepting, table)


def parse_nfa(text: str, path=None) -> Nfa:
    alphabet, n_states, initials, accepting, trans = _parse_common(text, path, True)
    return Nfa.from_transitions(alphabet, n_states, initials, accepting,
                                [(s, a, t) for _, s, a, t in trans])


def format_dfa(d: Dfa) -> str:
    lines = [
        "alphabet: " + " ".join(d.alphabet),
        f"states: {d.n_states}",
        f"initial: {d.initial}",
        "accepting: " + " ".join(str(s) for s in sorted(d.accepting)),
    ]
    for s, row in enumerate(d.delta):
        for i, t in enumerate(row):
            lines.append(f"trans: {s} {d.alphabet[i]} {t}")
    return "\n".join(lines) + "\n"


def format_nfa(n: Nfa) -> str:
    lines = [
        "alphabet: " + " ".join(n.alphabet),
        f"states: {n.n_states}",
        "initials: " + " ".join(str(s) for s in sorted(n.initials)),
        "accepting: " + " ".join(str(s) for s in sorted(n.accepting)),
    ]
    lines += [f"trans: {s} {a} {t}" for s, a, t in n.transitions()]
    return "\n".join(lines) + "\n"


def load_dfa(path) -> Dfa:
    with open(path, encoding="utf-8") as fh:
        return parse_dfa(fh.read(), path)


def load_nfa(path) -> Nfa:
    with open(path, encoding="utf-8") as fh:
        return parse_nfa(fh.read(), path)
