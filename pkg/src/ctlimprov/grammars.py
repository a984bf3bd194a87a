"""Unambiguous context-free grammars: normalization, intersection with DFAs, counting, sampling.

The pipeline mirrors the mixed UCFG/DFA improvisation schemes:

* :func:`normalize` removes empty and unit productions and binarizes long
  right-hand sides, keeping derivation multiplicities so ambiguity stays
  visible;
* :func:`bar_hillel` intersects a grammar with a DFA through triple
  nonterminals ``(x, A, z)`` over a modified automaton with dedicated
  ``Accept``/``Reject`` states, which keeps the result unambiguous;
* :func:`count_by_length` and :class:`GrammarSampler` count and uniformly
  sample words of given lengths;
* :class:`DeltaSampler` samples uniformly from ``L(I) \\ L(A)`` one symbol
  at a time, which the DFA-hard / grammar-soft scheme needs.
"""

from __future__ import annotations

import bisect
import itertools
import random
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Hashable

from . import automata
from .automata import Dfa, Nfa
from .core import CiInstance, assemble_improviser, check_feasibility
from .errors import (AlphabetMismatch, AmbiguityDetected, EmptyRange, InternalError,
                     SpecParseError, UnsupportedCombination)

EPS_TOKEN = automata.EPS_TOKEN
CAP = 2  # derivation counts are capped here when only "one or many" matters


# --- grammar types ------------------------------------------------------------

@dataclass(frozen=True)
class Cfg:
    start: str
    productions: tuple  # (lhs, rhs tuple); rhs may be empty
    unambiguous: bool = True
    nonterminals: frozenset = field(default=None, compare=False)
    terminals: frozenset = field(default=None, compare=False)

    def __post_init__(self):
        prods = tuple((lhs, tuple(rhs)) for lhs, rhs in self.productions)
        object.__setattr__(self, "productions", prods)
        nts = frozenset(lhs for lhs, _ in prods) | {self.start}
        terms = frozenset(t for _, rhs in prods for t in rhs if t not in nts)
        if EPS_TOKEN in terms or EPS_TOKEN in nts:
            raise ValueError(f"{EPS_TOKEN} may only stand alone as an empty right-hand side")
        object.__setattr__(self, "nonterminals", nts)
        object.__setattr__(self, "terminals", terms)


@dataclass(frozen=True)
class NormalizedCfg:
    """Right-hand sides of length 1 or 2, no empty productions.

    Nonterminals may be any hashable value (bar-hillel triples, binarization
    chain links).  ``productions`` holds ``(lhs, rhs, multiplicity)`` where the
    multiplicity records how many original derivations collapse into the
    production (capped at 2); it is 1 everywhere for an unambiguous input.
    ``flags`` lists structural ambiguity found while normalizing.
    """

    start: Hashable
    nonterminals: frozenset
    productions: tuple
    epsilon_in_language: bool
    epsilon_derivations: int = 0
    flags: tuple = ()
    by_lhs: dict = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        by_lhs = {x: [] for x in self.nonterminals}
        for lhs, rhs, mult in self.productions:
            by_lhs[lhs].append((rhs, mult))
        object.__setattr__(self, "by_lhs", by_lhs)

    @property
    def terminals(self) -> frozenset:
        return frozenset(s for _, rhs, _ in self.productions for s in rhs
                         if s not in self.nonterminals)

    def is_nonterminal(self, symbol) -> bool:
        return symbol in self.nonterminals


TripleGrammar = NormalizedCfg


# --- normalization ----------------------------------------------------------------

def _empty_derivations(g: Cfg) -> dict:
    """Number of ways each nonterminal derives the empty word, capped at CAP."""
    nc = {x: 0 for x in g.nonterminals}
    changed = True
    while changed:
        changed = False
        for x in g.nonterminals:
            total = 0
            for lhs, rhs in g.productions:
                if lhs != x or any(s not in g.nonterminals for s in rhs):
                    continue
                prod = 1
                for s in rhs:
                    prod *= nc[s]
                total += prod
            total = min(total, CAP)
            if total != nc[x]:
                nc[x] = total
                changed = True
    return nc


def _useful(start, nonterminals, productions) -> set:
    """Nonterminals that are both generating and reachable from ``start``."""
    generating = set()
    changed = True
    while changed:
        changed = False
        for lhs, rhs, *_ in productions:
            if lhs not in generating and all(s in generating or s not in nonterminals for s in rhs):
                generating.add(lhs)
                changed = True
    reach = set()
    if start in generating:
        reach.add(start)
        stack = [start]
        while stack:
            x = stack.pop()
            for lhs, rhs, *_ in productions:
                if lhs != x or not all(s in generating or s not in nonterminals for s in rhs):
                    continue
                for s in rhs:
                    if s in nonterminals and s not in reach:
                        reach.add(s)
                        stack.append(s)
    return reach


def normalize(g: Cfg) -> NormalizedCfg:
    """Eliminate empty and unit productions, then binarize right-hand sides."""
    nc = _empty_derivations(g)
    useful = _useful(g.start, g.nonterminals, g.productions)
    eps_in = nc.get(g.start, 0) > 0
    flags = []
    for x in sorted(useful, key=str):
        if nc[x] >= CAP:
            flags.append(f"{x} derives the empty word in several ways")
    prods = [(lhs, rhs) for lhs, rhs in g.productions
             if lhs in useful and all(s in useful or s not in g.nonterminals for s in rhs)]

    # Empty-word elimination: every nullable occurrence may be kept or dropped.
    no_eps = []
    for lhs, rhs in prods:
        options = []
        for s in rhs:
            if s in g.nonterminals and nc[s] > 0:
                options.append(((s,), ()))
            else:
                options.append(((s,),))
        for choice in itertools.product(*options):
            new_rhs = tuple(s for part in choice for s in part)
            if not new_rhs:
                continue
            mult = 1
            for part, s in zip(choice, rhs):
                if not part:
                    mult = min(mult * nc[s], CAP)
            no_eps.append((lhs, new_rhs, mult))

    # Unit elimination along every unit path, multiplying multiplicities.
    units = {}
    non_unit = {}
    for lhs, rhs, mult in no_eps:
        if len(rhs) == 1 and rhs[0] in g.nonterminals:
            units.setdefault(lhs, []).append((rhs[0], mult))
        else:
            non_unit.setdefault(lhs, []).append((rhs, mult))
    cyclic = set()
    expanded = []
    seen_lhs = []
    for lhs, _ in prods:
        if lhs not in seen_lhs:
            seen_lhs.append(lhs)
    for x in seen_lhs:
        for rhs, mult in non_unit.get(x, []):
            expanded.append((x, rhs, mult))
        stack = [(y, m, (x,)) for y, m in reversed(units.get(x, []))]
        while stack:
            y, m, path = stack.pop()
            if y in path:
                cyclic.add(y)
                continue
            for rhs, mult in non_unit.get(y, []):
                expanded.append((x, rhs, min(m * mult, CAP)))
            for z, mz in reversed(units.get(y, [])):
                stack.append((z, min(m * mz, CAP), path + (y,)))
    for y in sorted(cyclic, key=str):
        flags.append(f"unit cycle through {y}")

    # Binarization with a fresh chain per long production.
    binary = []
    nonterminals = set(g.nonterminals)
    for k, (lhs, rhs, mult) in enumerate(expanded):
        if len(rhs) <= 2:
            binary.append((lhs, rhs, mult))
            continue
        head = lhs
        for pos in range(len(rhs) - 2):
            link = ("chain", lhs, k, pos)
            nonterminals.add(link)
            binary.append((head, (rhs[pos], link), mult if pos == 0 else 1))
            head = link
        binary.append((head, rhs[-2:], 1))

    keep = _useful(g.start, nonterminals, binary)
    binary = tuple((lhs, rhs, mult) for lhs, rhs, mult in binary
                   if lhs in keep and all(s in keep or s not in nonterminals for s in rhs))
    return NormalizedCfg(g.start, frozenset(keep | {g.start}), binary, eps_in,
                         nc.get(g.start, 0), tuple(flags))


def as_normalized(g) -> NormalizedCfg:
    return g if isinstance(g, NormalizedCfg) else normalize(g)


# --- membership -------------------------------------------------------------------

def _unit_order(g: NormalizedCfg):
    """Nonterminals ordered so that unit targets come first; None if units are cyclic."""
    succ = {x: [rhs[0] for rhs, _ in g.by_lhs[x] if len(rhs) == 1 and rhs[0] in g.nonterminals]
            for x in g.nonterminals}
    order, state = [], {}
    for root in g.nonterminals:
        if root in state:
            continue
        stack = [(root, iter(succ[root]))]
        state[root] = 1
        while stack:
            x, it = stack[-1]
            nxt = next(it, None)
            if nxt is None:
                stack.pop()
                state[x] = 2
                order.append(x)
            elif state.get(nxt) == 1:
                return None
            elif nxt not in state:
                state[nxt] = 1
                stack.append((nxt, iter(succ[nxt])))
    return order


def parse_membership(g, word) -> tuple:
    """CYK membership test; returns ``(member, derivations)`` with derivations capped at 2.

    Symbols the grammar never produces simply make the word a non-member.
    """
    word = tuple(word)
    ng = as_normalized(g)
    if not word:
        count = ng.epsilon_derivations if ng.epsilon_in_language else 0
        if isinstance(g, NormalizedCfg) and g.epsilon_in_language:
            count = max(count, 1)
        return count > 0, min(count, CAP)
    count = _cyk(ng, word).get((0, len(word)), {}).get(ng.start, 0)
    return count > 0, min(count, CAP)


def _cyk(g: NormalizedCfg, word: tuple) -> dict:
    n = len(word)
    order = _unit_order(g)
    if order is None:
        order = sorted(g.nonterminals, key=str) * 2
    term_rules, bin_rules, unit_rules = [], [], []
    for lhs, rhs, mult in g.productions:
        if len(rhs) == 2:
            bin_rules.append((lhs, rhs[0], rhs[1], mult))
        elif rhs[0] in g.nonterminals:
            unit_rules.append((lhs, rhs[0], mult))
        else:
            term_rules.append((lhs, rhs[0], mult))
    units_by_lhs = {}
    for lhs, y, mult in unit_rules:
        units_by_lhs.setdefault(lhs, []).append((y, mult))
    chart = {}

    def cell(sym, i, length):
        if sym in g.nonterminals:
            return chart.get((i, length), {}).get(sym, 0)
        return 1 if length == 1 and word[i] == sym else 0

    for length in range(1, n + 1):
        for i in range(n - length + 1):
            counts = {}
            if length == 1:
                for lhs, t, mult in term_rules:
                    if word[i] == t:
                        counts[lhs] = min(counts.get(lhs, 0) + mult, CAP)
            for lhs, y, z, mult in bin_rules:
                total = counts.get(lhs, 0)
                for k in range(1, length):
                    left = cell(y, i, k)
                    if left:
                        total += left * cell(z, i + k, length - k) * mult
                if total:
                    counts[lhs] = min(total, CAP)
            chart[(i, length)] = counts
            for x in order:
                for y, mult in units_by_lhs.get(x, ()):
                    c = counts.get(y, 0)
                    if c:
                        counts[x] = min(counts.get(x, 0) + c * mult, CAP)
    return chart


# --- the modified automaton and the intersection --------------------------------

def modify_dfa(d: Dfa) -> Nfa:
    """Add ``Accept`` (sole accepting state) and ``Reject``, plus ``x -a-> Accept``
    for every transition into an accepting state.  Accepts ``L(d) \\ {eps}``
    with exactly one accepting path per word."""
    accept, reject = d.n_states, d.n_states + 1
    rows = []
    for s, row in enumerate(d.delta):
        rows.append([{t, accept} if t in d.accepting else {t} for t in row])
    rows.append([{reject}] * len(d.alphabet))
    rows.append([{reject}] * len(d.alphabet))
    return Nfa(d.alphabet, rows, {d.initial}, {accept})


def bar_hillel(g, d: Dfa) -> NormalizedCfg:
    """Unambiguity-preserving intersection of a grammar with a DFA.

    Only triples reachable from ``(q0, S, Accept)`` that derive some word are
    materialized.
    """
    ng = as_normalized(g)
    missing = ng.terminals - set(d.alphabet)
    if missing:
        raise AlphabetMismatch(f"grammar terminals {sorted(map(str, missing))} not in DFA alphabet")
    nfa = modify_dfa(d)
    accept = d.n_states
    step = {}
    for s, row in enumerate(nfa.delta):
        for i, targets in enumerate(row):
            for t in targets:
                step.setdefault(nfa.alphabet[i], {}).setdefault(s, set()).add(t)

    def pairs_of(sym, table):
        if sym in ng.nonterminals:
            return table[sym]
        return step.get(sym, {})

    # Productive (x, z) pairs per nonterminal, as maps x -> set of z.
    table = {x: {} for x in ng.nonterminals}
    changed = True
    while changed:
        changed = False
        for lhs, rhs, _ in ng.productions:
            target = table[lhs]
            if len(rhs) == 1:
                new = pairs_of(rhs[0], table)
                for x, zs in list(new.items()):
                    have = target.setdefault(x, set())
                    if not zs <= have:
                        have |= zs
                        changed = True
            else:
                left, right = pairs_of(rhs[0], table), pairs_of(rhs[1], table)
                for x, ys in list(left.items()):
                    reach = set()
                    for y in ys:
                        reach |= right.get(y, set())
                    if reach:
                        have = target.setdefault(x, set())
                        if not reach <= have:
                            have |= reach
                            changed = True

    def has(sym, x, z):
        return z in pairs_of(sym, table).get(x, ())

    def lift(sym, x, z):
        return (x, sym, z) if sym in ng.nonterminals else sym

    start = (d.initial, ng.start, accept)
    eps = ng.epsilon_in_language and d.initial in d.accepting
    if not has(ng.start, d.initial, accept):
        return NormalizedCfg(start, frozenset({start}), (), eps, 1 if eps else 0)

    productions = []
    seen = {start}
    stack = [start]
    while stack:
        x, a, z = triple = stack.pop()
        for rhs, mult in ng.by_lhs[a]:
            if len(rhs) == 1:
                if has(rhs[0], x, z):
                    new_rhs = (lift(rhs[0], x, z),)
                else:
                    continue
                options = [new_rhs]
            else:
                b, c = rhs
                options = []
                for y in sorted(pairs_of(b, table).get(x, ())):
                    if has(c, y, z):
                        options.append((lift(b, x, y), lift(c, y, z)))
            for new_rhs in options:
                productions.append((triple, new_rhs, mult))
                for sym in new_rhs:
                    if isinstance(sym, tuple) and len(sym) == 3 and sym[1] in ng.nonterminals \
                            and sym not in seen:
                        seen.add(sym)
                        stack.append(sym)
    return NormalizedCfg(start, frozenset(seen), tuple(productions), eps, 1 if eps else 0,
                         ng.flags)


# --- counting -------------------------------------------------------------------

@dataclass
class CountTable:
    """Derivation counts ``counts[X][i]`` for lengths 0..n plus per-length language sizes."""

    grammar: NormalizedCfg
    m: int
    n: int
    counts: dict
    per_length: dict
    total: int

    def count(self, sym, length: int) -> int:
        if sym in self.grammar.nonterminals:
            return self.counts[sym][length] if length <= self.n else 0
        return 1 if length == 1 else 0


def count_by_length(g, m: int, n: int) -> CountTable:
    """Count words of each length in [m, n] with one shared table over all lengths."""
    if m > n:
        raise ValueError(f"m={m} exceeds n={n}")
    ng = as_normalized(g)
    order = _unit_order(ng)
    if order is None:
        raise AmbiguityDetected("cyclic unit productions: infinitely many derivations")
    counts = {x: [0] * (n + 1) for x in ng.nonterminals}

    def c(sym, length):
        if sym in ng.nonterminals:
            return counts[sym][length]
        return 1 if length == 1 else 0

    for length in range(1, n + 1):
        for x in order:
            total = 0
            for rhs, _ in ng.by_lhs[x]:
                if len(rhs) == 1:
                    total += c(rhs[0], length)
                else:
                    b, cc = rhs
                    for j in range(1, length):
                        left = c(b, j)
                        if left:
                            total += left * c(cc, length - j)
            counts[x][length] = total
    per_length = {}
    for i in range(m, n + 1):
        if i == 0:
            per_length[0] = 1 if ng.epsilon_in_language else 0
        else:
            per_length[i] = counts[ng.start][i]
    return CountTable(ng, m, n, counts, per_length, sum(per_length.values()))


def check_unambiguous(g, max_len: int = 8, word_cap: int = 20000) -> int:
    """Runtime tripwire for the unambiguity promise.

    Compares derivation counts with the number of distinct words for every
    nonterminal and every length up to ``max_len``; raises
    :class:`AmbiguityDetected` on a mismatch.  Returns the largest length
    actually checked (enumeration stops once ``word_cap`` words would be
    held for a single length).
    """
    ng = as_normalized(g)
    if ng.flags:
        raise AmbiguityDetected("; ".join(ng.flags))
    for lhs, rhs, mult in ng.productions:
        if mult > 1:
            raise AmbiguityDetected(f"production {lhs} -> {rhs} stands for several derivations")
    table = count_by_length(ng, 0, max_len)
    order = _unit_order(ng)
    words = {x: [set() for _ in range(max_len + 1)] for x in ng.nonterminals}

    def w(sym, length):
        if sym in ng.nonterminals:
            return words[sym][length]
        return {(sym,)} if length == 1 else set()

    checked = 0
    for length in range(1, max_len + 1):
        held = 0
        for x in order:
            acc = set()
            for rhs, _ in ng.by_lhs[x]:
                if len(rhs) == 1:
                    acc |= w(rhs[0], length)
                else:
                    for j in range(1, length):
                        for u in w(rhs[0], j):
                            for v in w(rhs[1], length - j):
                                acc.add(u + v)
            if len(acc) != table.counts[x][length]:
                raise AmbiguityDetected(
                    f"{x} has {table.counts[x][length]} derivations but {len(acc)} words "
                    f"of length {length}")
            words[x][length] = acc
            held += len(acc)
            if held > word_cap:
                return checked
        checked = length
    return checked


# --- sampling -----------------------------------------------------------------------

class GrammarSampler:
    """Exactly uniform sampler over ``{w in L(g) : m <= |w| <= n}``.

    A single integer in ``[0, total)`` is unranked into a word: first a
    length, then a production and split point at every node, each chosen in
    proportion to the number of words it covers.
    """

    def __init__(self, table: CountTable):
        if table.total == 0:
            raise EmptyRange(f"no words with length in [{table.m}, {table.n}]")
        self.table = table
        self.grammar = table.grammar
        self.total = table.total
        self.lengths = sorted(table.per_length)
        self._bounds = list(itertools.accumulate(table.per_length[i] for i in self.lengths))

    def _choices(self, x, length):
        """Yield ``(weight, rhs, split)`` for every way ``x`` can cover ``length``."""
        count = self.table.count
        for rhs, _ in self.grammar.by_lhs[x]:
            if len(rhs) == 1:
                yield count(rhs[0], length), rhs, None
            else:
                for j in range(1, length):
                    yield count(rhs[0], j) * count(rhs[1], length - j), rhs, j

    def unrank(self, r: int) -> tuple:
        k = bisect.bisect_right(self._bounds, r)
        if k:
            r -= self._bounds[k - 1]
        length = self.lengths[k]
        if length == 0:
            return ()
        count = self.table.count
        out = []
        stack = [(self.grammar.start, length, r)]
        while stack:
            sym, length, r = stack.pop()
            if sym not in self.grammar.nonterminals:
                out.append(sym)
                continue
            for weight, rhs, split in self._choices(sym, length):
                if r < weight:
                    break
                r -= weight
            else:
                raise InternalError(f"rank overflow at {sym!r}, length {length}")
            if split is None:
                stack.append((rhs[0], length, r))
            else:
                right = count(rhs[1], length - split)
                stack.append((rhs[1], length - split, r % right))
                stack.append((rhs[0], split, r // right))
        return tuple(out)

    def sample(self, rng: random.Random) -> tuple:
        return self.unrank(rng.randrange(self.total))

    __call__ = sample

    def word_probability(self, word) -> Fraction:
        """Exact probability that :meth:`sample` returns ``word``.

        Sums, over all derivations, the product of the length choice and of
        every production/split choice along the derivation.
        """
        word = tuple(word)
        length = len(word)
        if length not in self.table.per_length or not self.table.per_length[length]:
            return Fraction(0)
        if length == 0:
            return Fraction(1, self.total)
        count = self.table.count
        memo = {}

        def prob(sym, i, span):
            if sym not in self.grammar.nonterminals:
                return Fraction(1) if span == 1 and word[i] == sym else Fraction(0)
            key = (sym, i, span)
            if key in memo:
                return memo[key]
            denom = count(sym, span)
            acc = Fraction(0)
            if denom:
                for weight, rhs, split in self._choices(sym, span):
                    if not weight:
                        continue
                    if split is None:
                        sub = prob(rhs[0], i, span)
                    else:
                        sub = prob(rhs[0], i, split)
                        if sub:
                            sub *= prob(rhs[1], i + split, span - split)
                    if sub:
                        acc += Fraction(weight, denom) * sub
            memo[key] = acc
            return acc

        start_count = self.table.per_length[length]
        return Fraction(start_count, self.total) * prob(self.grammar.start, 0, length)


def sample_range(g, m: int, n: int, rng: random.Random) -> tuple:
    return GrammarSampler(count_by_length(g, m, n)).sample(rng)


# --- sampling from I \ A, one symbol at a time --------------------------------------

class DeltaSampler:
    """Uniform sampler over ``Delta = L(I) \\ L(A)`` for a DFA ``I`` and grammar ``A``.

    Grows a prefix one symbol at a time, choosing among "stop here" (when
    the prefix itself is in Delta) and every one-symbol extension in
    proportion to how many words of Delta each option leads to.

    ``strategy="incremental"`` counts grammar words by prefix with tables
    shared across all prefixes.  ``strategy="rebuild"`` recomputes every
    count from scratch through prefix automata, complemented products and a
    fresh intersection per candidate prefix; it exists to cross-check the
    incremental path.
    """

    def __init__(self, idfa: Dfa, agrammar: NormalizedCfg, n: int, strategy: str = "incremental"):
        if strategy not in ("incremental", "rebuild"):
            raise ValueError(f"unknown strategy {strategy!r}")
        self.idfa = idfa
        self.grammar = as_normalized(agrammar)
        self.n = n
        self.strategy = strategy
        self.alphabet = idfa.alphabet
        dag = automata.prune(idfa)
        if dag is automata.CYCLIC:
            raise ValueError("the improvisation automaton must have a finite language")
        self._icounts = automata.path_counts(dag) if not dag.empty else {}
        self._table = count_by_length(self.grammar, 0, n)
        size_i = self._icounts.get(idfa.initial, 0)
        self.total = size_i - self._table.total
        self._nodes = {}
        self._order = _unit_order(self.grammar)
        self._exact_memo = {}
        self._prefix_memo = {}

    # incremental counting helpers
    def _exact(self, sub: tuple) -> dict:
        """Derivation counts of exactly ``sub`` for every nonterminal (memoized by substring)."""
        found = self._exact_memo.get(sub)
        if found is not None:
            return found
        g = self.grammar
        counts = {}
        length = len(sub)
        for x in self._order:
            total = 0
            for rhs, _ in g.by_lhs[x]:
                if len(rhs) == 1:
                    sym = rhs[0]
                    if sym in g.nonterminals:
                        total += counts.get(sym, 0)
                    elif length == 1 and sub[0] == sym:
                        total += 1
                else:
                    for j in range(1, length):
                        left = self._exact_sym(rhs[0], sub[:j])
                        if left:
                            total += left * self._exact_sym(rhs[1], sub[j:])
            if total:
                counts[x] = total
        self._exact_memo[sub] = counts
        return counts

    def _exact_sym(self, sym, sub):
        if sym in self.grammar.nonterminals:
            return self._exact(sub).get(sym, 0)
        return 1 if len(sub) == 1 and sub[0] == sym else 0

    def _with_prefix(self, sym, v: tuple, length: int) -> int:
        """Words of ``length`` derived from ``sym`` that start with the nonempty ``v``."""
        if len(v) > length:
            return 0
        if len(v) == length:
            return self._exact_sym(sym, v)
        if sym not in self.grammar.nonterminals:
            return 0
        key = (sym, v, length)
        found = self._prefix_memo.get(key)
        if found is not None:
            return found
        count = self._table.count
        total = 0
        for rhs, _ in self.grammar.by_lhs[sym]:
            if len(rhs) == 1:
                total += self._with_prefix(rhs[0], v, length)
                continue
            b, c = rhs
            for j in range(1, length):
                if j >= len(v):
                    left = self._with_prefix(b, v, j)
                    if left:
                        total += left * count(c, length - j)
                else:
                    left = self._exact_sym(b, v[:j])
                    if left:
                        total += left * self._with_prefix(c, v[j:], length - j)
        self._prefix_memo[key] = total
        return total

    def _istate(self, prefix):
        state = self.idfa.initial
        for a in prefix:
            state = self.idfa.step(state, a)
        return state

    def _incremental_weight(self, prefix: tuple) -> int:
        size_i = self._icounts.get(self._istate(prefix), 0)
        size_a = sum(self._with_prefix(self.grammar.start, prefix, length)
                     for length in range(len(prefix), self.n + 1))
        return size_i - size_a

    def _rebuild_weight(self, prefix: tuple) -> int:
        k = len(self.alphabet)
        upto_n = self.n + 1 if k == 1 else (k ** (self.n + 1) - 1) // (k - 1)
        pdfa = automata.prefix_dfa(self.alphabet, prefix)
        a_prefix = bar_hillel(self.grammar, pdfa)
        size_a = count_by_length(a_prefix, 0, self.n).total
        outside = automata.complement(automata.product(self.idfa, pdfa))
        size_d = automata.count_language(automata.length_restrict(outside, 0, self.n))
        return upto_n - size_a - size_d

    def _in_delta(self, prefix: tuple) -> bool:
        if not automata.run(self.idfa, prefix):
            return False
        if self.strategy == "incremental":
            if not prefix:
                return not self.grammar.epsilon_in_language
            return self._exact(prefix).get(self.grammar.start, 0) == 0
        return not parse_membership(self.grammar, prefix)[0]

    def branch_weights(self, prefix=()) -> tuple:
        """``(stop, [(symbol, |Delta_{prefix+symbol}|), ...])`` for ``prefix``."""
        prefix = tuple(prefix)
        node = self._nodes.get(prefix)
        if node is None:
            stop = 1 if self._in_delta(prefix) else 0
            branches = []
            if len(prefix) < self.n:
                weigh = (self._incremental_weight if self.strategy == "incremental"
                         else self._rebuild_weight)
                branches = [(a, weigh(prefix + (a,))) for a in self.alphabet]
            node = (stop, branches)
            self._nodes[prefix] = node
        return node

    def sample(self, rng: random.Random) -> tuple:
        if self.total <= 0:
            raise EmptyRange("I \\ A is empty")
        expected = self.total
        r = rng.randrange(expected)
        prefix = ()
        while True:
            stop, branches = self.branch_weights(prefix)
            if stop + sum(w for _, w in branches) != expected:
                raise InternalError(f"branch weights at {prefix} do not sum to {expected}")
            if r < stop:
                return prefix
            r -= stop
            for a, w in branches:
                if r < w:
                    prefix += (a,)
                    expected = w
                    break
                r -= w
            else:
                raise InternalError(f"no branch left at prefix {prefix}")

    __call__ = sample


def prefix_walk_sample(idfa: Dfa, agrammar, n: int, rng: random.Random) -> tuple:
    return DeltaSampler(idfa, agrammar, n).sample(rng)


# --- the two mixed improvisation schemes ---------------------------------------------

def _promised(g):
    if isinstance(g, Cfg) and not g.unambiguous:
        raise UnsupportedCombination(
            "grammar is marked 'unambiguous: no'; counting words of ambiguous grammars "
            "is #P-hard and not supported")
    return normalize(g) if isinstance(g, Cfg) else g


def scheme_ucfg_dfa(instance: CiInstance, seed=None, ambiguity_check_len: int = 8):
    """Hard grammar, soft DFA.  Length restriction is left to the counters.

    Returns ``(report, improviser or None)``.
    """
    hard = _promised(instance.hard.payload)
    soft: Dfa = instance.soft.payload
    m, n = instance.m, instance.n
    check_unambiguous(hard, min(n, ambiguity_check_len))
    table_i = count_by_length(hard, m, n)
    table_a = count_by_length(bar_hillel(hard, soft), m, n)
    table_b = count_by_length(bar_hillel(hard, automata.complement(soft)), m, n)
    if table_a.total + table_b.total != table_i.total:
        raise InternalError("|A| + |I \\ A| differs from |I|")
    report = check_feasibility(table_i.total, table_a.total, instance.epsilon, instance.lam,
                               instance.rho)
    improviser = assemble_improviser(report, lambda: GrammarSampler(table_a),
                                     lambda: GrammarSampler(table_b), seed, "UCFG x DFA")
    return report, improviser


def scheme_dfa_ucfg(instance: CiInstance, seed=None, ambiguity_check_len: int = 8):
    """Hard DFA, soft grammar; ``I \\ A`` is sampled by :class:`DeltaSampler`."""
    hard: Dfa = instance.hard.payload
    soft = _promised(instance.soft.payload)
    m, n = instance.m, instance.n
    check_unambiguous(soft, min(n, ambiguity_check_len))
    idfa = automata.length_restrict(hard, m, n)
    agrammar = bar_hillel(soft, idfa)
    table_a = count_by_length(agrammar, 0, n)
    size_i = automata.count_language(idfa)
    report = check_feasibility(size_i, table_a.total, instance.epsilon, instance.lam,
                               instance.rho)
    improviser = assemble_improviser(report, lambda: GrammarSampler(table_a),
                                     lambda: DeltaSampler(idfa, agrammar, n), seed, "DFA x UCFG")
    return report, improviser


# --- text format --------------------------------------------------------------------

def parse_cfg(text: str, path=None) -> Cfg:
    start = None
    unambiguous = True
    productions = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "->" in line:
            lhs, _, rhs = line.partition("->")
            lhs = lhs.strip()
            if not lhs or len(lhs.split()) != 1:
                raise SpecParseError("left-hand side must be a single token", path, lineno)
            tokens = rhs.split()
            if tokens == [EPS_TOKEN]:
                tokens = []
            elif EPS_TOKEN in tokens:
                raise SpecParseError(f"{EPS_TOKEN} must stand alone", path, lineno)
            if not tokens and rhs.strip() != EPS_TOKEN:
                raise SpecParseError(f"empty right-hand side; write {EPS_TOKEN}", path, lineno)
            productions.append((lhs, tuple(tokens)))
            continue
        key, sep, value = line.partition(":")
        key, value = key.strip(), value.strip()
        if not sep:
            raise SpecParseError(f"cannot parse {line!r}", path, lineno)
        if key == "start":
            if start is not None:
                raise SpecParseError("duplicate 'start:' line", path, lineno)
            if len(value.split()) != 1:
                raise SpecParseError("start takes one nonterminal", path, lineno)
            start = value
        elif key == "unambiguous":
            if value not in ("yes", "no"):
                raise SpecParseError("unambiguous must be yes or no", path, lineno)
            unambiguous = value == "yes"
        else:
            raise SpecParseError(f"unknown key {key!r}", path, lineno)
    if start is None:
        raise SpecParseError("missing 'start:' line", path)
    return Cfg(start, tuple(productions), unambiguous)


def format_cfg(g: Cfg) -> str:
    lines = [f"start: {g.start}"]
    if not g.unambiguous:
        lines.append("unambiguous: no")
    for lhs, rhs in g.productions:
        lines.append(f"{lhs} -> {' '.join(rhs) if rhs else EPS_TOKEN}")
    return "\n".join(lines) + "\n"


def load_cfg(path) -> Cfg:
    with open(path, encoding="utf-8") as fh:
        return parse_cfg(fh.read(), path)
