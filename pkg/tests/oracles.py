"""Brute-force reference implementations the tests compare against.

Nothing here reuses library code paths except the data types: languages
are enumerated word by word, derivations are counted on the original
grammar by direct recursion, and distributions are checked one word at a
time.
"""

from __future__ import annotations

import itertools
import math
import random
from fractions import Fraction

from ctlimprov.automata import Dfa
from ctlimprov.grammars import Cfg


def words_upto(alphabet, n, m=0):
    for length in range(m, n + 1):
        yield from itertools.product(alphabet, repeat=length)


def dfa_accepts(d: Dfa, word) -> bool:
    state = d.initial
    for a in word:
        state = d.delta[state][d.alphabet.index(a)]
    return state in d.accepting


def dfa_language(d: Dfa, n, m=0) -> set:
    return {w for w in words_upto(d.alphabet, n, m) if dfa_accepts(d, w)}


def random_dfa(rng: random.Random, n_states=None, alphabet=("0", "1"), p_accept=0.4) -> Dfa:
    n_states = n_states or rng.randint(1, 8)
    rows = [[rng.randrange(n_states) for _ in alphabet] for _ in range(n_states)]
    accepting = {s for s in range(n_states) if rng.random() < p_accept}
    return Dfa(alphabet, rows, rng.randrange(n_states), accepting)


# --- grammars ---------------------------------------------------------------------

class Cyclic(Exception):
    """The grammar derives some word through a cycle (infinitely many trees)."""


def derivations(g: Cfg, word) -> int:
    """Number of parse trees of ``word`` in ``g``, by recursion on the raw productions."""
    word = tuple(word)
    by_lhs = {}
    for lhs, rhs in g.productions:
        by_lhs.setdefault(lhs, []).append(rhs)
    nullable = set()
    grew = True
    while grew:
        grew = False
        for lhs, rhs in g.productions:
            if lhs not in nullable and all(s in nullable for s in rhs):
                nullable.add(lhs)
                grew = True
    memo = {}
    active = set()

    def sym(x, i, j):
        if x not in g.nonterminals:
            return 1 if j == i + 1 and word[i] == x else 0
        if i == j and x not in nullable:
            return 0
        key = (x, i, j)
        if key in memo:
            return memo[key]
        if key in active:
            raise Cyclic(key)
        active.add(key)
        total = sum(seq(rhs, i, j) for rhs in by_lhs.get(x, []))
        active.discard(key)
        memo[key] = total
        return total

    def seq(rhs, i, j):
        if not rhs:
            return 1 if i == j else 0
        head, rest = rhs[0], rhs[1:]
        if head not in g.nonterminals:
            if i < j and word[i] == head:
                return seq(rest, i + 1, j)
            return 0
        # every non-nullable symbol covers at least one letter
        need = sum(1 for s in rest if s not in nullable)
        lo = i if head in nullable else i + 1
        total = 0
        for k in range(lo, j - need + 1):
            left = sym(head, i, k)
            if left:
                total += left * seq(rest, k, j)
        return total

    return sym(g.start, 0, len(word))


def grammar_language(g: Cfg, alphabet, n) -> dict:
    """``{word: parse-tree count}`` for every word of length <= n with a derivation."""
    out = {}
    for w in words_upto(alphabet, n):
        c = derivations(g, w)
        if c:
            out[w] = c
    return out


def random_grammar(rng: random.Random, alphabet=("a", "b"), n_nonterminals=None) -> Cfg:
    """Small random grammar; callers filter for unambiguity with :func:`derivations`."""
    k = n_nonterminals or rng.randint(1, 3)
    names = [f"N{i}" for i in range(k)]
    productions = []
    for x in names:
        for _ in range(rng.randint(1, 3)):
            length = rng.choice([0, 1, 1, 2, 2, 2, 3])
            rhs = []
            for pos in range(length):
                if pos == 0 and rng.random() < 0.6 or rng.random() < 0.4:
                    rhs.append(rng.choice(alphabet))
                else:
                    rhs.append(rng.choice(names))
            if length == 0 and x != names[0] and rng.random() < 0.7:
                rhs = [rng.choice(alphabet)]
            productions.append((x, tuple(rhs)))
    # every nonterminal needs a terminating production
    for x in names:
        productions.append((x, (rng.choice(alphabet),)))
    return Cfg(names[0], tuple(dict.fromkeys(productions)))


def random_ucfg(rng: random.Random, alphabet=("a", "b"), check_len=5, tries=200):
    """A random grammar whose words up to ``check_len`` each have exactly one parse tree."""
    for _ in range(tries):
        g = random_grammar(rng, alphabet)
        try:
            lang = grammar_language(g, alphabet, check_len)
        except Cyclic:
            continue
        if all(c == 1 for c in lang.values()) and len(lang) >= 2:
            return g, lang
    raise RuntimeError("no unambiguous grammar found")


# --- distributions ----------------------------------------------------------------

def two_list_distribution(improvs, admissible, epsilon_opt) -> dict:
    """The coin-flip distribution written out word by word."""
    a = [w for w in improvs if w in admissible]
    b = [w for w in improvs if w not in admissible]
    dist = {}
    for w in a:
        dist[w] = (1 - epsilon_opt) / len(a)
    for w in b:
        dist[w] = epsilon_opt / len(b)
    return dist


def is_improvising(dist: dict, improvs, admissible, epsilon, lam, rho) -> bool:
    """Hard, soft and randomness requirements, checked on every word."""
    if set(w for w, p in dist.items() if p > 0) - set(improvs):
        return False
    if sum(dist.values()) != 1:
        return False
    if any(not lam <= dist.get(w, Fraction(0)) <= rho for w in improvs):
        return False
    return sum(p for w, p in dist.items() if w in admissible) >= 1 - epsilon


def greedy_feasible(size_i, size_a, epsilon, lam, rho) -> bool:
    """Existence of an improvising distribution by pouring mass greedily.

    Every word starts at lam; admissible words are then filled up to rho,
    then the rest.  The admissible mass is then as large as it can be.
    """
    if size_i == 0:
        return False
    mass = lam * size_i
    if mass > 1:
        return False
    left = 1 - mass
    fill_a = min(left, (rho - lam) * size_a)
    left -= fill_a
    fill_b = min(left, (rho - lam) * (size_i - size_a))
    left -= fill_b
    if left > 0:
        return False
    return lam * size_a + fill_a >= 1 - epsilon


def within_sigma(count, n, p, k=4) -> bool:
    p = float(p)
    sigma = math.sqrt(p * (1 - p) / n) if 0 < p < 1 else 0.0
    return abs(count / n - p) <= k * sigma + 1e-12


def band_ok(count, n, lo, hi, k=4) -> bool:
    """Empirical frequency inside ``[lo, hi]`` widened by k standard deviations."""
    f = count / n
    s_lo = math.sqrt(float(lo) * (1 - float(lo)) / n)
    s_hi = math.sqrt(float(hi) * (1 - float(hi)) / n) if hi < 1 else 0.0
    return float(lo) - k * s_lo <= f <= float(hi) + k * s_hi
