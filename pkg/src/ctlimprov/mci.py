"""Multi-constraint improvisation over explicit automata.

The improvisation set is split into ``2**k`` cells by which soft
constraints a word satisfies.  A linear program over one probability per
cell decides feasibility; a solution is turned into a sampler that picks a
cell, then a uniform word inside it.  Soft constraints are numbered from 1
in reports; internally a cell is a bitmask with bit ``i`` set when soft
constraint ``i + 1`` holds.
"""

from __future__ import annotations

import logging
import random
from dataclasses import dataclass
from fractions import Fraction
from math import lcm
from typing import Optional

from . import automata
from .automata import Dfa
from .core import DFA, NFA, SpecHandle, as_fraction, categorical
from .errors import CapExceeded, InternalError, InvalidInstance, UnsupportedCombination
from .lp import EQ, GE, LE, LinearProgram, solve_lp

logger = logging.getLogger(__name__)

DEFAULT_K_CAP = 12


@dataclass(frozen=True)
class MciInstance:
    hard: SpecHandle
    softs: tuple
    m: int
    n: int
    epsilons: tuple
    lam: Fraction
    rho: Fraction

    def __post_init__(self):
        object.__setattr__(self, "softs", tuple(self.softs))
        object.__setattr__(self, "epsilons", tuple(as_fraction(e) for e in self.epsilons))
        object.__setattr__(self, "lam", as_fraction(self.lam))
        object.__setattr__(self, "rho", as_fraction(self.rho))
        if not self.softs:
            raise InvalidInstance("need at least one soft specification")
        if len(self.softs) != len(self.epsilons):
            raise InvalidInstance(f"{len(self.softs)} soft specs but {len(self.epsilons)} epsilons")
        if self.m < 0 or self.m > self.n:
            raise InvalidInstance(f"bad length bounds m={self.m}, n={self.n}")
        for value in self.epsilons + (self.lam, self.rho):
            if not 0 <= value <= 1:
                raise InvalidInstance(f"parameter {value} outside [0, 1]")
        if self.lam > self.rho:
            raise InvalidInstance("lambda must not exceed rho")

    @property
    def k(self) -> int:
        return len(self.softs)


@dataclass
class Cell:
    mask: int
    size: int
    dfa: Optional[Dfa]
    sampler: Optional[automata.WalkSampler]


def _as_dfa(handle: SpecHandle) -> Dfa:
    if handle.kind == DFA:
        return handle.payload
    if handle.kind == NFA:
        logger.warning("determinizing an NFA specification")
        return automata.determinize(handle.payload)
    raise UnsupportedCombination(
        f"multi-constraint improvisation accepts DFA/NFA specifications only, not {handle.kind}; "
        "cells would need intersections of several grammars, which is #P-hard")


def mask_members(mask: int, k: int) -> tuple:
    """1-based indices of the soft constraints in ``mask``."""
    return tuple(i + 1 for i in range(k) if mask >> i & 1)


def cell_sizes(instance: MciInstance, k_cap: int = DEFAULT_K_CAP) -> dict:
    """``{mask: Cell}`` for all ``2**k`` cells; the sizes partition ``|I|``.

    Products are built along a binary tree over the soft constraints, so a
    prefix that is already empty is never extended.
    """
    if instance.k > k_cap:
        raise CapExceeded(f"k={instance.k} exceeds the cap of {k_cap} soft constraints")
    hard = automata.length_restrict(_as_dfa(instance.hard), instance.m, instance.n)
    softs = [_as_dfa(s) for s in instance.softs]
    cells = {}

    def grow(dfa: Dfa, i: int, mask: int):
        if automata.count_language(dfa) == 0:
            for rest in range(2 ** (instance.k - i)):
                full = mask | rest << i
                cells[full] = Cell(full, 0, None, None)
            return
        if i == instance.k:
            sampler = automata.build_sampler(dfa)
            cells[mask] = Cell(mask, sampler.total, dfa, sampler)
            return
        grow(automata.product(dfa, softs[i], automata.DIFF), i + 1, mask)
        grow(automata.product(dfa, softs[i], automata.AND), i + 1, mask | 1 << i)

    grow(hard, 0, 0)
    total = automata.count_language(hard)
    if sum(c.size for c in cells.values()) != total:
        raise InternalError("cell sizes do not add up to |I|")
    return dict(sorted(cells.items()))


def build_cell_lp(sizes: dict, epsilons, lam, rho) -> tuple:
    """The cell program; returns ``(lp, masks)`` where ``masks[j]`` owns variable ``j``.

    Empty cells get no variable (their probability is 0).  The objective
    maximizes the mass on soft constraint 1.
    """
    masks = [mask for mask, size in sorted(sizes.items()) if size > 0]
    lp = LinearProgram(len(masks), objective={j: 1 for j, mask in enumerate(masks) if mask & 1})
    lp.add({j: 1 for j in range(len(masks))}, LE, 1)
    for i, eps in enumerate(epsilons):
        lp.add({j: 1 for j, mask in enumerate(masks) if mask >> i & 1}, GE, 1 - eps)
    for j, mask in enumerate(masks):
        lp.add({j: 1}, GE, lam * sizes[mask])
        lp.add({j: 1}, LE, rho * sizes[mask])
    return lp, masks


def verify_distribution(sizes: dict, probs: dict, epsilons, lam, rho) -> list:
    """Every requirement the cell distribution breaks, checked with exact fractions."""
    problems = []
    if sum(probs.values()) != 1:
        problems.append(f"total mass {sum(probs.values())} != 1")
    for mask, p in probs.items():
        size = sizes[mask]
        if p < 0:
            problems.append(f"negative mass on cell {mask}")
        if size == 0:
            if p != 0:
                problems.append(f"mass on empty cell {mask}")
            continue
        per_word = p / size
        if not lam <= per_word <= rho:
            problems.append(f"cell {mask}: per-word probability {per_word} outside [{lam}, {rho}]")
    for i, eps in enumerate(epsilons):
        mass = sum(p for mask, p in probs.items() if mask >> i & 1)
        if mass < 1 - eps:
            problems.append(f"soft constraint {i + 1}: mass {mass} < {1 - eps}")
    return problems


def renormalize(sizes: dict, probs: dict, rho) -> Optional[dict]:
    """Raise cell masses toward ``rho * size`` (cell order) until they sum to 1.

    Returns ``None`` when the caps cannot absorb the missing mass, which
    happens exactly when ``rho * |I| < 1``.
    """
    out = dict(probs)
    missing = 1 - sum(out.values())
    for mask in sorted(out):
        if missing <= 0:
            break
        room = rho * sizes[mask] - out[mask]
        add = min(room, missing)
        if add > 0:
            out[mask] += add
            missing -= add
    if missing != 0:
        return None
    return out


@dataclass
class MciReport:
    feasible: bool
    size_i: int
    sizes: dict
    probabilities: Optional[dict]
    problems: tuple = ()


class MciImproviser:
    """Pick a cell with probability ``p_M``, then a uniform word of that cell."""

    def __init__(self, cells: dict, probabilities: dict, seed=None):
        self.cells = cells
        self.probabilities = probabilities
        self.masks = [mask for mask, p in sorted(probabilities.items()) if p > 0]
        scale = lcm(*(probabilities[mask].denominator for mask in self.masks))
        self.weights = [int(probabilities[mask] * scale) for mask in self.masks]
        self.rng = random.Random(seed)

    def word_probability(self, word) -> Fraction:
        for mask in self.masks:
            cell = self.cells[mask]
            if automata.run(cell.dfa, word):
                return self.probabilities[mask] / cell.size
        return Fraction(0)

    def sample(self) -> tuple:
        mask = self.masks[categorical(self.weights, self.rng)]
        return self.cells[mask].sampler(self.rng)

    def generate(self, count: int) -> list:
        return [self.sample() for _ in range(count)]

    def reseeded(self, seed) -> "MciImproviser":
        return MciImproviser(self.cells, self.probabilities, seed)


def mci_check(instance: MciInstance, k_cap: int = DEFAULT_K_CAP, cells: Optional[dict] = None):
    """Solve the cell program; returns ``(report, cells)``."""
    cells = cells if cells is not None else cell_sizes(instance, k_cap)
    sizes = {mask: c.size for mask, c in cells.items()}
    size_i = sum(sizes.values())
    if instance.rho * size_i < 1 or (instance.lam != 0 and instance.lam * size_i > 1):
        return MciReport(False, size_i, sizes, None, ("|I| outside [1/rho, 1/lambda]",)), cells
    lp, masks = build_cell_lp(sizes, instance.epsilons, instance.lam, instance.rho)
    result = solve_lp(lp)
    if not result.feasible:
        return MciReport(False, size_i, sizes, None, ("cell program infeasible",)), cells
    probs = {mask: Fraction(0) for mask in sizes}
    for j, mask in enumerate(masks):
        probs[mask] = result.x[j]
    probs = renormalize(sizes, probs, instance.rho)
    if probs is None:
        raise InternalError("renormalization failed although rho*|I| >= 1")
    problems = verify_distribution(sizes, probs, instance.epsilons, instance.lam, instance.rho)
    if problems:
        raise InternalError("; ".join(problems))
    return MciReport(True, size_i, sizes, probs), cells


def mci_improviser(instance: MciInstance, seed=None, k_cap: int = DEFAULT_K_CAP):
    """Returns ``(report, improviser or None)``."""
    report, cells = mci_check(instance, k_cap)
    if not report.feasible:
        return report, None
    return report, MciImproviser(cells, report.probabilities, seed)


def word_level_lp(words, memberships, epsilons, lam, rho) -> LinearProgram:
    """One variable per word with the requirements stated directly.

    ``memberships[w]`` is the set of (0-based) soft constraints ``w`` satisfies.
    """
    words = list(words)
    lp = LinearProgram(len(words))
    lp.add({j: 1 for j in range(len(words))}, EQ, 1)
    for j in range(len(words)):
        lp.add({j: 1}, GE, lam)
        lp.add({j: 1}, LE, rho)
    for i, eps in enumerate(epsilons):
        lp.add({j: 1 for j, w in enumerate(words) if i in memberships[w]}, GE, 1 - eps)
    return lp


def word_level_feasible(words, memberships, epsilons, lam, rho) -> bool:
    if not words:
        return False
    return solve_lp(word_level_lp(words, memberships, epsilons, lam, rho)).feasible
