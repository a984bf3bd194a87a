"""Approximately uniform projected sampling with random parity hashes, and the
approximate improviser built on it.

Sampler outline (one draw):

1. if the whole language has at most ``hi`` words, pick one uniformly from
   the exact list (computed once and cached);
2. otherwise add ``level`` random parity constraints over the projected
   variables, enumerate the surviving cell;
3. if the cell holds more than ``hi`` words, fail; else draw ``j`` in
   ``[0, hi)`` and return the ``j``-th word of the cell (sorted), failing
   when ``j`` is past its end;
4. retry on failure.

Step 3 is the rejection trick that makes every word equally likely up to
the chance that its own cell overflows.  The parity constraints are
3-wise independent, so given that ``w`` is in the cell, the number of other
words there has mean and variance at most ``mu = |L| / 2**level``.  With
``delta = tau / (1 + tau)`` and ``hi >= 1 + mu + sqrt(mu / delta)``,
Chebyshev bounds the overflow chance by ``delta``, and every word's output
probability lies within a factor ``1 / (1 - delta) = 1 + tau`` of every
other's.

Constants (chosen here, checked by the frequency-band tests):

* ``pivot = ceil(1 / delta) + 1`` is the target cell size;
* the level is the median, over three trial hashes, of the smallest
  number of parity constraints whose cell holds at most ``pivot`` words;
  it is estimated once, at construction, from an RNG seeded with
  ``level_seed``, so that sampling streams stay independent of each other;
* ``hi = ceil(1 + 2*pivot + sqrt(2*pivot / delta))``, which tolerates a
  level estimate that is off by one.
"""

from __future__ import annotations

import math
import random
import statistics
from fractions import Fraction
from typing import Optional

from ..core import CiInstance, as_fraction, bernoulli
from ..errors import EmptyLanguage, InvalidInstance, SamplingFailed, ShapeMismatch
from .sat import DpllSolver, SatOracle
from .spec import SymbolicSpec, _Fresh, conjoin, projected_solutions, xor_clauses

SAT_CELLS = "sat"
TABLE_CELLS = "table"


def band_parameters(tau) -> tuple:
    """``(pivot, hi)`` for a tolerance ``tau > 0``."""
    tau = as_fraction(tau)
    if tau <= 0:
        raise ValueError("tau must be positive")
    delta = tau / (1 + tau)
    pivot = math.ceil(1 / delta) + 1
    hi = math.ceil(1 + 2 * pivot + math.sqrt(2 * pivot / delta))
    return pivot, hi


class ApproxSampler:
    """Projected sampler uniform up to a factor ``1 + tau``.

    ``cells`` picks how a hash cell is enumerated: ``"sat"`` asks the oracle
    with the parity constraints conjoined (blocking one model at a time);
    ``"table"`` enumerates the projected language once through the oracle
    and filters it by the parity constraints.  Both consume the RNG
    identically and return identical words for identical seeds; the table
    path only exists to make long desk-scale runs affordable.
    """

    def __init__(self, spec: SymbolicSpec, tau, oracle: Optional[SatOracle] = None,
                 cells: str = SAT_CELLS, retry_cap: int = 10 ** 4, table_cap: int = 2 ** 16,
                 pivot: Optional[int] = None, hi: Optional[int] = None, level_seed: int = 0):
        if cells not in (SAT_CELLS, TABLE_CELLS):
            raise ValueError(f"unknown cell mode {cells!r}")
        self.spec = spec
        self.tau = as_fraction(tau)
        self.oracle = oracle or DpllSolver()
        self.cells = cells
        self.retry_cap = retry_cap
        default_pivot, default_hi = band_parameters(self.tau)
        self.pivot = pivot or default_pivot
        self.hi = hi or default_hi
        self.attempts = 0
        self.failures = 0
        self._table = None
        if cells == TABLE_CELLS:
            sols = projected_solutions(spec, self.oracle, table_cap)
            if len(sols) > table_cap:
                raise ValueError(f"table mode needs at most {table_cap} projected solutions")
            self._table = sorted(sols)
        small = self._enumerate([], self.hi)
        if not small:
            raise EmptyLanguage("symbolic specification has no solutions")
        self.small = sorted(small) if len(small) <= self.hi else None
        # fixed up front from its own RNG so draws never depend on call history
        self.level = None
        if self.small is None:
            self.level = self._estimate_level(random.Random(level_seed))

    # cell enumeration -------------------------------------------------------------
    def _enumerate(self, hash_rows, limit: int) -> list:
        """Projected vectors satisfying the parity rows, at most ``limit + 1`` of them."""
        if self._table is not None:
            out = []
            for bits in self._table:
                if all(sum(bits[i] for i in row) % 2 == parity for row, parity in hash_rows):
                    out.append(bits)
                    if len(out) > limit:
                        break
            return out
        fresh = _Fresh(self.spec.n_vars)
        extra = []
        for row, parity in hash_rows:
            extra += xor_clauses([self.spec.projected[i] for i in row], parity, fresh)
        return projected_solutions(self.spec, self.oracle, limit, extra, fresh.top)

    def _random_hash(self, rows: int, rng: random.Random) -> list:
        width = len(self.spec.projected)
        out = []
        for _ in range(rows):
            mask = rng.getrandbits(width) if width else 0
            row = [i for i in range(width) if (mask >> i) & 1]
            out.append((row, rng.getrandbits(1)))
        return out

    def _estimate_level(self, rng: random.Random) -> int:
        width = len(self.spec.projected)
        trials = []
        for _ in range(3):
            rows = self._random_hash(width, rng)
            level = width
            for i in range(1, width + 1):
                if len(self._enumerate(rows[:i], self.pivot)) <= self.pivot:
                    level = i
                    break
            trials.append(level)
        return int(statistics.median(trials))

    # sampling -----------------------------------------------------------------
    def sample_bits(self, rng: random.Random) -> tuple:
        if self.small is not None:
            return self.small[rng.randrange(len(self.small))]
        for _ in range(self.retry_cap):
            self.attempts += 1
            cell = self._enumerate(self._random_hash(self.level, rng), self.hi)
            if len(cell) <= self.hi:
                j = rng.randrange(self.hi)
                if j < len(cell):
                    return sorted(cell)[j]
            self.failures += 1
        raise SamplingFailed(f"no sample after {self.retry_cap} attempts")

    def sample(self, rng: random.Random) -> tuple:
        return self.spec.decode(self.sample_bits(rng))

    __call__ = sample


def approx_uniform_sample(spec: SymbolicSpec, tau, oracle: Optional[SatOracle] = None,
                          rng: Optional[random.Random] = None) -> tuple:
    return ApproxSampler(spec, tau, oracle).sample(rng or random.Random())


class ApproxImproviser:
    """With probability ``1 - epsilon`` sample (approximately) from A, else from I.

    Nothing is counted and the soft specification is never complemented.
    """

    def __init__(self, epsilon, lam, rho, tau, sampler_a, sampler_i, seed=None):
        self.epsilon = as_fraction(epsilon)
        self.lam = as_fraction(lam)
        self.rho = as_fraction(rho)
        self.tau = as_fraction(tau)
        self.sampler_a = sampler_a
        self.sampler_i = sampler_i
        self.rng = random.Random(seed)
        self.scheme = "symbolic (approximate)"

    def guarantees(self) -> tuple:
        """``(epsilon, lambda', rho')`` the output law satisfies when the instance is feasible."""
        return (self.epsilon, self.epsilon * self.lam / (1 + self.tau),
                self.rho * (1 + self.epsilon) * (1 + self.tau))

    def sample(self) -> tuple:
        if bernoulli(1 - self.epsilon, self.rng):
            return self.sampler_a(self.rng)
        return self.sampler_i(self.rng)

    def generate(self, count: int) -> list:
        return [self.sample() for _ in range(count)]

    def reseeded(self, seed) -> "ApproxImproviser":
        return ApproxImproviser(self.epsilon, self.lam, self.rho, self.tau, self.sampler_a,
                                self.sampler_i, seed)


def approx_improviser(instance: CiInstance, tau, oracle: Optional[SatOracle] = None, seed=None,
                      cells: str = SAT_CELLS) -> ApproxImproviser:
    """Approximate improviser for symbolic hard and soft specifications.

    Feasibility is assumed, not checked; the length bounds must agree with
    the fixed word length of both specifications.
    """
    hard: SymbolicSpec = instance.hard.payload
    soft: SymbolicSpec = instance.soft.payload
    if not (instance.m == instance.n == hard.n == soft.n):
        raise ShapeMismatch(f"symbolic words have fixed length: need m = n = {hard.n}")
    oracle = oracle or DpllSolver()
    try:
        sampler_i = ApproxSampler(hard, tau, oracle, cells)
    except EmptyLanguage:
        raise InvalidInstance("the hard specification has no words of this length") from None
    sampler_a = None
    if instance.epsilon < 1:
        try:
            sampler_a = ApproxSampler(conjoin(hard, soft), tau, oracle, cells)
        except EmptyLanguage:
            raise InvalidInstance("no admissible words and epsilon < 1") from None
    return ApproxImproviser(instance.epsilon, instance.lam, instance.rho, tau,
                            sampler_a, sampler_i, seed)


def word_frequency_band(size: int, tau) -> tuple:
    """Exact bounds ``[1/((1+tau)|L|), (1+tau)/|L|]`` on a word's output probability."""
    tau = as_fraction(tau)
    return Fraction(1, size) / (1 + tau), (1 + tau) / Fraction(size)
