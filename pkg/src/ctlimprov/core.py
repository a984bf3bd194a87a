"""Control improvisation instances, the feasibility test and the two-list improviser.

Everything on the decision path is exact: probabilities are
:class:`fractions.Fraction` values and counts are Python integers, so the
inequalities below are evaluated without rounding.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any, Callable, Optional, Protocol, Sequence

from .errors import InternalError, InvalidInstance

Word = tuple
Sampler = Callable[[random.Random], Word]

DFA = "DFA"
NFA = "NFA"
UCFG = "UCFG"
SYMBOLIC = "SYMBOLIC"
SPEC_KINDS = (DFA, NFA, UCFG, SYMBOLIC)


def as_fraction(value) -> Fraction:
    """Coerce ints, Fractions and ``"a/b"`` strings; floats are refused."""
    if isinstance(value, float):
        raise InvalidInstance(f"refusing inexact float {value!r}; use a/b")
    if isinstance(value, str):
        text = value.strip()
        if "." in text or "e" in text.lower():
            raise InvalidInstance(f"not an exact rational: {value!r}")
        try:
            return Fraction(text)
        except (ValueError, ZeroDivisionError) as exc:
            raise InvalidInstance(f"not an exact rational: {value!r}") from exc
    return Fraction(value)


def format_fraction(value: Fraction) -> str:
    if value.denominator == 1:
        return str(value.numerator)
    return f"{value.numerator}/{value.denominator}"


@dataclass(frozen=True)
class SpecHandle:
    kind: str
    payload: Any

    def __post_init__(self):
        if self.kind not in SPEC_KINDS:
            raise InvalidInstance(f"unknown specification kind {self.kind!r}")


@dataclass(frozen=True)
class CiInstance:
    hard: SpecHandle
    soft: SpecHandle
    m: int
    n: int
    epsilon: Fraction
    lam: Fraction
    rho: Fraction

    def __post_init__(self):
        for name in ("epsilon", "lam", "rho"):
            object.__setattr__(self, name, as_fraction(getattr(self, name)))
        if self.m < 0 or self.n < 0:
            raise InvalidInstance("length bounds must be natural numbers")
        if self.m > self.n:
            raise InvalidInstance(f"m={self.m} exceeds n={self.n}")
        for name in ("epsilon", "lam", "rho"):
            if not 0 <= getattr(self, name) <= 1:
                raise InvalidInstance(f"{name} must lie in [0, 1]")
        if self.lam > self.rho:
            raise InvalidInstance("lambda must not exceed rho")


@dataclass(frozen=True)
class FeasibilityReport:
    feasible: bool
    size_i: int
    size_a: int
    epsilon_opt: Optional[Fraction]
    violated: tuple = ()

    @property
    def size_b(self) -> int:
        return self.size_i - self.size_a


def epsilon_opt(size_i: int, size_a: int, lam, rho) -> Fraction:
    """Smallest soft-constraint error compatible with the randomness bounds.

    ``max(1 - rho*|A|, lam*|I \\ A|)``, clamped to [0, 1].
    """
    if size_i < 1:
        raise InvalidInstance("epsilon_opt is undefined for an empty improvisation set")
    if not 0 <= size_a <= size_i:
        raise InvalidInstance(f"|A|={size_a} outside [0, |I|={size_i}]")
    lam, rho = as_fraction(lam), as_fraction(rho)
    raw = max(1 - rho * size_a, lam * (size_i - size_a))
    clamped = min(max(raw, Fraction(0)), Fraction(1))
    if clamped != raw and lam * size_i <= 1 and rho * size_i >= 1:
        raise InternalError(f"epsilon_opt {raw} left [0,1] although |I| bounds hold")
    return clamped


def check_feasibility(size_i: int, size_a: int, epsilon, lam, rho) -> FeasibilityReport:
    """Decide feasibility from |I| and |A| alone.

    Inequalities, all cross-multiplied so that nothing is divided:

    * ``2a``: ``rho*|I| >= 1`` and ``lam*|I| <= 1``
    * ``2b``: ``rho*|A| >= 1 - epsilon``
    * ``2c``: ``lam*(|I| - |A|) <= epsilon``

    With ``lam == 0`` the two lambda inequalities are skipped outright.
    """
    if size_a < 0 or size_a > size_i:
        raise InvalidInstance(f"|A|={size_a} is not within [0, |I|={size_i}]")
    epsilon, lam, rho = as_fraction(epsilon), as_fraction(lam), as_fraction(rho)
    for name, value in (("epsilon", epsilon), ("lambda", lam), ("rho", rho)):
        if not 0 <= value <= 1:
            raise InvalidInstance(f"{name}={value} outside [0, 1]")

    violated = []
    ok_2a = rho * size_i >= 1
    if lam != 0:
        ok_2a = ok_2a and lam * size_i <= 1
    if not ok_2a:
        violated.append("2a")
    if not rho * size_a >= 1 - epsilon:
        violated.append("2b")
    if lam != 0 and not lam * (size_i - size_a) <= epsilon:
        violated.append("2c")

    eps_opt = epsilon_opt(size_i, size_a, lam, rho) if size_i > 0 else None
    return FeasibilityReport(not violated, size_i, size_a, eps_opt, tuple(violated))


def bernoulli(bias, rng: random.Random) -> bool:
    """True with probability exactly ``bias`` (one uniform integer draw)."""
    bias = as_fraction(bias)
    if not 0 <= bias <= 1:
        raise ValueError(f"bias {bias} outside [0, 1]")
    return rng.randrange(bias.denominator) < bias.numerator


def categorical(weights: Sequence[int], rng: random.Random) -> int:
    """Index i with probability weights[i] / sum(weights); integer weights only."""
    total = sum(weights)
    if total <= 0:
        raise ValueError("weights must have a positive sum")
    r = rng.randrange(total)
    for i, w in enumerate(weights):
        if r < w:
            return i
        r -= w
    raise InternalError("categorical draw fell off the end")


@dataclass
class Improviser:
    """Coin with bias ``coin_bias`` between a uniform sampler on A and one on I \\ A."""

    coin_bias: Fraction
    size_a: int
    size_b: int
    sampler_a: Optional[Sampler]
    sampler_b: Optional[Sampler]
    rng: random.Random = field(default_factory=random.Random)
    scheme: str = "generic"

    def __post_init__(self):
        if self.coin_bias > 0 and self.sampler_a is None:
            raise InternalError("positive A-branch probability without an A sampler")
        if self.coin_bias < 1 and self.sampler_b is None:
            raise InternalError("positive B-branch probability without a B sampler")

    def class_probabilities(self) -> tuple:
        """Exact per-word probability on A and on I \\ A (``None`` for an empty class)."""
        pa = self.coin_bias / self.size_a if self.size_a else None
        pb = (1 - self.coin_bias) / self.size_b if self.size_b else None
        return pa, pb

    def sample(self) -> Word:
        if bernoulli(self.coin_bias, self.rng):
            return self.sampler_a(self.rng)
        return self.sampler_b(self.rng)

    def generate(self, count: int) -> list:
        return [self.sample() for _ in range(count)]

    def reseeded(self, seed) -> "Improviser":
        """Same construction, fresh RNG; samplers are shared (they are read-only)."""
        return Improviser(self.coin_bias, self.size_a, self.size_b, self.sampler_a,
                          self.sampler_b, random.Random(seed), self.scheme)


def assemble_improviser(report: FeasibilityReport, sampler_a, sampler_b, seed=None,
                        scheme: str = "generic") -> Optional[Improviser]:
    """Turn a feasibility report plus two sampler factories into an improviser.

    ``sampler_a``/``sampler_b`` are zero-argument callables returning a
    sampler; the B factory is only invoked when the B branch has positive
    probability, which lets expensive constructions stay lazy.
    """
    if not report.feasible:
        return None
    bias = 1 - report.epsilon_opt
    sa = sampler_a() if bias > 0 else None
    sb = sampler_b() if bias < 1 else None
    return Improviser(bias, report.size_a, report.size_b, sa, sb, random.Random(seed), scheme)


class SpecOperations(Protocol):
    """The five abstract operations the generic scheme is built from."""

    def length_restrict(self, spec, m: int, n: int): ...

    def intersect(self, x, y): ...

    def difference(self, x, y): ...

    def count(self, spec) -> int: ...

    def sampler(self, spec) -> Sampler: ...


def build_improviser(instance: CiInstance, ops: SpecOperations, seed=None,
                     scheme: str = "generic"):
    """Generic scheme: restrict, intersect, subtract, count, then flip the coin.

    Returns ``(report, improviser)``; the improviser is ``None`` when the
    instance is infeasible.
    """
    spec_i = ops.length_restrict(instance.hard.payload, instance.m, instance.n)
    spec_a = ops.intersect(spec_i, instance.soft.payload)
    spec_b = ops.difference(spec_i, spec_a)
    size_i = ops.count(spec_i)
    size_a = ops.count(spec_a)
    report = check_feasibility(size_i, size_a, instance.epsilon, instance.lam, instance.rho)
    improviser = assemble_improviser(
        report, lambda: ops.sampler(spec_a), lambda: ops.sampler(spec_b), seed, scheme)
    return report, improviser
