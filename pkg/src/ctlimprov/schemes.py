"""Loading specification and instance files, and picking the scheme for a pair of spec kinds.

| hard \\ soft | DFA        | UCFG          | SYMBOLIC        |
|-------------|------------|---------------|-----------------|
| DFA         | exact      | exact (Delta) | unsupported     |
| UCFG        | exact      | #P-hard       | unsupported     |
| SYMBOLIC    | unsupported| unsupported   | approximate     |

NFAs are determinized (with a warning) and then treated as DFAs.
"""

from __future__ import annotations

import logging
import os
from dataclasses import dataclass
from typing import Callable, Optional

from . import automata, grammars
from .core import (DFA, NFA, SYMBOLIC, UCFG, CiInstance, FeasibilityReport, SpecHandle,
                   as_fraction, build_improviser, check_feasibility)
from .errors import (AlphabetMismatch, CapExceeded, InvalidInstance, SpecParseError,
                     UnsupportedCombination)
from .mci import MciInstance
from .symbolic import sampling, spec as symspec

logger = logging.getLogger(__name__)

EXTENSIONS = {".dfa": DFA, ".nfa": NFA, ".cfg": UCFG, ".cnf": SYMBOLIC, ".saut": SYMBOLIC}
SYMBOLIC_CHECK_CAP = 4096  # projected solutions counted exactly before giving up


def load_spec(path) -> SpecHandle:
    ext = os.path.splitext(str(path))[1].lower()
    kind = EXTENSIONS.get(ext)
    if kind is None:
        raise SpecParseError(f"cannot infer the specification kind from extension {ext!r}", path)
    loaders = {".dfa": automata.load_dfa, ".nfa": automata.load_nfa, ".cfg": grammars.load_cfg,
               ".cnf": symspec.load_cnf, ".saut": symspec.load_saut}
    try:
        payload = loaders[ext](path)
    except ValueError as exc:
        raise SpecParseError(str(exc), path) from exc
    except OSError as exc:
        raise SpecParseError(f"cannot read file: {exc.strerror}", path) from exc
    return SpecHandle(kind, payload)


def format_spec(handle: SpecHandle) -> str:
    p = handle.payload
    if handle.kind == DFA:
        return automata.format_dfa(p)
    if handle.kind == NFA:
        return automata.format_nfa(p)
    if handle.kind == UCFG:
        return grammars.format_cfg(p)
    if isinstance(p, symspec.SymbolicAutomaton):
        return symspec.format_saut(p)
    return symspec.format_cnf(p)


# --- instance files ---------------------------------------------------------------

def _natural(value, key, path, lineno):
    try:
        number = int(value)
    except ValueError:
        raise SpecParseError(f"{key} must be a natural number, got {value!r}", path, lineno) from None
    if number < 0:
        raise SpecParseError(f"{key} must be a natural number", path, lineno)
    return number


def parse_instance(text: str, path=None, base_dir=None):
    """Parse ``key = value`` lines into a :class:`CiInstance` or :class:`MciInstance`.

    Paths are resolved against ``base_dir`` (default: the file's directory).
    The multi-soft form (``soft.1``, ``epsilon.1``, ...) gives an MCI instance.
    """
    if base_dir is None:
        base_dir = os.path.dirname(os.path.abspath(path)) if path else os.getcwd()
    values = {}
    lines = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        key, value = key.strip(), value.strip()
        if not sep or not key or not value:
            raise SpecParseError(f"expected 'key = value', got {line!r}", path, lineno)
        if key in values:
            raise SpecParseError(f"duplicate key {key!r}", path, lineno)
        values[key] = value
        lines[key] = lineno

    def rational(key):
        try:
            return as_fraction(values[key])
        except InvalidInstance as exc:
            raise SpecParseError(str(exc), path, lines[key]) from None

    def spec(key):
        target = values[key]
        if not os.path.isabs(target):
            target = os.path.join(base_dir, target)
        return load_spec(target)

    indexed_soft = sorted(k for k in values if k.startswith("soft."))
    indexed_eps = sorted(k for k in values if k.startswith("epsilon."))
    multi = bool(indexed_soft or indexed_eps)
    if multi and ("soft" in values or "epsilon" in values):
        raise SpecParseError("mixes 'soft'/'epsilon' with the indexed 'soft.i'/'epsilon.i' form", path)
    required = ["hard", "m", "n", "lambda", "rho"] + ([] if multi else ["soft", "epsilon"])
    for key in required:
        if key not in values:
            raise SpecParseError(f"missing key {key!r}", path)
    known = set(required) | set(indexed_soft) | set(indexed_eps)
    for key in values:
        if key not in known:
            raise SpecParseError(f"unknown key {key!r}", path, lines[key])
    m = _natural(values["m"], "m", path, lines["m"])
    n = _natural(values["n"], "n", path, lines["n"])
    if m > n:
        raise SpecParseError(f"m={m} exceeds n={n}", path, lines["m"])
    lam, rho = rational("lambda"), rational("rho")
    try:
        if not multi:
            return CiInstance(spec("hard"), spec("soft"), m, n, rational("epsilon"), lam, rho)
        indices = []
        for key in indexed_soft:
            idx = key.split(".", 1)[1]
            if not idx.isdigit() or int(idx) < 1:
                raise SpecParseError(f"bad index in {key!r}", path, lines[key])
            indices.append(int(idx))
        indices.sort()
        if indices != list(range(1, len(indices) + 1)):
            raise SpecParseError("soft.i indices must run 1..k without gaps", path)
        if sorted(indexed_eps) != sorted(f"epsilon.{i}" for i in indices):
            raise SpecParseError("every soft.i needs a matching epsilon.i", path)
        softs = [spec(f"soft.{i}") for i in indices]
        epsilons = [rational(f"epsilon.{i}") for i in indices]
        return MciInstance(spec("hard"), softs, m, n, epsilons, lam, rho)
    except InvalidInstance as exc:
        raise SpecParseError(str(exc), path) from exc


def load_instance(path):
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise SpecParseError(f"cannot read file: {exc.strerror}", path) from exc
    return parse_instance(text, path)


def as_mci(instance) -> MciInstance:
    if isinstance(instance, MciInstance):
        return instance
    return MciInstance(instance.hard, (instance.soft,), instance.m, instance.n,
                       (instance.epsilon,), instance.lam, instance.rho)


# --- dispatch -------------------------------------------------------------------

@dataclass
class Construction:
    """What a scheme produced: report (``None`` when unknown), improviser, membership test for A."""

    scheme: str
    report: Optional[FeasibilityReport]
    improviser: object
    in_a: Callable
    exact: bool = True


def _explicit(handle: SpecHandle) -> SpecHandle:
    if handle.kind == NFA:
        logger.warning("determinizing an NFA specification; this can blow up exponentially")
        return SpecHandle(DFA, automata.determinize(handle.payload))
    return handle


def resolve_symbolic(handle: SpecHandle, n: int) -> symspec.SymbolicSpec:
    p = handle.payload
    if isinstance(p, symspec.SymbolicAutomaton):
        return symspec.unroll(p, n)
    if p.n != n:
        raise InvalidInstance(f"symbolic specification has fixed length {p.n}, not {n}")
    return p


def symbolic_report(hard, soft, instance, oracle=None, cap: int = SYMBOLIC_CHECK_CAP):
    """Exact feasibility of a symbolic instance at desk scale; ``None`` above ``cap``."""
    try:
        size_i = symspec.projected_count_exact(hard, oracle, cap)
        size_a = symspec.projected_count_exact(symspec.conjoin(hard, soft), oracle, cap)
    except CapExceeded:
        return None
    return check_feasibility(size_i, size_a, instance.epsilon, instance.lam, instance.rho)


def construct(instance: CiInstance, seed=None, tau=None, oracle=None, cells=sampling.SAT_CELLS,
              build: bool = True) -> Construction:
    """Pick the scheme for ``(hard.kind, soft.kind)`` and run it.

    With ``build=False`` only the report is computed where that is cheaper.
    """
    hard, soft = _explicit(instance.hard), _explicit(instance.soft)
    kinds = (hard.kind, soft.kind)
    if SYMBOLIC in kinds:
        if kinds != (SYMBOLIC, SYMBOLIC):
            raise UnsupportedCombination(
                "symbolic specifications can only be paired with symbolic specifications")
        if instance.m != instance.n:
            raise InvalidInstance("symbolic words have a fixed length: need m = n")
        h = resolve_symbolic(hard, instance.n)
        s = resolve_symbolic(soft, instance.n)
        report = symbolic_report(h, s, instance, oracle)
        improviser = None
        if build and tau is not None and (report is None or report.feasible):
            improviser = sampling.approx_improviser(
                CiInstance(SpecHandle(SYMBOLIC, h), SpecHandle(SYMBOLIC, s), instance.m,
                           instance.n, instance.epsilon, instance.lam, instance.rho),
                tau, oracle, seed, cells)
        return Construction("SYMBOLIC x SYMBOLIC (approximate)", report, improviser,
                            lambda w: symspec.member(s, w, oracle), exact=False)
    if tau is not None:
        raise InvalidInstance("--tau only applies to symbolic specifications")
    instance = CiInstance(hard, soft, instance.m, instance.n, instance.epsilon, instance.lam,
                          instance.rho)
    if kinds == (DFA, DFA):
        _same_alphabet(hard.payload, soft.payload)
        report, improviser = build_improviser(instance, automata.DfaOperations(), seed,
                                              "DFA x DFA")
        return Construction("DFA x DFA", report, improviser,
                            lambda w: automata.run(soft.payload, w))
    if kinds == (UCFG, DFA):
        report, improviser = grammars.scheme_ucfg_dfa(instance, seed)
        return Construction("UCFG x DFA", report, improviser,
                            lambda w: automata.run(soft.payload, w))
    if kinds == (DFA, UCFG):
        report, improviser = grammars.scheme_dfa_ucfg(instance, seed)
        return Construction("DFA x UCFG", report, improviser,
                            lambda w: grammars.parse_membership(soft.payload, w)[0])
    raise UnsupportedCombination(
        "UCFG hard and UCFG soft specifications: counting the intersection of two "
        "unambiguous grammars is #P-hard, so no exact scheme is offered")


def _same_alphabet(a, b):
    if set(a.alphabet) != set(b.alphabet):
        raise AlphabetMismatch(f"alphabets differ: {' '.join(a.alphabet)} vs {' '.join(b.alphabet)}")


# --- single-spec counting and sampling ------------------------------------------------

def _grammar_table(g, lo, hi):
    ng = grammars._promised(g)
    grammars.check_unambiguous(ng, min(hi, 8))
    return grammars.count_by_length(ng, lo, hi)


def _symbolic_lengths(handle, lo, hi):
    p = handle.payload
    if isinstance(p, symspec.SymbolicAutomaton):
        return [(length, symspec.unroll(p, length)) for length in range(lo, hi + 1)]
    return [(p.n, p)] if lo <= p.n <= hi else []


def count_spec(handle: SpecHandle, lo: int, hi: int, oracle=None, cap: int = 2 ** 16) -> int:
    handle = _explicit(handle)
    if lo > hi:
        raise InvalidInstance(f"--min {lo} exceeds --max {hi}")
    if handle.kind == DFA:
        return automata.count_language(automata.length_restrict(handle.payload, lo, hi))
    if handle.kind == UCFG:
        return _grammar_table(handle.payload, lo, hi).total
    return sum(symspec.projected_count_exact(s, oracle, cap)
               for _, s in _symbolic_lengths(handle, lo, hi))


def sampler_for(handle: SpecHandle, lo: int, hi: int, tau=None, oracle=None,
                cells=sampling.SAT_CELLS):
    """A callable ``rng -> word`` drawing from ``{w in L : lo <= |w| <= hi}``."""
    handle = _explicit(handle)
    if lo > hi:
        raise InvalidInstance(f"--min {lo} exceeds --max {hi}")
    if handle.kind != SYMBOLIC and tau is not None:
        raise InvalidInstance("--tau only applies to symbolic specifications")
    if handle.kind == DFA:
        return automata.build_sampler(automata.length_restrict(handle.payload, lo, hi))
    if handle.kind == UCFG:
        return grammars.GrammarSampler(_grammar_table(handle.payload, lo, hi))
    if tau is None:
        raise InvalidInstance("sampling a symbolic specification needs --tau")
    specs = _symbolic_lengths(handle, lo, hi)
    if len(specs) != 1:
        raise InvalidInstance("symbolic sampling needs a single word length (--min = --max)")
    return sampling.ApproxSampler(specs[0][1], tau, oracle, cells)
