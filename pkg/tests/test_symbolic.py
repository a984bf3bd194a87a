import collections
import itertools
import os
import random
import stat
import sys
from fractions import Fraction as F

import pytest

from ctlimprov import automata
from ctlimprov.core import CiInstance, SpecHandle
from ctlimprov.errors import EmptyLanguage, ShapeMismatch, SpecParseError
from ctlimprov.symbolic import sampling, sat, spec
from ctlimprov.symbolic.sampling import ApproxSampler, band_parameters, word_frequency_band
from ctlimprov.symbolic.sat import DpllSolver, ExternalSolver, check_model
from ctlimprov.symbolic.spec import SymbolicSpec, _Fresh

from oracles import band_ok, dfa_language, random_dfa, within_sigma, words_upto


def brute_sat(n_vars, clauses):
    for bits in itertools.product((False, True), repeat=n_vars):
        model = [False] + list(bits)
        if check_model(clauses, model):
            return True
    return False


def random_cnf(rng, n_vars, n_clauses, width=3):
    return [[rng.choice((1, -1)) * rng.randint(1, n_vars) for _ in range(rng.randint(1, width))]
            for _ in range(n_clauses)]


def test_dpll_against_brute_force():
    rng = random.Random(0)
    solver = DpllSolver()
    for _ in range(600):
        n = rng.randint(1, 8)
        clauses = random_cnf(rng, n, rng.randint(0, 30))
        model = solver.solve(n, clauses)
        if model is None:
            assert not brute_sat(n, clauses)
        else:
            assert check_model(clauses, model)


def test_dpll_edge_cases():
    s = DpllSolver()
    assert s.solve(0, []) is not None
    assert s.solve(1, [[]]) is None
    assert s.solve(1, [[1], [-1]]) is None
    assert s.solve(2, [[1, -1]]) is not None
    model = s.solve(3, [[1], [-1, 2], [-2, 3]])
    assert model[1] and model[2] and model[3]


def test_dpll_is_deterministic():
    rng = random.Random(1)
    clauses = random_cnf(rng, 12, 30)
    assert DpllSolver().solve(12, clauses) == DpllSolver().solve(12, clauses)


FAKE_SOLVER = """\
import sys
sys.path[:0] = {paths!r}
from ctlimprov.symbolic.sat import DpllSolver
n = 0
clauses = []
for line in open(sys.argv[1]):
    parts = line.split()
    if not parts or parts[0] == "c":
        continue
    if parts[0] == "p":
        n = int(parts[2])
        continue
    clauses.append([int(t) for t in parts[:-1]])
model = DpllSolver().solve(n, clauses)
if model is None:
    print("s UNSATISFIABLE")
    sys.exit(20)
print("s SATISFIABLE")
print("v " + " ".join(str(v if model[v] else -v) for v in range(1, n + 1)) + " 0")
sys.exit(10)
"""


@pytest.fixture
def fake_solver(tmp_path):
    script = tmp_path / "fake_solver.py"
    script.write_text(FAKE_SOLVER.format(paths=sys.path))
    return f"{sys.executable} {script}"


def test_external_solver_round_trip(fake_solver):
    ext = ExternalSolver(fake_solver)
    rng = random.Random(2)
    for _ in range(15):
        n = rng.randint(1, 6)
        clauses = random_cnf(rng, n, rng.randint(1, 20))
        model = ext.solve(n, clauses)
        assert (model is None) == (not brute_sat(n, clauses))
        if model is not None:
            assert check_model(clauses, model)


def test_external_solver_errors(tmp_path):
    broken = tmp_path / "broken.sh"
    broken.write_text("#!/bin/sh\necho nothing\n")
    broken.chmod(broken.stat().st_mode | stat.S_IEXEC)
    with pytest.raises(sat.SolverError):
        ExternalSolver(str(broken)).solve(1, [[1]])
    with pytest.raises(sat.SolverError):
        ExternalSolver(str(tmp_path / "missing")).solve(1, [[1]])
    with pytest.raises(sat.SolverError):
        ExternalSolver("")


def test_default_oracle_env(monkeypatch, fake_solver):
    monkeypatch.delenv(sat.SOLVER_ENV, raising=False)
    assert isinstance(sat.default_oracle(), DpllSolver)
    monkeypatch.setenv(sat.SOLVER_ENV, fake_solver)
    assert isinstance(sat.default_oracle(), ExternalSolver)


# --- encodings --------------------------------------------------------------------

def test_running_example_unrolled(data_dir):
    hard = spec.unroll(spec.load_saut(os.path.join(data_dir, "no11.saut")), 3)
    soft = spec.unroll(spec.load_saut(os.path.join(data_dir, "near001.saut")), 3)
    assert spec.language(hard) == [tuple(x) for x in ("000", "001", "010", "100", "101")]
    assert spec.language(spec.conjoin(hard, soft)) == [tuple(x) for x in ("000", "001", "101")]


def test_encoded_dfa_matches_explicit():
    rng = random.Random(3)
    for _ in range(25):
        alphabet = ("a", "b", "c")[:rng.randint(1, 3)]
        d = random_dfa(rng, n_states=rng.randint(1, 5), alphabet=alphabet)
        for n in range(4):
            expected = sorted(x for x in dfa_language(d, n, n))
            assert spec.language(spec.dfa_spec(d, n)) == expected


def test_conjoin_is_intersection():
    rng = random.Random(4)
    for _ in range(15):
        a, b = random_dfa(rng, 4), random_dfa(rng, 4)
        both = spec.conjoin(spec.dfa_spec(a, 4), spec.dfa_spec(b, 4))
        assert set(spec.language(both)) == dfa_language(a, 4, 4) & dfa_language(b, 4, 4)


def test_conjoin_shape_mismatch(no11):
    with pytest.raises(ShapeMismatch):
        spec.conjoin(spec.dfa_spec(no11, 3), spec.dfa_spec(no11, 4))


def test_membership_and_encode(no11):
    s = spec.dfa_spec(no11, 4)
    assert spec.member(s, tuple("1010"))
    assert not spec.member(s, tuple("0110"))
    assert s.decode(s.encode(tuple("0101"))) == tuple("0101")


def test_xor_clauses():
    assert spec.xor_clauses([], 0, _Fresh(0)) == []
    assert spec.xor_clauses([], 1, _Fresh(0)) == [[]]
    for width in range(1, 9):
        variables = list(range(1, width + 1))
        for parity in (0, 1):
            fresh = _Fresh(width)
            clauses = spec.xor_clauses(variables, parity, fresh)
            s = SymbolicSpec(1, width, fresh.top, clauses)
            expected = {b for b in itertools.product((0, 1), repeat=width)
                        if sum(b) % 2 == parity}
            assert set(spec.projected_solutions(s)) == expected


def test_projected_count_ignores_auxiliaries():
    # x1 free, auxiliary 2 free: one projected variable, two projected solutions
    s = SymbolicSpec(1, 1, 2, [[1, 2, -2]], (1,))
    assert spec.projected_count_exact(s) == 2


def test_unused_codes_are_excluded():
    s = spec.true_spec(2, 2, symbols=("a", "b", "c"))
    assert spec.projected_count_exact(s) == 9


def test_cnf_round_trip(no11):
    s = spec.dfa_spec(no11, 3)
    again = spec.parse_cnf(spec.format_cnf(s))
    assert again == s
    t = spec.true_spec(1, 2)
    assert spec.parse_cnf(spec.format_cnf(t)) == t


def test_saut_round_trip(data_dir):
    for name in ("no11.saut", "near001.saut"):
        a = spec.load_saut(os.path.join(data_dir, name))
        assert spec.parse_saut(spec.format_saut(a)) == a


@pytest.mark.parametrize("text", [
    "c k 1\nc n 1\n1 0\n",
    "c k 1\nc n 1\np cnf 1 2\n1 0\n",
    "c k 1\np cnf 1 1\n1 0\n",
    "c k 1\nc n 1\np cnf 1 1\n2 0\n",
    "c k 1\nc n 1\np cnf 1 1\n1\n",
    "c k 1\nc n 2\nc ind 1 0\np cnf 2 0\n",
])
def test_cnf_parse_errors(text):
    with pytest.raises(SpecParseError):
        spec.parse_cnf(text, "x.cnf")


# --- approximate sampling ------------------------------------------------------------

def test_band_parameters():
    assert band_parameters(2) == (3, 10)
    pivot, hi = band_parameters(F(1, 2))
    assert pivot == 4 and hi > 2 * pivot
    with pytest.raises(ValueError):
        band_parameters(0)


def test_small_language_is_exactly_uniform(no11):
    s = ApproxSampler(spec.dfa_spec(no11, 3), 2)
    assert s.small is not None and len(s.small) == 5
    rng = random.Random(5)
    counts = collections.Counter(s.sample(rng) for _ in range(20000))
    assert len(counts) == 5


def test_empty_language_raises(no11):
    s = spec.conjoin(spec.dfa_spec(no11, 2), spec.dfa_spec(automata.complement(no11), 2))
    with pytest.raises(EmptyLanguage):
        ApproxSampler(s, 1)


def test_sat_and_table_cells_agree(no11):
    s = spec.dfa_spec(no11, 6)
    a = ApproxSampler(s, 2, cells="sat")
    b = ApproxSampler(s, 2, cells="table")
    assert a.small is None
    ra, rb = random.Random(9), random.Random(9)
    assert [a.sample(ra) for _ in range(300)] == [b.sample(rb) for _ in range(300)]
    assert a.level == b.level and a.attempts == b.attempts


def test_hashed_sampler_band(no11):
    s = spec.dfa_spec(no11, 6)
    size = 21
    tau = 2
    sampler = ApproxSampler(s, tau, cells="table")
    assert sampler.small is None
    rng = random.Random(11)
    n = 30000
    counts = collections.Counter(sampler.sample(rng) for _ in range(n))
    assert set(counts) == set(dfa_language(no11, 6, 6))
    lo, hi = word_frequency_band(size, tau)
    assert all(band_ok(c, n, lo, hi) for c in counts.values())


def test_word_frequency_band():
    assert word_frequency_band(4, 1) == (F(1, 8), F(1, 2))


def test_approx_improviser(data_dir, no11, near001):
    hard = SpecHandle("SYMBOLIC", spec.dfa_spec(no11, 3))
    soft = SpecHandle("SYMBOLIC", spec.dfa_spec(near001, 3))
    eps, lam, rho, tau = F(1, 4), F(0), F(1, 4), F(1, 2)
    inst = CiInstance(hard, soft, 3, 3, eps, lam, rho)
    imp = sampling.approx_improviser(inst, tau, seed=1)
    assert imp.guarantees() == (eps, lam, rho * (1 + eps) * (1 + tau))
    n = 10 ** 5
    counts = collections.Counter(imp.generate(n))
    assert set(counts) == {tuple(x) for x in ("000", "001", "010", "100", "101")}
    admissible = sum(counts[tuple(x)] for x in ("000", "001", "101"))
    assert within_sigma(admissible, n, F(3, 4) + F(1, 4) * F(3, 5))
    assert band_ok(admissible, n, 1 - eps, 1)
    upper = rho * (1 + eps) * (1 + tau)
    assert all(band_ok(c, n, eps * lam / (1 + tau), upper) for c in counts.values())
    bad = CiInstance(hard, soft, 2, 3, F(1, 4), 0, F(1, 4))
    with pytest.raises(ShapeMismatch):
        sampling.approx_improviser(bad, 1)


def test_three_word_language_band():
    s = SymbolicSpec(1, 2, 2, [[-1, -2]])
    sampler = ApproxSampler(s, F(1, 2))
    rng = random.Random(17)
    n = 10 ** 5
    counts = collections.Counter(sampler.sample(rng) for _ in range(n))
    assert set(counts) == {("0", "0"), ("0", "1"), ("1", "0")}
    lo, hi = F(1, 3) / F(3, 2), F(3, 2) / 3
    assert all(band_ok(c, n, lo, hi) for c in counts.values())


def test_unrolled_no11_support(no11):
    sampler = ApproxSampler(spec.dfa_spec(no11, 3), F(1, 2))
    rng = random.Random(2)
    assert {sampler.sample(rng) for _ in range(2000)} == set(dfa_language(no11, 3, 3))


def test_approx_improviser_reproducible(no11, data_dir):
    ends0 = automata.load_dfa(os.path.join(data_dir, "ends0.dfa"))
    hard = SpecHandle("SYMBOLIC", spec.dfa_spec(no11, 5))
    soft = SpecHandle("SYMBOLIC", spec.dfa_spec(ends0, 5))
    inst = CiInstance(hard, soft, 5, 5, F(1, 2), 0, F(1, 4))
    a = sampling.approx_improviser(inst, 1, seed=3)
    b = sampling.approx_improviser(inst, 1, seed=3)
    assert a.generate(50) == b.generate(50)


def test_words_helper_consistency():
    assert len(list(words_upto("ab", 2))) == 7


@pytest.mark.parametrize("tau", [F(1, 2), F(2), F(7)])
def test_band_across_tau(no11, tau):
    sampler = ApproxSampler(spec.dfa_spec(no11, 5), tau, cells="table")
    rng = random.Random(23)
    n = 30000
    counts = collections.Counter(sampler.sample(rng) for _ in range(n))
    assert set(counts) == set(dfa_language(no11, 5, 5))
    lo, hi = word_frequency_band(13, tau)
    assert all(band_ok(c, n, lo, hi) for c in counts.values())
