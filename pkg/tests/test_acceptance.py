"""Acceptance criteria, one test each.

Every test records a ``criterion N: PASS|FAIL`` line that is printed in the
pytest terminal summary.  Runtime budgets are asserted too.
"""

import collections
import contextlib
import os
import random
import subprocess
import sys
import time
from fractions import Fraction as F

import pytest

from ctlimprov import automata, grammars, mci
from ctlimprov.core import CiInstance, SpecHandle, build_improviser
from ctlimprov.symbolic import sampling, spec

import conftest
from conftest import data_path
from oracles import (band_ok, dfa_accepts, dfa_language, greedy_feasible,
                     grammar_language, is_improvising, random_dfa, random_ucfg,
                     two_list_distribution, within_sigma, words_upto)

GRID = (F(0), F(1, 8), F(1, 5), F(1, 4), F(1, 3), F(1, 2), F(3, 4), F(1))


@contextlib.contextmanager
def criterion(number, title, budget):
    start = time.perf_counter()
    try:
        yield
        elapsed = time.perf_counter() - start
        assert elapsed < budget, f"took {elapsed:.1f} s, budget {budget} s"
    except BaseException as exc:
        elapsed = time.perf_counter() - start
        conftest.ACCEPTANCE_LINES.append(
            f"criterion {number}: FAIL  {title} ({elapsed:.1f} s): {str(exc).splitlines()[0][:120]}")
        raise
    conftest.ACCEPTANCE_LINES.append(f"criterion {number}: PASS  {title} ({elapsed:.1f} s)")


def w(s):
    return tuple(s)


def dfa_handle(d):
    return SpecHandle("DFA", d)


# --- 1 ---------------------------------------------------------------------------------

def test_criterion_1_running_example(no11, near001):
    with criterion(1, "running example reproduction", 1.0):
        improvs = automata.length_restrict(no11, 3, 3)
        assert automata.count_language(improvs) == 5
        assert automata.count_language(automata.product(improvs, near001)) == 3

        def instance(eps, lam, rho):
            return CiInstance(dfa_handle(no11), dfa_handle(near001), 3, 3, eps, lam, rho)

        ops = automata.DfaOperations()
        assert not build_improviser(instance(0, 0, F(1, 4)), ops)[0].feasible
        assert build_improviser(instance(0, 0, F(1, 3)), ops)[0].feasible
        report, imp = build_improviser(instance(F(1, 4), 0, F(1, 4)), ops, seed=0)
        assert report.feasible and report.epsilon_opt == F(1, 4)

        pa, pb = imp.class_probabilities()
        adm = automata.product(improvs, near001)
        sa = imp.sampler_a
        sb = imp.sampler_b
        law = {}
        for x in ("000", "001", "101"):
            law[x] = imp.coin_bias * sa.path_probability(w(x))
            assert automata.run(adm, w(x)) and pa == law[x]
        for x in ("010", "100"):
            law[x] = (1 - imp.coin_bias) * sb.path_probability(w(x))
            assert not automata.run(adm, w(x)) and pb == law[x]
        assert [law[x] for x in ("000", "001", "101", "010", "100")] == \
            [F(1, 4), F(1, 4), F(1, 4), F(1, 8), F(1, 8)]

        # uniform over the four words 000 001 101 010: 100 gets 0, so any lambda > 0 fails
        four = {w("000"): F(1, 4), w("001"): F(1, 4), w("101"): F(1, 4), w("010"): F(1, 4)}
        words = [w(x) for x in ("000", "001", "010", "100", "101")]
        admissible = {w("000"), w("001"), w("101")}
        assert is_improvising(four, words, admissible, F(1, 4), 0, F(1, 4))
        assert not is_improvising(four, words, admissible, F(1, 4), F(1, 100), F(1, 4))


# --- 2 ---------------------------------------------------------------------------------

def test_criterion_2_feasibility_equivalence():
    with criterion(2, "feasibility equivalence oracle, 500 instances", 30.0):
        rng = random.Random(2)
        ops = automata.DfaOperations()
        feasible_seen = infeasible_seen = 0
        for trial in range(500):
            hard = random_dfa(rng, rng.randint(1, 6))
            soft = random_dfa(rng, rng.randint(1, 6))
            n = rng.randint(0, 5)
            m = rng.randint(0, n)
            lam, rho = sorted((rng.choice(GRID), rng.choice(GRID)))
            if rng.random() < 0.3:
                lam = F(0)
            eps = rng.choice(GRID)
            improvs = sorted(dfa_language(hard, n, m))
            admissible = {x for x in improvs if dfa_accepts(soft, x)}
            inst = CiInstance(dfa_handle(hard), dfa_handle(soft), m, n, eps, lam, rho)
            report, imp = build_improviser(inst, ops, seed=trial)
            assert (report.size_i, report.size_a) == (len(improvs), len(admissible))
            expected = greedy_feasible(len(improvs), len(admissible), eps, lam, rho)
            assert report.feasible == expected, (trial, len(improvs), len(admissible), eps,
                                                 lam, rho)
            if not report.feasible:
                infeasible_seen += 1
                assert imp is None
                continue
            feasible_seen += 1
            dist = two_list_distribution(improvs, admissible, report.epsilon_opt)
            assert is_improvising(dist, improvs, admissible, eps, lam, rho)
            # the library's own improviser assigns exactly the same law
            pa, pb = imp.class_probabilities()
            for x in improvs:
                assert dist[x] == (pa if x in admissible else pb)
        assert feasible_seen >= 50 and infeasible_seen >= 50


# --- 3 ---------------------------------------------------------------------------------

FREQUENCY_DFAS = 10  # the first ten nonempty languages also get the 10^5-draw test


def test_criterion_3_dfa_counting_and_sampling():
    with criterion(3, "DFA counting and sampling, 100 DFAs", 60.0):
        rng = random.Random(3)
        frequency_runs = 0
        for trial in range(100):
            alphabet = ("0", "1", "2")[:rng.randint(1, 3)]
            d = random_dfa(rng, rng.randint(1, 8), alphabet)
            n = rng.randint(0, 6)
            m = rng.randint(0, n)
            lang = sorted(dfa_language(d, n, m))
            restricted = automata.length_restrict(d, m, n)
            assert automata.count_language(restricted) == len(lang)
            if not lang:
                continue
            s = automata.build_sampler(restricted)
            for x in lang:
                assert s.path_probability(x) == F(1, len(lang))
            if frequency_runs < FREQUENCY_DFAS and len(lang) > 1:
                frequency_runs += 1
                draws = 10 ** 5
                sample_rng = random.Random(1000 + trial)
                counts = collections.Counter(s.sample(sample_rng) for _ in range(draws))
                assert set(counts) <= set(lang)
                for x in lang:
                    assert within_sigma(counts[x], draws, F(1, len(lang))), (trial, x)
        assert frequency_runs == FREQUENCY_DFAS


# --- 4 ---------------------------------------------------------------------------------

def _grammar_pairs(rng, dyck, count):
    anbn = grammars.Cfg("S", (("S", ("a", "S", "b")), ("S", ())))
    pal = grammars.Cfg("S", (("S", ("a", "S", "a")), ("S", ("b", "S", "b")), ("S", ("c",))))
    fixed = [(dyck, ("(", ")")), (anbn, ("a", "b")), (pal, ("a", "b", "c"))]
    out = []
    for i in range(count):
        if i < len(fixed):
            g, alphabet = fixed[i]
        else:
            alphabet = ("a", "b")
            g, _ = random_ucfg(rng, alphabet, check_len=5)
        out.append((g, alphabet, random_dfa(rng, rng.randint(1, 5), alphabet)))
    return out


def test_criterion_4_bar_hillel(dyck, depth1):
    with criterion(4, "Bar-Hillel intersection, 50 pairs", 60.0):
        rng = random.Random(4)
        for g, alphabet, d in _grammar_pairs(rng, dyck, 50):
            inter = grammars.bar_hillel(g, d)
            table = grammars.count_by_length(inter, 0, 5)
            filtered = set()
            for x in words_upto(alphabet, 5):
                in_g, _ = grammars.parse_membership(g, x)
                if in_g and dfa_accepts(d, x):
                    filtered.add(x)
                member, trees = grammars.parse_membership(inter, x)
                assert member == (x in filtered)
                if member:
                    assert trees == 1
            # independent recount on the raw grammar
            assert filtered == {x for x in grammar_language(g, alphabet, 5) if dfa_accepts(d, x)}
            for length in range(6):
                assert table.per_length[length] == sum(1 for x in filtered if len(x) == length)
        assert grammars.count_by_length(grammars.bar_hillel(dyck, depth1), 0, 6).total == 4


# --- 5 ---------------------------------------------------------------------------------

def test_criterion_5_delta_sampler():
    with criterion(5, "prefix-walk sampler over I minus A, 30 instances", 120.0):
        rng = random.Random(5)
        done = 0
        while done < 30:
            alphabet = ("a", "b")
            g, _ = random_ucfg(rng, alphabet, check_len=5)
            n = rng.randint(1, 5)
            m = rng.randint(0, n)
            idfa = automata.length_restrict(random_dfa(rng, rng.randint(1, 6), alphabet), m, n)
            ilang = dfa_language(idfa, n)
            glang = {x for x in grammar_language(g, alphabet, n)}
            delta = sorted(ilang - glang)
            if len(delta) < 2:
                continue
            done += 1
            sampler = grammars.DeltaSampler(idfa, grammars.bar_hillel(g, idfa), n)
            assert sampler.total == len(delta)
            for prefix in words_upto(alphabet, n):
                stop, branches = sampler.branch_weights(prefix)
                below = [x for x in delta if x[:len(prefix)] == prefix]
                assert stop + sum(weight for _, weight in branches) == len(below)
                for a, weight in branches:
                    assert weight == sum(1 for x in below if x[len(prefix):len(prefix) + 1] == (a,))
            draws = 10 ** 5
            sample_rng = random.Random(500 + done)
            counts = collections.Counter(sampler.sample(sample_rng) for _ in range(draws))
            assert set(counts) == set(delta)
            for x in delta:
                assert within_sigma(counts[x], draws, F(1, len(delta))), (done, x)


# --- 6 ---------------------------------------------------------------------------------

def _symbolic_languages(no11):
    return [
        ("no-11, n=3", spec.dfa_spec(no11, 3)),
        ("no-11, n=5", spec.dfa_spec(no11, 5)),
        ("all binary words, n=4", spec.true_spec(1, 4, ("0", "1"))),
    ]


def test_criterion_6_symbolic(no11, data_dir):
    with criterion(6, "symbolic counting and approximate sampling", 300.0):
        unrolled = spec.unroll(spec.load_saut(data_path("no11.saut")), 3)
        assert spec.projected_count_exact(unrolled) == 5

        draws = 10 ** 5
        hashed = 0
        for tau in (F(1, 2), F(2)):
            for name, s in _symbolic_languages(no11):
                lang = spec.language(s)
                assert len(lang) <= 16
                table = sampling.ApproxSampler(s, tau, cells="table")
                hashed += table.small is None
                rng = random.Random(600)
                counts = collections.Counter(table.sample(rng) for _ in range(draws))
                assert set(counts) <= set(lang)
                lo, hi = sampling.word_frequency_band(len(lang), tau)
                for x in lang:
                    assert band_ok(counts[x], draws, lo, hi), (name, tau, x, counts[x])
                # the SAT-cell path draws the identical words
                sat = sampling.ApproxSampler(s, tau, cells="sat")
                r1, r2 = random.Random(600), random.Random(600)
                assert [sat.sample(r1) for _ in range(1000)] == \
                    [table.sample(r2) for _ in range(1000)]
        # sizes 16 (tau = 1/2) and 13, 16 (tau = 2) exceed the exact-list threshold
        assert hashed == 3

        ends0 = automata.load_dfa(os.path.join(data_dir, "ends0.dfa"))
        eps = F(1, 4)
        inst = CiInstance(SpecHandle("SYMBOLIC", spec.dfa_spec(no11, 5)),
                          SpecHandle("SYMBOLIC", spec.dfa_spec(ends0, 5)), 5, 5, eps, 0, F(1, 4))
        imp = sampling.approx_improviser(inst, F(1, 2), seed=6, cells="table")
        words = imp.generate(draws)
        assert all(automata.run(no11, x) and len(x) == 5 for x in words)
        rate = sum(1 for x in words if automata.run(ends0, x)) / draws
        sigma = (float(eps) * float(1 - eps) / draws) ** 0.5
        assert rate >= 1 - float(eps) - 4 * sigma


# --- 7 ---------------------------------------------------------------------------------

def _word_law_ok(imp, improvs, softs, epsilons, lam, rho):
    """Multi-constraint requirements checked word by word from the exact output law."""
    law = {x: imp.word_probability(x) for x in improvs}
    if sum(law.values()) != 1 or any(not lam <= p <= rho for p in law.values()):
        return False
    for soft, eps in zip(softs, epsilons):
        if sum(p for x, p in law.items() if dfa_accepts(soft, x)) < 1 - eps:
            return False
    return True


def test_criterion_7_mci(data_dir):
    with criterion(7, "multi-constraint improvisation, 100 instances", 120.0):
        load = lambda name: automata.load_dfa(os.path.join(data_dir, name))  # noqa: E731
        hard, softs = load("all01.dfa"), (load("starts0.dfa"), load("ends0.dfa"))
        improvs = sorted(dfa_language(hard, 2, 2))
        members = {x: {i for i, s in enumerate(softs) if dfa_accepts(s, x)} for x in improvs}
        for eps, feasible in (((F(1, 2), F(1, 2)), True), ((F(1, 4), F(1, 4)), False)):
            inst = mci.MciInstance(dfa_handle(hard), tuple(dfa_handle(s) for s in softs), 2, 2,
                                   eps, 0, F(1, 4))
            report, imp = mci.mci_improviser(inst)
            assert report.feasible is feasible
            assert mci.word_level_feasible(improvs, members, eps, 0, F(1, 4)) is feasible
            if feasible:
                assert _word_law_ok(imp, improvs, softs, eps, 0, F(1, 4))

        rng = random.Random(7)
        agree = feasible_seen = 0
        for trial in range(100):
            k = rng.randint(1, 3)
            n = rng.randint(1, 5)
            m = rng.randint(0, n)
            hard = random_dfa(rng, rng.randint(1, 6))
            softs = [random_dfa(rng, rng.randint(1, 6)) for _ in range(k)]
            improvs = sorted(dfa_language(hard, n, m))
            assert len(improvs) <= 64
            lam, rho = sorted((rng.choice(GRID), rng.choice(GRID)))
            if rng.random() < 0.5:
                lam = F(0)
            epsilons = tuple(rng.choice(GRID) for _ in range(k))
            inst = mci.MciInstance(dfa_handle(hard), tuple(dfa_handle(s) for s in softs), m, n,
                                   epsilons, lam, rho)
            report, imp = mci.mci_improviser(inst, seed=trial)
            members = {x: {i for i, s in enumerate(softs) if dfa_accepts(s, x)}
                       for x in improvs}
            oracle = mci.word_level_feasible(improvs, members, epsilons, lam, rho)
            assert report.feasible == oracle, trial
            agree += 1
            if report.feasible:
                feasible_seen += 1
                assert not mci.verify_distribution(report.sizes, report.probabilities, epsilons,
                                                   lam, rho)
                assert _word_law_ok(imp, improvs, softs, epsilons, lam, rho)
        assert agree == 100 and 10 <= feasible_seen <= 90


# --- 8 ---------------------------------------------------------------------------------

COMMANDS = [
    (["check", "running.ci"], False),
    (["check", "dyck_depth1.ci", "--format", "json"], False),
    (["check", "running_symbolic.ci"], False),
    (["improvise", "running.ci", "--count", "5000", "--seed", "8"], True),
    (["improvise", "dyck_depth1.ci", "--count", "3000", "--seed", "8"], True),
    (["improvise", "running_ucfg_soft.ci", "--count", "3000", "--seed", "8"], True),
    (["improvise", "running_symbolic.ci", "--tau", "1", "--count", "2500", "--seed", "8"], True),
    (["count", "dyck.cfg", "--max", "8"], False),
    (["sample", "no11.dfa", "--max", "6", "--count", "3000", "--seed", "8"], True),
    (["sample", "no11.saut", "--min", "5", "--max", "5", "--tau", "2", "--count", "2500",
      "--seed", "8"], True),
    (["mci", "check", "two_constraints.ci"], False),
    (["mci", "improvise", "two_constraints.ci", "--count", "3000", "--seed", "8"], True),
]


def _cli(argv):
    resolved = [data_path(a) if os.path.exists(data_path(a)) and not a.startswith("-") else a
                for a in argv]
    proc = subprocess.run([sys.executable, "-m", "ctlimprov.cli", *resolved], capture_output=True)
    assert proc.returncode == 0, proc.stderr.decode()
    return proc.stdout


def test_criterion_8_determinism():
    with criterion(8, "byte-identical output across runs and --jobs", 120.0):
        for argv, generates in COMMANDS:
            first = _cli(argv)
            assert first
            assert _cli(argv) == first, argv
            if generates:
                for jobs in ("2", "4"):
                    assert _cli(argv + ["--jobs", jobs]) == first, (argv, jobs)


@pytest.fixture(autouse=True, scope="module")
def _header():
    conftest.ACCEPTANCE_LINES.clear()
    yield
