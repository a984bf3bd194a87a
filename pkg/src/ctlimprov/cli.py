"""Command-line interface.

Exit codes: 0 feasible / success, 1 infeasible, 2 usage, parse or runtime error.

Generation is split into fixed blocks of ``BLOCK`` words; block ``b`` draws
from an RNG seeded with ``"<seed>/<b>"``.  Blocks are independent of the
worker that runs them, so ``--jobs`` changes speed but never the output.
"""

from __future__ import annotations

import argparse
import json
import logging
import multiprocessing
import sys
import time
from collections import Counter
from concurrent.futures import ProcessPoolExecutor
from fractions import Fraction

from . import __version__
from .automata import EPS_TOKEN as EPS_WORD
from .core import format_fraction
from .errors import ImprovError
from .mci import MciInstance, mask_members, mci_check, mci_improviser
from .schemes import as_mci, construct, count_spec, load_instance, load_spec, sampler_for
from .symbolic import sampling

BLOCK = 1024

_WORKER = {}  # set before forking so workers inherit the generator


def render(word) -> str:
    return " ".join(word) if word else EPS_WORD


def _rational(text):
    try:
        value = Fraction(text)
    except (ValueError, ZeroDivisionError):
        raise argparse.ArgumentTypeError(f"not an exact rational: {text!r}") from None
    if "." in text or "e" in text.lower():
        raise argparse.ArgumentTypeError(f"use a/b, not {text!r}")
    return value


def _natural(text):
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a natural number: {text!r}") from None
    if value < 0:
        raise argparse.ArgumentTypeError(f"not a natural number: {text!r}")
    return value


def _seed(text):
    value = _natural(text)
    if value >= 2 ** 64:
        raise argparse.ArgumentTypeError("seed must fit in 64 bits")
    return value


# --- generation ---------------------------------------------------------------------

def _block_words(block: int) -> list:
    gen = _WORKER["generator"]
    seed = _WORKER["seed"]
    total = _WORKER["count"]
    size = min(BLOCK, total - block * BLOCK)
    return gen(f"{seed}/{block}", size)


def generate(gen, seed: int, count: int, jobs: int = 1):
    """Yield ``count`` words from ``gen(block_seed, size)`` in block order."""
    blocks = (count + BLOCK - 1) // BLOCK
    _WORKER.update(generator=gen, seed=seed, count=count)
    if jobs <= 1 or blocks <= 1 or "fork" not in multiprocessing.get_all_start_methods():
        for b in range(blocks):
            yield from _block_words(b)
        return
    ctx = multiprocessing.get_context("fork")
    with ProcessPoolExecutor(max_workers=jobs, mp_context=ctx) as pool:
        for words in pool.map(_block_words, range(blocks)):
            yield from words


def _improviser_generator(improviser):
    def gen(block_seed, size):
        return improviser.reseeded(block_seed).generate(size)
    return gen


def _sampler_generator(sampler):
    import random

    def gen(block_seed, size):
        rng = random.Random(block_seed)
        return [sampler(rng) for _ in range(size)]
    return gen


def _emit(words, out, plot_path=None, expected=None, bounds=None, title=""):
    counts = Counter() if plot_path else None
    for word in words:
        text = render(word)
        out.write(text + "\n")
        if counts is not None:
            counts[text] += 1
    if plot_path and counts:
        from .plotting import plot_frequencies
        exp = None
        if expected is not None:
            exp = {w: expected(tuple(w.split()) if w != EPS_WORD else ()) for w in counts}
        plot_frequencies(counts, plot_path, exp, bounds, title)


# --- reports ----------------------------------------------------------------------------

def _status(report):
    if report is None:
        return "FEASIBILITY-UNKNOWN"
    return "FEASIBLE" if report.feasible else "INFEASIBLE"


def _ci_report(construction, elapsed=None) -> dict:
    report = construction.report
    out = {"status": _status(report), "scheme": construction.scheme}
    if report is not None:
        out["size_i"] = str(report.size_i)
        out["size_a"] = str(report.size_a)
        out["epsilon_opt"] = (format_fraction(report.epsilon_opt)
                              if report.epsilon_opt is not None else "undefined")
        out["violated"] = list(report.violated)
    if not construction.exact:
        out["note"] = "approximate scheme; sampling guarantees assume feasibility"
    if elapsed is not None:
        out["elapsed_s"] = f"{elapsed:.3f}"
    return out


def _mci_report(report, k, elapsed=None) -> dict:
    out = {"status": "FEASIBLE" if report.feasible else "INFEASIBLE",
           "scheme": f"MCI (k={k}, exact cell program)", "size_i": str(report.size_i),
           "cells": []}
    for mask, size in sorted(report.sizes.items()):
        cell = {"constraints": list(mask_members(mask, k)), "size": str(size)}
        if report.probabilities is not None:
            cell["p"] = format_fraction(report.probabilities[mask])
        out["cells"].append(cell)
    if report.problems:
        out["violated"] = list(report.problems)
    if elapsed is not None:
        out["elapsed_s"] = f"{elapsed:.3f}"
    return out


def _print_report(data: dict, fmt: str, out) -> None:
    if fmt == "json":
        out.write(json.dumps(data, indent=2) + "\n")
        return
    labels = {"size_i": "|I|", "size_a": "|A|", "epsilon_opt": "epsilon_opt",
              "elapsed_s": "elapsed (s)"}
    for key, value in data.items():
        if key == "cells":
            for cell in value:
                members = "{" + ",".join(str(i) for i in cell["constraints"]) + "}"
                line = f"cell {members}: size {cell['size']}"
                if "p" in cell:
                    line += f", p {cell['p']}"
                out.write(line + "\n")
        elif isinstance(value, list):
            out.write(f"{labels.get(key, key)}: {' '.join(value) if value else '-'}\n")
        else:
            out.write(f"{labels.get(key, key)}: {value}\n")


# --- commands -------------------------------------------------------------------------

def _load_ci(path):
    instance = load_instance(path)
    if isinstance(instance, MciInstance):
        raise ImprovError("instance lists several soft specifications; use 'mci'")
    return instance


def cmd_check(args, out) -> int:
    start = time.perf_counter()
    instance = _load_ci(args.instance)
    construction = construct(instance, build=False)
    elapsed = time.perf_counter() - start if args.timing else None
    _print_report(_ci_report(construction, elapsed), args.format, out)
    report = construction.report
    if args.plot and report is not None and report.feasible:
        from .plotting import plot_classes
        plot_classes(report.size_a, report.size_b, report.epsilon_opt, instance.lam,
                     instance.rho, args.plot, construction.scheme)
    return 1 if report is not None and not report.feasible else 0


def cmd_improvise(args, out) -> int:
    instance = _load_ci(args.instance)
    construction = construct(instance, seed=args.seed, tau=args.tau, cells=args.cells)
    report = construction.report
    if report is not None and not report.feasible:
        _print_report(_ci_report(construction), args.format, sys.stderr)
        return 1
    if construction.improviser is None:
        raise ImprovError("symbolic instances need --tau a/b")
    if report is None:
        logging.getLogger(__name__).warning(
            "instance too large to check exactly; guarantees assume it is feasible")
    expected = None
    improviser = construction.improviser
    if construction.exact:
        pa, pb = improviser.class_probabilities()
        expected = lambda word: pa if construction.in_a(word) else pb  # noqa: E731
    words = generate(_improviser_generator(improviser), args.seed, args.count, args.jobs)
    _emit(words, out, args.plot, expected, (instance.lam, instance.rho), construction.scheme)
    return 0


def cmd_count(args, out) -> int:
    handle = load_spec(args.spec)
    out.write(f"{count_spec(handle, args.min, args.max)}\n")
    return 0


def cmd_sample(args, out) -> int:
    handle = load_spec(args.spec)
    sampler = sampler_for(handle, args.min, args.max, args.tau, cells=args.cells)
    expected = None
    if args.plot and args.tau is None:
        uniform = Fraction(1, sampler.total)
        expected = lambda word: uniform  # noqa: E731
    words = generate(_sampler_generator(sampler), args.seed, args.count, args.jobs)
    _emit(words, out, args.plot, expected, None, args.spec)
    return 0


def cmd_mci_check(args, out) -> int:
    start = time.perf_counter()
    instance = as_mci(load_instance(args.instance))
    report, _ = mci_check(instance, args.k_cap)
    elapsed = time.perf_counter() - start if args.timing else None
    _print_report(_mci_report(report, instance.k, elapsed), args.format, out)
    if args.plot:
        from .plotting import plot_cells
        plot_cells(report.sizes, report.probabilities, instance.k, args.plot)
    return 0 if report.feasible else 1


def cmd_mci_improvise(args, out) -> int:
    instance = as_mci(load_instance(args.instance))
    report, improviser = mci_improviser(instance, args.seed, args.k_cap)
    if improviser is None:
        _print_report(_mci_report(report, instance.k), args.format, sys.stderr)
        return 1
    words = generate(_improviser_generator(improviser), args.seed, args.count, args.jobs)
    _emit(words, out, args.plot, improviser.word_probability, (instance.lam, instance.rho),
          "MCI")
    return 0


# --- argument parsing ----------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ctlimprov",
        description="Exact control improvisation: feasibility, counting and random generation.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    def reporting(p):
        p.add_argument("--format", choices=("text", "json"), default="text")
        p.add_argument("--timing", action="store_true", help="add elapsed time to the report")
        p.add_argument("--plot", metavar="PATH", help="also write a figure to PATH")

    def generating(p, symbolic=True):
        p.add_argument("--count", type=_natural, default=10)
        p.add_argument("--seed", type=_seed, default=0)
        p.add_argument("--jobs", type=_natural, default=1)
        p.add_argument("--plot", metavar="PATH", help="histogram of the generated words")
        if symbolic:
            p.add_argument("--tau", type=_rational, help="tolerance of the symbolic sampler")
            p.add_argument("--cells", choices=(sampling.SAT_CELLS, sampling.TABLE_CELLS),
                           default=sampling.SAT_CELLS,
                           help="how hash cells are enumerated (symbolic only)")

    p = sub.add_parser("check", help="decide feasibility of an instance")
    p.add_argument("instance")
    reporting(p)
    p.set_defaults(func=cmd_check)

    p = sub.add_parser("improvise", help="generate improvisations")
    p.add_argument("instance")
    p.add_argument("--format", choices=("text", "json"), default="text",
                   help="format of the report printed when infeasible")
    generating(p)
    p.set_defaults(func=cmd_improvise)

    p = sub.add_parser("count", help="count words of a specification within a length range")
    p.add_argument("spec")
    p.add_argument("--min", type=_natural, default=0)
    p.add_argument("--max", type=_natural, required=True)
    p.set_defaults(func=cmd_count)

    p = sub.add_parser("sample", help="sample words of a specification uniformly")
    p.add_argument("spec")
    p.add_argument("--min", type=_natural, default=0)
    p.add_argument("--max", type=_natural, required=True)
    generating(p)
    p.set_defaults(func=cmd_sample)

    mci = sub.add_parser("mci", help="multi-constraint improvisation")
    msub = mci.add_subparsers(dest="mci_command", required=True)
    p = msub.add_parser("check", help="solve the cell program")
    p.add_argument("instance")
    p.add_argument("--k-cap", type=_natural, default=12)
    reporting(p)
    p.set_defaults(func=cmd_mci_check)
    p = msub.add_parser("improvise", help="generate from the cell mixture")
    p.add_argument("instance")
    p.add_argument("--k-cap", type=_natural, default=12)
    p.add_argument("--format", choices=("text", "json"), default="text")
    generating(p, symbolic=False)
    p.set_defaults(func=cmd_mci_improvise)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s: %(message)s")
    try:
        return args.func(args, sys.stdout)
    except BrokenPipeError:
        return 0
    except (ImprovError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
