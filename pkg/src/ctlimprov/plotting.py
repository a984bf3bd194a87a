"""Figures written next to the text reports (``--plot PATH``)."""

from __future__ import annotations

from fractions import Fraction

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

MAX_BARS = 40


def _finish(fig, path):
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def plot_frequencies(counts: dict, path, expected=None, bounds=None, title=""):
    """Empirical word frequencies as bars, the exact target as dots.

    ``counts`` maps a word label to its number of draws; ``expected`` maps
    labels to exact probabilities; ``bounds`` is ``(lambda, rho)``.
    """
    total = sum(counts.values())
    labels = sorted(counts, key=lambda w: (-counts[w], w))[:MAX_BARS]
    fig, ax = plt.subplots(figsize=(max(6, 0.35 * len(labels) + 2), 4))
    xs = range(len(labels))
    ax.bar(xs, [counts[w] / total for w in labels], color="0.7", label="observed")
    if expected:
        ax.plot(xs, [float(expected.get(w, 0)) for w in labels], "k.", label="exact")
    if bounds:
        lam, rho = bounds
        if lam:
            ax.axhline(float(lam), color="tab:blue", ls="--", lw=1, label="lambda")
        ax.axhline(float(rho), color="tab:red", ls="--", lw=1, label="rho")
    ax.set_xticks(list(xs))
    ax.set_xticklabels(labels, rotation=60, ha="right", fontsize=8)
    ax.set_ylabel("probability")
    ax.set_title(title or f"{total} draws")
    ax.legend(fontsize=8)
    _finish(fig, path)


def plot_classes(size_a: int, size_b: int, epsilon_opt: Fraction, lam, rho, path, title=""):
    """Per-word probability of admissible and non-admissible words against [lambda, rho]."""
    fig, ax = plt.subplots(figsize=(5, 4))
    names, heights = [], []
    if size_a:
        names.append(f"A ({size_a} words)")
        heights.append(float((1 - epsilon_opt) / size_a))
    if size_b:
        names.append(f"I \\ A ({size_b} words)")
        heights.append(float(epsilon_opt / size_b))
    ax.bar(names, heights, color=["tab:green", "tab:orange"][:len(names)])
    if lam:
        ax.axhline(float(lam), color="tab:blue", ls="--", lw=1, label="lambda")
    ax.axhline(float(rho), color="tab:red", ls="--", lw=1, label="rho")
    ax.set_ylabel("probability per word")
    ax.set_title(title or f"epsilon_opt = {epsilon_opt}")
    ax.legend(fontsize=8)
    _finish(fig, path)


def plot_cells(sizes: dict, probabilities: dict, k: int, path, title=""):
    """Mass per admissibility cell, next to the cell's share of the improvisations."""
    masks = sorted(sizes)
    total = sum(sizes.values()) or 1
    labels = ["{" + ",".join(str(i + 1) for i in range(k) if m >> i & 1) + "}" for m in masks]
    fig, ax = plt.subplots(figsize=(max(5, 0.5 * len(masks) + 2), 4))
    xs = list(range(len(masks)))
    width = 0.4
    ax.bar([x - width / 2 for x in xs], [sizes[m] / total for m in masks], width,
           color="0.7", label="share of I")
    if probabilities:
        ax.bar([x + width / 2 for x in xs], [float(probabilities[m]) for m in masks], width,
               color="tab:green", label="p_M")
    ax.set_xticks(xs)
    ax.set_xticklabels(labels, rotation=45, ha="right", fontsize=8)
    ax.set_ylabel("probability")
    ax.set_title(title or "admissibility cells")
    ax.legend(fontsize=8)
    _finish(fig, path)
