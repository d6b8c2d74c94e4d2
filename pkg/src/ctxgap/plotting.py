"""Static figures written next to the sweep CSVs."""

from __future__ import annotations

import math
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .harness import summarize  # noqa: E402
from .policies import POLICY_KINDS  # noqa: E402

LABELS = {
    "contextual_gap": "Contextual-Gap",
    "uniform": "Uniform",
    "epsilon_greedy": "Epsilon Greedy",
    "kernel_ucb": "Kernel-UCB",
    "kernel_ucb_mod": "Kernel-UCB-Mod",
    "kernel_ts": "Kernel-TS",
}

STYLE = {
    "figure.figsize": (6.4, 4.0),
    "axes.grid": True,
    "grid.alpha": 0.3,
    "font.size": 10,
    "legend.fontsize": 8,
    "savefig.dpi": 150,
    "savefig.bbox": "tight",
}


def _policies(reports):
    seen = {r.policy for r in reports}
    return [k for k in POLICY_KINDS if k in seen]


def plot_regret_curves(reports, path, worst: bool = False):
    """Mean simple regret against exploration budget, one line per policy.

    Error bars are one standard error over replications (average regret only).
    """
    stats = summarize(reports)
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        lowest = math.inf
        for kind in _policies(reports):
            keys = sorted(b for (k, b) in stats if k == kind)
            if not keys:
                continue
            vals = np.array([stats[(kind, b)] for b in keys])
            y = vals[:, 2] if worst else vals[:, 0]
            err = None if worst else vals[:, 1]
            ax.errorbar(keys, y, yerr=err, marker="o", ms=3, capsize=2, label=LABELS[kind])
            lowest = min(lowest, float(np.min(y)))
        ax.set_xlabel("exploration budget T")
        ax.set_ylabel("worst-case simple regret" if worst else "average simple regret")
        ax.set_xscale("log")
        # late-budget regret spans orders of magnitude; fall back to linear if any mean is 0
        if 0 < lowest < math.inf:
            ax.set_yscale("log")
        ax.legend()
        fig.savefig(path)
        plt.close(fig)
    return Path(path)


def plot_pull_histograms(reports, path, budget: int | None = None):
    """Pulls per arm at one budget, averaged over replications.

    Arms are shown in index order; for the ordered synthetic variants that is
    best-to-worst.
    """
    ok = [r for r in reports if not r.failed and r.pull_histogram]
    if not ok:
        return None
    budget = budget or max(r.budget for r in ok)
    kinds = _policies(ok)
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        A = len(ok[0].pull_histogram)
        width = 0.8 / max(len(kinds), 1)
        for i, kind in enumerate(kinds):
            h = np.array([r.pull_histogram for r in ok if r.policy == kind and r.budget == budget])
            if h.size == 0:
                continue
            ax.bar(np.arange(A) + i * width, h.mean(0), width=width, label=LABELS[kind])
        ax.set_xticks(np.arange(A) + 0.4 - width / 2)
        ax.set_xticklabels([str(a) for a in range(A)])
        ax.set_xlabel("arm")
        ax.set_ylabel(f"pulls during exploration (T={budget})")
        ax.legend(ncol=3, loc="lower center", bbox_to_anchor=(0.5, 1.0), frameon=False)
        fig.savefig(path)
        plt.close(fig)
    return Path(path)


def render_sweep(reports, output, stem: str = "regret"):
    """All sweep figures as PNGs in ``output``; returns their paths."""
    out = Path(output)
    out.mkdir(parents=True, exist_ok=True)
    paths = [
        plot_regret_curves(reports, out / f"{stem}_avg.png"),
        plot_regret_curves(reports, out / f"{stem}_worst.png", worst=True),
        plot_pull_histograms(reports, out / f"{stem}_hist.png"),
    ]
    return [p for p in paths if p is not None]
