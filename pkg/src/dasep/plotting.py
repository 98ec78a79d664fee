"""Figures written next to the CLI's delimited output (Agg backend, PNG)."""

from __future__ import annotations

import math
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

__all__ = ["plot_step_ic", "plot_mc_duality", "plot_residuals"]


def _out(path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    return path


def plot_step_ic(result, path) -> Path:
    """Histogram of the rescaled positions, one panel per rank."""
    ms = sorted(result.conj) or sorted({r[2] for r in result.rows})
    fig, axes = plt.subplots(1, len(ms), figsize=(4.5 * len(ms), 3.6), squeeze=False)
    for ax, m in zip(axes[0], ms):
        for species, color in ((1, "tab:blue"), (2, "tab:orange")):
            z = result.sample(species, m)
            z = z[np.isfinite(z)]
            if z.size:
                ax.hist(z, bins=min(30, max(5, z.size // 8)), density=True, alpha=0.5,
                        color=color, label=f"class {species} (n={z.size})")
        ax.set_title(f"m={m}, t={result.t:g}, {result.time_change} time")
        ax.set_xlabel("(x - c1 t) / (c2 t^(1/3))")
        ax.legend(fontsize=8)
    axes[0][0].set_ylabel("density")
    fig.tight_layout()
    out = _out(path)
    fig.savefig(out, dpi=120)
    plt.close(fig)
    return out


def plot_mc_duality(reports, path) -> Path:
    """Both sides of the duality identity per seed with 3-SE bars and the exact value."""
    fig, ax = plt.subplots(figsize=(6.5, 3.6))
    xs = np.arange(len(reports))
    lhs = [r.details["lhs"] for r in reports]
    rhs = [r.details["rhs"] for r in reports]
    ax.errorbar(xs - 0.1, lhs, yerr=[3 * r.details["se_lhs"] for r in reports], fmt="o",
                ms=3, label="E[D(X_t, xi0)]")
    ax.errorbar(xs + 0.1, rhs, yerr=[3 * r.details["se_rhs"] for r in reports], fmt="s",
                ms=3, label="E[D(eta0, Y_t)]")
    exact = [r.details.get("exact") for r in reports]
    if exact and exact[0] is not None:
        ax.axhline(exact[0], color="k", lw=0.8, label="uniformization")
    ax.set_xlabel("seed")
    ax.set_xticks(xs)
    ax.set_xticklabels([str(r.params.get("master_seed", i)) for i, r in enumerate(reports)],
                       fontsize=7, rotation=90)
    ax.legend(fontsize=8)
    fig.tight_layout()
    out = _out(path)
    fig.savefig(out, dpi=120)
    plt.close(fig)
    return out


def plot_residuals(checks, path) -> Path:
    """log10(residual / threshold) per check; bars above zero failed."""
    names = [c.check for c in checks]
    vals = []
    for c in checks:
        r, t = float(c.residual), float(c.threshold)
        if not math.isfinite(r):
            vals.append(6.0)
        elif r <= 0:
            vals.append(-17.0)
        else:
            vals.append(math.log10(r / t))
    colors = ["tab:green" if c.passed else "tab:red" for c in checks]
    fig, ax = plt.subplots(figsize=(max(5.0, 0.55 * len(names)), 3.8))
    ax.bar(range(len(names)), vals, color=colors)
    ax.axhline(0.0, color="k", lw=0.8)
    ax.set_xticks(range(len(names)))
    ax.set_xticklabels(names, rotation=60, ha="right", fontsize=8)
    ax.set_ylabel("log10(residual / threshold)")
    fig.tight_layout()
    out = _out(path)
    fig.savefig(out, dpi=120)
    plt.close(fig)
    return out
