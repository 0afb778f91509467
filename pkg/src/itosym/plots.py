"""Figure rendering for the report paths; headless (Agg) matplotlib."""

from __future__ import annotations

from typing import Sequence

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402

from .model import SolutionPath  # noqa: E402


def save_paths_figure(filename, pairs: Sequence[tuple[SolutionPath, SolutionPath]],
                      title: str = "") -> None:
    """Overlay exact (solid) and scheme (dotted) trajectories."""
    fig, ax = plt.subplots(figsize=(7.0, 4.2))
    for i, (exact, scheme) in enumerate(pairs):
        color = f"C{i % 10}"
        ax.plot(exact.times, exact.states, color=color, lw=1.0,
                label="exact" if i == 0 else None)
        ax.plot(scheme.times, scheme.states, color=color, lw=1.0, ls=":",
                label=scheme.method if i == 0 else None)
    ax.set_xlabel("t")
    ax.set_ylabel("x(t)")
    if title:
        ax.set_title(title)
    ax.legend(loc="best", fontsize=8)
    fig.tight_layout()
    fig.savefig(filename, dpi=130)
    plt.close(fig)


def save_convergence_figure(filename, dts: Sequence[float],
                            errors: Sequence[float], slope: float,
                            title: str = "") -> None:
    fig, ax = plt.subplots(figsize=(5.4, 4.0))
    ax.loglog(dts, errors, "o-", label="mean endpoint error")
    if dts and errors:
        anchor = errors[-1]
        guide = [anchor * (dt / dts[-1]) ** slope for dt in dts]
        ax.loglog(dts, guide, "--", color="gray",
                  label=f"slope {slope:.2f}")
    ax.set_xlabel(r"$\Delta t$")
    ax.set_ylabel("strong error")
    if title:
        ax.set_title(title)
    ax.legend(loc="best", fontsize=8)
    ax.grid(True, which="both", alpha=0.3)
    fig.tight_layout()
    fig.savefig(filename, dpi=130)
    plt.close(fig)
