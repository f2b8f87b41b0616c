"""Report rendering: JSON, CSV and matplotlib SVG figures."""
from __future__ import annotations

import math
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .experiments import ExperimentReport, report_to_csv  # noqa: E402

FORMATS = ("json", "csv", "svg")


def rcsetup():
    plt.rc("figure", dpi=100, facecolor="w")
    plt.rc("font", size=10)
    plt.rc("axes", grid=True)
    plt.rc("grid", alpha=0.3)
    # fixed salt and no date keep the SVG bytes a function of the report
    plt.rc("svg", hashsalt="rmtlab", fonttype="none")


def envelope(c_hat: float, eps, n: int) -> np.ndarray:
    return c_hat * (np.asarray(eps, dtype=float) + 1.0 / math.sqrt(n))


def tail_figure(report: ExperimentReport):
    """p_hat against eps for every (dist, n) with the fitted envelope C_hat (eps + 1/sqrt n)."""
    rcsetup()
    fig, ax = plt.subplots(figsize=(6.4, 4.2))
    groups = {}
    for c in report.cells:
        groups.setdefault((c.dist, c.n), []).append(c)
    colors = plt.rcParams["axes.prop_cycle"].by_key()["color"]
    k = 0
    for gi, ((dist, n), cells) in enumerate(groups.items()):
        cells = sorted(cells, key=lambda c: c.epsilon)
        color = colors[gi % len(colors)]
        eps = np.array([c.epsilon for c in cells])
        grid = np.linspace(eps.min() * 0.9, eps.max() * 1.1, 50) if eps.size > 1 else eps * np.array([0.9, 1.1])
        ax.plot(grid, envelope(report.c_hat, grid, n), color=color, lw=1, ls="--", gid=f"envelope-{dist}@{n}")
        for c in cells:
            ax.errorbar([c.epsilon], [c.p_hat], yerr=[[c.p_hat - c.wilson_low], [c.wilson_high - c.p_hat]],
                        fmt="none", ecolor=color, capsize=2, lw=0.8)
            ax.plot([c.epsilon], [c.p_hat], "o", color=color, ms=4, gid=f"datapoint-{k}",
                    label=f"{dist}, n={n}" if c is cells[0] else None)
            k += 1
    ax.set_xlabel(r"$\varepsilon$")
    ax.set_ylabel(r"$\hat p = P(s_n > \varepsilon^{-2} n^{-1/2})$")
    ax.set_title(rf"tail frequencies, $\hat C$ = {report.c_hat:.3g}")
    ax.legend(fontsize=7, loc="upper left")
    fig.tight_layout()
    return fig


def render_report(report: ExperimentReport, path, fmt: str, timestamp: bool = True) -> None:
    if fmt not in FORMATS:
        raise ValueError(f"unknown format {fmt!r}")
    if not report.cells:
        raise ValueError("report has no cells (empty epsilon grid)")
    path = Path(path)
    if fmt == "json":
        path.write_text(report.to_json(timestamp))
    elif fmt == "csv":
        path.write_text(report_to_csv(report))
    else:
        fig = tail_figure(report)
        fig.savefig(path, format="svg", metadata={"Date": None})
        plt.close(fig)
