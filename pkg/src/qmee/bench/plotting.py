"""SVG figures for experiment reports (matplotlib, Agg backend)."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .report import ExperimentReport  # noqa: E402

_STYLE = {
    "svg.hashsalt": "qmee-bench",   # stable element ids
    "svg.fonttype": "none",
    "font.size": 9,
    "axes.grid": True,
    "grid.alpha": 0.3,
}

_COLORS = {"mse": "tab:gray", "mcc": "tab:orange", "mee": "tab:blue", "qmee": "tab:red",
           "ls": "tab:gray", "ridge": "tab:green", "elm": "tab:gray", "relm": "tab:green"}


def _save(fig, path: str) -> str:
    fig.tight_layout()
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)
    return path


def plot_timing(report: ExperimentReport, path: str) -> str:
    """Median wall time against N on log-log axes with fitted slopes."""
    with plt.rc_context(_STYLE):
        fig, ax = plt.subplots(figsize=(4.5, 3.4))
        for crit in ("mee", "qmee"):
            aggs = [r for r in report.aggregate_rows
                    if r["criterion"] == crit and r["group"] != "slope"]
            ns = np.array([r["group"] for r in aggs], dtype=float)
            t = np.array([r["wall_time"] for r in aggs], dtype=float)
            slope = report.aggregate("slope", crit).get("wall_time_slope")
            label = crit.upper() + ("" if slope is None else f" (slope {slope:.2f})")
            ax.loglog(ns, t, "o-", color=_COLORS[crit], label=label)
        ax.set_xlabel("number of samples N")
        ax.set_ylabel("median wall time [s]")
        ax.legend()
        return _save(fig, path)


def plot_surface(grid, path: str) -> str:
    """One contour panel per criterion; cross = target, circle = grid optimum."""
    crits = list(grid.costs)
    cols = min(2, len(crits))
    rows = int(np.ceil(len(crits) / cols))
    with plt.rc_context({**_STYLE, "axes.grid": False}):
        fig, axes = plt.subplots(rows, cols, figsize=(4.0 * cols, 3.4 * rows), squeeze=False)
        for ax, crit in zip(axes.ravel(), crits):
            ax.contour(grid.w1, grid.w2, grid.costs[crit], levels=20, linewidths=0.7)
            ax.plot(*grid.target, "x", color="red", markersize=9, mew=2, label="target")
            ax.plot(*grid.optima[crit], "o", mfc="none", color="blue", markersize=9,
                    label="optimum")
            ax.set_title(crit.upper())
            ax.set_xlabel(r"$\omega_1$")
            ax.set_ylabel(r"$\omega_2$")
        for ax in axes.ravel()[len(crits):]:
            ax.set_visible(False)
        axes.ravel()[0].legend(loc="lower left", fontsize=7)
        return _save(fig, path)


def plot_esn(report: ExperimentReport, path: str) -> str:
    """Median test NRMSE against the noise parameter alpha."""
    with plt.rc_context(_STYLE):
        fig, ax = plt.subplots(figsize=(4.5, 3.4))
        crits = list(dict.fromkeys(r["criterion"] for r in report.trial_rows))
        for crit in crits:
            alphas = list(dict.fromkeys(r["group"] for r in report.trial_rows))
            med = [np.nanmedian([r["metric"] for r in report.trials(a, crit)]) for a in alphas]
            ax.semilogy(alphas, med, "o-", color=_COLORS.get(crit), label=crit.upper())
        ax.set_xlabel(r"noise parameter $\alpha$")
        ax.set_ylabel("median test NRMSE")
        ax.legend()
        return _save(fig, path)


def plot_metric_bars(report: ExperimentReport, path: str) -> str:
    """Mean metric with one-std error bars, per group and criterion."""
    aggs = [r for r in report.aggregate_rows if r["metric"] is not None]
    groups = list(dict.fromkeys(r["group"] for r in aggs))
    crits = list(dict.fromkeys(r["criterion"] for r in aggs))
    width = 0.8 / max(1, len(crits))
    with plt.rc_context(_STYLE):
        fig, ax = plt.subplots(figsize=(1.2 + 1.3 * len(groups), 3.4))
        x = np.arange(len(groups))
        for i, crit in enumerate(crits):
            mean = [report.aggregate(g, crit)["metric"] for g in groups]
            std = [report.aggregate(g, crit)["metric_std"] for g in groups]
            ax.bar(x + (i - (len(crits) - 1) / 2) * width, mean, width, yerr=std,
                   color=_COLORS.get(crit), label=crit.upper(), capsize=2)
        ax.set_xticks(x, [str(g) for g in groups])
        ax.set_yscale("log")
        ax.set_ylabel(f"mean {aggs[0]['metric_name']}")
        ax.legend(fontsize=7)
        return _save(fig, path)
