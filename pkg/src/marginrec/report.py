"""Experiment summaries: median query counts per n, logarithmic fits, and
figures rendered next to the delimited results."""

from __future__ import annotations

from dataclasses import dataclass

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np


@dataclass
class ScalingFit:
    group: dict
    sizes: list[int]
    medians: list[float]
    intercept: float
    slope: float
    r_squared: float

    @property
    def ratio(self) -> float:
        lo, hi = min(self.medians), max(self.medians)
        return float("inf") if lo == 0 else hi / lo


def fit_log_curve(sizes, values) -> tuple[float, float, float]:
    """Least-squares fit q = a + b*log(n); returns (a, b, R^2)."""
    sizes = np.asarray(sizes, dtype=float)
    values = np.asarray(values, dtype=float)
    if sizes.size < 2:
        return float(values.mean() if values.size else 0.0), 0.0, 1.0
    A = np.column_stack([np.ones_like(sizes), np.log(sizes)])
    coef, *_ = np.linalg.lstsq(A, values, rcond=None)
    pred = A @ coef
    ss_res = float(((values - pred) ** 2).sum())
    ss_tot = float(((values - values.mean()) ** 2).sum())
    if ss_tot <= 1e-12:
        r2 = 1.0 if ss_res <= 1e-9 else 0.0
    else:
        r2 = 1.0 - ss_res / ss_tot
    return float(coef[0]), float(coef[1]), r2


def _group_key(row) -> tuple:
    return (row["algorithm"], row["m"], row["k"], row["gamma"])


def summarize(rows) -> list[ScalingFit]:
    """Group result rows and fit median label queries against log n."""
    groups: dict[tuple, dict[int, list[int]]] = {}
    for row in rows:
        by_n = groups.setdefault(_group_key(row), {})
        by_n.setdefault(row["n"], []).append(row["label_queries"])
    fits = []
    for key in sorted(groups):
        by_n = groups[key]
        sizes = sorted(by_n)
        medians = [float(np.median(by_n[n])) for n in sizes]
        a, b, r2 = fit_log_curve(sizes, medians)
        fits.append(ScalingFit(
            group={"algorithm": key[0], "m": key[1], "k": key[2],
                   "gamma": key[3]},
            sizes=sizes, medians=medians,
            intercept=a, slope=b, r_squared=r2))
    return fits


def write_summary(fits, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("algorithm,m,k,gamma,n,median_label_queries,"
                 "fit_intercept,fit_slope,fit_r_squared\n")
        for fit in fits:
            g = fit.group
            for n, med in zip(fit.sizes, fit.medians):
                fh.write(f"{g['algorithm']},{g['m']},{g['k']},{g['gamma']},"
                         f"{n},{med},{fit.intercept:.6g},{fit.slope:.6g},"
                         f"{fit.r_squared:.6g}\n")


def render_scaling_figure(fits, path) -> None:
    """Median label queries vs n with the fitted a + b*log(n) curves."""
    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    for fit in fits:
        g = fit.group
        tag = (f"{g['algorithm']} m={g['m']} k={g['k']} "
               f"gamma={g['gamma']:g}")
        ax.plot(fit.sizes, fit.medians, "o", label=tag)
        if len(fit.sizes) >= 2:
            grid = np.geomspace(min(fit.sizes), max(fit.sizes), 64)
            ax.plot(grid, fit.intercept + fit.slope * np.log(grid), "-",
                    alpha=0.7,
                    label=f"fit R^2={fit.r_squared:.3f}")
    ax.set_xscale("log")
    ax.set_xlabel("n")
    ax.set_ylabel("median label queries")
    ax.legend(fontsize=7)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def render_rounds_figure(rows, path) -> None:
    """Recovery progress: points remaining after each round, per run."""
    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    plotted = 0
    for row in rows:
        per_round = (row.get("config") or {}).get("per_round")
        if not per_round:
            continue
        remaining = [row["n"]] + [entry[2] for entry in per_round]
        ax.plot(range(len(remaining)), remaining, alpha=0.35)
        plotted += 1
        if plotted >= 64:
            break
    ax.set_xlabel("round")
    ax.set_ylabel("points remaining")
    ax.set_yscale("symlog")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
