"""Static figures for experiment reports (Agg backend, PNG files)."""
from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402
from scipy import special, stats  # noqa: E402

__all__ = ["render_report"]

plt.rcParams.update({
    "figure.dpi": 100,
    "axes.spines.top": False,
    "axes.spines.right": False,
    "axes.grid": True,
    "grid.alpha": 0.3,
    "font.size": 9,
})


def _rate_axes(ax, report, key="median_sup_residual"):
    T = np.asarray(report.stats["horizons"], dtype=float)
    e = np.asarray(report.stats[key], dtype=float)
    ax.loglog(T, e, "o-", label="median sup residual")
    if "median_sup_raw" in report.stats:
        ax.loglog(T, report.stats["median_sup_raw"], "s--", color="0.5", label="median sup raw")
    fit = report.slopes.get("residual")
    if fit:
        ax.loglog(T, np.exp(fit["intercept"]) * T ** fit["slope"], ":",
                  label=f"fit slope {fit['slope']:.3f}")
    if np.all(e > 0):
        for name, style in (("reference_exponent", "-."), ("scale_exponent", "--")):
            if name in report.references:
                p = report.references[name]
                ax.loglog(T, e[0] * (T / T[0]) ** p, style, lw=0.8, alpha=0.7,
                          label=f"{name.split('_')[0]} {p:.3f}")
    ax.set_xlabel("horizon T")
    ax.set_ylabel("sup error")
    ax.legend(frameon=False)


def _distribution_axes(ax, report):
    sample = np.sort(np.asarray(report.raw.get("stat", []), dtype=float))
    if sample.size == 0:
        return False
    ecdf = np.arange(1, sample.size + 1) / sample.size
    ax.step(sample, ecdf, where="post", label="empirical")
    grid = np.linspace(sample[0], sample[-1], 400)
    kind = report.kind
    if kind == "vervaat_chi2":
        ref = stats.chi2(1).cdf(grid)
    elif kind == "bk_marginal":
        ref = special.ndtr(grid / report.references["scale"])
    else:
        ref = special.ndtr(grid)
    ax.plot(grid, ref, "--", label=report.references.get("law", "reference"))
    ax.set_title(f"KS = {report.stats['ks_distance']:.4f}")
    ax.set_xlabel("normalized statistic")
    ax.set_ylabel("cdf")
    ax.legend(frameon=False)
    return True


def render_report(report, path) -> Path | None:
    """Render the figure matching ``report.kind`` into ``path``; ``None`` if nothing to draw."""
    kind = report.kind
    path = Path(path)
    if kind.startswith("coupling_rate") and "lil_ratio" in report.stats:
        fig, (ax, ax2) = plt.subplots(1, 2, figsize=(9, 3.6))
        _rate_axes(ax, report)
        ax2.semilogx(report.stats["horizons"], report.stats["lil_ratio"], "o-")
        ax2.set_xlabel("horizon T")
        ax2.set_ylabel("sup raw / LIL envelope")
    elif kind.startswith("coupling_rate") or kind == "reduction_residual":
        if not np.all(np.asarray(report.stats["median_sup_residual"]) > 0):
            return None
        fig, ax = plt.subplots(figsize=(5, 3.6))
        _rate_axes(ax, report)
    elif kind == "variance_asymptote":
        fig, ax = plt.subplots(figsize=(5, 3.6))
        ax.semilogx(report.stats["horizons"], report.stats["ratios"], "o-", base=2)
        tol = report.tolerances["ratio"]
        ax.axhspan(1 - tol, 1 + tol, color="0.9")
        ax.axhline(1.0, color="k", lw=0.8)
        ax.set_xlabel("n")
        ax.set_ylabel("variance ratio")
    elif kind == "identity_sweep":
        vals = np.asarray(report.raw.get("max_rel_residual", []), dtype=float)
        if vals.size == 0:
            return None
        fig, ax = plt.subplots(figsize=(5, 3.6))
        ax.hist(np.log10(np.maximum(vals, 1e-300)), bins=20)
        ax.axvline(np.log10(report.tolerances["residual"]), color="r", ls="--")
        ax.set_xlabel("log10 max relative residual")
        ax.set_ylabel("series")
    else:
        if kind == "bk_marginal" and "bk_scaled" in report.raw:
            fig, (ax, ax2) = plt.subplots(1, 2, figsize=(9, 3.6))
            ax2.hist(report.raw["bk_scaled"], bins=40, density=True)
            ax2.axvline(report.stats["bk_limit_mean"], color="r", ls="--", label="limit mean")
            ax2.set_xlabel("(n/d) R_n(t)")
            ax2.legend(frameon=False)
        else:
            fig, ax = plt.subplots(figsize=(5, 3.6))
        if not _distribution_axes(ax, report):
            plt.close(fig)
            return None
    fig.suptitle(f"{kind}: {'pass' if report.passed else 'fail'}")
    fig.tight_layout()
    fig.savefig(path, metadata={"Software": None})
    plt.close(fig)
    return path
