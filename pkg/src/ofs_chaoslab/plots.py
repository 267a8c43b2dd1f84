"""Figure rendering from the CSV tables (SVG files, headless backend)."""

from __future__ import annotations

from collections import defaultdict
from pathlib import Path
from typing import Iterable, Sequence

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .levelstats import reference_poisson, reference_wigner  # noqa: E402

plt.rcParams.update(
    {
        "font.size": 10,
        "axes.linewidth": 0.8,
        "lines.linewidth": 1.2,
        "legend.frameon": False,
        "svg.hashsalt": "ofs-chaoslab",
        "figure.figsize": (5.0, 3.4),
    }
)

_SVG_META = {"Date": None, "Creator": "ofs-chaoslab"}


def _save(fig, path: Path) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.tight_layout()
    fig.savefig(path, format="svg", metadata=_SVG_META)
    plt.close(fig)
    return path


def _mode_label(mode: str, beta: float) -> str:
    return "T = inf" if mode == "infinite" else f"T = {1.0 / beta:g}"


def _series(rows: Iterable[dict], key: str, t: float, temps: Sequence[float] | None):
    """Group sweep rows at time ``t`` into per-temperature ``(lambda, value)`` series."""
    out = defaultdict(list)
    for r in rows:
        if float(r["t"]) != t:
            continue
        beta = float(r["beta"])
        T = np.inf if r["mode"] == "infinite" else 1.0 / beta
        if temps is not None and not any(np.isclose(T, x) or (np.isinf(T) and np.isinf(x)) for x in temps):
            continue
        out[_mode_label(r["mode"], beta)].append((float(r["lambda"]), float(r[key])))
    return {k: np.array(sorted(v)) for k, v in out.items()}


def plot_vs_lambda(rows, key: str, t: float, temps, path: Path, title: str, ylabel: str) -> Path | None:
    series = _series(rows, key, t, temps)
    if not series:
        return None
    fig, ax = plt.subplots()
    for label, arr in series.items():
        ax.plot(arr[:, 0], arr[:, 1], marker=".", ms=3, label=label)
    ax.set_xscale("log")
    ax.set_yscale("log")
    ax.set_xlabel(r"coupling $\lambda$")
    ax.set_ylabel(ylabel)
    ax.set_title(title, fontsize=9)
    ax.legend(fontsize=8)
    return _save(fig, path)


def plot_partial_sums(rows, path: Path, title: str) -> Path | None:
    curves = defaultdict(list)
    for r in rows:
        curves[(float(r["lambda"]), float(r["t"]), r["mode"])].append((int(r["D"]), float(r["chi1_partial"])))
    if not curves:
        return None
    fig, ax = plt.subplots()
    for (lam, t, mode), pts in sorted(curves.items()):
        arr = np.array(sorted(pts))
        ax.plot(arr[:, 0], arr[:, 1], label=rf"$\lambda$={lam:.2g}, t={t:g}")
    ax.set_yscale("log")
    ax.set_xlabel("levels included D")
    ax.set_ylabel(r"partial $\chi^{(1)}(D)$")
    ax.set_title(title, fontsize=9)
    ax.legend(fontsize=7)
    return _save(fig, path)


def plot_spacing_histograms(hists: dict[float, dict], path: Path) -> Path | None:
    """``hists`` maps lambda -> {'edges': array, 'densities': array}."""
    if not hists:
        return None
    n = len(hists)
    cols = 2 if n > 1 else 1
    rows = (n + cols - 1) // cols
    fig, axes = plt.subplots(rows, cols, figsize=(5.0, 2.4 * rows), squeeze=False)
    s = np.linspace(0, max(h["edges"][-1] for h in hists.values()), 300)
    for ax, (lam, h) in zip(axes.flat, sorted(hists.items())):
        ax.stairs(h["densities"], h["edges"], fill=True, alpha=0.4, color="C0")
        ax.plot(s, reference_poisson(s), "k--", lw=1, label="Poisson")
        ax.plot(s, reference_wigner(s), "k-", lw=1, label="Wigner-Dyson")
        ax.set_title(rf"$\lambda$ = {lam:.3g}", fontsize=9)
        ax.set_xlabel("s")
        ax.set_ylabel("P(s)")
    for ax in list(axes.flat)[n:]:
        ax.axis("off")
    axes.flat[0].legend(fontsize=7)
    return _save(fig, path)


def ofs_figures(sweep_rows: list[dict], partial_rows: list[dict], out: Path, K: int, D_c: int) -> list[Path]:
    """Write fig3, fig4a/b, fig5a/b and fig6 analogues; figures with no data are skipped."""
    tag = f"K={K}, D_c={D_c}"
    temps_low = (1.0, 2.0)
    temps_high = (4.5, float("inf"))
    made = [
        plot_partial_sums(partial_rows, out / "fig3.svg", f"partial sums, {tag}"),
        plot_vs_lambda(sweep_rows, "chi1", 100.0, temps_low, out / "fig4a.svg",
                       f"t=100, low T, {tag}", r"$\chi^{(1)}$"),
        plot_vs_lambda(sweep_rows, "chi1", 100.0, temps_high, out / "fig4b.svg",
                       f"t=100, high T, {tag}", r"$\chi^{(1)}$"),
        plot_vs_lambda(sweep_rows, "chi1", 200.0, temps_high, out / "fig5a.svg",
                       f"t=200, {tag}", r"$\chi^{(1)}$"),
        plot_vs_lambda(sweep_rows, "chi1", 400.0, temps_high, out / "fig5b.svg",
                       f"t=400, {tag}", r"$\chi^{(1)}$"),
        plot_vs_lambda(sweep_rows, "chi2", 100.0, None, out / "fig6.svg",
                       f"t=100, {tag}", r"$\chi^{(2)}$"),
    ]
    return [p for p in made if p is not None]
