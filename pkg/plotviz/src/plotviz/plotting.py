"""Convergence figures from summary CSVs.

A summary CSV has the exact schema ``method,iteration,mean_best,se2`` (one
row per method/iteration pair, iterations contiguous from 0).  Each method
becomes one line with a shaded band covering mean ± se2.  Figures are
rendered with fixed, timestamp-free settings so the SVG output is
byte-stable across reruns.
"""

from __future__ import annotations

import csv
import re
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .errors import EmptyInput, SchemaError  # noqa: E402

EXPECTED_HEADER = ["method", "iteration", "mean_best", "se2"]

# fixed-order palette so the same methods always get the same colors
# fixed salt and literal text keep the SVG output byte-stable and
# lets downstream checks read legend labels directly
_RC = {"svg.hashsalt": "plotviz", "svg.fonttype": "none"}

_PALETTE = ("#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd",
            "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf")


def read_summary(path) -> dict[str, tuple[np.ndarray, np.ndarray, np.ndarray]]:
    """Parse one summary CSV into {method: (iterations, mean_best, se2)}.

    Methods keep their order of first appearance in the file.
    """
    path = Path(path)
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise SchemaError(f"{path}: empty file") from None
        if header != EXPECTED_HEADER:
            raise SchemaError(
                f"{path}: expected header {','.join(EXPECTED_HEADER)}, "
                f"got {','.join(header)}"
            )
        rows: dict[str, dict[int, tuple[float, float]]] = {}
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 4:
                raise SchemaError(f"{path}:{lineno}: expected 4 fields")
            method = row[0]
            try:
                iteration = int(row[1])
                mean_best = float(row[2])
                se2 = float(row[3])
            except ValueError as exc:
                raise SchemaError(f"{path}:{lineno}: {exc}") from exc
            per = rows.setdefault(method, {})
            if iteration in per:
                raise SchemaError(
                    f"{path}:{lineno}: duplicate row for "
                    f"({method}, {iteration})"
                )
            per[iteration] = (mean_best, se2)

    if not rows:
        raise EmptyInput(f"{path}: no data rows")

    out = {}
    for method, per in rows.items():
        its = sorted(per)
        if its != list(range(len(its))):
            raise SchemaError(
                f"{path}: iterations for {method} not contiguous from 0"
            )
        means = np.array([per[i][0] for i in its])
        se2s = np.array([per[i][1] for i in its])
        out[method] = (np.array(its), means, se2s)
    return out


def _draw_panel(ax, summary, title=None):
    for k, (method, (its, means, se2s)) in enumerate(summary.items()):
        color = _PALETTE[k % len(_PALETTE)]
        ax.plot(its, means, label=method, color=color, linewidth=1.6)
        ax.fill_between(its, means - se2s, means + se2s,
                        color=color, alpha=0.2, linewidth=0)
    ax.set_xlabel("iteration")
    ax.set_ylabel("best value found")
    if title:
        ax.set_title(title)
    ax.legend()


def _panel_title(path) -> str:
    """Panel caption for one CSV in a multi-panel figure.

    Files written by the ablation runner are named ``summary_src<N>.csv``;
    those become "<N> source trials".  Anything else keeps its stem.
    """
    stem = Path(path).stem
    match = re.search(r"src(\d+)$", stem)
    if match:
        return f"{match.group(1)} source trials"
    return stem


def _save(fig, output_image_path) -> tuple[Path, Path]:
    base = Path(output_image_path)
    if base.suffix.lower() in (".png", ".svg"):
        base = base.with_suffix("")
    base.parent.mkdir(parents=True, exist_ok=True)
    png = base.with_suffix(".png")
    svg = base.with_suffix(".svg")
    fig.savefig(png, format="png", dpi=150)
    # strip the creation date so rerunning yields identical bytes
    fig.savefig(svg, format="svg", metadata={"Date": None})
    plt.close(fig)
    return png, svg


def plot_convergence(summary_csv_path, output_image_path,
                     title: str | None = None) -> tuple[Path, Path]:
    """One summary CSV to a single-panel convergence figure (PNG and SVG)."""
    with plt.rc_context(_RC):
        summary = read_summary(summary_csv_path)
        fig, ax = plt.subplots(figsize=(6.4, 4.4))
        _draw_panel(ax, summary, title)
        fig.tight_layout()
        return _save(fig, output_image_path)


def plot_convergence_panels(summary_csv_paths, output_image_path,
                            title: str | None = None) -> tuple[Path, Path]:
    """Several summary CSVs side by side, one panel per file.

    Panels are titled from the file names (ablation files by their
    source-trial level); a single path collapses to plot_convergence.
    """
    paths = list(summary_csv_paths)
    if not paths:
        raise EmptyInput("no summary files given")
    if len(paths) == 1:
        return plot_convergence(paths[0], output_image_path, title)
    with plt.rc_context(_RC):
        summaries = [read_summary(p) for p in paths]
        fig, axes = plt.subplots(1, len(paths),
                                 figsize=(4.6 * len(paths), 4.2),
                                 sharey=True)
        for ax, path, summary in zip(axes, paths, summaries):
            _draw_panel(ax, summary, _panel_title(path))
        if title:
            fig.suptitle(title)
        fig.tight_layout()
        return _save(fig, output_image_path)
