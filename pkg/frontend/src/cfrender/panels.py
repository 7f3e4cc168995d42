"""Figure assembly: Green's-function panels and error-vs-shots plots."""

from __future__ import annotations

import os
from dataclasses import dataclass, field
from typing import Optional, Sequence

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .reader import SelectionError, Table, read_table


@dataclass
class PanelSpec:
    inputs: Sequence[str]
    pairs: Optional[Sequence[tuple[int, int]]] = None   # None: every pair present
    levels: Optional[Sequence[int]] = None               # None: every level >= 0
    out_dir: str = "."
    log_error: bool = True


def _available_pairs(table: Table) -> list[tuple[int, int]]:
    ii = table.column("i").astype(int)
    jj = table.column("j").astype(int)
    return sorted(set(zip(ii.tolist(), jj.tolist())))


def _available_levels(table: Table) -> list[int]:
    levels = sorted(set(table.column("level").astype(int).tolist()))
    return [l for l in levels if l >= 0]


def build_panel_figure(table: Table, pair: tuple[int, int],
                       levels: Sequence[int], log_error: bool = True):
    """Top: Re G per level with the oracle curve.  Bottom: error curves."""
    ii = table.column("i").astype(int)
    jj = table.column("j").astype(int)
    lvl = table.column("level").astype(int)
    pick_pair = (ii == pair[0]) & (jj == pair[1])

    fig, (top, bottom) = plt.subplots(
        2, 1, sharex=True, figsize=(7.0, 5.4),
        gridspec_kw={"height_ratios": [2.2, 1.0]})
    plotted = False
    oracle_drawn = False
    for level in levels:
        mask = pick_pair & (lvl == level)
        if not mask.any():
            continue
        order = np.argsort(table.column("omega0")[mask])
        omega0 = table.column("omega0")[mask][order]
        top.plot(omega0, table.column("g_re")[mask][order],
                 label=f"level {level}", linewidth=1.2)
        if not oracle_drawn:
            top.plot(omega0, table.column("oracle_re")[mask][order],
                     "k--", linewidth=1.0, label="exact")
            oracle_drawn = True
        err = table.column("abs_err")[mask][order]
        if log_error:
            floor = np.finfo(float).tiny
            bottom.semilogy(omega0, np.maximum(err, floor),
                            linewidth=1.0, label=f"level {level}")
        else:
            bottom.plot(omega0, err, linewidth=1.0, label=f"level {level}")
        plotted = True
    if not plotted:
        plt.close(fig)
        raise SelectionError(
            f"no rows for pair (i, j) = {pair} at levels {list(levels)}")
    top.set_ylabel(rf"Re $G_{{{pair[0]}{pair[1]}}}$")
    top.legend(loc="best", fontsize=8)
    bottom.set_ylabel("|error|")
    bottom.set_xlabel(r"$\omega_0$")
    eta = table.metadata.get("eta")
    model = table.metadata.get("model", "")
    title = f"{model}  (i,j)=({pair[0]},{pair[1]})"
    if eta:
        title += f"  eta={eta}"
    top.set_title(title, fontsize=10)
    fig.tight_layout()
    return fig


def build_shots_figure(table: Table):
    """Log-log error-vs-shots scatter with a per-budget median line."""
    shots = table.column("shots")
    err = table.column("max_err")
    if len(table) == 0:
        raise SelectionError("shots table has no rows")
    fig, ax = plt.subplots(figsize=(6.0, 4.4))
    ax.scatter(shots, err, s=12, alpha=0.45, label="repeats")
    budgets = np.array(sorted(set(shots.tolist())))
    medians = np.array([np.median(err[shots == m]) for m in budgets])
    ax.plot(budgets, medians, "o-", color="crimson", label="median")
    ax.set_xscale("log")
    ax.set_yscale("log")
    ax.set_xlabel("measurements per observable")
    ax.set_ylabel("max grid error")
    ax.legend(loc="best", fontsize=8)
    fig.tight_layout()
    return fig


def _save(fig, path: str) -> str:
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    # metadata pinned so rerenders are byte-identical regardless of the
    # matplotlib build string
    fig.savefig(path, dpi=130, metadata={"Software": "cfrender"})
    plt.close(fig)
    return path


def render_panels(spec: PanelSpec) -> list[str]:
    """One image per (i, j) group per input file; returns written paths."""
    written: list[str] = []
    multiple = len(spec.inputs) > 1
    for input_path in spec.inputs:
        table = read_table(input_path)
        if table.kind == "shots":
            stem = os.path.splitext(os.path.basename(input_path))[0]
            name = f"{stem}_shots.png" if multiple else "shots.png"
            fig = build_shots_figure(table)
            written.append(_save(fig, os.path.join(spec.out_dir, name)))
            continue
        pairs = list(spec.pairs) if spec.pairs else _available_pairs(table)
        levels = list(spec.levels) if spec.levels is not None \
            else _available_levels(table)
        if not pairs or not levels:
            raise SelectionError(f"nothing to plot in {input_path}")
        prefix = (os.path.splitext(os.path.basename(input_path))[0] + "_"
                  if multiple else "")
        for pair in pairs:
            fig = build_panel_figure(table, pair, levels,
                                     log_error=spec.log_error)
            name = f"{prefix}panel_i{pair[0]}_j{pair[1]}.png"
            written.append(_save(fig, os.path.join(spec.out_dir, name)))
    return written
