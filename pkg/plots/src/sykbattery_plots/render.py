"""Render publication-style figures from the simulator's CSV outputs.

Consumes only the public CSV + JSON-sidecar contract: every CSV is validated
against the column list its run sidecar declares before anything is drawn.
Inputs are never modified.
"""

from __future__ import annotations

import argparse
import csv
import glob
import json
import os
import sys
from dataclasses import dataclass, field

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

KINDS = ("gap", "sff", "population", "energy", "efficiency")

# filename patterns produced by the simulator CLI, per figure kind
_PATTERNS = {
    "gap": "gap_ratio_N*.csv",
    "sff": "sff_N*_p*.csv",
    "population": "populations_N*_p*.csv",
    "energy": "stored_energy_N*_p*.csv",
    "efficiency": "efficiency_N*.csv",
}


class SchemaError(ValueError):
    """CSV header disagrees with the sidecar's declared columns."""


@dataclass
class FigureRecipe:
    kind: str
    inputs: list
    output: str
    title: str | None = None
    dpi: int = 150
    style: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.kind not in KINDS:
            raise ValueError(f"kind must be one of {KINDS}, got {self.kind!r}")
        if not self.inputs:
            raise ValueError("recipe needs at least one input CSV")


@dataclass
class TableData:
    """One validated CSV plus the sidecar metadata describing it."""

    path: str
    columns: list
    rows: np.ndarray
    meta: dict
    sidecar: dict

    def column(self, name: str) -> np.ndarray:
        return self.rows[:, self.columns.index(name)]


def _find_sidecar(csv_path: str):
    directory = os.path.dirname(os.path.abspath(csv_path))
    name = os.path.basename(csv_path)
    for entry in sorted(os.listdir(directory)):
        if not entry.endswith(".sidecar.json"):
            continue
        with open(os.path.join(directory, entry)) as fh:
            sidecar = json.load(fh)
        if name in sidecar.get("outputs", {}):
            return sidecar
    raise SchemaError(f"no sidecar in {directory} declares {name}")


def load_table(csv_path: str) -> TableData:
    """Read a CSV and check its header against the sidecar declaration."""
    sidecar = _find_sidecar(csv_path)
    meta = sidecar["outputs"][os.path.basename(csv_path)]
    declared = list(meta["columns"])
    with open(csv_path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        rows = np.array([[float(v) for v in row] for row in reader])
    for position, column in enumerate(declared):
        if position >= len(header) or header[position] != column:
            found = header[position] if position < len(header) else "<missing>"
            raise SchemaError(
                f"{os.path.basename(csv_path)}: expected column '{column}' at "
                f"position {position}, found '{found}'"
            )
    for column in header[len(declared):]:
        raise SchemaError(
            f"{os.path.basename(csv_path)}: undeclared column '{column}'"
        )
    return TableData(csv_path, header, rows, meta, sidecar)


def _n_sites_of(table: TableData):
    return table.sidecar.get("config", {}).get("n_sites")


def _p2_of(table: TableData):
    return table.sidecar.get("extra", {}).get("p2")


def _build_gap(tables, ax) -> None:
    for table in tables:
        n = _n_sites_of(table)
        line = ax.errorbar(table.column("p"), table.column("r_mean"),
                           yerr=table.column("r_stderr"), marker="o",
                           markersize=3, capsize=2, label=f"N = {n}")
        p2 = _p2_of(table)
        if p2 is not None:
            ax.axvline(p2, color=line.lines[0].get_color(), alpha=0.85,
                       linewidth=2.2, linestyle="--")
    ax.set_xscale("log")
    ax.set_xlabel("sparsity p")
    ax.set_ylabel("gap ratio r")
    ax.legend()


def _build_sff(tables, ax) -> None:
    for table in sorted(tables, key=lambda t: -t.meta.get("p", 0.0)):
        ax.plot(table.column("t"), table.column("sff_value"),
                label=f"p = {table.meta.get('p')}")
    ax.set_xscale("log")
    ax.set_yscale("log")
    ax.set_xlabel("t")
    ax.set_ylabel("SFF")
    ax.legend()


def _build_population(tables, ax, fig) -> None:
    table = tables[0]
    times = np.unique(table.column("t"))
    levels = np.unique(table.column("k"))
    grid = np.full((levels.size, times.size), np.nan)
    t_index = {t: a for a, t in enumerate(times)}
    k_index = {k: a for a, k in enumerate(levels)}
    for t, k, pk in table.rows:
        grid[k_index[k], t_index[t]] = pk
    mesh = ax.pcolormesh(times, levels, grid, shading="nearest")
    fig.colorbar(mesh, ax=ax, label="population")
    ax.set_xlabel("t")
    ax.set_ylabel("shifted level k")


def _build_energy(tables, ax) -> None:
    for table in sorted(tables, key=lambda t: -t.meta.get("p", 0.0)):
        n = _n_sites_of(table) or 1
        ax.errorbar(table.column("tau_c"), table.column("E_mean") / n,
                    yerr=table.column("E_stderr") / n,
                    label=f"p = {table.meta.get('p')}")
    ax.set_xlabel("charging duration tau_c")
    ax.set_ylabel("stored energy per cell")
    ax.legend()


def _build_efficiency(tables, ax) -> None:
    for table in tables:
        n = _n_sites_of(table)
        line = ax.errorbar(table.column("p"), table.column("e_mean"),
                           yerr=table.column("e_stderr"), marker="o",
                           markersize=3, capsize=2, label=f"N = {n}")
        p2 = _p2_of(table)
        if p2 is not None:
            ax.axvline(p2, color=line.lines[0].get_color(), alpha=0.85,
                       linewidth=1.6, linestyle="--")
    ax.set_xscale("log")
    ax.set_xlabel("sparsity p")
    ax.set_ylabel("efficiency e")
    ax.legend()


def build_figure(recipe: FigureRecipe):
    """Load, validate, and draw; returns the matplotlib figure."""
    tables = [load_table(path) for path in recipe.inputs]
    fig, ax = plt.subplots(figsize=recipe.style.get("figsize", (6.0, 4.0)))
    if recipe.kind == "gap":
        _build_gap(tables, ax)
    elif recipe.kind == "sff":
        _build_sff(tables, ax)
    elif recipe.kind == "population":
        _build_population(tables, ax, fig)
    elif recipe.kind == "energy":
        _build_energy(tables, ax)
    elif recipe.kind == "efficiency":
        _build_efficiency(tables, ax)
    if recipe.title:
        ax.set_title(recipe.title)
    fig.tight_layout()
    return fig


def render(recipe: FigureRecipe) -> str:
    """Render the recipe to its output file; deterministic for fixed inputs."""
    fig = build_figure(recipe)
    try:
        fig.savefig(recipe.output, dpi=recipe.dpi,
                    metadata={"Software": "sykbattery-plots"})
    finally:
        plt.close(fig)
    return recipe.output


def discover_inputs(directory: str, kind: str) -> list:
    found = sorted(glob.glob(os.path.join(directory, _PATTERNS[kind])))
    # the threshold-report companions match the curve pattern; keep them out
    return [path for path in found if not path.endswith("_p2.csv")]


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="sykbattery-plot",
        description="render figures from sykbattery output directories",
    )
    parser.add_argument("--in", dest="in_dir", required=True,
                        help="directory holding CSVs and their sidecars")
    parser.add_argument("--out", required=True, help="output image file")
    parser.add_argument("--kind", required=True, choices=KINDS)
    parser.add_argument("--title", default=None)
    parser.add_argument("--dpi", type=int, default=150)
    args = parser.parse_args(argv)

    inputs = discover_inputs(args.in_dir, args.kind)
    if not inputs:
        print(f"sykbattery-plot: no {_PATTERNS[args.kind]} files in "
              f"{args.in_dir}", file=sys.stderr)
        return 2
    try:
        recipe = FigureRecipe(kind=args.kind, inputs=inputs, output=args.out,
                              title=args.title, dpi=args.dpi)
        render(recipe)
    except SchemaError as exc:
        print(f"sykbattery-plot: schema error: {exc}", file=sys.stderr)
        return 2
    return 0


def entrypoint() -> None:
    sys.exit(main())
