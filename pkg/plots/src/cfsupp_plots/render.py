"""Figure rendering from cfsupp sweep CSVs.

Reads the long-format CSV the sweep driver emits (one row per grid point and
metric), pivots it by series selectors, and draws the paper-style layout:
one main fidelity panel with an inset success-probability panel.  Rendering
never recomputes physics and is deterministic: fixed style sheet, fixed
metadata, no timestamps.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from importlib import resources

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt

EXPECTED_COLUMNS = [
    "protocol", "code", "code_params", "eta", "nbar", "p_dv",
    "sweep_var", "sweep_value", "metric", "value", "err_est",
]


class RenderError(Exception):
    """Base error for figure rendering."""


class SchemaMismatch(RenderError):
    """CSV header does not match the sweep-driver contract."""


class MissingSeries(RenderError):
    """A recipe series selected no data."""


class RecipeError(RenderError):
    """Malformed recipe file."""


@dataclass(frozen=True)
class Series:
    label: str
    where: dict
    style: dict = field(default_factory=dict)


@dataclass(frozen=True)
class FigureRecipe:
    csv_paths: tuple
    series: tuple
    main_metric: str = "avg_fidelity"
    inset_metric: str = "avg_success"
    x_label: str = ""
    y_label: str = "average fidelity"
    inset_y_label: str = "average success"
    title: str = ""

    @classmethod
    def from_file(cls, path: str) -> "FigureRecipe":
        try:
            with open(path) as fh:
                raw = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise RecipeError(f"cannot read recipe {path!r}: {exc}") from exc
        try:
            series = tuple(
                Series(s["label"], dict(s["where"]), dict(s.get("style", {})))
                for s in raw["series"]
            )
            csvs = raw["csv"]
            if isinstance(csvs, str):
                csvs = [csvs]
            return cls(
                csv_paths=tuple(csvs),
                series=series,
                main_metric=raw.get("main_metric", "avg_fidelity"),
                inset_metric=raw.get("inset_metric", "avg_success"),
                x_label=raw.get("x_label", ""),
                y_label=raw.get("y_label", "average fidelity"),
                inset_y_label=raw.get("inset_y_label", "average success"),
                title=raw.get("title", ""),
            )
        except (KeyError, TypeError) as exc:
            raise RecipeError(f"recipe {path!r} missing field: {exc}") from exc


def load_rows(paths) -> list:
    rows = []
    for path in paths:
        try:
            fh = open(path, newline="")
        except OSError as exc:
            raise SchemaMismatch(f"cannot open CSV {path!r}: {exc}") from exc
        with fh:
            reader = csv.DictReader(fh)
            if reader.fieldnames != EXPECTED_COLUMNS:
                raise SchemaMismatch(
                    f"{path!r} header {reader.fieldnames} != sweep schema {EXPECTED_COLUMNS}"
                )
            rows.extend(reader)
    return rows


def _match(row: dict, where: dict) -> bool:
    return all(row.get(k) == str(v) for k, v in where.items())


def series_points(rows, series: Series, metric: str):
    """Sorted (x, y) pairs for one series and metric; NaN-flagged rows drop."""
    pts = []
    for row in rows:
        if row["metric"] != metric or not _match(row, series.where):
            continue
        if row["err_est"].startswith("error=") or row["value"] == "nan":
            continue
        pts.append((float(row["sweep_value"]), float(row["value"])))
    if not pts:
        raise MissingSeries(
            f"series {series.label!r} selected no {metric!r} rows ({series.where})"
        )
    return sorted(pts)


def render(recipe: FigureRecipe, out_path: str) -> str:
    """Draw main + inset panels and write the image; returns out_path."""
    rows = load_rows(recipe.csv_paths)
    main_data = [(s, series_points(rows, s, recipe.main_metric)) for s in recipe.series]
    inset_data = [(s, series_points(rows, s, recipe.inset_metric)) for s in recipe.series]

    style = resources.files("cfsupp_plots").joinpath("paper.mplstyle")
    with plt.style.context(str(style)):
        fig, ax = plt.subplots(figsize=(4.4, 3.3))
        for s, pts in main_data:
            xs, ys = zip(*pts)
            ax.plot(xs, ys, label=s.label, **s.style)
        ax.set_xlabel(recipe.x_label)
        ax.set_ylabel(recipe.y_label)
        if recipe.title:
            ax.set_title(recipe.title)
        ax.legend(loc="lower left", fontsize=7)

        inset = fig.add_axes([0.62, 0.62, 0.33, 0.3])
        for s, pts in inset_data:
            xs, ys = zip(*pts)
            inset.plot(xs, ys, **s.style)
        inset.set_ylabel(recipe.inset_y_label, fontsize=6)
        inset.tick_params(labelsize=6)

        fig.savefig(out_path, metadata={"Software": "cfsupp-plots"})
        plt.close(fig)
    return out_path
