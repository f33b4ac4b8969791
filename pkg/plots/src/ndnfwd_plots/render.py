"""Render comparison figures from a summary.csv produced by the harness.

Charts are drawn from summary.csv only; nothing is recomputed. Every render
writes a sidecar .json next to the image holding exactly the numbers that
were plotted, for diffing against the CSV source.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

SUMMARY_HEADER = ["strategy", "metric", "mean", "stddev", "n"]
FIGSIZE = (8.0, 5.0)
DPI = 120


class SchemaMismatch(ValueError):
    pass


class MissingColumn(ValueError):
    pass


@dataclass
class FigureSpec:
    kind: str  # variant_comparison | strategy_comparison | overhead_scatter
    summary_csv: Path
    output_path: Path
    title: str = ""
    # optional strategy filter (exact labels or prefixes), in plot order
    labels: Optional[list] = None


@dataclass
class SummaryTable:
    # strategy -> metric -> (mean, stddev)
    values: dict = field(default_factory=dict)
    order: list = field(default_factory=list)

    def metric(self, strategy: str, metric: str) -> tuple:
        try:
            return self.values[strategy][metric]
        except KeyError:
            raise MissingColumn(f"summary has no {metric!r} for {strategy!r}")


def load_summary(path) -> SummaryTable:
    path = Path(path)
    if not path.is_file():
        raise SchemaMismatch(f"{path} does not exist")
    table = SummaryTable()
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != SUMMARY_HEADER:
            raise SchemaMismatch(f"expected header {SUMMARY_HEADER}, got {header}")
        for row in reader:
            if not row:
                continue
            if len(row) != len(SUMMARY_HEADER):
                raise SchemaMismatch(f"bad row width: {row}")
            strategy, metric, mean, stddev, _ = row
            if strategy not in table.values:
                table.values[strategy] = {}
                table.order.append(strategy)
            table.values[strategy][metric] = (float(mean), float(stddev))
    return table


def _select(table: SummaryTable, labels: Optional[list]) -> list:
    if not labels:
        return list(table.order)
    chosen = []
    for pattern in labels:
        for strategy in table.order:
            if strategy == pattern or strategy.startswith(pattern):
                if strategy not in chosen:
                    chosen.append(strategy)
    return chosen


def render(spec: FigureSpec) -> Path:
    table = load_summary(spec.summary_csv)
    strategies = _select(table, spec.labels)
    if not strategies:
        raise MissingColumn("no matching strategies in summary")

    fig, ax = plt.subplots(figsize=FIGSIZE)
    sidecar: dict = {"figure": spec.kind, "source": str(spec.summary_csv)}

    if spec.kind in ("variant_comparison", "strategy_comparison"):
        means = [table.metric(s, "data_rx")[0] for s in strategies]
        errs = [table.metric(s, "data_rx")[1] for s in strategies]
        ax.bar(range(len(strategies)), means, yerr=errs, capsize=3,
               color="tab:blue", edgecolor="black")
        ax.set_xticks(range(len(strategies)))
        ax.set_xticklabels(strategies, rotation=30, ha="right")
        ax.set_ylabel("data received at consumer (packets/s)")
        sidecar["bars"] = [
            {"strategy": s, "data_rx_mean": m, "data_rx_stddev": e}
            for s, m, e in zip(strategies, means, errs)]
    elif spec.kind == "overhead_scatter":
        points = []
        for s in strategies:
            x = table.metric(s, "interests_tx_total")[0]
            y = table.metric(s, "data_rx")[0]
            ax.scatter([x], [y], s=60, label=s)
            ax.annotate(s, (x, y), textcoords="offset points", xytext=(6, 4),
                        fontsize=8)
            points.append({"strategy": s, "interests_tx_total_mean": x,
                           "data_rx_mean": y})
        ax.set_xlabel("interests sent by the branching router (packets/s)")
        ax.set_ylabel("data received at consumer (packets/s)")
        sidecar["points"] = points
    else:
        raise ValueError(f"unknown figure kind {spec.kind!r}")

    ax.set_title(spec.title or spec.kind.replace("_", " "))
    ax.grid(axis="y", alpha=0.3)
    fig.tight_layout()

    out = Path(spec.output_path)
    out.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(out, dpi=DPI, metadata={})
    plt.close(fig)

    sidecar_path = out.with_suffix(out.suffix + ".json")
    with open(sidecar_path, "w", encoding="utf-8") as fh:
        json.dump(sidecar, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return out


FIGURE_PRESETS = {
    "4": ("variant_comparison", ["dqn-af-1", "dqn-af-2", "dqn-af-3"],
          "agent variants, RMSprop"),
    "5": ("variant_comparison", ["dqn-af-4", "dqn-af-5", "dqn-af-6"],
          "agent variants, Adam"),
    "6": ("strategy_comparison",
          ["best-route", "multicast", "asf", "dq-learning", "dqn-af"],
          "strategy comparison"),
    "7": ("overhead_scatter",
          ["best-route", "multicast", "asf", "dq-learning", "dqn-af"],
          "interest overhead vs delivered data"),
}


def preset_spec(fig: str, input_dir, output_path) -> FigureSpec:
    kind, labels, title = FIGURE_PRESETS[fig]
    return FigureSpec(kind=kind, summary_csv=Path(input_dir) / "summary.csv",
                      output_path=Path(output_path), title=title, labels=labels)
