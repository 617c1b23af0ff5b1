"""Benchmark command-line interface.

Subcommands: run (interaction sweeps), pan (tiling/prefetch panning),
sizes (materialized-view size report), plot (charts from summaries).
Raw per-step samples go to JSON-lines files; summaries to JSON.
"""

from __future__ import annotations

import json
import os

import click

from .runner import (PanConfig, dense_density_demo, report_view_sizes,
                     run_pan_bench, run_sweep)
from .scenarios import SCENARIOS


def _write_outputs(out: str, name: str, report: dict):
    os.makedirs(out, exist_ok=True)
    raw_path = os.path.join(out, f"{name}.raw.jsonl")
    with open(raw_path, "w") as fh:
        for source, entry in report.get("interactors", {}).items():
            for width, data in entry.get("widths", {}).items():
                for i, ms in enumerate(data.get("samples", [])):
                    fh.write(json.dumps({"interactor": source, "width": width,
                                         "step": i, "latency_ms": ms}) + "\n")
    summary = json.loads(json.dumps(report))
    for entry in summary.get("interactors", {}).values():
        for data in entry.get("widths", {}).values():
            data.pop("samples", None)
    summary_path = os.path.join(out, f"{name}.summary.json")
    with open(summary_path, "w") as fh:
        json.dump(summary, fh, indent=2)
    click.echo(f"wrote {raw_path} and {summary_path}")


@click.group()
def main():
    """Interactive-view benchmark harness."""


@main.command()
@click.option("--scenario", "scenario_name", required=True,
              type=click.Choice(sorted(SCENARIOS)))
@click.option("--rows", default=10_000, type=int)
@click.option("--condition", default="opt", type=click.Choice(["opt", "noopt"]))
@click.option("--seed", default=0, type=int)
@click.option("--widths", default="0.1,0.2,0.3", help="Interval width fractions.")
@click.option("--stride", default=1, type=int, help="Sweep stride in pixels.")
@click.option("--max-steps", default=None, type=int,
              help="Cap sweep steps (evenly subsampled).")
@click.option("--db", default=None, help="Reusable database file path.")
@click.option("--out", default="bench-out", help="Output directory.")
def run(scenario_name, rows, condition, seed, widths, stride, max_steps, db, out):
    """Sweep every interactor of a scenario and record latencies."""
    scenario = SCENARIOS[scenario_name]
    width_list = tuple(float(w) for w in widths.split(","))
    report = run_sweep(scenario, rows, seed=seed, optimize=(condition == "opt"),
                       widths=width_list, stride=stride, max_steps=max_steps,
                       db_path=db)
    _write_outputs(out, f"{scenario_name}-{rows}-{condition}", report)


@main.command()
@click.option("--rows", default=1_000_000, type=int)
@click.option("--seed", default=0, type=int)
@click.option("--skips", default=10, type=int)
@click.option("--steps", default=100, type=int)
@click.option("--db", default=None)
@click.option("--out", default="bench-out")
def pan(rows, seed, skips, steps, db, out):
    """Skip/step pan benchmark: direct vs tile vs prefetch, sorted vs not."""
    config = PanConfig(rows=rows, seed=seed, skips=skips, steps_per_skip=steps)
    report = run_pan_bench(config, db_path=db)
    os.makedirs(out, exist_ok=True)
    path = os.path.join(out, f"pan-{rows}.summary.json")
    with open(path, "w") as fh:
        json.dump(report, fh, indent=2)
    click.echo(f"wrote {path}")


@main.command()
@click.option("--scenario", "scenario_name", required=True,
              type=click.Choice(sorted(SCENARIOS)))
@click.option("--rows", default=100_000, type=int)
@click.option("--seed", default=0, type=int)
@click.option("--dense", is_flag=True, help="Also report the dense fixture.")
@click.option("--out", default="bench-out")
def sizes(scenario_name, rows, seed, dense, out):
    """Materialized-view size report: resolution x bins vs actual rows."""
    scenario = SCENARIOS[scenario_name]
    rows_out = report_view_sizes(scenario, rows, seed=seed)
    if dense:
        rows_out.append({"interactor": "dense-fixture", "view": "dense-fixture",
                         **dense_density_demo()})
    os.makedirs(out, exist_ok=True)
    path = os.path.join(out, f"sizes-{scenario_name}-{rows}.json")
    with open(path, "w") as fh:
        json.dump(rows_out, fh, indent=2)
    for r in rows_out:
        click.echo(json.dumps(r))
    click.echo(f"wrote {path}")


@main.command()
@click.argument("summaries", nargs=-1, required=True,
                type=click.Path(exists=True))
@click.option("--out", default="bench-out")
def plot(summaries, out):
    """Bar charts of median update latency from summary files."""
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    os.makedirs(out, exist_ok=True)
    labels, medians = [], []
    for path in summaries:
        with open(path) as fh:
            report = json.load(fh)
        tag = "opt" if report.get("optimize") else "noopt"
        for source, entry in report.get("interactors", {}).items():
            for width, data in entry.get("widths", {}).items():
                med = data["latency_ms"]["median"]
                if med is not None:
                    labels.append(f"{report['scenario']}/{source}\n{width} {tag}")
                    medians.append(med)
    fig, ax = plt.subplots(figsize=(max(6, len(labels) * 1.1), 4.5))
    ax.bar(range(len(labels)), medians, color="#4878a8")
    ax.set_xticks(range(len(labels)))
    ax.set_xticklabels(labels, fontsize=7, rotation=45, ha="right")
    ax.set_yscale("log")
    ax.set_ylabel("median update latency (ms)")
    fig.tight_layout()
    path = os.path.join(out, "latency.png")
    fig.savefig(path, dpi=150)
    click.echo(f"wrote {path}")


if __name__ == "__main__":
    main()
