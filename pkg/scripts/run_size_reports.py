#!/usr/bin/env python3
"""Materialized-view size tables for every scenario, plus the dense
fixture demonstrating the max_view_rows upper bound is attainable."""

import json
import os

import click

from crossview.bench.runner import dense_density_demo, report_view_sizes
from crossview.bench.scenarios import SCENARIOS


@click.command()
@click.option("--rows", default=100_000, type=int)
@click.option("--seed", default=0, type=int)
@click.option("--out", default="results", type=click.Path())
def main(rows, seed, out):
    os.makedirs(out, exist_ok=True)
    report = {}
    for name, scenario in SCENARIOS.items():
        entries = report_view_sizes(scenario, rows=rows, seed=seed,
                                    db_path=os.path.join(out, f"{name}_{rows}.db"))
        report[name] = entries
        for e in entries:
            click.echo(f"{name} {e['interactor']} -> {e['view']}: "
                       f"{e['interactive_resolution']} x {e['client_bins']} = "
                       f"{e['max_view_rows']} max, {e['actual_rows']} actual "
                       f"(density {e['density']:.3f})")
    report["dense_fixture"] = dense_density_demo()
    click.echo(f"dense fixture density: {report['dense_fixture']['density']}")
    path = os.path.join(out, f"sizes_{rows}.json")
    with open(path, "w") as f:
        json.dump(report, f, indent=2)
    click.echo(f"wrote {path}")


if __name__ == "__main__":
    main()
