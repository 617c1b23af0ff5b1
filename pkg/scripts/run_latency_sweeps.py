#!/usr/bin/env python3
"""Optimized vs unoptimized sweep latency across dataset sizes.

Reproduces the headline latency-ratio experiment: for each dataset size,
run the identical interaction script with pre-aggregation on and off and
report per-step update latency medians plus the speedup ratio.
"""

import json
import os

import click

from crossview.bench.runner import run_sweep
from crossview.bench.scenarios import SCENARIOS


@click.command()
@click.option("--scenario", "scenario_name", default="flights",
              type=click.Choice(sorted(SCENARIOS)))
@click.option("--sizes", default="10000,100000,1000000",
              help="Comma-separated dataset sizes.")
@click.option("--seed", default=0, type=int)
@click.option("--widths", default="0.1,0.2,0.3")
@click.option("--max-steps", default=50, type=int,
              help="Subsample each sweep to at most this many steps.")
@click.option("--out", default="results", type=click.Path())
def main(scenario_name, sizes, seed, widths, max_steps, out):
    scenario = SCENARIOS[scenario_name]
    widths = tuple(float(w) for w in widths.split(","))
    os.makedirs(out, exist_ok=True)
    summary = []
    for rows in (int(s) for s in sizes.split(",")):
        db_path = os.path.join(out, f"{scenario_name}_{rows}.db")
        per_size = {"rows": rows}
        for optimize in (True, False):
            rep = run_sweep(scenario, rows=rows, seed=seed, optimize=optimize,
                            widths=widths, max_steps=max_steps, db_path=db_path)
            label = "optimized" if optimize else "unoptimized"
            per_size[label] = {
                src: {str(w): e["widths"][w]["latency_ms"]
                      for w in e["widths"]} | {"creation_s": e["creation_s"]}
                for src, e in rep["interactors"].items()}
        for src in per_size["optimized"]:
            for w in map(str, widths):
                mo = per_size["optimized"][src][w]["median"]
                mu = per_size["unoptimized"][src][w]["median"]
                click.echo(f"rows={rows} {src} width={w}: "
                           f"opt {mo:.2f}ms, noopt {mu:.2f}ms, x{mu / mo:.0f}")
        summary.append(per_size)
    path = os.path.join(out, f"latency_{scenario_name}.json")
    with open(path, "w") as f:
        json.dump(summary, f, indent=2)
    click.echo(f"wrote {path}")


if __name__ == "__main__":
    main()
