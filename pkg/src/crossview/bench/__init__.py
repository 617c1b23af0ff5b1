"""Benchmark harness: data generation, interaction scenarios, and runners."""

from .datagen import generate_flights, snap_to_pixels, upsample
from .scenarios import SCENARIOS, Interactor, Scenario, ViewTemplate
from .runner import run_pan_bench, run_sweep, report_view_sizes, summarize

__all__ = [
    "SCENARIOS", "Interactor", "Scenario", "ViewTemplate", "generate_flights",
    "report_view_sizes", "run_pan_bench", "run_sweep", "snap_to_pixels",
    "summarize", "upsample",
]
