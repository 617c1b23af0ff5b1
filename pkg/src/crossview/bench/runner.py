"""Benchmark runners: interval/point sweeps, the pan benchmark, and
materialized-view size reports.

Sweeps drive a live Session through its public selection API and measure
wall-clock time from clause update to the last per-view delivery. The
optimized and unoptimized conditions run the identical script, so their
per-step results can be compared as multisets (the central correctness
oracle).
"""

from __future__ import annotations

import json
import math
import os
import statistics
import tempfile
import threading
import time
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .. import expr as ex
from ..coordinator import Session
from ..executor import SQLiteExecutor
from ..planner import max_view_rows, plan as build_plan, update_query
from ..compat import check_compatibility
from ..query import ClientViewDescriptor, parse, parse_predicate
from ..scales import BinSpec, ScaleDescriptor, pixel_to_value
from ..selection import Clause, ClauseMeta, Selection
from .datagen import dense_pair_fixture
from .scenarios import Interactor, Scenario, ViewTemplate, timeseries_data

# Interval endpoints sit at these pixel fractions; see datagen.snap_to_pixels.
LO_FRAC = 0.05
HI_FRAC = 0.45


def summarize(samples: Sequence[float]) -> dict:
    """Median, interquartile range, mean, and max of a latency sample."""
    if not samples:
        return {"n": 0, "median": None, "iqr": None, "mean": None, "max": None}
    ordered = sorted(samples)
    q = statistics.quantiles(ordered, n=4, method="inclusive") if len(ordered) > 1 \
        else [ordered[0]] * 3
    return {
        "n": len(ordered),
        "median": statistics.median(ordered),
        "iqr": q[2] - q[0],
        "mean": statistics.fmean(ordered),
        "max": ordered[-1],
    }


def load_scenario(scenario: Scenario, rows: int, seed: int,
                  db_path: str) -> SQLiteExecutor:
    """Create the scenario's base table in a database file (idempotent)."""
    executor = SQLiteExecutor(db_path)
    if not executor.table_exists(scenario.table):
        data = scenario.make_data(rows, seed)
        executor.load_table(scenario.table, {k: v.tolist() for k, v in data.items()})
    return executor


class _Collector:
    """Gathers per-view deliveries and signals when a dispatch completes."""

    def __init__(self, view_ids: Sequence[str]):
        self.view_ids = list(view_ids)
        self.latest: Dict[str, object] = {}
        self.error: Optional[Exception] = None
        self._event = threading.Event()
        self._expected = 0
        self._count = 0
        self._lock = threading.Lock()

    def expect(self, n: int):
        with self._lock:
            self._expected = n
            self._count = 0
            self.error = None
            self._event.clear()

    def __call__(self, view_id: str, result):
        if isinstance(result, Exception):
            self.error = result
            self._event.set()
            return
        self.latest[view_id] = result
        with self._lock:
            self._count += 1
            if self._count >= self._expected:
                self._event.set()

    def wait(self, timeout: float = 300.0):
        if not self._event.wait(timeout):
            raise TimeoutError("dispatch did not complete")
        if self.error is not None:
            raise self.error


def _register_views(session: Session, scenario: Scenario,
                    collector: _Collector) -> Selection:
    selection = Selection(resolver="INTERSECT", cross=True)
    for vt in scenario.views:
        view = ClientViewDescriptor(id=vt.id, query=parse(vt.sql),
                                    filter_stable=True, selection=None)
        session.register_view(view, collector, selection)
    return selection


def interval_clause(interactor: Interactor, positions: Sequence[float],
                    widths: Sequence[int]) -> Clause:
    """Clause selecting bins [pos, pos+width-1] on each interactor dimension."""
    specs = interactor.bin_specs()
    preds = []
    for spec, col, pos, w in zip(specs, interactor.columns, positions, widths):
        lo = pixel_to_value(spec, pos + LO_FRAC)
        hi = pixel_to_value(spec, pos + w - 1 + HI_FRAC)
        preds.append(ex.Between(ex.Column(col), ex.Literal(float(min(lo, hi))),
                                ex.Literal(float(max(lo, hi)))))
    meta = ClauseMeta(type="interval", pixel_size=interactor.pixel_size,
                      bin_fn=interactor.bin_fn, scales=interactor.scales)
    return Clause(ex.conjoin(*preds), interactor.source,
                  frozenset({interactor.own_view}), meta)


def point_clause(interactor: Interactor, value) -> Clause:
    pred = ex.Comparison("=", ex.Column(interactor.columns[0]), ex.Literal(value))
    return Clause(pred, interactor.source, frozenset({interactor.own_view}),
                  ClauseMeta(type="point"))


def sweep_script(interactor: Interactor, width_frac: float,
                 stride: int = 1, max_steps: Optional[int] = None) -> List[Clause]:
    """All clause updates of one sweep (or one full slider pass)."""
    if interactor.kind == "point":
        clauses = [point_clause(interactor, v) for v in interactor.points]
        return clauses[:max_steps] if max_steps else clauses
    specs = interactor.bin_specs()
    pixels = [s.bin_count for s in specs]
    widths = [max(1, round(width_frac * p)) for p in pixels]
    travel = [p - w for p, w in zip(pixels, widths)]
    steps = list(range(0, travel[0] + 1, stride))
    if max_steps is not None and len(steps) > max_steps:
        idx = np.linspace(0, len(steps) - 1, max_steps).round().astype(int)
        steps = [steps[i] for i in sorted(set(idx.tolist()))]
    clauses = []
    for i0 in steps:
        positions = [i0 * (t / travel[0]) if travel[0] else 0 for t in travel]
        clauses.append(interval_clause(interactor, positions, widths))
    return clauses


def _result_snapshot(collector: _Collector) -> Dict[str, list]:
    out = {}
    for vid, res in collector.latest.items():
        names = sorted(res.columns)
        out[vid] = sorted(zip(*(res.columns[n] for n in names))) if names else []
    return out


def run_sweep(scenario: Scenario, rows: int, seed: int = 0, optimize: bool = True,
              widths: Sequence[float] = (0.1, 0.2, 0.3), stride: int = 1,
              warmup: int = 5, max_steps: Optional[int] = None,
              db_path: Optional[str] = None, capture: bool = False,
              interactors: Optional[Sequence[str]] = None,
              cache_entries: int = 1024) -> dict:
    """Sweep every interactor at the given widths; measure per-update latency."""
    owns_db = db_path is None
    if owns_db:
        db_path = os.path.join(tempfile.mkdtemp(prefix="crossview-bench-"),
                               f"{scenario.name}.db")
    executor = load_scenario(scenario, rows, seed, db_path)
    collector = _Collector([v.id for v in scenario.views])
    session = Session(executor, optimize=optimize, cache_entries=cache_entries)
    collector.expect(len(scenario.views))
    selection = _register_views(session, scenario, collector)
    collector.wait()

    nviews = len(scenario.views)
    report = {"scenario": scenario.name, "rows": rows, "seed": seed,
              "optimize": optimize, "interactors": {}}
    captures: Dict[Tuple, Dict[str, list]] = {}
    try:
        for interactor in scenario.interactors:
            if interactors is not None and interactor.source not in interactors:
                continue
            entry = {"widths": {}, "creation_s": None}
            per_widths = widths if interactor.kind == "interval" else (1.0,)
            for wf in per_widths:
                script = sweep_script(interactor, wf, stride, max_steps)
                if not script:
                    continue
                if optimize and entry["creation_s"] is None:
                    t0 = time.perf_counter()
                    selection.activate(script[0])
                    _wait_materialized(session)
                    entry["creation_s"] = time.perf_counter() - t0
                for clause in script[:warmup]:
                    collector.expect(nviews)
                    selection.update(clause)
                    collector.wait()
                latencies = []
                for step, clause in enumerate(script):
                    collector.expect(nviews)
                    t0 = time.perf_counter()
                    selection.update(clause)
                    collector.wait()
                    latencies.append((time.perf_counter() - t0) * 1000)
                    if capture:
                        captures[(interactor.source, wf, step)] = \
                            _result_snapshot(collector)
                entry["widths"][wf] = {"latency_ms": summarize(latencies),
                                       "samples": latencies,
                                       "steps": len(script)}
                collector.expect(nviews)
                selection.remove(interactor.source)
                collector.wait()  # removal dispatch completes before next width
            report["interactors"][interactor.source] = entry
        report["stats"] = session.stats()
        report["mats"] = _mat_row_counts(session, executor)
    finally:
        session.close()
        executor.close()
    if capture:
        report["captures"] = {"|".join(map(str, k)): v for k, v in captures.items()}
    return report


def _wait_materialized(session: Session, timeout: float = 600.0):
    deadline = time.monotonic() + timeout
    while time.monotonic() < deadline:
        if not session._mat_futures:
            return
        time.sleep(0.01)
    raise TimeoutError("materialization did not finish")


def _mat_row_counts(session: Session, executor: SQLiteExecutor) -> Dict[str, int]:
    out = {}
    for name in sorted(session.mats_created):
        try:
            out[name] = executor.run(f"SELECT COUNT(*) AS n FROM {name}").columns["n"][0]
        except Exception:
            out[name] = None
    return out


# ---------------------------------------------------------------------------
# View-size report

def report_view_sizes(scenario: Scenario, rows: int, seed: int = 0,
                      db_path: Optional[str] = None) -> List[dict]:
    """Interactive resolution x client bins vs actual materialized rows."""
    if db_path is None:
        db_path = os.path.join(tempfile.mkdtemp(prefix="crossview-sizes-"),
                               f"{scenario.name}.db")
    executor = load_scenario(scenario, rows, seed, db_path)
    rows_out = []
    try:
        for interactor in scenario.interactors:
            if interactor.kind != "interval":
                continue
            selection = Selection(resolver="INTERSECT", cross=True)
            clause = sweep_script(interactor, 0.1, max_steps=1)[0]
            selection.update(clause)
            for vt in scenario.views:
                if vt.id == interactor.own_view:
                    continue
                view = ClientViewDescriptor(id=vt.id, query=parse(vt.sql),
                                            filter_stable=True, selection=None)
                if not check_compatibility(view, selection.active, selection):
                    continue
                p = build_plan(view, selection.active, selection)
                executor.materialize(p)
                actual = executor.run(
                    f"SELECT COUNT(*) AS n FROM {p.name}").columns["n"][0]
                res = p.interactive_resolution
                mx = max_view_rows(res, vt.client_bins)
                rows_out.append({
                    "interactor": interactor.source, "view": vt.id,
                    "interactive_resolution": res, "client_bins": vt.client_bins,
                    "max_view_rows": mx, "actual_rows": actual,
                    "density": actual / mx if mx else None,
                })
    finally:
        executor.close()
    return rows_out


def dense_density_demo(view_bins: int = 24, pixels: int = 120) -> dict:
    """A fixture populating every cell: actual rows equal the upper bound."""
    scale = ScaleDescriptor("linear", (0.0, float(pixels)), (0.0, float(pixels)))
    spec = BinSpec(scale, 1.0, "FLOOR", ex.Column("active_col"))
    data = dense_pair_fixture(view_bins, spec, lambda vb: float(vb))
    with tempfile.TemporaryDirectory(prefix="crossview-dense-") as tmp:
        executor = SQLiteExecutor(os.path.join(tmp, "dense.db"))
        try:
            executor.load_table("dense", {k: v.tolist() for k, v in data.items()})
            selection = Selection(resolver="INTERSECT", cross=True)
            meta = ClauseMeta(type="interval", scales=(scale,))
            lo = pixel_to_value(spec, LO_FRAC)
            hi = pixel_to_value(spec, spec.max_bin + HI_FRAC)
            clause = Clause(ex.Between(ex.Column("active_col"), ex.Literal(lo),
                                       ex.Literal(hi)),
                            "brush", frozenset({"other"}), meta)
            selection.update(clause)
            view = ClientViewDescriptor(
                id="hist", query=parse("SELECT view_col AS x, COUNT(*) AS y "
                                       "FROM dense GROUP BY x"),
                filter_stable=True, selection=None)
            p = build_plan(view, selection.active, selection)
            executor.materialize(p)
            actual = executor.run(
                f"SELECT COUNT(*) AS n FROM {p.name}").columns["n"][0]
            mx = max_view_rows(p.interactive_resolution, view_bins)
            return {"max_view_rows": mx, "actual_rows": actual,
                    "density": actual / mx}
        finally:
            executor.close()


# ---------------------------------------------------------------------------
# Pan benchmark (tiling / prefetch / sorted-layout conditions)

@dataclass
class PanConfig:
    rows: int = 1_000_000
    seed: int = 0
    skips: int = 10
    steps_per_skip: int = 100
    viewport_tiles: int = 2        # viewport = 2 tiles; step = 1 tile (half viewport)
    tile_bins: int = 32            # histogram bins per tile
    span: float = 100_000.0
    channels: int = 20


def _pan_query(table: str, g: float, lo_bin: int, hi_bin: int) -> str:
    lo = lo_bin * g
    hi = hi_bin * g
    return (f"SELECT FLOOR(time / {g!r}) AS t, MIN(value) AS lo, "
            f"MAX(value) AS hi, COUNT(*) AS n FROM {table} "
            f"WHERE time >= {lo!r} AND time < {hi!r} GROUP BY t")


def _prepare_pan_tables(executor: SQLiteExecutor, config: PanConfig):
    if not executor.table_exists("ts_unsorted"):
        data = timeseries_data(config.rows, config.seed)
        executor.load_table("ts_unsorted", {k: v.tolist() for k, v in data.items()})
    if not executor.table_exists("ts_sorted"):
        # clustered (WITHOUT ROWID) primary key gives a genuinely time-sorted
        # storage layout, the engine-level analog of a sorted base table
        executor.run("CREATE TABLE ts_sorted(time REAL, channel INTEGER, "
                     "value REAL, PRIMARY KEY(time, channel)) WITHOUT ROWID")
        executor.run("INSERT INTO ts_sorted "
                     "SELECT time, channel, value FROM ts_unsorted ORDER BY time")


def run_pan_bench(config: PanConfig = PanConfig(),
                  db_path: Optional[str] = None,
                  conditions: Sequence[str] = ("direct", "tile", "prefetch"),
                  tables: Sequence[str] = ("ts_unsorted", "ts_sorted")) -> dict:
    """Skip/step panning under direct, tiled, and prefetching conditions."""
    if db_path is None:
        db_path = os.path.join(tempfile.mkdtemp(prefix="crossview-pan-"), "pan.db")
    executor = SQLiteExecutor(db_path)
    _prepare_pan_tables(executor, config)

    tiles_total = 256                       # tile-aligned positions over the span
    g = config.span / (tiles_total * config.tile_bins)   # time units per bin
    vp_tiles = config.viewport_tiles
    rng = np.random.default_rng(config.seed + 7)
    report = {"config": config.__dict__, "conditions": {}}
    try:
        for table in tables:
            for cond in conditions:
                session = Session(executor, optimize=True, cache_entries=4096)
                visited = set()
                skip_lat, step_lat = [], []
                step_hits = 0
                step_count = 0
                equal_checks = 0

                def tile_sql(tile: int) -> str:
                    lo = tile * config.tile_bins
                    return _pan_query(table, g, lo, lo + config.tile_bins)

                def fetch(sql: str):
                    cached = session.cache.get(sql)
                    if cached is not None:
                        return cached, True
                    res = executor.run(sql)
                    session.cache.put(sql, res)
                    return res, False

                def view_tiles(pos: int) -> List[int]:
                    return list(range(pos, pos + vp_tiles))

                def do_move(pos: int, is_step: bool):
                    nonlocal step_hits, step_count, equal_checks
                    parts = None
                    t0 = time.perf_counter()
                    if cond == "direct":
                        sql = _pan_query(table, g, pos * config.tile_bins,
                                         (pos + vp_tiles) * config.tile_bins)
                        fetch(sql)
                    else:
                        needed = [tile_sql(t) for t in view_tiles(pos)]
                        all_hit = all(s in session.cache for s in needed)
                        parts = [fetch(s)[0] for s in needed]
                        if is_step:
                            step_count += 1
                            step_hits += all_hit
                    dt = (time.perf_counter() - t0) * 1000
                    (step_lat if is_step else skip_lat).append(dt)
                    if parts is not None and equal_checks < 5:
                        # spot-check stitching against the direct viewport query
                        direct = executor.run(_pan_query(
                            table, g, pos * config.tile_bins,
                            (pos + vp_tiles) * config.tile_bins))
                        stitched = sorted(r for p in parts for r in p.rows)
                        assert stitched == sorted(direct.rows), \
                            "stitched tiles differ from direct query"
                        equal_checks += 1
                    if cond == "prefetch":
                        adj = [tile_sql(t) for t in
                               (pos - 1, pos + vp_tiles) if 0 <= t < tiles_total]
                        session.prefetch(adj)
                        deadline = time.monotonic() + 120
                        while (any(s not in session.cache for s in adj)
                               and time.monotonic() < deadline):
                            time.sleep(0.002)
                    visited.add(pos)

                max_pos = tiles_total - vp_tiles
                pos = None
                for _skip in range(config.skips):
                    options = [p for p in range(0, max_pos + 1)
                               if p not in visited]
                    pos = int(rng.choice(options)) if options else 0
                    do_move(pos, is_step=False)
                    direction = 1 if pos < max_pos // 2 else -1
                    for _step in range(config.steps_per_skip):
                        nxt = pos + direction
                        if not (0 <= nxt <= max_pos):
                            direction = -direction
                            nxt = pos + direction
                        pos = nxt
                        do_move(pos, is_step=True)

                key = f"{cond}/{table}"
                report["conditions"][key] = {
                    "skip_latency_ms": summarize(skip_lat),
                    "step_latency_ms": summarize(step_lat),
                    "step_cache_hit_rate": (step_hits / step_count
                                            if step_count else None),
                    "stitch_checks": equal_checks,
                }
                session.close()
    finally:
        executor.close()
    return report
