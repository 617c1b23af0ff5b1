"""Benchmark harness: data generation, sweep scripts, and small end-to-end runs."""

import math

import numpy as np
import pytest

from crossview import expr as ex
from crossview.bench.datagen import (generate_flights, generate_timeseries,
                                     snap_to_pixels, upsample)
from crossview.bench.runner import (PanConfig, dense_density_demo,
                                    report_view_sizes, run_pan_bench,
                                    run_sweep, summarize, sweep_script)
from crossview.bench.scenarios import FLIGHTS, SCENARIOS
from crossview.scales import BinSpec, ScaleDescriptor, bin_value


def test_generators_are_deterministic():
    a = generate_flights(500, seed=4)
    b = generate_flights(500, seed=4)
    c = generate_flights(500, seed=5)
    for k in a:
        assert np.array_equal(a[k], b[k])
    assert not np.array_equal(a["delay"], c["delay"])
    t1 = generate_timeseries(400, seed=1)
    t2 = generate_timeseries(400, seed=1)
    for k in t1:
        assert np.array_equal(t1[k], t2[k])


def test_flights_columns_in_range():
    d = generate_flights(2000, seed=0)
    assert d["delay"].min() >= -60 and d["delay"].max() <= 600
    assert d["time"].min() >= 0 and d["time"].max() < 24
    assert d["distance"].min() >= 30 and d["distance"].max() <= 5000


def test_upsample_stays_near_fixture():
    fixture = generate_flights(300, seed=2)
    big = upsample(fixture, 5000, seed=3, noise={"delay": 2.0, "time": 0.25,
                                                 "distance": 20.0})
    assert len(big["delay"]) == 5000
    # every upsampled row lies within the noise envelope of some fixture row
    src = np.sort(fixture["delay"])
    idx = np.searchsorted(src, big["delay"])
    idx = np.clip(idx, 1, len(src) - 1)
    nearest = np.minimum(np.abs(big["delay"] - src[idx - 1]),
                         np.abs(big["delay"] - src[idx]))
    assert np.percentile(nearest, 99) < 8.0  # 4 sigma of the injected noise


@pytest.mark.parametrize("stype,domain,bin_fn", [
    ("linear", (-60.0, 180.0), "FLOOR"),
    ("linear", (-60.0, 180.0), "CEIL"),
    ("linear", (-60.0, 180.0), "ROUND"),
    ("log", (1e4, 1e7), "FLOOR"),
    ("pow", (0.0, 100.0), "FLOOR"),
    ("symlog", (-100.0, 100.0), "FLOOR"),
])
def test_snap_keeps_values_strictly_inside_pixels(stype, domain, bin_fn):
    scale = ScaleDescriptor(stype, domain, (0.0, 120.0), exponent=0.5,
                            constant=2.0)
    spec = BinSpec(scale, 1.0, bin_fn, ex.Column("v"))
    rng = np.random.default_rng(9)
    lo, hi = domain
    raw = (np.exp(rng.uniform(np.log(lo), np.log(hi), 2000)) if stype == "log"
           else rng.uniform(lo, hi, 2000))
    snapped = snap_to_pixels(raw, spec, seed=1)
    # snapped values sit in the pixel interior, away from the endpoint
    # fractions 0.05 / 0.45 the sweep scripts use
    t = np.array([scale.transform(float(v)) for v in snapped])
    t0, t1 = scale.transform(lo), scale.transform(hi)
    pix = spec.pixels * (t - t0) / (t1 - t0)
    frac = pix - np.floor(pix)
    assert frac.min() > 0.05 and frac.max() < 0.45
    # a second snap keeps every value in its bin: the layout is stable
    again = snap_to_pixels(snapped, spec, seed=2)
    bins_once = np.array([bin_value(spec, float(v)) for v in snapped])
    bins_twice = np.array([bin_value(spec, float(v)) for v in again])
    assert np.array_equal(bins_once, bins_twice)


def test_sweep_script_step_arithmetic():
    brush = FLIGHTS.interactors[0]  # 540-pixel axis
    script = sweep_script(brush, 0.1, stride=1)
    assert len(script) == 540 - 54 + 1  # 487 steps
    short = sweep_script(brush, 0.1, stride=1, max_steps=20)
    assert len(short) == 20
    # every clause is a BETWEEN over the brushed column
    for c in script[:3] + script[-3:]:
        assert isinstance(c.predicate, ex.Between)
        assert c.views == frozenset({"delay_hist"})
    # first step starts at the left edge, last ends at the right edge
    spec = brush.bin_specs()[0]
    assert bin_value(spec, script[0].predicate.lo.value) == 0
    assert bin_value(spec, script[-1].predicate.hi.value) == spec.max_bin


def test_sweep_script_point_interactor():
    slider = SCENARIOS["airlines"].interactors[0]
    script = sweep_script(slider, 1.0)
    assert len(script) == 26
    assert all(isinstance(c.predicate, ex.Comparison) for c in script)


def test_summarize():
    s = summarize([4.0, 1.0, 3.0, 2.0])
    assert s == {"n": 4, "median": 2.5, "iqr": 1.5, "mean": 2.5, "max": 4.0}
    assert summarize([])["median"] is None
    assert summarize([7.0])["iqr"] == 0.0


def test_sweep_optimized_equals_unoptimized(tmp_path):
    captures = {}
    for optimize in (True, False):
        rep = run_sweep(FLIGHTS, rows=3000, seed=1, optimize=optimize,
                        widths=(0.2,), max_steps=6, warmup=0, capture=True,
                        interactors=("brush_delay",), cache_entries=0,
                        db_path=str(tmp_path / f"f{optimize}.db"))
        captures[optimize] = rep["captures"]
    assert captures[True].keys() == captures[False].keys()
    for key in captures[True]:
        assert captures[True][key] == captures[False][key], key


def test_sweep_report_shape(tmp_path):
    rep = run_sweep(FLIGHTS, rows=2000, seed=0, widths=(0.1,), max_steps=4,
                    warmup=1, interactors=("brush_time",),
                    db_path=str(tmp_path / "f.db"))
    entry = rep["interactors"]["brush_time"]
    assert entry["creation_s"] > 0
    stats = entry["widths"][0.1]
    assert stats["steps"] == 4
    assert stats["latency_ms"]["n"] == 4
    assert rep["stats"]["matsCreated"] >= 1
    assert all(n and n > 0 for n in rep["mats"].values())


def test_view_size_report_within_bounds(tmp_path):
    rows = report_view_sizes(FLIGHTS, rows=3000, seed=0,
                             db_path=str(tmp_path / "s.db"))
    assert len(rows) == 6  # 3 interval brushes x 2 other views
    for r in rows:
        assert 0 < r["actual_rows"] <= r["max_view_rows"]
        assert 0 < r["density"] <= 1.0
    by_key = {(r["interactor"], r["view"]): r for r in rows}
    assert by_key[("brush_delay", "time_hist")]["max_view_rows"] == 540 * 24
    assert by_key[("brush_time", "delay_hist")]["max_view_rows"] == 240 * 24
    assert by_key[("brush_distance", "delay_hist")]["max_view_rows"] == 600 * 24


def test_dense_fixture_reaches_full_density():
    out = dense_density_demo(view_bins=8, pixels=30)
    assert out["max_view_rows"] == 240
    assert out["actual_rows"] == 240
    assert out["density"] == 1.0


def test_pan_bench_small(tmp_path):
    config = PanConfig(rows=20_000, skips=2, steps_per_skip=5)
    rep = run_pan_bench(config, db_path=str(tmp_path / "pan.db"),
                        conditions=("direct", "tile", "prefetch"),
                        tables=("ts_unsorted",))
    conds = rep["conditions"]
    assert set(conds) == {"direct/ts_unsorted", "tile/ts_unsorted",
                          "prefetch/ts_unsorted"}
    for key, c in conds.items():
        assert c["step_latency_ms"]["n"] == 10
        assert c["stitch_checks"] > 0 or key.startswith("direct")
    # prefetching makes every step a full cache hit
    assert conds["prefetch/ts_unsorted"]["step_cache_hit_rate"] == 1.0
    assert conds["direct/ts_unsorted"]["step_cache_hit_rate"] is None
