"""Benchmark scenario definitions.

A scenario bundles a synthetic dataset, a set of client views, and the
interactors whose simulated selections drive the benchmark. All
scenarios share one cross-filtering INTERSECT selection, mirroring a
linked-view dashboard.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Dict, Optional, Tuple

import numpy as np

from .. import expr as ex
from ..scales import BinSpec, ScaleDescriptor
from .datagen import generate_flights, generate_timeseries, snap_to_pixels, upsample

FIXTURE_ROWS = 10_000


@dataclass(frozen=True)
class ViewTemplate:
    id: str
    sql: str
    client_bins: int  # declared client-side bin count, for size reports


@dataclass(frozen=True)
class Interactor:
    source: str
    kind: str                 # interval | point
    columns: Tuple[str, ...]
    own_view: str
    scales: Tuple[ScaleDescriptor, ...] = ()
    pixel_size: float = 1.0
    bin_fn: str = "FLOOR"
    points: Tuple = ()        # point interactors: the positions a slider visits

    def bin_specs(self) -> Tuple[BinSpec, ...]:
        return tuple(BinSpec(s, self.pixel_size, self.bin_fn, ex.Column(c))
                     for s, c in zip(self.scales, self.columns))


@dataclass(frozen=True)
class Scenario:
    name: str
    table: str
    views: Tuple[ViewTemplate, ...]
    interactors: Tuple[Interactor, ...]
    make_data: Callable[[int, int], Dict[str, np.ndarray]]


def _flights_data(rows: int, seed: int) -> Dict[str, np.ndarray]:
    if rows <= FIXTURE_ROWS:
        data = generate_flights(rows, seed)
    else:
        fixture = generate_flights(FIXTURE_ROWS, seed)
        data = upsample(fixture, rows, seed + 1,
                        noise={"delay": 2.0, "time": 0.25, "distance": 20.0})
    spec = {i.columns[0]: i.bin_specs()[0] for i in FLIGHTS.interactors}
    return {c: snap_to_pixels(v, spec[c], seed + 2) for c, v in data.items()}


_DELAY_SCALE = ScaleDescriptor("linear", (-60.0, 180.0), (0.0, 540.0))
_TIME_SCALE = ScaleDescriptor("linear", (0.0, 24.0), (0.0, 240.0))
_DIST_SCALE = ScaleDescriptor("linear", (0.0, 2600.0), (0.0, 600.0))

FLIGHTS = Scenario(
    name="flights",
    table="flights",
    views=(
        ViewTemplate("delay_hist",
                     "SELECT FLOOR((delay + 60) / 10) AS x, COUNT(*) AS y "
                     "FROM flights GROUP BY x", 24),
        ViewTemplate("time_hist",
                     "SELECT FLOOR(time) AS x, COUNT(*) AS y "
                     "FROM flights GROUP BY x", 24),
        ViewTemplate("distance_hist",
                     "SELECT FLOOR(distance / 100) AS x, COUNT(*) AS y "
                     "FROM flights GROUP BY x", 26),
    ),
    interactors=(
        Interactor("brush_delay", "interval", ("delay",), "delay_hist",
                   (_DELAY_SCALE,)),
        Interactor("brush_time", "interval", ("time",), "time_hist",
                   (_TIME_SCALE,)),
        Interactor("brush_distance", "interval", ("distance",), "distance_hist",
                   (_DIST_SCALE,)),
    ),
    make_data=_flights_data,
)


def _airlines_data(rows: int, seed: int) -> Dict[str, np.ndarray]:
    rng = np.random.default_rng(seed)
    flights = _flights_data(rows, seed)
    return {
        "carrier": rng.integers(0, 26, rows).astype(float),
        "time": flights["time"],
        "delay": flights["delay"],
    }


AIRLINES = Scenario(
    name="airlines",
    table="airlines",
    views=(
        ViewTemplate("delay_by_time",
                     "SELECT FLOOR(time) AS x, AVG(delay) AS m, "
                     "STDDEV_SAMP(delay) AS s, COUNT(*) AS n "
                     "FROM airlines GROUP BY x", 24),
        ViewTemplate("carrier_counts",
                     "SELECT carrier AS x, COUNT(*) AS y "
                     "FROM airlines GROUP BY x", 26),
    ),
    interactors=(
        Interactor("slider_carrier", "point", ("carrier",), "carrier_counts",
                   points=tuple(float(c) for c in range(26))),
    ),
    make_data=_airlines_data,
)


_SQFT_SCALE = ScaleDescriptor("linear", (100.0, 5100.0), (0.0, 500.0))
_PRICE_SCALE = ScaleDescriptor("log", (1e4, 1e7), (0.0, 400.0))


def _property_data(rows: int, seed: int) -> Dict[str, np.ndarray]:
    rng = np.random.default_rng(seed)
    sqft = np.clip(rng.lognormal(7.3, 0.45, rows), 120.0, 5000.0)
    price = np.clip(sqft * 300.0 * rng.lognormal(0.0, 0.35, rows), 1.2e4, 9.5e6)
    specs = {i.columns[0]: i.bin_specs()[0] for i in PROPERTY.interactors}
    return {"sqft": snap_to_pixels(sqft, specs["sqft"], seed + 2),
            "price": snap_to_pixels(price, specs["price"], seed + 3)}


PROPERTY = Scenario(
    name="property",
    table="property",
    views=(
        ViewTemplate("sqft_hist",
                     "SELECT FLOOR(sqft / 200) AS x, COUNT(*) AS y "
                     "FROM property GROUP BY x", 26),
        ViewTemplate("price_hist",
                     "SELECT FLOOR(LN(price) / 0.25) AS x, COUNT(*) AS y "
                     "FROM property GROUP BY x", 28),
        ViewTemplate("regression",
                     "SELECT REGR_SLOPE(price, sqft) AS slope, "
                     "REGR_INTERCEPT(price, sqft) AS icept, "
                     "REGR_R2(price, sqft) AS r2, COUNT(*) AS n FROM property", 1),
    ),
    interactors=(
        Interactor("brush_sqft", "interval", ("sqft",), "sqft_hist",
                   (_SQFT_SCALE,)),
        Interactor("brush_price", "interval", ("price",), "price_hist",
                   (_PRICE_SCALE,)),
    ),
    make_data=_property_data,
)


_RX_SCALE = ScaleDescriptor("linear", (0.0, 1.0), (0.0, 64.0))
_RY_SCALE = ScaleDescriptor("linear", (0.0, 1.0), (0.0, 64.0))


def _raster_data(rows: int, seed: int) -> Dict[str, np.ndarray]:
    rng = np.random.default_rng(seed)
    x = rng.beta(2.0, 2.0, rows)
    y = np.clip(x * 0.6 + rng.normal(0.2, 0.18, rows), 0.0, 0.9999)
    v = rng.normal(0.0, 1.0, rows)
    specs = RASTER2D.interactors[0].bin_specs()
    return {"x": snap_to_pixels(x, specs[0], seed + 2),
            "y": snap_to_pixels(y, specs[1], seed + 3),
            "value": v}


RASTER2D = Scenario(
    name="raster2d",
    table="raster2d",
    views=(
        ViewTemplate("raster",
                     "SELECT FLOOR(x * 32) AS xb, FLOOR(y * 32) AS yb, "
                     "COUNT(*) AS n FROM raster2d GROUP BY xb, yb", 1024),
        ViewTemplate("value_hist",
                     "SELECT FLOOR(value * 4) AS x, COUNT(*) AS y "
                     "FROM raster2d GROUP BY x", 32),
    ),
    interactors=(
        Interactor("brush_xy", "interval", ("x", "y"), "raster",
                   (_RX_SCALE, _RY_SCALE)),
    ),
    make_data=_raster_data,
)


SCENARIOS: Dict[str, Scenario] = {s.name: s for s in
                                  (FLIGHTS, AIRLINES, PROPERTY, RASTER2D)}


def timeseries_data(rows: int, seed: int) -> Dict[str, np.ndarray]:
    return generate_timeseries(rows, seed=seed)
