"""Synthetic dataset generation and fixture upsampling.

The flights generator produces delay/time/distance columns with the
shapes the benchmark scenarios expect: delays concentrated near zero
with a long positive tail and some negative values, local departure
hour in [0, 24), and a lognormal-ish distance in miles.

Active interactor columns are snapped to within-pixel interior positions
(bin index plus a fractional offset in [0.1, 0.4]) so that interval
endpoints placed at pixel fractions 0.05 / 0.45 select exactly the same
rows through the binned pre-aggregation path and the direct predicate
path, for every bin function and scale type. This makes optimized vs
unoptimized equivalence checks exact rather than tolerance-based at bin
boundaries.
"""

from __future__ import annotations

from typing import Dict, Optional

import numpy as np

from ..scales import BinSpec, bin_value, pixel_to_value


def generate_flights(n: int, seed: int = 0) -> Dict[str, np.ndarray]:
    """Generate n synthetic flight rows: delay, time, distance."""
    if n < 1:
        raise ValueError("n must be >= 1")
    rng = np.random.default_rng(seed)
    kind = rng.random(n)
    delay = np.where(
        kind < 0.72,
        rng.normal(-3.0, 9.0, n),          # mostly near zero, some negative
        rng.exponential(38.0, n) + 5.0)    # long positive tail
    delay = np.clip(delay, -60.0, 600.0)
    time = np.clip(np.abs(rng.normal(13.5, 4.8, n)) % 24.0, 0.0, 23.999)
    distance = np.clip(rng.lognormal(6.6, 0.55, n), 30.0, 5000.0)
    return {"delay": delay, "time": time, "distance": distance}


def upsample(columns: Dict[str, np.ndarray], n: int, seed: int = 0,
             noise: Optional[Dict[str, float]] = None) -> Dict[str, np.ndarray]:
    """Resample a fixture with replacement to n rows, adding per-column noise."""
    rng = np.random.default_rng(seed)
    m = len(next(iter(columns.values())))
    idx = rng.integers(0, m, n)
    out = {}
    for name, values in columns.items():
        sampled = np.asarray(values)[idx].astype(float)
        sigma = (noise or {}).get(name, 0.0)
        if sigma > 0:
            sampled = sampled + rng.normal(0.0, sigma, n)
        out[name] = sampled
    return out


def _transform_array(scale, x: np.ndarray) -> np.ndarray:
    if scale.type == "linear":
        return x
    if scale.type == "log":
        return np.log(x) / np.log(scale.base)
    if scale.type == "pow":
        return np.sign(x) * np.abs(x) ** scale.exponent
    return np.sign(x) * np.log1p(np.abs(x / scale.constant))


def _untransform_array(scale, t: np.ndarray) -> np.ndarray:
    if scale.type == "linear":
        return t
    if scale.type == "log":
        return scale.base ** t
    if scale.type == "pow":
        return np.sign(t) * np.abs(t) ** (1.0 / scale.exponent)
    return np.sign(t) * scale.constant * (np.expm1(np.abs(t)))


def snap_to_pixels(values: np.ndarray, spec: BinSpec, seed: int = 0) -> np.ndarray:
    """Move each value to an interior position of its interactive pixel.

    Each value lands at raw pixel position bin + u with u in [0.1, 0.4],
    so it stays strictly inside the open interval that every bin function
    (FLOOR, CEIL, ROUND) maps back to the same bin, away from endpoint
    fractions 0.05 and 0.45 used by the sweep scripts.
    """
    rng = np.random.default_rng(seed)
    x = np.asarray(values, dtype=float)
    s = spec.scale
    t0 = s.transform(s.domain[0])
    t1 = s.transform(s.domain[1])
    raw = spec.pixels * (_transform_array(s, x) - t0) / (t1 - t0)
    if spec.bin_fn == "FLOOR":
        b = np.floor(raw)
    elif spec.bin_fn == "CEIL":
        b = np.ceil(raw) - 1.0  # data at raw position b+u ceils back to bin b+1
    else:
        b = np.floor(raw + 0.5)
    b = np.clip(b, 0, spec.max_bin - 1)
    offsets = rng.uniform(0.1, 0.4, len(x))
    return _untransform_array(s, t0 + ((b + offsets) / spec.pixels) * (t1 - t0))


def dense_pair_fixture(view_bins: int, active_spec: BinSpec,
                       view_bin_to_value, seed: int = 0) -> Dict[str, np.ndarray]:
    """A dataset populating every (view bin, active bin) cell exactly once.

    Used to demonstrate the dense upper bound: actual materialized rows
    equal max_view_rows (density 1.0).
    """
    rng = np.random.default_rng(seed)
    n = view_bins * active_spec.bin_count
    view_col = np.empty(n)
    active_col = np.empty(n)
    k = 0
    for vb in range(view_bins):
        for ab in range(active_spec.bin_count):
            view_col[k] = view_bin_to_value(vb)
            active_col[k] = pixel_to_value(active_spec, ab + rng.uniform(0.1, 0.4))
            k += 1
    return {"view_col": view_col, "active_col": active_col}


def generate_timeseries(n: int, channels: int = 20, span: float = 100_000.0,
                        seed: int = 0) -> Dict[str, np.ndarray]:
    """Wide synthetic time series (channel, time, value) in channel-major order.

    Rows are ordered by channel then time, i.e. NOT sorted by time overall,
    mirroring a multi-sensor append layout. The pan benchmark derives a
    time-sorted copy from this table.
    """
    rng = np.random.default_rng(seed)
    per = n // channels
    chan = np.repeat(np.arange(channels), per)
    t = np.tile(np.sort(rng.uniform(0.0, span, per)), channels)
    value = rng.normal(0.0, 1.0, per * channels) + np.sin(t[: per * channels] / 500.0)
    return {"channel": chan, "time": t, "value": value}
