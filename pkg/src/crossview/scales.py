"""Data-to-screen scale transforms and pixel-level binning.

Maps data values (and interval endpoints) to integer pixel-bin indices,
both as host-side numeric evaluation and as generated SQL expressions.
The two paths are constructed from the same parameterization so the
database and the host agree bit-for-bit on every input.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

from . import expr as ex


class ScaleError(ValueError):
    pass


@dataclass(frozen=True)
class ScaleDescriptor:
    """Parameters of a data-space to screen-space transform."""
    type: str  # linear | log | pow | symlog
    domain: Tuple[float, float]
    range: Tuple[float, float]
    base: float = 10.0       # log only
    exponent: float = 1.0    # pow only
    constant: float = 1.0    # symlog only

    _TYPES = ("linear", "log", "pow", "symlog")

    def __post_init__(self):
        object.__setattr__(self, "domain", (float(self.domain[0]), float(self.domain[1])))
        object.__setattr__(self, "range", (float(self.range[0]), float(self.range[1])))
        if self.type not in self._TYPES:
            raise ScaleError(f"unknown scale type {self.type!r}")
        d0, d1 = self.domain
        r0, r1 = self.range
        if d0 == d1:
            raise ScaleError("degenerate domain")
        if r0 == r1:
            raise ScaleError("degenerate range")
        if self.type == "log":
            if d0 <= 0 or d1 <= 0:
                raise ScaleError("log scale requires a positive domain")
            if self.base <= 0 or self.base == 1:
                raise ScaleError("log base must be positive and != 1")
        if self.type == "symlog" and self.constant <= 0:
            raise ScaleError("symlog constant must be positive")

    def transform(self, x: float) -> float:
        """The monotone transform t(x) underlying the scale."""
        if self.type == "linear":
            return x
        if self.type == "log":
            if x <= 0:
                raise ScaleError(f"log scale undefined for x={x}")
            return math.log(x) / math.log(self.base)
        if self.type == "pow":
            return math.copysign(abs(x) ** self.exponent, x) if x != 0 else 0.0
        # symlog: sign(x) * log(1 + |x / constant|)
        return math.copysign(math.log(1.0 + abs(x / self.constant)), x)

    def untransform(self, t: float) -> float:
        """Inverse of transform()."""
        if self.type == "linear":
            return t
        if self.type == "log":
            return self.base ** t
        if self.type == "pow":
            return math.copysign(abs(t) ** (1.0 / self.exponent), t) if t != 0 else 0.0
        return math.copysign(self.constant * (math.exp(abs(t)) - 1.0), t)

    def transform_expression(self, col: ex.Scalar) -> ex.Scalar:
        """SQL expression computing t(col), mirroring transform() exactly."""
        if self.type == "linear":
            return col
        if self.type == "log":
            return ex.BinOp("/", ex.Func("LN", (col,)),
                            ex.Literal(math.log(self.base)))
        if self.type == "pow":
            return ex.BinOp(
                "*", ex.Func("SIGN", (col,)),
                ex.Func("POW", (ex.Func("ABS", (col,)), ex.Literal(self.exponent))))
        return ex.BinOp(
            "*", ex.Func("SIGN", (col,)),
            ex.Func("LN", (ex.BinOp("+", ex.Literal(1.0),
                                    ex.Func("ABS", (ex.BinOp("/", col, ex.Literal(self.constant)),))),)))


@dataclass(frozen=True)
class BinSpec:
    """A binning scheme: scale, interactive pixel size, bin function, binned column."""
    scale: ScaleDescriptor
    pixel_size: float
    bin_fn: str  # FLOOR | CEIL | ROUND
    column: ex.Scalar

    _FNS = ("FLOOR", "CEIL", "ROUND")

    def __post_init__(self):
        if self.bin_fn not in self._FNS:
            raise ScaleError(f"unknown bin function {self.bin_fn!r}")
        if self.pixel_size < 1:
            raise ScaleError("pixel_size must be >= 1")
        r0, r1 = self.scale.range
        if (r1 - r0) / self.pixel_size <= 0:
            raise ScaleError("range extent / pixel_size must be positive")

    @property
    def pixels(self) -> float:
        r0, r1 = self.scale.range
        return (r1 - r0) / self.pixel_size

    @property
    def bin_count(self) -> int:
        """Number of interactive bins; the domain end clamps into the last one."""
        return max(1, math.ceil(self.pixels))

    @property
    def max_bin(self) -> int:
        return self.bin_count - 1


_BIN_FNS = {
    "FLOOR": math.floor,
    "CEIL": math.ceil,
    "ROUND": lambda x: math.floor(x + 0.5) if x >= 0 else math.ceil(x - 0.5),
}


def bin_value(spec: BinSpec, x: float) -> int:
    """Map a data value to its integer bin index.

    Out-of-domain values clamp to the boundary bins; the domain end d1
    falls into the final bin (index max_bin).
    """
    s = spec.scale
    if s.type == "log" and x <= 0:
        raise ScaleError(f"log scale undefined for x={x}")
    t0 = s.transform(s.domain[0])
    t1 = s.transform(s.domain[1])
    raw = spec.pixels * (s.transform(x) - t0) / (t1 - t0)
    b = _BIN_FNS[spec.bin_fn](raw)
    return max(0, min(spec.max_bin, int(b)))


def bin_expression(spec: BinSpec) -> ex.Scalar:
    """SQL expression equal to bin_value for every non-null input (null -> null)."""
    s = spec.scale
    t0 = s.transform(s.domain[0])
    t1 = s.transform(s.domain[1])
    tx = s.transform_expression(spec.column)
    raw = ex.BinOp("/",
                   ex.BinOp("*", ex.Literal(spec.pixels),
                            ex.BinOp("-", tx, ex.Literal(t0))),
                   ex.Literal(t1 - t0))
    binned = ex.Func(spec.bin_fn, (raw,))
    # two-argument MIN/MAX are native scalar builtins; they clamp without
    # per-row user-function overhead and propagate NULL inputs to NULL bins
    clamped = ex.Func("MIN", (ex.Literal(spec.max_bin),
                              ex.Func("MAX", (ex.Literal(0), binned))))
    return ex.Cast(clamped, "INTEGER")


def pixel_to_value(spec: BinSpec, px: float) -> float:
    """Data value at a (possibly fractional) interactive-pixel position."""
    s = spec.scale
    t0 = s.transform(s.domain[0])
    t1 = s.transform(s.domain[1])
    return s.untransform(t0 + (px / spec.pixels) * (t1 - t0))


def interval_to_bins(bin_specs: Sequence[BinSpec],
                     interval: Sequence[Tuple[float, float]]) -> List[Tuple[int, int]]:
    """Map per-dimension [lo, hi] data intervals to ordered [bin_lo, bin_hi] pairs."""
    if len(bin_specs) != len(interval):
        raise ScaleError(
            f"dimension mismatch: {len(bin_specs)} scales vs {len(interval)} intervals")
    out = []
    for spec, (lo, hi) in zip(bin_specs, interval):
        a = bin_value(spec, lo)
        b = bin_value(spec, hi)
        out.append((min(a, b), max(a, b)))
    return out
