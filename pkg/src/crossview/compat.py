"""Pre-aggregation compatibility analysis for (view query, active clause) pairs.

A materialized view can service interactive updates only when the
selection, active clause, and view query all satisfy a fixed rule list.
Failures report the first violated rule so callers can fall back to
direct filtered queries.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import List, Optional, Tuple

from . import expr as ex
from .query import (AggregateCall, ClientViewDescriptor, QuerySpec,
                    SUPPORTED_AGGREGATES, aggregation_layer, single_source)
from .selection import Clause, Selection


@dataclass(frozen=True)
class CompatibilityReport:
    ok: bool
    failed_rule: Optional[int] = None
    reason: Optional[str] = None

    def __bool__(self):
        return self.ok


def interval_dimensions(clause: Clause) -> Optional[List[Tuple[ex.Scalar, float, float]]]:
    """Per-dimension (column expression, lo, hi) triples of an interval clause.

    The predicate must be a BETWEEN, or a conjunction of BETWEENs with
    literal endpoints. Returns None when the structure does not match.
    """
    pred = clause.predicate
    parts = list(pred.operands) if isinstance(pred, ex.And) else [pred]
    dims = []
    for p in parts:
        if not isinstance(p, ex.Between):
            return None
        if not isinstance(p.lo, ex.Literal) or not isinstance(p.hi, ex.Literal):
            return None
        if not isinstance(p.lo.value, (int, float)) or not isinstance(p.hi.value, (int, float)):
            return None
        dims.append((p.operand, float(p.lo.value), float(p.hi.value)))
    return dims


def point_dimensions(clause: Clause) -> Optional[Tuple[List[ex.Scalar], List[Tuple]]]:
    """Columns and value tuples selected by a point clause.

    Accepts `col = v`, `col IN (...)`, conjunctions of equalities, and
    disjunctions of such conjunctions (all over the same column list).
    Returns (columns, value rows) or None when the structure does not match.
    """
    pred = clause.predicate

    def eq_tuple(p) -> Optional[Tuple[List[ex.Scalar], Tuple]]:
        parts = list(p.operands) if isinstance(p, ex.And) else [p]
        cols, vals = [], []
        for item in parts:
            if (isinstance(item, ex.Comparison) and item.op == "="
                    and isinstance(item.right, ex.Literal)):
                cols.append(item.left)
                vals.append(item.right.value)
            else:
                return None
        return cols, tuple(vals)

    if isinstance(pred, ex.InList):
        if not all(isinstance(v, ex.Literal) for v in pred.values):
            return None
        return [pred.operand], [(v.value,) for v in pred.values]

    disjuncts = list(pred.operands) if isinstance(pred, ex.Or) else [pred]
    columns: Optional[List[ex.Scalar]] = None
    rows: List[Tuple] = []
    for d in disjuncts:
        parsed = eq_tuple(d)
        if parsed is None:
            return None
        cols, vals = parsed
        if columns is None:
            columns = cols
        elif cols != columns:
            return None
        rows.append(vals)
    return columns, rows


def check_compatibility(view: ClientViewDescriptor, active: Optional[Clause],
                        selection: Selection) -> CompatibilityReport:
    """Apply the compatibility rules in order; report the first failure."""
    # 1. resolution operator
    if selection.resolver not in ("INTERSECT", "LAST"):
        return CompatibilityReport(False, 1, f"resolver {selection.resolver} not supported")
    # 2. clause meta present, point or interval
    if active is None or active.meta is None:
        return CompatibilityReport(False, 2, "active clause has no optimization metadata")
    if active.meta.type not in ("point", "interval"):
        return CompatibilityReport(False, 2, f"clause type {active.meta.type!r} not supported")
    # 3. interval scales cover every predicate dimension
    if active.meta.type == "interval":
        dims = interval_dimensions(active)
        if dims is None:
            return CompatibilityReport(False, 3, "interval predicate structure not analyzable")
        if len(active.meta.scales) != len(dims):
            return CompatibilityReport(
                False, 3,
                f"{len(dims)} interval dimensions but {len(active.meta.scales)} scales")
    else:
        if point_dimensions(active) is None:
            return CompatibilityReport(False, 3, "point predicate structure not analyzable")
    # 4. stable groupby domain
    if not view.filter_stable:
        return CompatibilityReport(False, 4, "view is not filter-stable")
    # 5. single source relation
    if single_source(view.query) is None:
        return CompatibilityReport(False, 5, "query does not aggregate a single relation")
    try:
        layer = aggregation_layer(view.query)
    except Exception as err:
        return CompatibilityReport(False, 5, str(err))
    # 6. supported aggregate functions only
    aggs = layer.aggregate_items() if layer is not None else []
    for item in aggs:
        call = item.value
        if call.fn not in SUPPORTED_AGGREGATES:
            return CompatibilityReport(False, 6, f"aggregate {call.fn} not supported")
        if call.distinct:
            return CompatibilityReport(False, 6, f"{call.fn}(DISTINCT ...) not supported")
    # 7. aggregation must actually occur
    if not aggs:
        return CompatibilityReport(False, 7, "query performs no aggregation")
    return CompatibilityReport(True)
