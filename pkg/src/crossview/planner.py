"""Materialized-view planning: dimensions, sufficient statistics, queries.

Given a compatible (active clause, view query) pair, build a plan holding
the creation query for a pre-aggregated table, the hash-derived table
name, a parameterized update-query template, and per-output
reconstruction expressions over the sufficient-statistic measures.
"""

from __future__ import annotations

import hashlib
import math
import re
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple

from . import expr as ex
from .compat import check_compatibility, interval_dimensions, point_dimensions
from .query import (AggregateCall, ClientViewDescriptor, QuerySpec,
                    aggregation_layer, resolve_groupby_expr, single_source,
                    _inline_mapping)
from .scales import BinSpec, bin_expression, bin_value, interval_to_bins
from .selection import Clause, Selection


class PlanningError(ValueError):
    pass


@dataclass(frozen=True)
class MeasureColumn:
    alias: str
    creation_sql: str  # aggregate expression over the base relation
    merge_sql: str     # aggregate over shard partials reproducing creation
    role: str
    row_sql: Optional[str] = None      # aggregate applied to a single row
    combine_sql: Optional[str] = None  # binary merge; $cur and $new placeholders


@dataclass(frozen=True)
class UpsertPlan:
    """Creation via per-row upserts into a small clustered accumulator table.

    SQLite executes GROUP BY by sorting the entire input, which dominates
    creation time on large base tables. When every measure has a per-row
    initializer and a binary merge, the same cells can be accumulated by
    upserting each row into a table keyed on the dimensions: the key
    b-tree stays as small as the cell count, so no full-input sort runs.
    Rows with NULL dimensions (excluded from the key phase) are folded in
    afterwards with an ordinary GROUP BY over just those rows.
    """
    create_sql: str      # CREATE TABLE temp.pre_upsert(...)
    insert_sql: str      # INSERT ... SELECT ... ON CONFLICT ... DO UPDATE
    assemble_select: str # SELECT for the final table (upserted + NULL-dim cells)


@dataclass(frozen=True)
class ActiveDimension:
    alias: str
    expr_sql: str
    kind: str  # interval | point


@dataclass(frozen=True)
class MaterializedViewPlan:
    name: str
    base: str
    view_dims: Tuple[str, ...]               # aliases of view groupby dimensions
    active_dims: Tuple[ActiveDimension, ...]
    measures: Tuple[MeasureColumn, ...]
    body: str                                # canonical SELECT body (hash input)
    creation: str                            # CREATE TABLE IF NOT EXISTS ... AS body
    update_template: str                     # placeholders $lo{i}/$hi{i} or $pt{i}
    output_map: Tuple[Tuple[str, str], ...]  # original alias -> recon or dim marker
    active_type: str
    bin_specs: Tuple[BinSpec, ...] = ()
    shardable: bool = False
    shard_template: str = ""   # body over one rowid range ($SHARDLO..$SHARDHI)
    merge_select: str = ""     # re-aggregation of shard partials ($SHARDS)
    upsert: Optional[UpsertPlan] = None  # sort-free creation, when supported

    @property
    def columns(self) -> Tuple[str, ...]:
        """Column aliases of the materialized table, in creation order."""
        return (self.view_dims + tuple(m.alias for m in self.measures)
                + tuple(d.alias for d in self.active_dims))

    @property
    def interactive_resolution(self) -> Optional[int]:
        """Number of interactive bins of the active clause (interval only)."""
        if self.active_type != "interval":
            return None
        n = 1
        for spec in self.bin_specs:
            n *= spec.bin_count
        return n


def canonical_sql(text: str) -> str:
    """Whitespace-normalized, lowercased-outside-strings canonical form."""
    out = []
    i = 0
    while i < len(text):
        ch = text[i]
        if ch == "'":
            j = i + 1
            while j < len(text):
                if text[j] == "'" and (j + 1 >= len(text) or text[j + 1] != "'"):
                    break
                j += 2 if text[j] == "'" else 1
            out.append(text[i:j + 1])
            i = j + 1
        else:
            out.append(ch.lower())
            i += 1
    return re.sub(r"\s+", " ", "".join(out)).strip()


def table_name(body: str) -> str:
    """Hash-derived table name, stable across runs and platforms."""
    digest = hashlib.sha256(canonical_sql(body).encode("utf-8")).hexdigest()[:16]
    return f"mosaic.pre_agg_{digest}"


def max_view_rows(interactive_resolution: int, client_bins: int) -> int:
    """Upper bound on materialized-view rows (dense-representation size)."""
    return interactive_resolution * client_bins


# ---------------------------------------------------------------------------
# Sufficient statistics

class _MeasureRegistry:
    """Dedupes measure columns by creation expression."""

    def __init__(self):
        self.by_creation: Dict[str, MeasureColumn] = {}
        self.order: List[MeasureColumn] = []

    def add(self, creation_sql: str, role: str, merge_fn,
            row: Optional[str] = None, combine: Optional[str] = None) -> str:
        existing = self.by_creation.get(creation_sql)
        if existing is not None:
            return existing.alias
        alias = f"m{len(self.order)}"
        m = MeasureColumn(alias, creation_sql, merge_fn(alias), role, row, combine)
        self.by_creation[creation_sql] = m
        self.order.append(m)
        return alias


def _with_filter(agg_sql: str, filt: Optional[ex.Predicate]) -> str:
    if filt is None:
        return agg_sql
    return f"{agg_sql} FILTER (WHERE {ex.to_sql(filt)})"


def _sum_merge(alias: str) -> str:
    return f"SUM({alias})"


def _null_combine(op_sql: str) -> str:
    """Binary merge treating NULL as the identity, like NULL-skipping aggregates."""
    return (f"CASE WHEN $cur IS NULL THEN $new WHEN $new IS NULL THEN $cur "
            f"ELSE {op_sql} END")


def _row_case(row_sql: str, filt: Optional[ex.Predicate],
              neutral: str = "NULL") -> str:
    """Per-row initializer honoring an aggregate FILTER clause."""
    if filt is None:
        return row_sql
    return f"CASE WHEN {ex.to_sql(filt)} THEN {row_sql} ELSE {neutral} END"


_PAIR_COMBINES = {
    "MIN": "MIN($cur, $new)",
    "MAX": "MAX($cur, $new)",
    "PRODUCT": "$cur * $new",
    "BIT_AND": "($cur & $new)",
    "BIT_OR": "($cur | $new)",
    "BOOL_AND": "MIN($cur, $new)",
    "BOOL_OR": "MAX($cur, $new)",
}


def sufficient_stats(call: AggregateCall, base: str, reg: _MeasureRegistry) -> str:
    """Register the sufficient-statistic measures for one aggregate call.

    Returns the reconstruction expression (SQL over measure aliases) that
    recovers the aggregate when re-grouping materialized-view cells.
    """
    fn = call.fn
    filt = call.filter
    if call.distinct:
        raise PlanningError(f"{fn}(DISTINCT ...) has no sufficient statistics")

    def arg(i: int) -> str:
        if i >= len(call.args):
            raise PlanningError(f"{fn} requires {i + 1} arguments")
        return ex.to_sql(call.args[i])

    def count_measure(inner: str) -> str:
        row = "1" if inner == "*" else f"CASE WHEN {inner} IS NULL THEN 0 ELSE 1 END"
        return reg.add(_with_filter(f"COUNT({inner})", filt), "count", _sum_merge,
                       row=_row_case(row, filt, neutral="0"), combine="$cur + $new")

    if fn == "COUNT":
        # COALESCE matches direct-query behavior when zero cells survive
        a = count_measure("*" if call.star else arg(0))
        return f"COALESCE(SUM({a}), 0)"
    if fn in ("SUM",):
        a = reg.add(_with_filter(f"SUM({arg(0)})", filt), "sum", _sum_merge,
                    row=_row_case(f"({arg(0)})", filt),
                    combine=_null_combine("$cur + $new"))
        return f"SUM({a})"
    if fn in ("MIN", "MAX", "PRODUCT", "BIT_AND", "BIT_OR", "BIT_XOR",
              "BOOL_AND", "BOOL_OR"):
        row = combine = None
        if fn in _PAIR_COMBINES:
            init = (f"CASE WHEN {arg(0)} IS NULL THEN NULL ELSE ({arg(0)} != 0) END"
                    if fn.startswith("BOOL_") else f"({arg(0)})")
            row = _row_case(init, filt)
            combine = _null_combine(_PAIR_COMBINES[fn])
        a = reg.add(_with_filter(f"{fn}({arg(0)})", filt), fn.lower(),
                    lambda al, f=fn: f"{f}({al})", row=row, combine=combine)
        return f"{fn}({a})"
    if fn == "AVG":
        x = arg(0)
        cnt = count_measure(x)
        avg = reg.add(_with_filter(f"AVG({x})", filt), "avg",
                      lambda al, c=cnt: f"SUM({al} * {c}) / SUM({c})")
        return f"SUM({avg} * {cnt}) / SUM({cnt})"
    if fn == "GEOMEAN":
        x = arg(0)
        ls = reg.add(_with_filter(f"SUM(LN({x}))", filt), "logsum", _sum_merge,
                     row=_row_case(f"LN({x})", filt),
                     combine=_null_combine("$cur + $new"))
        cnt = count_measure(x)
        return f"EXP(SUM({ls}) / SUM({cnt}))"
    if fn in ("ARG_MIN", "ARG_MAX"):
        a, b = arg(0), arg(1)
        mfn = "MIN" if fn == "ARG_MIN" else "MAX"
        mv = reg.add(_with_filter(f"{mfn}({b})", filt), mfn.lower(),
                     lambda al, f=mfn: f"{f}({al})",
                     row=_row_case(f"({b})", filt),
                     combine=_null_combine(_PAIR_COMBINES[mfn]))
        av = reg.add(_with_filter(f"{fn}({a}, {b})", filt), fn.lower(),
                     lambda al, m=mv, f=fn: f"{f}({al}, {m})")
        return f"{fn}({av}, {mv})"
    if fn in ("VAR_POP", "VAR_SAMP", "STDDEV_POP", "STDDEV_SAMP"):
        x = arg(0)
        center = f"(SELECT AVG({x}) FROM {base})"
        s = reg.add(_with_filter(f"SUM({x} - {center})", filt), "centered_sum", _sum_merge)
        ss = reg.add(_with_filter(f"SUM(({x} - {center}) * ({x} - {center}))", filt),
                     "centered_sumsq", _sum_merge)
        n = reg.add(_with_filter(f"COUNT({x})", filt), "count", _sum_merge)
        css = f"(SUM({ss}) - SUM({s}) * SUM({s}) / SUM({n}))"
        denom = f"SUM({n})" if fn.endswith("_POP") else f"(SUM({n}) - 1)"
        var = f"{css} / {denom}"
        return f"SQRT({var})" if fn.startswith("STDDEV") else var
    if fn in ("COVAR_POP", "COVAR_SAMP", "CORR", "REGR_COUNT", "REGR_AVGX",
              "REGR_AVGY", "REGR_SXX", "REGR_SYY", "REGR_SXY", "REGR_SLOPE",
              "REGR_INTERCEPT", "REGR_R2"):
        return _bivariate_stats(call, base, reg)
    raise PlanningError(f"aggregate {fn} not supported for pre-aggregation")


def _bivariate_stats(call: AggregateCall, base: str, reg: _MeasureRegistry) -> str:
    # SQL argument convention: FN(y, x); rows count only when both non-null.
    yexpr, xexpr = call.args[0], call.args[1]
    pairwise = ex.And((ex.IsNull(yexpr, negated=True), ex.IsNull(xexpr, negated=True)))
    filt = ex.conjoin(pairwise, call.filter)
    x, y = ex.to_sql(xexpr), ex.to_sql(yexpr)
    cx = f"(SELECT AVG({x}) FROM {base})"
    cy = f"(SELECT AVG({y}) FROM {base})"
    sx = reg.add(_with_filter(f"SUM({x} - {cx})", filt), "centered_sum_x", _sum_merge)
    sy = reg.add(_with_filter(f"SUM({y} - {cy})", filt), "centered_sum_y", _sum_merge)
    sxx = reg.add(_with_filter(f"SUM(({x} - {cx}) * ({x} - {cx}))", filt),
                  "centered_sumsq_x", _sum_merge)
    syy = reg.add(_with_filter(f"SUM(({y} - {cy}) * ({y} - {cy}))", filt),
                  "centered_sumsq_y", _sum_merge)
    sxy = reg.add(_with_filter(f"SUM(({x} - {cx}) * ({y} - {cy}))", filt),
                  "centered_crosssum", _sum_merge)
    n = reg.add(_with_filter("COUNT(*)", filt), "pair_count", _sum_merge)
    N = f"SUM({n})"
    SXX = f"(SUM({sxx}) - SUM({sx}) * SUM({sx}) / {N})"
    SYY = f"(SUM({syy}) - SUM({sy}) * SUM({sy}) / {N})"
    SXY = f"(SUM({sxy}) - SUM({sx}) * SUM({sy}) / {N})"
    fn = call.fn
    if fn == "COVAR_POP":
        return f"{SXY} / {N}"
    if fn == "COVAR_SAMP":
        return f"{SXY} / ({N} - 1)"
    if fn == "CORR":
        return f"{SXY} / SQRT({SXX} * {SYY})"
    if fn == "REGR_COUNT":
        return f"COALESCE({N}, 0)"
    if fn == "REGR_SXX":
        return SXX
    if fn == "REGR_SYY":
        return SYY
    if fn == "REGR_SXY":
        return SXY
    if fn == "REGR_SLOPE":
        return f"{SXY} / {SXX}"
    # AVGX / AVGY / INTERCEPT need the centering constants back.
    mx = reg.add(f"MAX({cx})", "center_x", lambda al: f"MAX({al})")
    my = reg.add(f"MAX({cy})", "center_y", lambda al: f"MAX({al})")
    AVGX = f"(SUM({sx}) / {N} + MAX({mx}))"
    AVGY = f"(SUM({sy}) / {N} + MAX({my}))"
    if fn == "REGR_AVGX":
        return AVGX
    if fn == "REGR_AVGY":
        return AVGY
    if fn == "REGR_INTERCEPT":
        return f"{AVGY} - {SXY} / {SXX} * {AVGX}"
    if fn == "REGR_R2":
        return f"{SXY} * {SXY} / ({SXX} * {SYY})"
    raise PlanningError(f"aggregate {fn} not supported for pre-aggregation")


# ---------------------------------------------------------------------------
# Upsert-creation analysis

_NULL_PROP_FUNCS = {"FLOOR", "CEIL", "ROUND", "ABS", "SIGN", "MIN", "MAX"}


def _null_columns(e: ex.Scalar) -> Optional[List[ex.Column]]:
    """Columns c with (e IS NULL iff some c IS NULL); None when not provable."""
    if isinstance(e, ex.Column):
        return [e]
    if isinstance(e, ex.Literal):
        return None if e.value is None else []
    if isinstance(e, (ex.Neg,)):
        return _null_columns(e.operand)
    if isinstance(e, ex.Cast):
        return _null_columns(e.operand)
    if isinstance(e, ex.BinOp):
        if e.op in ("+", "-", "*"):
            l, r = _null_columns(e.left), _null_columns(e.right)
            return None if l is None or r is None else l + r
        if e.op == "/":
            # division introduces NULL unless the divisor is a nonzero constant
            if isinstance(e.right, ex.Literal) and e.right.value not in (None, 0):
                return _null_columns(e.left)
        return None
    if isinstance(e, ex.Func) and e.name in _NULL_PROP_FUNCS:
        parts: List[ex.Column] = []
        for a in e.args:
            cols = _null_columns(a)
            if cols is None:
                return None
            parts.extend(cols)
        return parts
    return None


def _integer_valued(e: ex.Scalar) -> bool:
    """Whether e provably evaluates to an integer (or NULL)."""
    if isinstance(e, ex.Cast):
        return e.to_type == "INTEGER"
    if isinstance(e, ex.Func):
        if e.name in ("FLOOR", "CEIL", "SIGN"):
            return True
        if e.name == "ROUND" and len(e.args) == 1:
            return True
        if e.name in ("MIN", "MAX"):
            return all(_integer_valued(a) for a in e.args)
        return False
    if isinstance(e, ex.Literal):
        return isinstance(e.value, int) and not isinstance(e.value, bool)
    if isinstance(e, ex.Neg):
        return _integer_valued(e.operand)
    if isinstance(e, ex.BinOp):
        return e.op in ("+", "-", "*") and \
            _integer_valued(e.left) and _integer_valued(e.right)
    return False


def _build_upsert(base: str, where: Optional[ex.Predicate],
                  dims: Sequence[Tuple[str, str, ex.Scalar, Optional[int]]],
                  measures: Sequence[MeasureColumn],
                  select_parts: Sequence[str],
                  group_aliases: Sequence[str],
                  columns: Sequence[str]) -> Optional[UpsertPlan]:
    """Upsert-creation statements; dims are (alias, sql, tree, bin_count)."""
    if not dims or any(m.row_sql is None or m.combine_sql is None
                       for m in measures):
        return None

    guards: List[str] = []
    for _alias, sql, tree, _count in dims:
        cols = _null_columns(tree)
        if cols is None:
            guards.append(f"({sql}) IS NOT NULL")
        else:
            guards.extend(f"{ex.to_sql(c)} IS NOT NULL" for c in cols)
    seen: set = set()
    guards = [g for g in guards if not (g in seen or seen.add(g))]
    key_guard = " AND ".join(guards) if guards else "1"

    # Composite integer key: bounded (binned) dimensions pack into the low
    # digits, one unbounded integer dimension provides the high digits. The
    # key doubles as the accumulator's rowid, the fastest lookup SQLite has.
    unbounded = [d for d in dims if d[3] is None]
    bounded = [d for d in dims if d[3] is not None]
    cell = None
    if len(unbounded) <= 1 and (not unbounded or _integer_valued(unbounded[0][2])):
        acc = None
        prod = 1
        for _alias, sql, _tree, count in bounded:
            acc = f"({acc}) * {count} + ({sql})" if acc is not None else f"({sql})"
            prod *= count
        if unbounded:
            x_sql = unbounded[0][1]
            if bounded:
                limit = (2 ** 53) // prod
                key_guard += f" AND ({x_sql}) BETWEEN {-limit} AND {limit}"
                cell = f"({x_sql}) * {prod} + ({acc})"
            else:
                cell = f"({x_sql})"
        else:
            cell = acc

    base_where = ex.to_sql(where) if where is not None else None

    def conj(extra: str) -> str:
        return f"({base_where}) AND {extra}" if base_where else extra

    sel_map = {alias: f"{sql} AS {alias}" for alias, sql, _t, _c in dims}
    for m in measures:
        sel_map[m.alias] = f"{m.row_sql} AS {m.alias}"
    inserts = ", ".join(sel_map[c] for c in columns)
    sets = ", ".join(
        f"{m.alias} = " + m.combine_sql.replace("$cur", m.alias)
        .replace("$new", f"excluded.{m.alias}") for m in measures)
    cols_sql = ", ".join(columns)
    keys = ", ".join(group_aliases)

    if cell is not None:
        create = (f"CREATE TABLE temp.pre_upsert"
                  f"(cell INTEGER PRIMARY KEY, {cols_sql})")
        insert = (f"INSERT INTO temp.pre_upsert "
                  f"SELECT {cell} AS cell, {inserts} FROM {base} "
                  f"WHERE {conj(key_guard)} "
                  f"ON CONFLICT(cell) DO UPDATE SET {sets}")
    else:
        create = (f"CREATE TABLE temp.pre_upsert"
                  f"({cols_sql}, PRIMARY KEY({keys})) WITHOUT ROWID")
        insert = (f"INSERT INTO temp.pre_upsert "
                  f"SELECT {inserts} FROM {base} WHERE {conj(key_guard)} "
                  f"ON CONFLICT({keys}) DO UPDATE SET {sets}")
    assemble = (f"SELECT {cols_sql} FROM temp.pre_upsert "
                f"UNION ALL "
                f"SELECT {', '.join(select_parts)} FROM {base} "
                f"WHERE {conj(f'NOT ({key_guard})')} GROUP BY {keys}")
    return UpsertPlan(create_sql=create, insert_sql=insert,
                      assemble_select=assemble)


# ---------------------------------------------------------------------------
# Plan construction

def _residual_predicate(selection: Selection, active: Clause,
                        view_id: str) -> Optional[ex.Predicate]:
    """Filter from the selection's other clauses, resolved for this view.

    Under LAST resolution only the active clause applies, so the residual
    is empty. Under INTERSECT the remaining (non-active-source) clauses
    are conjoined, honoring cross-filtering.
    """
    if selection.resolver == "LAST":
        return None
    preds = []
    for _, c in selection.effective_clauses():
        if c.source == active.source:
            continue
        if selection.cross and view_id in c.views:
            continue
        preds.append(c.predicate)
    return ex.conjoin(*preds)


def plan(view: ClientViewDescriptor, active: Clause,
         selection: Selection) -> MaterializedViewPlan:
    """Build a materialized-view plan for a compatible (clause, view) pair."""
    report = check_compatibility(view, active, selection)
    if not report:
        raise PlanningError(f"incompatible inputs (rule {report.failed_rule}): {report.reason}")

    q = view.query
    layer = aggregation_layer(q)
    base = single_source(q)
    mapping = _inline_mapping(layer)

    # View dimensions: resolved groupby expressions under their aliases.
    view_dims: List[Tuple[str, str]] = []
    dim_info: List[Tuple[str, str, ex.Scalar, Optional[int]]] = []
    for gname in layer.groupby:
        tree = resolve_groupby_expr(layer, gname)
        view_dims.append((gname, ex.to_sql(tree)))
        dim_info.append((gname, ex.to_sql(tree), tree, None))
    taken = {alias for alias, _ in view_dims}

    def unique_alias(preferred: str) -> str:
        alias = preferred
        k = 1
        while alias in taken:
            alias = f"{preferred}_{k}"
            k += 1
        taken.add(alias)
        return alias

    # Active-clause dimensions.
    meta = active.meta
    active_dims: List[ActiveDimension] = []
    bin_specs: List[BinSpec] = []
    if meta.type == "interval":
        dims = interval_dimensions(active)
        for i, (col, _lo, _hi) in enumerate(dims):
            spec = BinSpec(meta.scales[i], meta.pixel_size, meta.bin_fn, col)
            bin_specs.append(spec)
            alias = unique_alias("active" if len(dims) == 1 else f"active{i}")
            tree = bin_expression(spec)
            active_dims.append(ActiveDimension(alias, ex.to_sql(tree), "interval"))
            dim_info.append((alias, ex.to_sql(tree), tree, spec.bin_count))
    else:
        cols, _rows = point_dimensions(active)
        for i, col in enumerate(cols):
            preferred = col.name if isinstance(col, ex.Column) else f"active{i}"
            alias = unique_alias(preferred)
            active_dims.append(ActiveDimension(alias, ex.to_sql(col), "point"))
            dim_info.append((alias, ex.to_sql(col), col, None))

    # Measures and reconstruction expressions, in original select order.
    reg = _MeasureRegistry()
    output_map: List[Tuple[str, str]] = []
    for item in layer.select:
        if isinstance(item.value, AggregateCall):
            call = item.value
            if mapping:
                call = AggregateCall(
                    call.fn,
                    tuple(ex.substitute(a, mapping) for a in call.args),
                    ex.substitute(call.filter, mapping) if call.filter is not None else None,
                    call.distinct, call.star)
            output_map.append((item.alias, sufficient_stats(call, base, reg)))
        else:
            output_map.append((item.alias, item.alias))  # passthrough dimension

    # Static filters already present in the query, plus the residual from
    # the selection's other clauses.
    static_preds = []
    if layer.where is not None:
        w = ex.substitute(layer.where, mapping) if mapping else layer.where
        static_preds.append(w)
    if isinstance(layer.source, QuerySpec) and layer.source.where is not None:
        static_preds.append(layer.source.where)
    residual = _residual_predicate(selection, active, view.id)
    where = ex.conjoin(*static_preds, residual)

    # Creation body: view dims, measures, then active-clause dims.
    select_parts = [f"{sql} AS {alias}" for alias, sql in view_dims]
    select_parts += [f"{m.creation_sql} AS {m.alias}" for m in reg.order]
    select_parts += [f"{d.expr_sql} AS {d.alias}" for d in active_dims]
    group_aliases = [alias for alias, _ in view_dims] + [d.alias for d in active_dims]
    body = f"SELECT {', '.join(select_parts)} FROM {base}"
    if where is not None:
        body += f" WHERE {ex.to_sql(where)}"
    body += f" GROUP BY {', '.join(group_aliases)}"

    name = table_name(body)
    creation = f"CREATE TABLE IF NOT EXISTS {name} AS {body}"

    # Update template over the materialized view.
    out_parts = []
    for alias, recon in output_map:
        if recon == alias:
            out_parts.append(alias)
        else:
            out_parts.append(f"{recon} AS {alias}")
    if meta.type == "interval":
        constraints = [f"{d.alias} BETWEEN $lo{i} AND $hi{i}"
                       for i, d in enumerate(active_dims)]
    else:
        constraints = ["$point"]
    template = f"SELECT {', '.join(out_parts)} FROM {name} WHERE {' AND '.join(constraints)}"
    vd = [alias for alias, _ in view_dims]
    if vd:
        template += f" GROUP BY {', '.join(vd)}"

    shardable = "(SELECT " not in body
    shard_template = ""
    merge_select = ""
    if shardable:
        shard_where = f"{base}.rowid BETWEEN $SHARDLO AND $SHARDHI"
        clause_sql = (f"{ex.to_sql(where)} AND {shard_where}" if where is not None
                      else shard_where)
        shard_template = (f"SELECT {', '.join(select_parts)} FROM {base} "
                          f"WHERE {clause_sql} GROUP BY {', '.join(group_aliases)}")
        merge_parts = [alias for alias, _ in view_dims]
        merge_parts += [f"{m.merge_sql} AS {m.alias}" for m in reg.order]
        merge_parts += [d.alias for d in active_dims]
        merge_select = (f"SELECT {', '.join(merge_parts)} FROM $SHARDS "
                        f"GROUP BY {', '.join(group_aliases)}")
    columns = tuple(alias for alias, _ in view_dims) \
        + tuple(m.alias for m in reg.order) + tuple(d.alias for d in active_dims)
    upsert = (_build_upsert(base, where, dim_info, reg.order, select_parts,
                            group_aliases, columns)
              if shardable else None)
    return MaterializedViewPlan(
        name=name, base=base,
        view_dims=tuple(vd),
        active_dims=tuple(active_dims),
        measures=tuple(reg.order),
        body=body, creation=creation,
        update_template=template,
        output_map=tuple(output_map),
        active_type=meta.type,
        bin_specs=tuple(bin_specs),
        shardable=shardable,
        shard_template=shard_template,
        merge_select=merge_select,
        upsert=upsert,
    )


def update_query(p: MaterializedViewPlan, clause: Clause) -> str:
    """Instantiate the update template with the clause's current values."""
    sql = p.update_template
    if p.active_type == "interval":
        dims = interval_dimensions(clause)
        if dims is None or len(dims) != len(p.bin_specs):
            raise PlanningError("clause interval arity does not match plan")
        bins = interval_to_bins(p.bin_specs, [(lo, hi) for _c, lo, hi in dims])
        for i, (blo, bhi) in enumerate(bins):
            sql = sql.replace(f"$lo{i}", str(blo)).replace(f"$hi{i}", str(bhi))
        return sql
    parsed = point_dimensions(clause)
    if parsed is None:
        raise PlanningError("point clause structure not analyzable")
    cols, rows = parsed
    if len(cols) != len(p.active_dims):
        raise PlanningError("clause point arity does not match plan")
    if len(cols) == 1:
        dim = ex.Column(p.active_dims[0].alias)
        vals = [ex.Literal(r[0]) for r in rows]
        constraint: ex.Predicate = (ex.Comparison("=", dim, vals[0]) if len(vals) == 1
                                    else ex.InList(dim, tuple(vals)))
    else:
        disjuncts = []
        for r in rows:
            eqs = tuple(ex.Comparison("=", ex.Column(d.alias), ex.Literal(r[i]))
                        for i, d in enumerate(p.active_dims))
            disjuncts.append(ex.And(eqs))
        constraint = disjuncts[0] if len(disjuncts) == 1 else ex.Or(tuple(disjuncts))
    return sql.replace("$point", f"({ex.to_sql(constraint)})")
