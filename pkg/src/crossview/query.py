"""Restricted analytical SQL representation and AST-level analysis.

The dialect subset covers SELECT / FROM / WHERE / GROUP BY with one level
of subquery nesting, scalar arithmetic, CASE, BETWEEN, IN, and aggregate
calls with static FILTER clauses. Queries are built through the dataclass
API or parsed from text; serialization is deterministic so identical
specs always produce byte-identical SQL.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple, Union

from . import expr as ex
from .expr import Predicate, Scalar


class QueryError(ValueError):
    pass


# Aggregate functions eligible for pre-aggregation.
SUPPORTED_AGGREGATES = frozenset({
    "COUNT", "SUM", "MAX", "MIN", "PRODUCT",
    "BIT_AND", "BIT_OR", "BIT_XOR", "BOOL_AND", "BOOL_OR",
    "AVG", "GEOMEAN", "ARG_MAX", "ARG_MIN",
    "VAR_SAMP", "VAR_POP", "STDDEV_SAMP", "STDDEV_POP",
    "COVAR_SAMP", "COVAR_POP", "CORR",
    "REGR_COUNT", "REGR_AVGX", "REGR_AVGY",
    "REGR_SYY", "REGR_SXX", "REGR_SXY",
    "REGR_SLOPE", "REGR_INTERCEPT", "REGR_R2",
})

# All names treated as aggregates when parsing (superset-safe: unsupported
# ones simply fail the compatibility check later).
AGGREGATE_NAMES = SUPPORTED_AGGREGATES | {"MEDIAN", "STRING_AGG", "FIRST", "LAST"}


@dataclass(frozen=True)
class AggregateCall:
    fn: str
    args: Tuple[Scalar, ...] = ()
    filter: Optional[Predicate] = None
    distinct: bool = False
    star: bool = False  # COUNT(*)

    def __post_init__(self):
        object.__setattr__(self, "fn", self.fn.upper())
        object.__setattr__(self, "args", tuple(self.args))
        if self.star and (self.args or self.fn != "COUNT"):
            raise QueryError("star form is COUNT(*) only")


@dataclass(frozen=True)
class SelectItem:
    alias: str
    value: Union[Scalar, AggregateCall]

    def __post_init__(self):
        if not self.alias:
            raise QueryError("select item requires an alias")


Source = Union[str, "QuerySpec", Tuple[Union[str, "QuerySpec"], ...]]


@dataclass(frozen=True)
class QuerySpec:
    select: Tuple[SelectItem, ...]
    source: Source
    where: Optional[Predicate] = None
    groupby: Tuple[str, ...] = ()
    distinct: bool = False

    def __post_init__(self):
        object.__setattr__(self, "select", tuple(self.select))
        object.__setattr__(self, "groupby", tuple(self.groupby))
        if not self.select:
            raise QueryError("empty select list")
        aliases = [s.alias for s in self.select]
        if len(set(aliases)) != len(aliases):
            raise QueryError("duplicate select aliases")
        by_alias = {s.alias: s for s in self.select}
        for g in self.groupby:
            item = by_alias.get(g)
            if item is not None and isinstance(item.value, AggregateCall):
                raise QueryError(f"groupby entry {g!r} refers to an aggregate")
        if any(isinstance(s.value, AggregateCall) for s in self.select):
            for s in self.select:
                if not isinstance(s.value, AggregateCall) and s.alias not in self.groupby:
                    raise QueryError(
                        f"non-aggregate select item {s.alias!r} must appear in GROUP BY")

    def aggregate_items(self) -> List[SelectItem]:
        return [s for s in self.select if isinstance(s.value, AggregateCall)]


@dataclass(frozen=True)
class ClientViewDescriptor:
    """A data consumer: its unfiltered query plus filter-stability contract."""
    id: str
    query: QuerySpec
    filter_stable: bool
    selection: object = None  # Selection; typed loosely to avoid an import cycle

    def __post_init__(self):
        if not self.id:
            raise QueryError("view id must be non-empty")


# ---------------------------------------------------------------------------
# Serialization

def _agg_sql(a: AggregateCall) -> str:
    if a.star:
        inner = "*"
    else:
        inner = ", ".join(ex.to_sql(x) for x in a.args)
        if a.distinct:
            inner = "DISTINCT " + inner
    text = f"{a.fn}({inner})"
    if a.filter is not None:
        text += f" FILTER (WHERE {ex.to_sql(a.filter)})"
    return text


def _item_sql(s: SelectItem) -> str:
    if isinstance(s.value, AggregateCall):
        return f"{_agg_sql(s.value)} AS {s.alias}"
    if isinstance(s.value, ex.Column) and s.value.name == s.alias:
        return s.alias
    return f"{ex.to_sql(s.value)} AS {s.alias}"


def _source_sql(src: Source) -> str:
    if isinstance(src, str):
        return src
    if isinstance(src, QuerySpec):
        return f"({to_sql(src)})"
    return ", ".join(_source_sql(s) for s in src)


def to_sql(q: QuerySpec) -> str:
    """Deterministic single-line SQL for the query."""
    parts = ["SELECT"]
    if q.distinct:
        parts.append("DISTINCT")
    parts.append(", ".join(_item_sql(s) for s in q.select))
    parts.append("FROM")
    parts.append(_source_sql(q.source))
    if q.where is not None:
        parts.append("WHERE")
        parts.append(ex.to_sql(q.where))
    if q.groupby:
        parts.append("GROUP BY")
        parts.append(", ".join(_groupby_sql(q, g) for g in q.groupby))
    return " ".join(parts)


def _groupby_sql(q: QuerySpec, name: str) -> str:
    """GROUP BY entry, disambiguated when the alias shadows a base column.

    A groupby name refers to the select alias in this dialect. Engines
    resolve a bare name to a same-named source column first, so when the
    query also references a column of that name, emit the aliased
    expression itself instead of the name.
    """
    by_alias = {s.alias: s for s in q.select}
    item = by_alias.get(name)
    if item is None or isinstance(item.value, AggregateCall):
        return name
    if isinstance(item.value, ex.Column) and item.value.name == name:
        return name
    referenced = set()
    for s in q.select:
        if isinstance(s.value, AggregateCall):
            for a in s.value.args:
                referenced |= ex.columns(a)
            if s.value.filter is not None:
                referenced |= ex.columns(s.value.filter)
        else:
            referenced |= ex.columns(s.value)
    if q.where is not None:
        referenced |= ex.columns(q.where)
    if name in referenced:
        return ex.to_sql(item.value)
    return name


# ---------------------------------------------------------------------------
# Analysis operations

def apply_filter(q: QuerySpec, p: Optional[Predicate]) -> QuerySpec:
    """Conjoin p into the WHERE clause of the innermost aggregation source."""
    if p is None:
        return q
    if isinstance(q.source, QuerySpec):
        return QuerySpec(q.select, apply_filter(q.source, p), q.where, q.groupby, q.distinct)
    if isinstance(q.source, tuple):
        raise QueryError("cannot apply filter to a multi-relation query")
    return QuerySpec(q.select, q.source, ex.conjoin(q.where, p), q.groupby, q.distinct)


def single_source(q: QuerySpec) -> Optional[str]:
    """The unique base relation feeding aggregation, or None on zero/multiple."""
    names = set()
    _collect_sources(q, names)
    if len(names) == 1:
        return next(iter(names))
    return None


def _collect_sources(q: QuerySpec, out: set):
    src = q.source
    if isinstance(src, str):
        out.add(src)
    elif isinstance(src, QuerySpec):
        _collect_sources(src, out)
    else:
        for s in src:
            if isinstance(s, str):
                out.add(s)
            else:
                _collect_sources(s, out)


def aggregation_layer(q: QuerySpec) -> Optional[QuerySpec]:
    """The (unique) query level containing aggregate calls."""
    here = bool(q.aggregate_items())
    nested = aggregation_layer(q.source) if isinstance(q.source, QuerySpec) else None
    if here and nested is not None:
        raise QueryError("multiple aggregation layers are not supported")
    return q if here else nested


def _inline_mapping(layer: QuerySpec) -> dict:
    """Alias -> expression mapping for inlining one non-aggregating subquery."""
    if not isinstance(layer.source, QuerySpec):
        return {}
    inner = layer.source
    if inner.aggregate_items():
        raise QueryError("multiple aggregation layers are not supported")
    if isinstance(inner.source, QuerySpec):
        raise QueryError("more than one level of subquery nesting is not supported")
    return {s.alias: s.value for s in inner.select}


def resolve_groupby_expr(layer: QuerySpec, name: str) -> Scalar:
    by_alias = {s.alias: s for s in layer.select}
    item = by_alias.get(name)
    if item is None:
        e: Scalar = ex.Column(name)
    elif isinstance(item.value, AggregateCall):
        raise QueryError(f"groupby entry {name!r} refers to an aggregate")
    else:
        e = item.value
    mapping = _inline_mapping(layer)
    return ex.substitute(e, mapping) if mapping else e


def extract_groupby(q: QuerySpec) -> List[Scalar]:
    """Resolved dimension expressions (over base columns) for each groupby entry."""
    layer = aggregation_layer(q)
    if layer is None:
        layer = q
    return [resolve_groupby_expr(layer, g) for g in layer.groupby]


# ---------------------------------------------------------------------------
# Parser for the dialect subset

_TOKEN_RE = re.compile(r"""
    \s*(
        (?P<num>\d+\.\d+|\.\d+|\d+)
      | (?P<str>'(?:[^']|'')*')
      | (?P<ident>[A-Za-z_][A-Za-z_0-9]*)
      | (?P<op><>|<=|>=|=|<|>|\(|\)|,|\+|-|\*|/|%)
    )""", re.VERBOSE)

_KEYWORDS = {
    "SELECT", "DISTINCT", "FROM", "WHERE", "GROUP", "BY", "AS", "AND", "OR",
    "NOT", "BETWEEN", "IN", "IS", "NULL", "TRUE", "FALSE", "CASE", "WHEN",
    "THEN", "ELSE", "END", "LIKE", "ESCAPE", "FILTER", "CAST",
}


class _Tokens:
    def __init__(self, text: str):
        self.items: List[Tuple[str, str]] = []
        pos = 0
        while pos < len(text):
            m = _TOKEN_RE.match(text, pos)
            if not m:
                if text[pos:].strip():
                    raise QueryError(f"cannot tokenize near {text[pos:pos + 20]!r}")
                break
            pos = m.end()
            if m.group("num") is not None:
                self.items.append(("num", m.group("num")))
            elif m.group("str") is not None:
                self.items.append(("str", m.group("str")[1:-1].replace("''", "'")))
            elif m.group("ident") is not None:
                word = m.group("ident")
                if word.upper() in _KEYWORDS:
                    self.items.append(("kw", word.upper()))
                else:
                    self.items.append(("ident", word))
            else:
                self.items.append(("op", m.group("op")))
        self.i = 0

    def peek(self, offset=0):
        j = self.i + offset
        return self.items[j] if j < len(self.items) else ("eof", "")

    def next(self):
        tok = self.peek()
        self.i += 1
        return tok

    def accept(self, kind, value=None) -> bool:
        k, v = self.peek()
        if k == kind and (value is None or v == value):
            self.i += 1
            return True
        return False

    def expect(self, kind, value=None):
        k, v = self.next()
        if k != kind or (value is not None and v != value):
            raise QueryError(f"expected {value or kind}, got {v!r}")
        return v


def parse(text: str) -> QuerySpec:
    """Parse a query in the supported dialect subset."""
    toks = _Tokens(text)
    q = _parse_query(toks)
    if toks.peek()[0] != "eof":
        raise QueryError(f"trailing input at {toks.peek()[1]!r}")
    return q


def parse_predicate(text: str) -> Predicate:
    toks = _Tokens(text)
    p = _parse_or(toks)
    if toks.peek()[0] != "eof":
        raise QueryError(f"trailing input at {toks.peek()[1]!r}")
    return p


def _parse_query(toks: _Tokens) -> QuerySpec:
    toks.expect("kw", "SELECT")
    distinct = toks.accept("kw", "DISTINCT")
    select = [_parse_select_item(toks)]
    while toks.accept("op", ","):
        select.append(_parse_select_item(toks))
    toks.expect("kw", "FROM")
    sources: List[Union[str, QuerySpec]] = [_parse_source(toks)]
    while toks.accept("op", ","):
        sources.append(_parse_source(toks))
    source: Source = sources[0] if len(sources) == 1 else tuple(sources)
    where = None
    if toks.accept("kw", "WHERE"):
        where = _parse_or(toks)
    groupby: List[str] = []
    if toks.accept("kw", "GROUP"):
        toks.expect("kw", "BY")
        groupby.append(_parse_groupby_entry(toks, select))
        while toks.accept("op", ","):
            groupby.append(_parse_groupby_entry(toks, select))
    return QuerySpec(tuple(select), source, where, tuple(groupby), distinct)


def _parse_groupby_entry(toks: _Tokens, select: List[SelectItem]) -> str:
    """A groupby entry: an alias name, or an expression equal to one."""
    e = _parse_add(toks)
    if isinstance(e, ex.Column):
        return e.name
    for item in select:
        if item.value == e:
            return item.alias
    raise QueryError(f"GROUP BY expression {ex.to_sql(e)!r} matches no select item")


def _parse_source(toks: _Tokens):
    if toks.accept("op", "("):
        q = _parse_query(toks)
        toks.expect("op", ")")
        if toks.peek()[0] == "ident":  # optional subquery alias, discarded
            toks.next()
        return q
    name = toks.expect("ident")
    if toks.peek() == ("op", "("):
        raise QueryError("table functions are not supported")
    return name


def _parse_select_item(toks: _Tokens) -> SelectItem:
    value = _parse_select_value(toks)
    if toks.accept("kw", "AS"):
        alias = toks.expect("ident")
    elif isinstance(value, ex.Column):
        alias = value.name
    elif toks.peek()[0] == "ident":
        alias = toks.expect("ident")
    else:
        raise QueryError("select expression requires an alias")
    return SelectItem(alias, value)


def _parse_select_value(toks: _Tokens):
    k, v = toks.peek()
    if k == "ident" and v.upper() in AGGREGATE_NAMES and toks.peek(1) == ("op", "("):
        return _parse_aggregate(toks)
    return _parse_or(toks)


def _parse_aggregate(toks: _Tokens) -> AggregateCall:
    fn = toks.expect("ident").upper()
    toks.expect("op", "(")
    star = False
    distinct = False
    args: List[Scalar] = []
    if toks.accept("op", "*"):
        star = True
    else:
        distinct = toks.accept("kw", "DISTINCT")
        args.append(_parse_add(toks))
        while toks.accept("op", ","):
            args.append(_parse_add(toks))
    toks.expect("op", ")")
    filt = None
    if toks.accept("kw", "FILTER"):
        toks.expect("op", "(")
        toks.expect("kw", "WHERE")
        filt = _parse_or(toks)
        toks.expect("op", ")")
    return AggregateCall(fn, tuple(args), filt, distinct, star)


def _parse_or(toks: _Tokens):
    items = [_parse_and(toks)]
    while toks.accept("kw", "OR"):
        items.append(_parse_and(toks))
    return items[0] if len(items) == 1 else ex.Or(tuple(items))


def _parse_and(toks: _Tokens):
    items = [_parse_not(toks)]
    while toks.accept("kw", "AND"):
        items.append(_parse_not(toks))
    return items[0] if len(items) == 1 else ex.And(tuple(items))


def _parse_not(toks: _Tokens):
    if toks.accept("kw", "NOT"):
        return ex.Not(_parse_not(toks))
    return _parse_comparison(toks)


def _parse_comparison(toks: _Tokens):
    left = _parse_add(toks)
    k, v = toks.peek()
    if k == "op" and v in ("=", "<>", "<", "<=", ">", ">="):
        toks.next()
        return ex.Comparison(v, left, _parse_add(toks))
    if k == "kw" and v == "BETWEEN":
        toks.next()
        lo = _parse_add(toks)
        toks.expect("kw", "AND")
        hi = _parse_add(toks)
        return ex.Between(left, lo, hi)
    if k == "kw" and v == "IN":
        toks.next()
        toks.expect("op", "(")
        vals = [_parse_add(toks)]
        while toks.accept("op", ","):
            vals.append(_parse_add(toks))
        toks.expect("op", ")")
        return ex.InList(left, tuple(vals))
    if k == "kw" and v == "IS":
        toks.next()
        negated = toks.accept("kw", "NOT")
        toks.expect("kw", "NULL")
        return ex.IsNull(left, negated)
    if k == "kw" and v == "LIKE":
        toks.next()
        pattern = toks.expect("str")
        if toks.accept("kw", "ESCAPE"):
            toks.expect("str")
        return _like_to_match(left, pattern)
    return left


def _like_to_match(operand: Scalar, pattern: str) -> ex.Match:
    starts = pattern.startswith("%")
    ends = pattern.endswith("%") and not pattern.endswith("\\%")
    core = pattern[1 if starts else 0: -1 if ends else len(pattern)]
    core = core.replace("\\%", "%").replace("\\_", "_").replace("\\\\", "\\")
    if starts and ends:
        return ex.Match("contains", operand, core)
    if ends:
        return ex.Match("prefix", operand, core)
    if starts:
        return ex.Match("suffix", operand, core)
    raise QueryError("LIKE without wildcards is not a supported match form")


def _parse_add(toks: _Tokens):
    left = _parse_mul(toks)
    while True:
        k, v = toks.peek()
        if k == "op" and v in ("+", "-"):
            toks.next()
            left = ex.BinOp(v, left, _parse_mul(toks))
        else:
            return left


def _parse_mul(toks: _Tokens):
    left = _parse_unary(toks)
    while True:
        k, v = toks.peek()
        if k == "op" and v in ("*", "/", "%"):
            toks.next()
            left = ex.BinOp(v, left, _parse_unary(toks))
        else:
            return left


def _parse_unary(toks: _Tokens):
    if toks.accept("op", "-"):
        operand = _parse_unary(toks)
        if isinstance(operand, ex.Literal) and isinstance(operand.value, (int, float)):
            return ex.Literal(-operand.value)
        return ex.Neg(operand)
    return _parse_primary(toks)


def _parse_primary(toks: _Tokens):
    k, v = toks.next()
    if k == "num":
        return ex.Literal(float(v) if "." in v else int(v))
    if k == "str":
        return ex.Literal(v)
    if k == "kw" and v == "NULL":
        return ex.Literal(None)
    if k == "kw" and v in ("TRUE", "FALSE"):
        return ex.BoolLit(v == "TRUE")
    if k == "kw" and v == "CAST":
        toks.expect("op", "(")
        operand = _parse_add(toks)
        toks.expect("kw", "AS")
        to_type = toks.expect("ident")
        toks.expect("op", ")")
        return ex.Cast(operand, to_type)
    if k == "kw" and v == "CASE":
        whens = []
        while toks.accept("kw", "WHEN"):
            cond = _parse_or(toks)
            toks.expect("kw", "THEN")
            whens.append((cond, _parse_add(toks)))
        else_ = None
        if toks.accept("kw", "ELSE"):
            else_ = _parse_add(toks)
        toks.expect("kw", "END")
        return ex.Case(tuple(whens), else_)
    if k == "ident":
        if toks.peek() == ("op", "("):
            if v.upper() == "REGEXP_MATCHES":
                toks.next()
                operand = _parse_add(toks)
                toks.expect("op", ",")
                pattern = toks.expect("str")
                toks.expect("op", ")")
                return ex.Match("regexp", operand, pattern)
            toks.next()
            args = []
            if toks.peek() != ("op", ")"):
                args.append(_parse_add(toks))
                while toks.accept("op", ","):
                    args.append(_parse_add(toks))
            toks.expect("op", ")")
            return ex.Func(v, tuple(args))
        return ex.Column(v)
    if k == "op" and v == "(":
        inner = _parse_or(toks)
        toks.expect("op", ")")
        return inner
    raise QueryError(f"unexpected token {v!r}")
