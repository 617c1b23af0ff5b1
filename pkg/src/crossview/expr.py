"""Scalar and boolean expression trees with deterministic SQL serialization.

Expressions are immutable values. The same tree always serializes to the
same SQL text, which downstream code relies on for cache keys and
hash-derived table names. A small evaluator implements SQL semantics
(three-valued logic, null propagation) for use as a test oracle.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any, Mapping, Optional, Tuple, Union


class ExprError(ValueError):
    """Raised for malformed or unserializable expressions."""


# ---------------------------------------------------------------------------
# Node types

@dataclass(frozen=True)
class Column:
    name: str

    def __post_init__(self):
        if not self.name:
            raise ExprError("column name must be non-empty")


@dataclass(frozen=True)
class Literal:
    value: Union[int, float, str, bool, None]


@dataclass(frozen=True)
class BinOp:
    op: str  # + - * / %
    left: "Scalar"
    right: "Scalar"

    _OPS = ("+", "-", "*", "/", "%")

    def __post_init__(self):
        if self.op not in self._OPS:
            raise ExprError(f"unsupported operator {self.op!r}")


@dataclass(frozen=True)
class Neg:
    operand: "Scalar"


@dataclass(frozen=True)
class Func:
    """Scalar function call, e.g. FLOOR, LN, POW, LEAST."""
    name: str
    args: Tuple["Scalar", ...]

    def __post_init__(self):
        object.__setattr__(self, "args", tuple(self.args))
        object.__setattr__(self, "name", self.name.upper())


@dataclass(frozen=True)
class Cast:
    operand: "Scalar"
    to_type: str  # INTEGER, DOUBLE, VARCHAR

    def __post_init__(self):
        object.__setattr__(self, "to_type", self.to_type.upper())


@dataclass(frozen=True)
class Case:
    whens: Tuple[Tuple["Predicate", "Scalar"], ...]
    else_: Optional["Scalar"] = None

    def __post_init__(self):
        object.__setattr__(self, "whens", tuple(tuple(w) for w in self.whens))
        if not self.whens:
            raise ExprError("CASE requires at least one WHEN")


@dataclass(frozen=True)
class Comparison:
    op: str  # = <> < <= > >=
    left: "Scalar"
    right: "Scalar"

    _OPS = ("=", "<>", "<", "<=", ">", ">=")

    def __post_init__(self):
        if self.op not in self._OPS:
            raise ExprError(f"unsupported comparison {self.op!r}")


@dataclass(frozen=True)
class Between:
    operand: "Scalar"
    lo: "Scalar"
    hi: "Scalar"


@dataclass(frozen=True)
class InList:
    operand: "Scalar"
    values: Tuple["Scalar", ...]

    def __post_init__(self):
        object.__setattr__(self, "values", tuple(self.values))
        if not self.values:
            raise ExprError("IN list must be non-empty")


@dataclass(frozen=True)
class And:
    operands: Tuple["Predicate", ...]

    def __post_init__(self):
        object.__setattr__(self, "operands", tuple(self.operands))
        if len(self.operands) < 1:
            raise ExprError("AND requires at least one operand")


@dataclass(frozen=True)
class Or:
    operands: Tuple["Predicate", ...]

    def __post_init__(self):
        object.__setattr__(self, "operands", tuple(self.operands))
        if len(self.operands) < 1:
            raise ExprError("OR requires at least one operand")


@dataclass(frozen=True)
class Not:
    operand: "Predicate"


@dataclass(frozen=True)
class IsNull:
    operand: "Scalar"
    negated: bool = False


@dataclass(frozen=True)
class BoolLit:
    value: bool


@dataclass(frozen=True)
class Match:
    """Pattern-match predicate: prefix, suffix, contains, or regexp."""
    method: str  # prefix | suffix | contains | regexp
    operand: "Scalar"
    pattern: str

    _METHODS = ("prefix", "suffix", "contains", "regexp")

    def __post_init__(self):
        if self.method not in self._METHODS:
            raise ExprError(f"unsupported match method {self.method!r}")


Scalar = Union[Column, Literal, BinOp, Neg, Func, Cast, Case]
Predicate = Union[Comparison, Between, InList, And, Or, Not, IsNull, BoolLit, Match]
Expr = Union[Scalar, Predicate]

FALSE = BoolLit(False)
TRUE = BoolLit(True)


def conjoin(*preds: Optional[Predicate]) -> Optional[Predicate]:
    """AND together predicates, flattening nested ANDs; None means no filter."""
    items = []
    for p in preds:
        if p is None:
            continue
        if isinstance(p, And):
            items.extend(p.operands)
        else:
            items.append(p)
    if not items:
        return None
    if len(items) == 1:
        return items[0]
    return And(tuple(items))


# ---------------------------------------------------------------------------
# SQL serialization

_PREC = {"OR": 1, "AND": 2, "NOT": 3, "CMP": 4, "+": 5, "-": 5, "*": 6, "/": 6, "%": 6, "NEG": 7}


def _quote_str(s: str) -> str:
    return "'" + s.replace("'", "''") + "'"


def _lit_sql(v) -> str:
    if v is None:
        return "NULL"
    if isinstance(v, bool):
        return "TRUE" if v else "FALSE"
    if isinstance(v, int):
        return str(v)
    if isinstance(v, float):
        if math.isnan(v) or math.isinf(v):
            raise ExprError("non-finite literal not serializable")
        if v == int(v) and abs(v) < 1e15:
            return f"{int(v)}.0"
        return repr(v)
    if isinstance(v, str):
        return _quote_str(v)
    raise ExprError(f"unsupported literal {v!r}")


def to_sql(e: Expr) -> str:
    """Serialize an expression to SQL text. Deterministic: equal trees yield equal bytes."""
    return _sql(e, 0)


def _sql(e: Expr, parent_prec: int) -> str:
    if isinstance(e, Column):
        return e.name
    if isinstance(e, Literal):
        return _lit_sql(e.value)
    if isinstance(e, BoolLit):
        return "TRUE" if e.value else "FALSE"
    if isinstance(e, BinOp):
        p = _PREC[e.op]
        # left-associative: right child at same precedence needs parens for - / %
        left = _sql(e.left, p)
        right = _sql(e.right, p + (1 if e.op in ("-", "/", "%") else 0))
        text = f"{left} {e.op} {right}"
        return f"({text})" if p < parent_prec else text
    if isinstance(e, Neg):
        inner = _sql(e.operand, _PREC["NEG"])
        if inner.startswith("-"):
            inner = f"({inner})"  # avoid "--", which SQL reads as a comment
        text = f"-{inner}"
        return f"({text})" if _PREC["NEG"] < parent_prec else text
    if isinstance(e, Func):
        return f"{e.name}({', '.join(_sql(a, 0) for a in e.args)})"
    if isinstance(e, Cast):
        return f"CAST({_sql(e.operand, 0)} AS {e.to_type})"
    if isinstance(e, Case):
        parts = ["CASE"]
        for cond, val in e.whens:
            parts.append(f"WHEN {_sql(cond, 0)} THEN {_sql(val, 0)}")
        if e.else_ is not None:
            parts.append(f"ELSE {_sql(e.else_, 0)}")
        parts.append("END")
        return " ".join(parts)
    if isinstance(e, Comparison):
        p = _PREC["CMP"]
        text = f"{_sql(e.left, p)} {e.op} {_sql(e.right, p)}"
        return f"({text})" if p < parent_prec else text
    if isinstance(e, Between):
        p = _PREC["CMP"]
        text = f"{_sql(e.operand, p)} BETWEEN {_sql(e.lo, p)} AND {_sql(e.hi, p)}"
        return f"({text})" if p < parent_prec else text
    if isinstance(e, InList):
        p = _PREC["CMP"]
        text = f"{_sql(e.operand, p)} IN ({', '.join(_sql(v, 0) for v in e.values)})"
        return f"({text})" if p < parent_prec else text
    if isinstance(e, IsNull):
        p = _PREC["CMP"]
        op = "IS NOT NULL" if e.negated else "IS NULL"
        text = f"{_sql(e.operand, p)} {op}"
        return f"({text})" if p < parent_prec else text
    if isinstance(e, And):
        p = _PREC["AND"]
        if len(e.operands) == 1:
            return _sql(e.operands[0], parent_prec)
        text = " AND ".join(_sql(x, p) for x in e.operands)
        return f"({text})" if p < parent_prec else text
    if isinstance(e, Or):
        p = _PREC["OR"]
        if len(e.operands) == 1:
            return _sql(e.operands[0], parent_prec)
        text = " OR ".join(_sql(x, p) for x in e.operands)
        return f"({text})" if p < parent_prec else text
    if isinstance(e, Not):
        p = _PREC["NOT"]
        text = f"NOT {_sql(e.operand, p)}"
        return f"({text})" if p < parent_prec else text
    if isinstance(e, Match):
        p = _PREC["CMP"]
        esc = e.pattern.replace("\\", "\\\\").replace("%", "\\%").replace("_", "\\_")
        if e.method == "prefix":
            text = f"{_sql(e.operand, p)} LIKE {_quote_str(esc + '%')} ESCAPE '\\'"
        elif e.method == "suffix":
            text = f"{_sql(e.operand, p)} LIKE {_quote_str('%' + esc)} ESCAPE '\\'"
        elif e.method == "contains":
            text = f"{_sql(e.operand, p)} LIKE {_quote_str('%' + esc + '%')} ESCAPE '\\'"
        else:
            text = f"REGEXP_MATCHES({_sql(e.operand, p)}, {_quote_str(e.pattern)})"
        return f"({text})" if p < parent_prec else text
    raise ExprError(f"cannot serialize {e!r}")


# ---------------------------------------------------------------------------
# Evaluation (test oracle; mirrors SQL null semantics)

def _round_half_away(x: float) -> float:
    return math.floor(x + 0.5) if x >= 0 else math.ceil(x - 0.5)


_FUNCS = {
    "FLOOR": lambda x: float(math.floor(x)),
    "CEIL": lambda x: float(math.ceil(x)),
    "ROUND": _round_half_away,
    "ABS": abs,
    "LN": math.log,
    "EXP": math.exp,
    "SQRT": math.sqrt,
    "SIGN": lambda x: float((x > 0) - (x < 0)),
    "POW": math.pow,
    "POWER": math.pow,
    "LOG": math.log10,
}


def evaluate(e: Expr, row: Mapping[str, Any]):
    """Evaluate an expression against a row mapping. Returns None for SQL NULL."""
    if isinstance(e, Column):
        if e.name not in row:
            raise ExprError(f"unknown column {e.name!r}")
        return row[e.name]
    if isinstance(e, Literal):
        return e.value
    if isinstance(e, BoolLit):
        return e.value
    if isinstance(e, BinOp):
        l = evaluate(e.left, row)
        r = evaluate(e.right, row)
        if l is None or r is None:
            return None
        if e.op == "+":
            return l + r
        if e.op == "-":
            return l - r
        if e.op == "*":
            return l * r
        if e.op == "/":
            return None if r == 0 else l / r
        return None if r == 0 else math.fmod(l, r)
    if isinstance(e, Neg):
        v = evaluate(e.operand, row)
        return None if v is None else -v
    if isinstance(e, Func):
        name = e.name
        args = [evaluate(a, row) for a in e.args]
        if name in ("LEAST", "GREATEST"):
            vals = [a for a in args if a is not None]
            if not vals:
                return None
            return min(vals) if name == "LEAST" else max(vals)
        if any(a is None for a in args):
            return None
        fn = _FUNCS.get(name)
        if fn is None:
            raise ExprError(f"no evaluator for function {name}")
        return fn(*args)
    if isinstance(e, Cast):
        v = evaluate(e.operand, row)
        if v is None:
            return None
        if e.to_type in ("INTEGER", "BIGINT", "INT"):
            return int(v)
        if e.to_type in ("DOUBLE", "REAL", "FLOAT"):
            return float(v)
        return str(v)
    if isinstance(e, Case):
        for cond, val in e.whens:
            if evaluate(cond, row) is True:
                return evaluate(val, row)
        return evaluate(e.else_, row) if e.else_ is not None else None
    if isinstance(e, Comparison):
        l = evaluate(e.left, row)
        r = evaluate(e.right, row)
        if l is None or r is None:
            return None
        return {"=": l == r, "<>": l != r, "<": l < r,
                "<=": l <= r, ">": l > r, ">=": l >= r}[e.op]
    if isinstance(e, Between):
        v = evaluate(e.operand, row)
        lo = evaluate(e.lo, row)
        hi = evaluate(e.hi, row)
        if v is None or lo is None or hi is None:
            return None
        return lo <= v <= hi
    if isinstance(e, InList):
        v = evaluate(e.operand, row)
        if v is None:
            return None
        any_null = False
        for item in e.values:
            iv = evaluate(item, row)
            if iv is None:
                any_null = True
            elif iv == v:
                return True
        return None if any_null else False
    if isinstance(e, IsNull):
        v = evaluate(e.operand, row)
        return (v is not None) if e.negated else (v is None)
    if isinstance(e, And):
        saw_null = False
        for p in e.operands:
            r = evaluate(p, row)
            if r is False:
                return False
            if r is None:
                saw_null = True
        return None if saw_null else True
    if isinstance(e, Or):
        saw_null = False
        for p in e.operands:
            r = evaluate(p, row)
            if r is True:
                return True
            if r is None:
                saw_null = True
        return None if saw_null else False
    if isinstance(e, Not):
        r = evaluate(e.operand, row)
        return None if r is None else (not r)
    if isinstance(e, Match):
        v = evaluate(e.operand, row)
        if v is None:
            return None
        s = str(v)
        if e.method == "prefix":
            return s.startswith(e.pattern)
        if e.method == "suffix":
            return s.endswith(e.pattern)
        if e.method == "contains":
            return e.pattern in s
        import re
        return re.search(e.pattern, s) is not None
    raise ExprError(f"cannot evaluate {e!r}")


def columns(e: Expr) -> set:
    """All column names referenced by an expression."""
    out = set()
    _collect_columns(e, out)
    return out


def _collect_columns(e: Expr, out: set):
    if isinstance(e, Column):
        out.add(e.name)
    elif isinstance(e, (Literal, BoolLit)):
        pass
    elif isinstance(e, BinOp):
        _collect_columns(e.left, out)
        _collect_columns(e.right, out)
    elif isinstance(e, (Neg, Not, Cast, IsNull)):
        _collect_columns(e.operand, out)
    elif isinstance(e, Func):
        for a in e.args:
            _collect_columns(a, out)
    elif isinstance(e, Case):
        for cond, val in e.whens:
            _collect_columns(cond, out)
            _collect_columns(val, out)
        if e.else_ is not None:
            _collect_columns(e.else_, out)
    elif isinstance(e, Comparison):
        _collect_columns(e.left, out)
        _collect_columns(e.right, out)
    elif isinstance(e, Between):
        _collect_columns(e.operand, out)
        _collect_columns(e.lo, out)
        _collect_columns(e.hi, out)
    elif isinstance(e, InList):
        _collect_columns(e.operand, out)
        for v in e.values:
            _collect_columns(v, out)
    elif isinstance(e, (And, Or)):
        for p in e.operands:
            _collect_columns(p, out)
    elif isinstance(e, Match):
        _collect_columns(e.operand, out)
    else:
        raise ExprError(f"unknown node {e!r}")


def substitute(e: Expr, mapping: Mapping[str, Expr]) -> Expr:
    """Replace column references per mapping (used to inline subquery aliases)."""
    if isinstance(e, Column):
        return mapping.get(e.name, e)
    if isinstance(e, (Literal, BoolLit)):
        return e
    if isinstance(e, BinOp):
        return BinOp(e.op, substitute(e.left, mapping), substitute(e.right, mapping))
    if isinstance(e, Neg):
        return Neg(substitute(e.operand, mapping))
    if isinstance(e, Func):
        return Func(e.name, tuple(substitute(a, mapping) for a in e.args))
    if isinstance(e, Cast):
        return Cast(substitute(e.operand, mapping), e.to_type)
    if isinstance(e, Case):
        return Case(tuple((substitute(c, mapping), substitute(v, mapping)) for c, v in e.whens),
                    substitute(e.else_, mapping) if e.else_ is not None else None)
    if isinstance(e, Comparison):
        return Comparison(e.op, substitute(e.left, mapping), substitute(e.right, mapping))
    if isinstance(e, Between):
        return Between(substitute(e.operand, mapping), substitute(e.lo, mapping),
                       substitute(e.hi, mapping))
    if isinstance(e, InList):
        return InList(substitute(e.operand, mapping), tuple(substitute(v, mapping) for v in e.values))
    if isinstance(e, And):
        return And(tuple(substitute(p, mapping) for p in e.operands))
    if isinstance(e, Or):
        return Or(tuple(substitute(p, mapping) for p in e.operands))
    if isinstance(e, Not):
        return Not(substitute(e.operand, mapping))
    if isinstance(e, IsNull):
        return IsNull(substitute(e.operand, mapping), e.negated)
    if isinstance(e, Match):
        return Match(e.method, substitute(e.operand, mapping), e.pattern)
    raise ExprError(f"unknown node {e!r}")


# ---------------------------------------------------------------------------
# JSON wire codec (restricted tree; used by the session server)

def to_json(e: Expr) -> dict:
    if isinstance(e, Column):
        return {"op": "column", "name": e.name}
    if isinstance(e, Literal):
        return {"op": "literal", "value": e.value}
    if isinstance(e, BoolLit):
        return {"op": "literal", "value": e.value}
    if isinstance(e, BinOp):
        return {"op": e.op, "left": to_json(e.left), "right": to_json(e.right)}
    if isinstance(e, Neg):
        return {"op": "neg", "operand": to_json(e.operand)}
    if isinstance(e, Func):
        return {"op": "call", "name": e.name, "args": [to_json(a) for a in e.args]}
    if isinstance(e, Cast):
        return {"op": "cast", "operand": to_json(e.operand), "type": e.to_type}
    if isinstance(e, Comparison):
        return {"op": e.op, "left": to_json(e.left), "right": to_json(e.right)}
    if isinstance(e, Between):
        return {"op": "between", "operand": to_json(e.operand),
                "lo": to_json(e.lo), "hi": to_json(e.hi)}
    if isinstance(e, InList):
        return {"op": "in", "operand": to_json(e.operand), "values": [to_json(v) for v in e.values]}
    if isinstance(e, And):
        return {"op": "and", "operands": [to_json(p) for p in e.operands]}
    if isinstance(e, Or):
        return {"op": "or", "operands": [to_json(p) for p in e.operands]}
    if isinstance(e, Not):
        return {"op": "not", "operand": to_json(e.operand)}
    if isinstance(e, IsNull):
        return {"op": "isnull", "operand": to_json(e.operand), "negated": e.negated}
    if isinstance(e, Match):
        return {"op": "match", "method": e.method, "operand": to_json(e.operand),
                "pattern": e.pattern}
    raise ExprError(f"cannot encode {e!r}")


def from_json(d: dict) -> Expr:
    if not isinstance(d, dict) or "op" not in d:
        raise ExprError(f"malformed expression node: {d!r}")
    op = d["op"]
    if op == "column":
        return Column(d["name"])
    if op == "literal":
        v = d["value"]
        if v is not None and not isinstance(v, (int, float, str, bool)):
            raise ExprError(f"bad literal {v!r}")
        return Literal(v)
    if op in BinOp._OPS:
        return BinOp(op, from_json(d["left"]), from_json(d["right"]))
    if op == "neg":
        return Neg(from_json(d["operand"]))
    if op == "call":
        return Func(d["name"], tuple(from_json(a) for a in d["args"]))
    if op == "cast":
        return Cast(from_json(d["operand"]), d["type"])
    if op in Comparison._OPS:
        return Comparison(op, from_json(d["left"]), from_json(d["right"]))
    if op == "between":
        return Between(from_json(d["operand"]), from_json(d["lo"]), from_json(d["hi"]))
    if op == "in":
        return InList(from_json(d["operand"]), tuple(from_json(v) for v in d["values"]))
    if op == "and":
        return And(tuple(from_json(p) for p in d["operands"]))
    if op == "or":
        return Or(tuple(from_json(p) for p in d["operands"]))
    if op == "not":
        return Not(from_json(d["operand"]))
    if op == "isnull":
        return IsNull(from_json(d["operand"]), bool(d.get("negated", False)))
    if op == "match":
        return Match(d["method"], from_json(d["operand"]), d["pattern"])
    raise ExprError(f"unknown op {op!r}")
