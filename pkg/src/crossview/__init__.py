"""Cross-filtered interactive views over SQL, accelerated by
automatically planned pre-aggregated materialized tables."""

from . import expr
from .compat import CompatibilityReport, check_compatibility
from .coordinator import LRUCache, Session
from .executor import INTERACTIVE, PREFETCH, QueryResult, SQLiteExecutor
from .planner import (MaterializedViewPlan, max_view_rows, plan, table_name,
                      update_query)
from .query import (AggregateCall, ClientViewDescriptor, QuerySpec, SelectItem,
                    apply_filter, parse, parse_predicate, to_sql)
from .scales import (BinSpec, ScaleDescriptor, bin_expression, bin_value,
                     interval_to_bins, pixel_to_value)
from .selection import Clause, ClauseMeta, Selection

__version__ = "0.1.0"

__all__ = [
    "AggregateCall", "BinSpec", "Clause", "ClauseMeta", "ClientViewDescriptor",
    "CompatibilityReport", "INTERACTIVE", "LRUCache", "MaterializedViewPlan",
    "PREFETCH", "QueryResult", "QuerySpec", "SQLiteExecutor", "ScaleDescriptor",
    "SelectItem", "Selection", "Session", "apply_filter", "bin_expression",
    "bin_value", "check_compatibility", "expr", "interval_to_bins",
    "max_view_rows", "parse", "parse_predicate", "pixel_to_value", "plan",
    "table_name", "to_sql", "update_query",
]
