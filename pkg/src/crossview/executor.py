"""Database executor abstraction and the embedded SQLite backend.

The executor accepts SQL text at two priorities (interactive before
prefetch), runs statements on a dedicated worker thread, and returns
columnar results. The SQLite backend registers the scalar and aggregate
functions of the target analytical dialect (LEAST/GREATEST, PRODUCT,
ARG_MIN/ARG_MAX, variance, covariance, and regression aggregates) so the
same generated SQL runs unchanged, and attaches a `mosaic` schema
database for persisted pre-aggregated tables.

Large materialized-view creations avoid SQLite's sort-based GROUP BY
where possible: plans carrying an upsert strategy accumulate cells by
primary-key upserts into a small temp table, and otherwise large scans
are sharded over rowid ranges and merged.
"""

from __future__ import annotations

import logging
import math
import os
import sqlite3
import threading
import time
from collections import deque
from concurrent.futures import Future
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

log = logging.getLogger(__name__)

INTERACTIVE = 0
PREFETCH = 1


class ExecutorError(RuntimeError):
    pass


@dataclass
class QueryResult:
    columns: Dict[str, list]
    row_count: int
    elapsed_ms: float

    @property
    def rows(self) -> List[tuple]:
        names = list(self.columns)
        return list(zip(*(self.columns[n] for n in names))) if names else []


def _columnar(cursor, elapsed_ms: float) -> QueryResult:
    if cursor.description is None:
        return QueryResult({}, 0, elapsed_ms)
    names = [d[0] for d in cursor.description]
    rows = cursor.fetchall()
    cols = {n: [r[i] for r in rows] for i, n in enumerate(names)}
    return QueryResult(cols, len(rows), elapsed_ms)


# ---------------------------------------------------------------------------
# User-defined aggregates (DuckDB-dialect functions missing from SQLite)

class _Product:
    def __init__(self):
        self.value = None

    def step(self, x):
        if x is None:
            return
        self.value = x if self.value is None else self.value * x

    def finalize(self):
        return self.value


class _Geomean:
    def __init__(self):
        self.logsum = 0.0
        self.n = 0

    def step(self, x):
        if x is None:
            return
        self.logsum += math.log(x)
        self.n += 1

    def finalize(self):
        return math.exp(self.logsum / self.n) if self.n else None


class _ArgExtreme:
    cmp = staticmethod(lambda new, cur: new < cur)

    def __init__(self):
        self.best = None
        self.arg = None

    def step(self, arg, val):
        if val is None:
            return
        if self.best is None or self.cmp(val, self.best):
            self.best = val
            self.arg = arg

    def finalize(self):
        return self.arg


class _ArgMin(_ArgExtreme):
    cmp = staticmethod(lambda new, cur: new < cur)


class _ArgMax(_ArgExtreme):
    cmp = staticmethod(lambda new, cur: new > cur)


class _BitAgg:
    op = staticmethod(lambda a, b: a & b)

    def __init__(self):
        self.value = None

    def step(self, x):
        if x is None:
            return
        x = int(x)
        self.value = x if self.value is None else self.op(self.value, x)

    def finalize(self):
        return self.value


class _BitAnd(_BitAgg):
    op = staticmethod(lambda a, b: a & b)


class _BitOr(_BitAgg):
    op = staticmethod(lambda a, b: a | b)


class _BitXor(_BitAgg):
    op = staticmethod(lambda a, b: a ^ b)


class _BoolAnd:
    def __init__(self):
        self.value = None

    def step(self, x):
        if x is None:
            return
        self.value = bool(x) if self.value is None else (self.value and bool(x))

    def finalize(self):
        return None if self.value is None else int(self.value)


class _BoolOr(_BoolAnd):
    def step(self, x):
        if x is None:
            return
        self.value = bool(x) if self.value is None else (self.value or bool(x))


class _Welford:
    """Numerically stable univariate moments."""

    def __init__(self):
        self.n = 0
        self.mean = 0.0
        self.m2 = 0.0

    def step(self, x):
        if x is None:
            return
        self.n += 1
        d = x - self.mean
        self.mean += d / self.n
        self.m2 += d * (x - self.mean)


class _VarPop(_Welford):
    def finalize(self):
        return self.m2 / self.n if self.n >= 1 else None


class _VarSamp(_Welford):
    def finalize(self):
        return self.m2 / (self.n - 1) if self.n >= 2 else None


class _StddevPop(_VarPop):
    def finalize(self):
        v = super().finalize()
        return math.sqrt(v) if v is not None else None


class _StddevSamp(_VarSamp):
    def finalize(self):
        v = super().finalize()
        return math.sqrt(v) if v is not None else None


class _Bivariate:
    """Stable bivariate moments; SQL argument convention is FN(y, x)."""

    def __init__(self):
        self.n = 0
        self.mx = 0.0
        self.my = 0.0
        self.sxx = 0.0
        self.syy = 0.0
        self.sxy = 0.0

    def step(self, y, x):
        if x is None or y is None:
            return
        self.n += 1
        dx = x - self.mx
        dy = y - self.my
        self.mx += dx / self.n
        self.my += dy / self.n
        self.sxx += dx * (x - self.mx)
        self.syy += dy * (y - self.my)
        self.sxy += dx * (y - self.my)


class _CovarPop(_Bivariate):
    def finalize(self):
        return self.sxy / self.n if self.n >= 1 else None


class _CovarSamp(_Bivariate):
    def finalize(self):
        return self.sxy / (self.n - 1) if self.n >= 2 else None


class _Corr(_Bivariate):
    def finalize(self):
        denom = self.sxx * self.syy
        return self.sxy / math.sqrt(denom) if self.n >= 1 and denom > 0 else None


class _RegrCount(_Bivariate):
    def finalize(self):
        return self.n


class _RegrAvgx(_Bivariate):
    def finalize(self):
        return self.mx if self.n else None


class _RegrAvgy(_Bivariate):
    def finalize(self):
        return self.my if self.n else None


class _RegrSxx(_Bivariate):
    def finalize(self):
        return self.sxx if self.n else None


class _RegrSyy(_Bivariate):
    def finalize(self):
        return self.syy if self.n else None


class _RegrSxy(_Bivariate):
    def finalize(self):
        return self.sxy if self.n else None


class _RegrSlope(_Bivariate):
    def finalize(self):
        return self.sxy / self.sxx if self.n and self.sxx != 0 else None


class _RegrIntercept(_Bivariate):
    def finalize(self):
        if not self.n or self.sxx == 0:
            return None
        return self.my - (self.sxy / self.sxx) * self.mx


class _RegrR2(_Bivariate):
    def finalize(self):
        denom = self.sxx * self.syy
        return (self.sxy * self.sxy) / denom if self.n and denom != 0 else None


_AGGREGATES = {
    "product": (1, _Product),
    "geomean": (1, _Geomean),
    "arg_min": (2, _ArgMin),
    "arg_max": (2, _ArgMax),
    "bit_and": (1, _BitAnd),
    "bit_or": (1, _BitOr),
    "bit_xor": (1, _BitXor),
    "bool_and": (1, _BoolAnd),
    "bool_or": (1, _BoolOr),
    "var_pop": (1, _VarPop),
    "var_samp": (1, _VarSamp),
    "stddev_pop": (1, _StddevPop),
    "stddev_samp": (1, _StddevSamp),
    "covar_pop": (2, _CovarPop),
    "covar_samp": (2, _CovarSamp),
    "corr": (2, _Corr),
    "regr_count": (2, _RegrCount),
    "regr_avgx": (2, _RegrAvgx),
    "regr_avgy": (2, _RegrAvgy),
    "regr_sxx": (2, _RegrSxx),
    "regr_syy": (2, _RegrSyy),
    "regr_sxy": (2, _RegrSxy),
    "regr_slope": (2, _RegrSlope),
    "regr_intercept": (2, _RegrIntercept),
    "regr_r2": (2, _RegrR2),
}


def _least(*args):
    if any(a is None for a in args):
        return None
    return min(args)


def _greatest(*args):
    if any(a is None for a in args):
        return None
    return max(args)


def _regexp_matches(text, pattern):
    if text is None:
        return None
    import re
    return 1 if re.search(pattern, str(text)) else 0


def register_functions(conn: sqlite3.Connection):
    conn.create_function("least", -1, _least, deterministic=True)
    conn.create_function("greatest", -1, _greatest, deterministic=True)
    conn.create_function("regexp_matches", 2, _regexp_matches, deterministic=True)
    for name, (nargs, cls) in _AGGREGATES.items():
        conn.create_aggregate(name, nargs, cls)


# ---------------------------------------------------------------------------
# Executor

class SQLiteExecutor:
    """Two-priority SQL executor over an embedded SQLite database.

    Interactive statements always run before queued prefetch statements.
    All execution happens on one worker thread; shard scans for large
    view creations use short-lived read-only helper connections.
    """

    def __init__(self, db_path: str = ":memory:", mosaic_path: Optional[str] = None,
                 shard_rows: int = 2_500_000, max_shard_workers: int = 4):
        self.db_path = db_path
        if mosaic_path is None:
            mosaic_path = ":memory:" if db_path == ":memory:" else db_path + ".mosaic"
        self.mosaic_path = mosaic_path
        self.shard_rows = shard_rows
        self.max_shard_workers = max_shard_workers
        self.log: List[Tuple[str, int]] = []  # executed (sql, priority), in order
        self._queues = (deque(), deque())     # interactive, prefetch
        self._cond = threading.Condition()
        self._closed = False
        self._ready = threading.Event()
        self._thread = threading.Thread(target=self._worker, daemon=True)
        self._thread.start()
        self._ready.wait()

    # -- public API --------------------------------------------------------

    def submit(self, sql: str, priority: int = INTERACTIVE) -> "Future[QueryResult]":
        fut: Future = Future()
        with self._cond:
            if self._closed:
                raise ExecutorError("executor is closed")
            self._queues[priority].append((lambda: self._execute(sql, priority), fut))
            self._cond.notify()
        return fut

    def run(self, sql: str, priority: int = INTERACTIVE) -> QueryResult:
        return self.submit(sql, priority).result()

    def call(self, fn) -> "Future":
        """Run an arbitrary callable(conn) on the worker thread."""
        fut: Future = Future()
        with self._cond:
            self._queues[INTERACTIVE].append((lambda: fn(self._conn), fut))
            self._cond.notify()
        return fut

    def table_exists(self, name: str) -> bool:
        schema, _, bare = name.partition(".")
        if not bare:
            schema, bare = "main", name

        def check(conn):
            cur = conn.execute(
                f"SELECT COUNT(*) FROM {schema}.sqlite_master WHERE type='table' AND name=?",
                (bare,))
            return cur.fetchone()[0] > 0

        return self.call(check).result()

    def load_table(self, name: str, columns: Dict[str, Sequence]):
        """Create and populate a table from columnar data."""
        names = list(columns)
        arrays = [list(columns[n]) for n in names]

        def do(conn):
            conn.execute(f"DROP TABLE IF EXISTS {name}")
            conn.execute(f"CREATE TABLE {name}({', '.join(names)})")
            rows = zip(*arrays) if arrays else []
            conn.executemany(
                f"INSERT INTO {name} VALUES ({', '.join('?' for _ in names)})", rows)
            conn.commit()

        return self.call(do).result()

    def materialize(self, plan, priority: int = INTERACTIVE,
                    wait: bool = True) -> Optional[QueryResult]:
        """Create a plan's table, sharding the scan when profitable."""
        fut: Future = Future()
        with self._cond:
            self._queues[priority].append((lambda: self._materialize(plan, priority), fut))
            self._cond.notify()
        return fut.result() if wait else fut

    def close(self):
        with self._cond:
            self._closed = True
            self._cond.notify_all()
        self._thread.join(timeout=10)

    # -- worker ------------------------------------------------------------

    def _connect(self, path: str, read_only: bool = False) -> sqlite3.Connection:
        if read_only and path != ":memory:":
            conn = sqlite3.connect(f"file:{path}?mode=ro", uri=True)
        else:
            conn = sqlite3.connect(path)
        conn.execute("PRAGMA temp_store=MEMORY")
        conn.execute("PRAGMA cache_size=-524288")  # 512MB page cache
        if not read_only:
            conn.execute("PRAGMA journal_mode=OFF")
            conn.execute("PRAGMA synchronous=OFF")
        register_functions(conn)
        return conn

    def _worker(self):
        self._conn = self._connect(self.db_path)
        self._conn.execute(f"ATTACH DATABASE '{self.mosaic_path}' AS mosaic")
        self._ready.set()
        while True:
            with self._cond:
                while not self._queues[0] and not self._queues[1] and not self._closed:
                    self._cond.wait()
                if self._closed and not self._queues[0] and not self._queues[1]:
                    break
                task, fut = (self._queues[0].popleft() if self._queues[0]
                             else self._queues[1].popleft())
            try:
                fut.set_result(task())
            except Exception as err:  # delivered to the caller, never kills the loop
                fut.set_exception(err)
        self._conn.close()

    def _execute(self, sql: str, priority: int) -> QueryResult:
        start = time.perf_counter()
        stripped = sql.strip()
        self.log.append((sql, priority))
        if stripped.upper().startswith("CREATE SCHEMA"):
            # schemas are modeled as attached databases; mosaic is pre-attached
            return QueryResult({}, 0, (time.perf_counter() - start) * 1000)
        cur = self._conn.execute(sql)
        result = _columnar(cur, 0.0)
        self._conn.commit()
        result.elapsed_ms = (time.perf_counter() - start) * 1000
        return result

    def _materialize(self, plan, priority: int = INTERACTIVE) -> QueryResult:
        start = time.perf_counter()
        nrows = 0
        if plan.shardable and self.db_path != ":memory:":
            row = self._conn.execute(f"SELECT MAX(rowid) FROM {plan.base}").fetchone()
            nrows = row[0] or 0
        if nrows > self.shard_rows and plan.upsert is not None:
            try:
                return self._materialize_upsert(plan, priority, start)
            except Exception as err:
                log.warning("upsert creation failed for %s, falling back: %s",
                            plan.name, err)
        if nrows <= self.shard_rows:
            return self._execute(plan.creation, priority)
        self.log.append((plan.creation, priority))
        shards = min(math.ceil(nrows / self.shard_rows), 16)
        return self._materialize_sharded(plan, nrows, shards, start)

    def _materialize_upsert(self, plan, priority: int, start: float) -> QueryResult:
        u = plan.upsert
        schema, _, bare = plan.name.partition(".")
        if not bare:
            schema, bare = "main", plan.name
        exists = self._conn.execute(
            f"SELECT COUNT(*) FROM {schema}.sqlite_master "
            f"WHERE type='table' AND name=?", (bare,)).fetchone()[0]
        self.log.append((plan.creation, priority))
        if not exists:
            self.log.append((u.insert_sql, priority))
            self._conn.execute("DROP TABLE IF EXISTS temp.pre_upsert")
            self._conn.execute(u.create_sql)
            self._conn.execute(u.insert_sql)
            self._conn.execute(
                f"CREATE TABLE IF NOT EXISTS {plan.name} AS {u.assemble_select}")
            self._conn.execute("DROP TABLE temp.pre_upsert")
            self._conn.commit()
        return QueryResult({}, 0, (time.perf_counter() - start) * 1000)

    def _materialize_sharded(self, plan, nrows: int, shards: int,
                             start: float) -> QueryResult:
        bounds = [(i * nrows // shards + 1, (i + 1) * nrows // shards)
                  for i in range(shards)]
        results: List[Optional[list]] = [None] * shards
        errors: List[Exception] = []

        def scan(i: int, lo: int, hi: int):
            conn = None
            try:
                conn = self._connect(self.db_path, read_only=True)
                cur = conn.execute(plan.shard_template
                                   .replace("$SHARDLO", str(lo))
                                   .replace("$SHARDHI", str(hi)))
                results[i] = cur.fetchall()
            except Exception as err:
                errors.append(err)
            finally:
                if conn is not None:
                    conn.close()

        threads = []
        for i, (lo, hi) in enumerate(bounds):
            t = threading.Thread(target=scan, args=(i, lo, hi))
            t.start()
            threads.append(t)
            while sum(1 for t in threads if t.is_alive()) >= self.max_shard_workers:
                time.sleep(0.005)
        for t in threads:
            t.join()
        if errors:
            raise errors[0]
        colnames = list(plan.columns)
        self._conn.execute("DROP TABLE IF EXISTS temp.pre_shard")
        self._conn.execute(f"CREATE TEMP TABLE pre_shard({', '.join(colnames)})")
        placeholders = ", ".join("?" for _ in colnames)
        for r in results:
            self._conn.executemany(f"INSERT INTO pre_shard VALUES ({placeholders})", r)
        merge = plan.merge_select.replace("$SHARDS", "temp.pre_shard")
        self._conn.execute(f"CREATE TABLE IF NOT EXISTS {plan.name} AS {merge}")
        self._conn.execute("DROP TABLE temp.pre_shard")
        self._conn.commit()
        return QueryResult({}, 0, (time.perf_counter() - start) * 1000)
