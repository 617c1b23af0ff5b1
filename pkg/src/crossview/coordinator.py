"""Session coordinator: views, selections, caching, throttling, prefetch.

The session registers client views, subscribes to their selections, and
on every selection update runs the optimization pipeline per view: if
the (view, active clause) pair passes the compatibility gate, ensure the
pre-aggregated table exists (creating it at most once per session) and
query it; otherwise run the directly filtered query. Results pass
through a bounded LRU cache keyed by exact SQL text.

Dispatch is throttled per selection: at most one update is processed at
a time, at most one is queued, and a newer queued update replaces the
older, so a burst of updates during one in-flight handling results in
exactly one further processed update (the last).
"""

from __future__ import annotations

import logging
import queue
import threading
from collections import OrderedDict
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Set

from . import executor as exmod
from .compat import check_compatibility
from .planner import MaterializedViewPlan, plan as build_plan, update_query
from .query import ClientViewDescriptor, apply_filter, to_sql
from .selection import Clause, Selection

log = logging.getLogger(__name__)

ResultCallback = Callable[[str, object], None]  # (view id, QueryResult or Exception)


class SessionError(RuntimeError):
    pass


class LRUCache:
    """Bounded query-text to result cache with hit/miss counters."""

    def __init__(self, max_entries: int = 1024):
        self.max_entries = max_entries
        self._data: "OrderedDict[str, object]" = OrderedDict()
        self._lock = threading.Lock()
        self.hits = 0
        self.misses = 0

    def get(self, key: str):
        with self._lock:
            if key in self._data:
                self._data.move_to_end(key)
                self.hits += 1
                return self._data[key]
            self.misses += 1
            return None

    def put(self, key: str, value):
        if self.max_entries <= 0:
            return
        with self._lock:
            self._data[key] = value
            self._data.move_to_end(key)
            while len(self._data) > self.max_entries:
                self._data.popitem(last=False)

    def __contains__(self, key: str) -> bool:
        with self._lock:
            return key in self._data

    def __len__(self):
        with self._lock:
            return len(self._data)


@dataclass
class _ViewState:
    view: ClientViewDescriptor
    selection: Optional[Selection]
    callback: ResultCallback
    # last successfully delivered query and result; an update that leaves a
    # view's resolved query text unchanged (e.g. cross-filtering excludes the
    # view's own clause) replays this instead of re-running the query
    last_sql: Optional[str] = None
    last_result: object = None


@dataclass
class _DispatchState:
    busy: bool = False
    pending: bool = False


class Session:
    """Coordinates views, selections, the executor, cache, and throttle."""

    def __init__(self, executor: exmod.SQLiteExecutor, optimize: bool = True,
                 cache_entries: int = 1024):
        self.executor = executor
        self.optimize = optimize
        self.cache = LRUCache(cache_entries)
        self.views: Dict[str, _ViewState] = {}
        self.selections: Set[Selection] = set()
        self.mats_created: Set[str] = set()
        self.updates_processed = 0
        self.fallback_queries = 0
        self.optimized_queries = 0
        self.memo_hits = 0
        self._dispatch: Dict[int, _DispatchState] = {}
        self._mat_futures: Dict[str, object] = {}
        self._lock = threading.Lock()
        self._tasks: "queue.Queue[Optional[Callable[[], None]]]" = queue.Queue()
        self._idle = threading.Condition()
        self._inflight_tasks = 0
        self._loop = threading.Thread(target=self._run_loop, daemon=True)
        self._loop.start()
        self._closed = False

    # -- lifecycle ---------------------------------------------------------

    def close(self):
        if self._closed:
            return
        self._closed = True
        self._tasks.put(None)
        self._loop.join(timeout=10)

    def run_until_idle(self, timeout: float = 60.0):
        """Block until no dispatch work is queued or running (test helper)."""
        import time
        deadline = time.monotonic() + timeout
        while time.monotonic() < deadline:
            with self._lock:
                quiet = (self._tasks.unfinished_tasks == 0
                         and not any(s.busy or s.pending
                                     for s in self._dispatch.values()))
            if quiet:
                return
            time.sleep(0.002)
        raise SessionError("session did not become idle in time")

    def _run_loop(self):
        while True:
            task = self._tasks.get()
            try:
                if task is None:
                    return
                task()
            except Exception:
                log.exception("session task failed")
            finally:
                self._tasks.task_done()

    # -- registration ------------------------------------------------------

    def register_view(self, view: ClientViewDescriptor, callback: ResultCallback,
                      selection: Optional[Selection] = None):
        """Track a view, wire its selection, and deliver its initial result."""
        if view.id in self.views:
            raise SessionError(f"duplicate view id {view.id!r}")
        if selection is None:
            selection = view.selection
        self.views[view.id] = _ViewState(view, selection, callback)
        if selection is not None and selection not in self.selections:
            self.selections.add(selection)
            self._dispatch[id(selection)] = _DispatchState()
            selection.on_update(self._on_update)
            selection.on_activate(self._on_activate)
        pred = selection.resolve(view.id) if selection is not None else None
        sql = to_sql(apply_filter(view.query, pred))
        self._deliver(self.views[view.id], sql)

    # -- selection events --------------------------------------------------

    def _on_update(self, selection: Selection):
        with self._lock:
            state = self._dispatch[id(selection)]
            if state.pending:
                return
            state.pending = True
            if state.busy:
                return
        self._tasks.put(lambda: self._process_update(selection))

    def _process_update(self, selection: Selection):
        state = self._dispatch[id(selection)]
        with self._lock:
            state.pending = False
            state.busy = True
        try:
            self._handle_update(selection)
        finally:
            with self._lock:
                state.busy = False
                again = state.pending
            if again:
                self._tasks.put(lambda: self._process_update(selection))

    def _handle_update(self, selection: Selection):
        self.updates_processed += 1
        active = selection.active
        for vs in self.views.values():
            if vs.selection is not selection:
                continue
            sql = None
            if self.optimize and active is not None and self._clause_applies(
                    selection, active, vs.view.id):
                if check_compatibility(vs.view, active, selection):
                    try:
                        p = build_plan(vs.view, active, selection)
                        self._ensure_materialized(p)
                        sql = update_query(p, active)
                        self.optimized_queries += 1
                    except Exception as err:
                        log.warning("optimized path failed for %s: %s", vs.view.id, err)
                        sql = None
            if sql is None:
                pred = selection.resolve(vs.view.id)
                sql = to_sql(apply_filter(vs.view.query, pred))
                self.fallback_queries += 1
            self._deliver(vs, sql)

    @staticmethod
    def _clause_applies(selection: Selection, clause: Clause, view_id: str) -> bool:
        return not (selection.cross and view_id in clause.views)

    def _deliver(self, vs: _ViewState, sql: str):
        # base tables are immutable within a session, so an identical query
        # text means an identical result
        if sql == vs.last_sql and vs.last_result is not None:
            self.memo_hits += 1
            vs.callback(vs.view.id, vs.last_result)
            return
        cached = self.cache.get(sql)
        if cached is not None:
            vs.last_sql, vs.last_result = sql, cached
            vs.callback(vs.view.id, cached)
            return
        try:
            result = self.executor.run(sql)
        except Exception as err:
            vs.callback(vs.view.id, err)
            return
        self.cache.put(sql, result)
        vs.last_sql, vs.last_result = sql, result
        vs.callback(vs.view.id, result)

    # -- materialization ---------------------------------------------------

    def _ensure_materialized(self, p: MaterializedViewPlan,
                             priority: int = exmod.INTERACTIVE, wait: bool = True):
        with self._lock:
            if p.name in self.mats_created:
                fut = self._mat_futures.get(p.name)
            elif self.executor.table_exists(p.name):
                # reuse from an earlier session against the same database
                self.mats_created.add(p.name)
                fut = None
            else:
                self.mats_created.add(p.name)
                fut = self.executor.materialize(p, priority=priority, wait=False)
                self._mat_futures[p.name] = fut
                fut.add_done_callback(
                    lambda f: self._mat_futures.pop(p.name, None))
        if wait and fut is not None:
            fut.result()

    def _on_activate(self, selection: Selection, example: Clause):
        """Start building materialized views speculatively, at low priority."""
        for vs in self.views.values():
            if vs.selection is not selection:
                continue
            if not self._clause_applies(selection, example, vs.view.id):
                continue
            if not check_compatibility(vs.view, example, selection):
                continue
            try:
                p = build_plan(vs.view, example, selection)
                self._ensure_materialized(p, priority=exmod.PREFETCH, wait=False)
            except Exception as err:
                log.warning("activation prefetch failed for %s: %s", vs.view.id, err)

    # -- prefetch ----------------------------------------------------------

    def prefetch(self, queries: List[str]):
        """Warm the cache at low priority; never delays interactive work."""
        for sql in queries:
            if sql in self.cache:
                continue

            def warm(sql=sql):
                try:
                    fut = self.executor.submit(sql, priority=exmod.PREFETCH)
                    self.cache.put(sql, fut.result())
                except Exception as err:
                    log.warning("prefetch failed: %s", err)

            threading.Thread(target=warm, daemon=True).start()

    # -- introspection -----------------------------------------------------

    def stats(self) -> dict:
        return {
            "views": len(self.views),
            "selections": len(self.selections),
            "cacheEntries": len(self.cache),
            "cacheHits": self.cache.hits,
            "cacheMisses": self.cache.misses,
            "matsCreated": len(self.mats_created),
            "updatesProcessed": self.updates_processed,
            "optimizedQueries": self.optimized_queries,
            "fallbackQueries": self.fallback_queries,
            "memoHits": self.memo_hits,
            "optimize": self.optimize,
        }
