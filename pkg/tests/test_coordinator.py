"""Session coordination: caching, throttling, creation-once, prefetch."""

import threading
import time

import pytest

from conftest import rows_close
from crossview.coordinator import LRUCache, Session, SessionError
from crossview.executor import PREFETCH, SQLiteExecutor
from crossview.query import ClientViewDescriptor, parse, parse_predicate
from crossview.scales import ScaleDescriptor
from crossview.selection import Clause, ClauseMeta, Selection

SCALE = ScaleDescriptor("linear", (0.0, 100.0), (0.0, 100.0))


def make_data(n=2000, seed=3):
    import random
    rng = random.Random(seed)
    return {"a": [rng.randrange(100) + 0.2 for _ in range(n)],
            "g": [rng.randrange(4) for _ in range(n)]}


def hist_view(vid="v1"):
    return ClientViewDescriptor(
        vid, parse("SELECT g AS g, COUNT(*) AS y FROM t GROUP BY g"), True)


def interval_clause(lo, hi, views=()):
    meta = ClauseMeta(type="interval", scales=(SCALE,))
    return Clause(parse_predicate(f"a BETWEEN {lo} AND {hi}"), "brush",
                  frozenset(views), meta)


class Collector:
    def __init__(self):
        self.results = []
        self.lock = threading.Lock()

    def __call__(self, view_id, result):
        with self.lock:
            self.results.append((view_id, result))

    def last_rows(self):
        with self.lock:
            vid, r = self.results[-1]
            if isinstance(r, Exception):
                raise r
            return r.rows


@pytest.fixture
def session(executor):
    executor.load_table("t", make_data())
    s = Session(executor)
    yield s
    s.close()


def test_initial_result_on_register(session):
    col = Collector()
    session.register_view(hist_view(), col, Selection())
    assert len(col.results) == 1
    assert sorted(col.last_rows()) == sorted(
        session.executor.run("SELECT g AS g, COUNT(*) AS y FROM t GROUP BY g").rows)


def test_duplicate_view_id_rejected(session):
    col = Collector()
    session.register_view(hist_view(), col, Selection())
    with pytest.raises(SessionError):
        session.register_view(hist_view(), col, Selection())


def test_optimized_matches_direct(executor):
    executor.load_table("t", make_data())
    results = {}
    for optimize in (True, False):
        s = Session(executor, optimize=optimize, cache_entries=0)
        col = Collector()
        sel = Selection(resolver="INTERSECT", cross=True)
        s.register_view(hist_view(), col, sel)
        sel.update(interval_clause(10.05, 49.45, views=("brush_view",)))
        s.run_until_idle()
        results[optimize] = col.last_rows()
        stats = s.stats()
        if optimize:
            assert stats["optimizedQueries"] >= 1
            assert stats["matsCreated"] == 1
        else:
            assert stats["optimizedQueries"] == 0
        s.close()
    assert rows_close(sorted(results[True]), sorted(results[False]))


def test_throttle_coalesces_bursts(executor):
    executor.load_table("t", make_data())
    s = Session(executor, optimize=False)
    gate = threading.Event()
    col = Collector()

    def slow_callback(view_id, result):
        col(view_id, result)
        gate.wait(5)

    sel = Selection(resolver="INTERSECT", cross=True)
    s.register_view(hist_view(), slow_callback, sel)
    gate.set(), gate.clear()
    # hold the first update in flight, then burst more
    sel.update(interval_clause(0.05, 9.45))
    time.sleep(0.05)
    for i in range(1, 20):
        sel.update(interval_clause(i + 0.05, i + 30.45))
    gate.set()
    s.run_until_idle()
    # one in-flight + one coalesced trailing update
    assert s.updates_processed == 2
    final = col.last_rows()
    direct = executor.run(
        "SELECT g AS g, COUNT(*) AS y FROM t "
        "WHERE a BETWEEN 19.05 AND 49.45 GROUP BY g").rows
    assert rows_close(sorted(final), sorted(direct))
    s.close()


def test_materialize_once_across_sessions(tmp_path):
    db = str(tmp_path / "d.db")
    exe = SQLiteExecutor(db)
    exe.load_table("t", make_data())

    def drive(s):
        col = Collector()
        sel = Selection(resolver="INTERSECT", cross=True)
        s.register_view(hist_view(), col, sel)
        sel.update(interval_clause(10.05, 49.45, views=("other",)))
        s.run_until_idle()

    s1 = Session(exe)
    drive(s1)
    s1.close()
    s2 = Session(exe)
    drive(s2)
    s2.close()
    creates = [sql for sql, _ in exe.log
               if sql.startswith("CREATE TABLE IF NOT EXISTS mosaic.pre_agg_")]
    assert len(creates) == 1  # second session reuses the stored table
    exe.close()


def test_cache_serves_repeat_queries(session):
    col = Collector()
    sel = Selection(resolver="INTERSECT", cross=True)
    session.register_view(hist_view(), col, sel)
    c = interval_clause(10.05, 49.45)
    sel.update(c)
    session.run_until_idle()
    first = col.last_rows()
    sel.update(interval_clause(20.05, 59.45))
    session.run_until_idle()
    before = len(session.executor.log)
    sel.update(c)  # back to a previously seen position
    session.run_until_idle()
    assert col.last_rows() == first
    assert session.cache.hits >= 1
    assert len(session.executor.log) == before  # served without re-running


def test_error_delivered_to_callback(executor):
    s = Session(executor)
    col = Collector()
    bad = ClientViewDescriptor(
        "v", parse("SELECT COUNT(*) AS n FROM missing_table"), True)
    s.register_view(bad, col, Selection())
    assert isinstance(col.results[0][1], Exception)
    s.close()


def test_prefetch_warms_cache(session):
    queries = [f"SELECT g AS g, COUNT(*) AS y FROM t WHERE a < {k} GROUP BY g"
               for k in (10, 20, 30)]
    session.prefetch(queries)
    deadline = time.monotonic() + 10
    while time.monotonic() < deadline:
        if all(q in session.cache for q in queries):
            break
        time.sleep(0.01)
    assert all(q in session.cache for q in queries)
    assert all(p == PREFETCH for sql, p in session.executor.log
               if "a <" in sql)


def test_speculative_creation_on_activate(session):
    col = Collector()
    sel = Selection(resolver="INTERSECT", cross=True)
    session.register_view(hist_view(), col, sel)
    sel.activate(interval_clause(0.05, 9.45, views=("other",)))
    deadline = time.monotonic() + 10
    while time.monotonic() < deadline and not session.mats_created:
        time.sleep(0.01)
    assert len(session.mats_created) == 1
    name = next(iter(session.mats_created))
    deadline = time.monotonic() + 10
    while time.monotonic() < deadline and not session.executor.table_exists(name):
        time.sleep(0.01)
    assert session.executor.table_exists(name)
    # the later interactive update reuses it: no second creation
    sel.update(interval_clause(10.05, 49.45, views=("other",)))
    session.run_until_idle()
    creates = [sql for sql, _ in session.executor.log
               if sql.startswith("CREATE TABLE IF NOT EXISTS")]
    assert len(creates) == 1


def test_own_view_cross_filter_uses_fallback(session):
    col = Collector()
    sel = Selection(resolver="INTERSECT", cross=True)
    view = hist_view("brushed")
    session.register_view(view, col, sel)
    base = col.last_rows()
    sel.update(interval_clause(10.05, 49.45, views=("brushed",)))
    session.run_until_idle()
    # the brushed view excludes its own clause: unchanged result, no fast path
    assert col.last_rows() == base
    assert session.stats()["optimizedQueries"] == 0


def test_unchanged_view_replays_without_requery(session):
    col = Collector()
    sel = Selection(resolver="INTERSECT", cross=True)
    session.register_view(hist_view("brushed"), col, sel)
    base = col.last_rows()
    before = len(session.executor.log)
    # the brushed view's resolved query is unchanged by its own clause
    sel.update(interval_clause(10.05, 49.45, views=("brushed",)))
    session.run_until_idle()
    assert col.last_rows() == base
    assert len(session.executor.log) == before
    assert session.stats()["memoHits"] >= 1


def test_lru_cache_eviction_and_counters():
    c = LRUCache(2)
    c.put("a", 1)
    c.put("b", 2)
    assert c.get("a") == 1
    c.put("c", 3)  # evicts b, the least recently used
    assert "b" not in c
    assert c.get("b") is None
    assert c.get("a") == 1 and c.get("c") == 3
    assert len(c) == 2
    assert c.hits == 3 and c.misses == 1
