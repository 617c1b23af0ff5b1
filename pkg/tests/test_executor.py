"""Two-priority SQL executor and registered aggregate functions."""

import math
import statistics
import threading

import pytest

from crossview.executor import (INTERACTIVE, PREFETCH, ExecutorError,
                                SQLiteExecutor)


def test_run_returns_columnar_result(executor):
    executor.load_table("t", {"a": [1, 2, 3], "b": ["x", "y", "z"]})
    r = executor.run("SELECT a, b FROM t ORDER BY a")
    assert r.columns == {"a": [1, 2, 3], "b": ["x", "y", "z"]}
    assert r.row_count == 3
    assert r.rows == [(1, "x"), (2, "y"), (3, "z")]
    assert r.elapsed_ms >= 0


def test_interactive_runs_before_queued_prefetch(executor):
    executor.load_table("t", {"a": [1]})
    release = threading.Event()
    blocker = executor.call(lambda conn: release.wait(5))
    futs = [executor.submit(f"SELECT {i} /* pf */ FROM t", PREFETCH)
            for i in range(5)]
    inter = executor.submit("SELECT 99 /* hot */ FROM t", INTERACTIVE)
    release.set()
    inter.result()
    for f in futs:
        f.result()
    order = [sql for sql, _ in executor.log if "/*" in sql]
    assert order[0] == "SELECT 99 /* hot */ FROM t"


def test_log_records_priority(executor):
    executor.run("SELECT 1", PREFETCH)
    assert executor.log[-1] == ("SELECT 1", PREFETCH)


def test_create_schema_is_noop(executor):
    r = executor.run("CREATE SCHEMA IF NOT EXISTS mosaic")
    assert r.row_count == 0
    executor.run("CREATE TABLE mosaic.x AS SELECT 1 AS a")  # schema usable
    assert executor.table_exists("mosaic.x")


def test_table_exists(executor):
    assert not executor.table_exists("nope")
    executor.load_table("t", {"a": [1]})
    assert executor.table_exists("t")
    assert not executor.table_exists("mosaic.t")


def test_errors_delivered_not_fatal(executor):
    with pytest.raises(Exception):
        executor.run("SELECT * FROM missing_table")
    assert executor.run("SELECT 1").rows == [(1,)]


def test_submit_after_close_rejected(tmp_path):
    exe = SQLiteExecutor(str(tmp_path / "x.db"))
    exe.close()
    with pytest.raises(ExecutorError):
        exe.submit("SELECT 1")


def test_mosaic_schema_persists_across_instances(tmp_path):
    db = str(tmp_path / "d.db")
    exe = SQLiteExecutor(db)
    exe.run("CREATE TABLE mosaic.pre AS SELECT 42 AS a")
    exe.close()
    exe2 = SQLiteExecutor(db)
    try:
        assert exe2.table_exists("mosaic.pre")
        assert exe2.run("SELECT a FROM mosaic.pre").rows == [(42,)]
    finally:
        exe2.close()


DATA = {
    "x": [3.0, None, 1.0, 4.0, 1.0, 5.0, 9.0, 2.0, 6.0],
    "y": [1.0, 2.0, None, 3.0, 5.0, 4.0, 7.0, 8.0, 2.0],
    "b": [0b1100, 0b1010, 0b0110, 7, 9, 12, 3, 5, 8],
    "t": [1, 1, 0, 1, 1, 1, 1, 1, 1],
    "g": list(range(9)),
}
XS = [v for v in DATA["x"] if v is not None]
PAIRS = [(y, x) for x, y in zip(DATA["x"], DATA["y"])
         if x is not None and y is not None]


def agg(executor, sql):
    executor.load_table("t", DATA)
    return executor.run(f"SELECT {sql} AS v FROM t").rows[0][0]


def test_product_and_geomean(executor):
    assert agg(executor, "PRODUCT(x)") == pytest.approx(math.prod(XS))
    assert agg(executor, "GEOMEAN(x)") == pytest.approx(
        math.exp(sum(math.log(v) for v in XS) / len(XS)))


def test_arg_extremes(executor):
    assert agg(executor, "ARG_MIN(g, x)") == 2   # first minimal x
    assert agg(executor, "ARG_MAX(g, x)") == 6


def test_bit_and_bool_aggregates(executor):
    from functools import reduce
    import operator
    bs = DATA["b"]
    assert agg(executor, "BIT_AND(b)") == reduce(operator.and_, bs)
    assert agg(executor, "BIT_OR(b)") == reduce(operator.or_, bs)
    assert agg(executor, "BIT_XOR(b)") == reduce(operator.xor, bs)
    assert agg(executor, "BOOL_AND(t)") == 0
    assert agg(executor, "BOOL_OR(t)") == 1


def test_variance_family(executor):
    assert agg(executor, "VAR_POP(x)") == pytest.approx(statistics.pvariance(XS))
    assert agg(executor, "VAR_SAMP(x)") == pytest.approx(statistics.variance(XS))
    assert agg(executor, "STDDEV_POP(x)") == pytest.approx(statistics.pstdev(XS))
    assert agg(executor, "STDDEV_SAMP(x)") == pytest.approx(statistics.stdev(XS))


def test_bivariate_family(executor):
    ys = [p[0] for p in PAIRS]
    xs = [p[1] for p in PAIRS]
    n = len(PAIRS)
    mx, my = sum(xs) / n, sum(ys) / n
    sxx = sum((v - mx) ** 2 for v in xs)
    syy = sum((v - my) ** 2 for v in ys)
    sxy = sum((a - mx) * (b - my) for a, b in zip(xs, ys))
    assert agg(executor, "REGR_COUNT(y, x)") == n
    assert agg(executor, "COVAR_POP(y, x)") == pytest.approx(sxy / n)
    assert agg(executor, "COVAR_SAMP(y, x)") == pytest.approx(sxy / (n - 1))
    assert agg(executor, "CORR(y, x)") == pytest.approx(sxy / math.sqrt(sxx * syy))
    assert agg(executor, "REGR_AVGX(y, x)") == pytest.approx(mx)
    assert agg(executor, "REGR_AVGY(y, x)") == pytest.approx(my)
    assert agg(executor, "REGR_SXX(y, x)") == pytest.approx(sxx)
    assert agg(executor, "REGR_SYY(y, x)") == pytest.approx(syy)
    assert agg(executor, "REGR_SXY(y, x)") == pytest.approx(sxy)
    slope = sxy / sxx
    assert agg(executor, "REGR_SLOPE(y, x)") == pytest.approx(slope)
    assert agg(executor, "REGR_INTERCEPT(y, x)") == pytest.approx(my - slope * mx)
    assert agg(executor, "REGR_R2(y, x)") == pytest.approx(sxy * sxy / (sxx * syy))


def test_aggregates_over_empty_input(executor):
    executor.load_table("e", {"x": [], "y": []})
    # the sqlite3 binding never instantiates a user aggregate that sees no
    # rows, so every registered aggregate yields NULL over empty input;
    # pre-aggregation plans coalesce REGR_COUNT back to 0
    for fn in ("PRODUCT(x)", "GEOMEAN(x)", "VAR_POP(x)", "STDDEV_SAMP(x)",
               "CORR(y, x)", "REGR_SLOPE(y, x)", "REGR_COUNT(y, x)"):
        assert executor.run(f"SELECT {fn} AS v FROM e").rows[0][0] is None


def test_scalar_helpers(executor):
    r = executor.run("SELECT LEAST(3, 1, 2) AS a, GREATEST(3, 1, 2) AS b, "
                     "LEAST(1, NULL) AS c, REGEXP_MATCHES('abc', '^a') AS d")
    assert r.rows == [(1, 3, None, 1)]
