"""WebSocket protocol, HTTP endpoints, and wire-format safety."""

import json
import random

import pytest
from fastapi.testclient import TestClient
from hypothesis import given, settings, strategies as st

from crossview import expr as ex
from crossview.executor import QueryResult, SQLiteExecutor
from crossview.server import (ProtocolError, ServerConfig, clause_from_wire,
                              create_app, decode_result, encode_result,
                              predicate_from_wire, validate_wire_expr)


@pytest.fixture(scope="module")
def db_path(tmp_path_factory):
    path = str(tmp_path_factory.mktemp("srv") / "srv.db")
    exe = SQLiteExecutor(path)
    rng = random.Random(11)
    exe.load_table("t", {
        "a": [rng.randrange(100) + 0.2 for _ in range(3000)],
        "g": [rng.randrange(4) for _ in range(3000)],
    })
    exe.close()
    return path


@pytest.fixture()
def client(db_path):
    app = create_app(ServerConfig(db=db_path))
    with TestClient(app) as c:
        yield c


def send(ws, kind, payload=None, req=None):
    ws.send_text(json.dumps({"kind": kind, "reqId": req, "payload": payload or {}}))


def recv_until(ws, kind, limit=20):
    for _ in range(limit):
        frame = json.loads(ws.receive_text())
        if frame["kind"] == kind:
            return frame
    raise AssertionError(f"no {kind} frame in {limit} messages")


INTERVAL_PAYLOAD = {
    "selection": "default",
    "source": "brush",
    "views": ["other"],
    "predicate": ex.to_json(ex.Between(ex.Column("a"), ex.Literal(10.05),
                                       ex.Literal(49.45))),
    "meta": {"type": "interval", "bin": "FLOOR",
             "scales": [{"type": "linear", "domain": [0.0, 100.0],
                         "range": [0.0, 100.0]}]},
}


def test_healthz_and_stats(client):
    assert client.get("/healthz").json() == {"status": "ok"}
    s = client.get("/stats").json()
    assert s["connectionCount"] == 0 and s["sessions"] == []


def test_full_session_flow(client):
    with client.websocket_connect("/session") as ws:
        send(ws, "hello", req="r0")
        ack = recv_until(ws, "ack")
        assert ack["server"] == "crossview"

        send(ws, "registerView", {
            "id": "hist", "sql": "SELECT g AS g, COUNT(*) AS y FROM t GROUP BY g",
            "filterStable": True,
            "selection": {"name": "default", "resolver": "INTERSECT", "cross": True},
        }, req="r1")
        first = recv_until(ws, "result")
        assert first["view"] == "hist"
        assert sum(first["data"]["columns"]["y"]) == 3000
        recv_until(ws, "ack")

        send(ws, "activate", INTERVAL_PAYLOAD, req="r2")
        recv_until(ws, "ack")

        send(ws, "clauseUpdate", INTERVAL_PAYLOAD, req="r3")
        result = recv_until(ws, "result")
        assert result["reqId"] == "r3"
        assert 0 < sum(result["data"]["columns"]["y"]) < 3000

        send(ws, "stats", req="r4")
        stats = recv_until(ws, "stats")
        assert stats["payload"]["views"] == 1

        send(ws, "clauseRemove", {"selection": "default", "source": "brush"},
             req="r5")
        restored = recv_until(ws, "result")
        assert sum(restored["data"]["columns"]["y"]) == 3000


def test_http_stats_reflect_open_connection(client):
    with client.websocket_connect("/session") as ws:
        send(ws, "hello", req="h")
        recv_until(ws, "ack")
        s = client.get("/stats").json()
        assert s["connectionCount"] == 1


def test_malformed_messages_keep_connection_alive(client):
    with client.websocket_connect("/session") as ws:
        ws.send_text("this is not json")
        assert json.loads(ws.receive_text())["kind"] == "error"
        send(ws, "bogusKind", req="x")
        err = recv_until(ws, "error")
        assert err["reqId"] == "x"
        send(ws, "clauseUpdate", {"selection": "missing", "source": "s",
                                  "predicate": ex.to_json(ex.TRUE)}, req="y")
        assert recv_until(ws, "error")["reqId"] == "y"
        send(ws, "hello", req="z")  # still serviceable
        assert recv_until(ws, "ack")["reqId"] == "z"


def test_wire_rejects_sql_smuggling():
    evil = {"node": "column", "name": "a; DROP TABLE t --"}
    with pytest.raises((ProtocolError, ex.ExprError)):
        predicate_from_wire({"node": "comparison", "op": "=",
                             "left": evil, "right": {"node": "literal", "value": 1}})
    with pytest.raises(ProtocolError):
        validate_wire_expr(ex.Func("LOAD_EXTENSION", (ex.Literal("x"),)))
    with pytest.raises(ProtocolError):
        validate_wire_expr(ex.Cast(ex.Column("a"), "BLOB"))
    # allowed shapes pass
    validate_wire_expr(ex.Between(ex.Func("FLOOR", (ex.Column("a"),)),
                                  ex.Literal(1), ex.Literal(2)))


def test_clause_from_wire_builds_metadata():
    c = clause_from_wire(INTERVAL_PAYLOAD)
    assert c.source == "brush"
    assert c.views == frozenset({"other"})
    assert c.meta.type == "interval"
    assert c.meta.scales[0].domain == (0.0, 100.0)


_values = st.one_of(st.none(), st.integers(-1000, 1000),
                    st.floats(-1e6, 1e6, allow_nan=False), st.text(max_size=8))


@settings(max_examples=100, deadline=None)
@given(st.dictionaries(st.sampled_from(["a", "b", "c"]),
                       st.lists(_values, max_size=5), min_size=1),
       st.floats(0, 100))
def test_result_codec_round_trip(cols, elapsed):
    n = len(next(iter(cols.values())))
    cols = {k: v[:n] + [None] * (n - len(v)) for k, v in cols.items()}
    r = QueryResult(cols, n, elapsed)
    again = decode_result(json.loads(json.dumps(encode_result(r))))
    assert again.columns == r.columns
    assert again.row_count == r.row_count
    assert again.elapsed_ms == r.elapsed_ms
