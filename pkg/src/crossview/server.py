"""WebSocket session server for external frontends.

One WebSocket connection = one session. Clients register views (SQL text
in the supported dialect), send clause updates/removals/activations, and
receive columnar JSON result frames. Predicates arrive as a restricted
JSON expression tree and are compiled server-side, so no raw SQL crosses
the wire for filters. HTTP endpoints /healthz and /stats expose liveness
and cache/materialization counters.
"""

from __future__ import annotations

import asyncio
import json
import logging
import re
from dataclasses import dataclass
from typing import Dict, Optional

import click
from fastapi import FastAPI, WebSocket, WebSocketDisconnect
from fastapi.staticfiles import StaticFiles

from . import expr as ex
from .coordinator import Session
from .executor import QueryResult, SQLiteExecutor
from .query import ClientViewDescriptor, parse
from .scales import ScaleDescriptor
from .selection import Clause, ClauseMeta, Selection

log = logging.getLogger(__name__)

_IDENT_RE = re.compile(r"^[A-Za-z_][A-Za-z_0-9]*$")
_WIRE_FUNCS = {"FLOOR", "CEIL", "ROUND", "ABS", "LN", "EXP", "SQRT", "POW",
               "SIGN", "LEAST", "GREATEST", "COALESCE"}
_WIRE_CASTS = {"INTEGER", "DOUBLE", "REAL", "VARCHAR", "TEXT"}


class ProtocolError(ValueError):
    pass


def validate_wire_expr(e: ex.Expr):
    """Reject wire expressions that could smuggle SQL through identifiers."""
    if isinstance(e, ex.Column):
        if not _IDENT_RE.match(e.name):
            raise ProtocolError(f"illegal column name {e.name!r}")
    elif isinstance(e, ex.Func):
        if e.name not in _WIRE_FUNCS:
            raise ProtocolError(f"function {e.name} not allowed on the wire")
        for a in e.args:
            validate_wire_expr(a)
    elif isinstance(e, ex.Cast):
        if e.to_type not in _WIRE_CASTS:
            raise ProtocolError(f"cast type {e.to_type} not allowed on the wire")
        validate_wire_expr(e.operand)
    elif isinstance(e, (ex.Literal, ex.BoolLit)):
        pass
    elif isinstance(e, (ex.BinOp, ex.Comparison)):
        validate_wire_expr(e.left)
        validate_wire_expr(e.right)
    elif isinstance(e, (ex.Neg, ex.Not)):
        validate_wire_expr(e.operand)
    elif isinstance(e, ex.IsNull):
        validate_wire_expr(e.operand)
    elif isinstance(e, ex.Between):
        validate_wire_expr(e.operand)
        validate_wire_expr(e.lo)
        validate_wire_expr(e.hi)
    elif isinstance(e, ex.InList):
        validate_wire_expr(e.operand)
        for v in e.values:
            validate_wire_expr(v)
    elif isinstance(e, (ex.And, ex.Or)):
        for p in e.operands:
            validate_wire_expr(p)
    elif isinstance(e, ex.Match):
        validate_wire_expr(e.operand)
    elif isinstance(e, ex.Case):
        for w, v in e.whens:
            validate_wire_expr(w)
            validate_wire_expr(v)
        if e.else_ is not None:
            validate_wire_expr(e.else_)
    else:
        raise ProtocolError(f"unsupported wire node {type(e).__name__}")


def predicate_from_wire(d: dict) -> ex.Predicate:
    p = ex.from_json(d)
    validate_wire_expr(p)
    return p


def scale_from_wire(d: dict) -> ScaleDescriptor:
    return ScaleDescriptor(
        type=d.get("type", "linear"),
        domain=tuple(d["domain"]),
        range=tuple(d["range"]),
        base=float(d.get("base", 10.0)),
        exponent=float(d.get("exponent", 1.0)),
        constant=float(d.get("constant", 1.0)),
    )


def meta_from_wire(d: Optional[dict]) -> Optional[ClauseMeta]:
    if d is None:
        return None
    return ClauseMeta(
        type=d["type"],
        pixel_size=float(d.get("pixelSize", 1.0)),
        bin_fn=d.get("bin", "FLOOR"),
        scales=tuple(scale_from_wire(s) for s in d.get("scales", [])),
        match_method=d.get("matchMethod"),
    )


def clause_from_wire(payload: dict) -> Clause:
    return Clause(
        predicate=predicate_from_wire(payload["predicate"]),
        source=payload["source"],
        views=frozenset(payload.get("views", [])),
        meta=meta_from_wire(payload.get("meta")),
    )


def encode_result(r: QueryResult) -> dict:
    return {"columns": {k: list(v) for k, v in r.columns.items()},
            "rowCount": r.row_count, "elapsedMs": r.elapsed_ms}


def decode_result(d: dict) -> QueryResult:
    return QueryResult({k: list(v) for k, v in d["columns"].items()},
                       d["rowCount"], d["elapsedMs"])


@dataclass
class ServerConfig:
    db: str = ":memory:"
    host: str = "127.0.0.1"
    port: int = 8765
    cache_entries: int = 1024
    optimize: bool = True
    static_dir: Optional[str] = None


class _Connection:
    """Per-WebSocket protocol state bridging the session's worker threads."""

    def __init__(self, ws: WebSocket, executor: SQLiteExecutor, config: ServerConfig):
        self.ws = ws
        self.config = config
        self.session = Session(executor, optimize=config.optimize,
                               cache_entries=config.cache_entries)
        self.selections: Dict[str, Selection] = {}
        self.view_selection: Dict[str, str] = {}
        self.req_for_selection: Dict[str, object] = {}
        self.outq: "asyncio.Queue[dict]" = asyncio.Queue()
        self.loop = asyncio.get_running_loop()

    def send_threadsafe(self, frame: dict):
        self.loop.call_soon_threadsafe(self.outq.put_nowait, frame)

    def _callback(self, view_id: str, result):
        sel_name = self.view_selection.get(view_id)
        req = self.req_for_selection.get(sel_name)
        if isinstance(result, Exception):
            self.send_threadsafe({"kind": "error", "reqId": req, "view": view_id,
                                  "message": str(result)})
        else:
            self.send_threadsafe({"kind": "result", "reqId": req, "view": view_id,
                                  "data": encode_result(result)})

    def _selection(self, spec: Optional[dict]) -> Selection:
        spec = spec or {}
        name = spec.get("name", "default")
        if name not in self.selections:
            self.selections[name] = Selection(
                resolver=spec.get("resolver", "INTERSECT"),
                cross=bool(spec.get("cross", False)),
                empty=spec.get("empty", "selectAll"))
        return self.selections[name]

    # Runs on a worker thread: session registration and clause handling block.
    def handle(self, msg: dict) -> Optional[dict]:
        kind = msg.get("kind")
        req = msg.get("reqId")
        payload = msg.get("payload", {})
        if kind == "hello":
            return {"kind": "ack", "reqId": req, "server": "crossview"}
        if kind == "registerView":
            query = parse(payload["sql"])
            sel_spec = payload.get("selection")
            selection = self._selection(sel_spec) if sel_spec is not None else None
            view = ClientViewDescriptor(
                id=payload["id"], query=query,
                filter_stable=bool(payload.get("filterStable", False)),
                selection=None)
            if selection is not None:
                name = (sel_spec or {}).get("name", "default")
                self.view_selection[view.id] = name
                self.req_for_selection.setdefault(name, req)
            self.session.register_view(view, self._callback, selection)
            return {"kind": "ack", "reqId": req, "view": view.id}
        if kind == "clauseUpdate":
            name = payload["selection"]
            if name not in self.selections:
                raise ProtocolError(f"unknown selection {name!r}")
            self.req_for_selection[name] = req
            self.selections[name].update(clause_from_wire(payload))
            return {"kind": "ack", "reqId": req}
        if kind == "clauseRemove":
            name = payload["selection"]
            if name not in self.selections:
                raise ProtocolError(f"unknown selection {name!r}")
            self.req_for_selection[name] = req
            self.selections[name].remove(payload["source"])
            return {"kind": "ack", "reqId": req}
        if kind == "activate":
            name = payload["selection"]
            if name not in self.selections:
                raise ProtocolError(f"unknown selection {name!r}")
            self.selections[name].activate(clause_from_wire(payload))
            return {"kind": "ack", "reqId": req}
        if kind == "stats":
            return {"kind": "stats", "reqId": req, "payload": self.session.stats()}
        raise ProtocolError(f"unknown message kind {kind!r}")

    def close(self):
        self.session.close()


def create_app(config: ServerConfig) -> FastAPI:
    app = FastAPI()
    app.state.config = config
    app.state.executor = SQLiteExecutor(config.db)
    app.state.connections = []

    @app.on_event("shutdown")
    def _shutdown():
        app.state.executor.close()

    @app.get("/healthz")
    def healthz():
        return {"status": "ok"}

    @app.get("/stats")
    def stats():
        sessions = [c.session.stats() for c in app.state.connections]
        return {"sessions": sessions,
                "connectionCount": len(app.state.connections),
                "db": config.db, "optimize": config.optimize}

    @app.websocket("/session")
    async def session_ws(ws: WebSocket):
        await ws.accept()
        conn = _Connection(ws, app.state.executor, config)
        app.state.connections.append(conn)

        async def sender():
            while True:
                frame = await conn.outq.get()
                await ws.send_text(json.dumps(frame))

        send_task = asyncio.create_task(sender())
        try:
            while True:
                text = await ws.receive_text()
                msg = None
                try:
                    msg = json.loads(text)
                    reply = await asyncio.to_thread(conn.handle, msg)
                except WebSocketDisconnect:
                    raise
                except Exception as err:
                    reply = {"kind": "error",
                             "reqId": msg.get("reqId") if isinstance(msg, dict) else None,
                             "message": str(err)}
                if reply is not None:
                    conn.outq.put_nowait(reply)
        except WebSocketDisconnect:
            pass
        finally:
            send_task.cancel()
            app.state.connections.remove(conn)
            conn.close()

    if config.static_dir:
        app.mount("/", StaticFiles(directory=config.static_dir, html=True),
                  name="static")
    return app


@click.command()
@click.option("--db", default=":memory:", help="SQLite database path.")
@click.option("--host", default="127.0.0.1")
@click.option("--port", default=8765, type=int)
@click.option("--cache-entries", default=1024, type=int)
@click.option("--no-optimize", is_flag=True,
              help="Disable pre-aggregation; always run direct filtered queries.")
@click.option("--static-dir", default=None,
              help="Directory of frontend assets to serve at /.")
def main(db, host, port, cache_entries, no_optimize, static_dir):
    """Run the session server."""
    import uvicorn
    config = ServerConfig(db=db, host=host, port=port, cache_entries=cache_entries,
                          optimize=not no_optimize, static_dir=static_dir)
    uvicorn.run(create_app(config), host=host, port=port)


if __name__ == "__main__":
    main()
