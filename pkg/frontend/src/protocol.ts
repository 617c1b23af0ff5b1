// Wire protocol for the session server: JSON frames over one WebSocket.
// Predicates travel as a restricted expression tree, never as SQL text.

export interface WireExpr {
  op: string;
  [key: string]: unknown;
}

export function column(name: string): WireExpr {
  return { op: "column", name };
}

export function literal(value: number | string | null): WireExpr {
  return { op: "literal", value };
}

export function between(col: string, lo: number, hi: number): WireExpr {
  return { op: "between", operand: column(col), lo: literal(lo), hi: literal(hi) };
}

export interface WireScale {
  type: string;
  domain: [number, number];
  range: [number, number];
}

export interface ClausePayload {
  selection: string;
  source: string;
  views: string[];
  predicate: WireExpr;
  meta: {
    type: "interval";
    pixelSize: number;
    bin: "FLOOR";
    scales: WireScale[];
  };
}

export interface ResultData {
  columns: Record<string, (number | string | null)[]>;
  rowCount: number;
  elapsedMs: number;
}

export interface Frame {
  kind: string;
  reqId?: string | null;
  view?: string;
  data?: ResultData;
  payload?: Record<string, unknown>;
  message?: string;
  server?: string;
}

export type ResultHandler = (viewId: string, data: ResultData) => void;

export interface WebSocketLike {
  send(text: string): void;
  close(): void;
  addEventListener(type: string, handler: (event: any) => void): void;
}

export interface SessionClientOptions {
  url: string;
  makeSocket?: (url: string) => WebSocketLike;
  onResult: ResultHandler;
  onError?: (message: string) => void;
  onLatency?: (ms: number) => void;
  onClose?: () => void;
}

// One session over one WebSocket. Tracks sent frames (for tests and the
// HUD) and measures round-trip latency from each clause frame to the
// first result frame carrying its reqId.
export class SessionClient {
  readonly sent: Frame[] = [];
  private socket: WebSocketLike;
  private nextReq = 0;
  private pendingSince = new Map<string, number>();
  private openPromise: Promise<void>;

  constructor(private options: SessionClientOptions) {
    const make = options.makeSocket
      ?? ((url: string) => new WebSocket(url) as unknown as WebSocketLike);
    this.socket = make(options.url);
    this.openPromise = new Promise((resolve, reject) => {
      this.socket.addEventListener("open", () => resolve());
      this.socket.addEventListener("error", (e: any) =>
        reject(new Error(String(e?.message ?? "websocket error"))));
    });
    this.socket.addEventListener("message", (event: any) =>
      this.handleFrame(JSON.parse(String(event.data))));
    this.socket.addEventListener("close", () => options.onClose?.());
  }

  async open(): Promise<void> {
    await this.openPromise;
    this.send("hello", {});
  }

  private handleFrame(frame: Frame): void {
    if (frame.kind === "result" && frame.view && frame.data) {
      const started = frame.reqId ? this.pendingSince.get(frame.reqId) : undefined;
      if (started !== undefined) {
        this.pendingSince.delete(frame.reqId as string);
        this.options.onLatency?.(performance.now() - started);
      }
      this.options.onResult(frame.view, frame.data);
    } else if (frame.kind === "error") {
      this.options.onError?.(frame.message ?? "unknown server error");
    }
  }

  private send(kind: string, payload: Record<string, unknown>): string {
    const reqId = `r${this.nextReq++}`;
    const frame: Frame = { kind, reqId, payload };
    this.sent.push(frame);
    this.socket.send(JSON.stringify(frame));
    return reqId;
  }

  registerView(id: string, sql: string, selection: string): void {
    this.send("registerView", {
      id,
      sql,
      filterStable: true,
      selection: { name: selection, resolver: "INTERSECT", cross: true },
    });
  }

  clauseUpdate(payload: ClausePayload): void {
    const reqId = this.send("clauseUpdate", payload as unknown as Record<string, unknown>);
    this.pendingSince.set(reqId, performance.now());
  }

  clauseRemove(selection: string, source: string): void {
    const reqId = this.send("clauseRemove", { selection, source });
    this.pendingSince.set(reqId, performance.now());
  }

  activate(payload: ClausePayload): void {
    this.send("activate", payload as unknown as Record<string, unknown>);
  }

  close(): void {
    this.socket.close();
  }
}
