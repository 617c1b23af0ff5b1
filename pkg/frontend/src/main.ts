// Demo dashboard: three brushable, cross-filtered histograms over the
// session-server WebSocket protocol.

import { Histogram } from "./histogram";
import { LinearScale } from "./scale";
import {
  between,
  ClausePayload,
  SessionClient,
  WebSocketLike,
  WireScale,
} from "./protocol";

const SELECTION = "default";

interface ChartSpec {
  id: string;
  title: string;
  column: string;
  sql: string;
  scale: LinearScale;
  bins: number;
  binToValue: (bin: number) => number;
}

export const CHART_SPECS: ChartSpec[] = [
  {
    id: "delay_hist",
    title: "Arrival delay (min)",
    column: "delay",
    sql: "SELECT FLOOR((delay + 60) / 10) AS x, COUNT(*) AS y FROM flights GROUP BY x",
    scale: new LinearScale([-60, 180], [0, 540]),
    bins: 24,
    binToValue: (b) => b * 10 - 60,
  },
  {
    id: "time_hist",
    title: "Departure time (hour)",
    column: "time",
    sql: "SELECT FLOOR(time) AS x, COUNT(*) AS y FROM flights GROUP BY x",
    scale: new LinearScale([0, 24], [0, 240]),
    bins: 24,
    binToValue: (b) => b,
  },
  {
    id: "distance_hist",
    title: "Distance (mi)",
    column: "distance",
    sql: "SELECT FLOOR(distance / 100) AS x, COUNT(*) AS y FROM flights GROUP BY x",
    scale: new LinearScale([0, 2600], [0, 600]),
    bins: 26,
    binToValue: (b) => b * 100,
  },
];

function wireScale(scale: LinearScale): WireScale {
  return { type: "linear", domain: scale.domain, range: scale.range };
}

function clausePayload(spec: ChartSpec, lo: number, hi: number): ClausePayload {
  return {
    selection: SELECTION,
    source: spec.id,
    views: [spec.id],
    predicate: between(spec.column, lo, hi),
    meta: {
      type: "interval",
      pixelSize: 1,
      bin: "FLOOR",
      scales: [wireScale(spec.scale)],
    },
  };
}

export interface DashboardConfig {
  serverUrl: string;
  container: HTMLElement;
  makeSocket?: (url: string) => WebSocketLike;
  document?: Document;
}

export interface Dashboard {
  client: SessionClient;
  charts: Map<string, Histogram>;
  lastLatencyMs: number | null;
  ready: Promise<void>;
  close(): void;
}

export function mountDashboard(config: DashboardConfig): Dashboard {
  const doc = config.document ?? document;
  const charts = new Map<string, Histogram>();
  const hud = doc.createElement("div");
  hud.className = "hud";
  hud.textContent = "latency: -";
  const banner = doc.createElement("div");
  banner.className = "banner";
  banner.style.display = "none";
  banner.textContent = "connection lost, reconnecting...";
  config.container.appendChild(banner);
  config.container.appendChild(hud);

  const dashboard: Dashboard = {
    client: null as unknown as SessionClient,
    charts,
    lastLatencyMs: null,
    ready: Promise.resolve(),
    close: () => dashboard.client.close(),
  };

  const client = new SessionClient({
    url: config.serverUrl,
    makeSocket: config.makeSocket,
    onResult: (viewId, data) => charts.get(viewId)?.update(data.columns),
    onLatency: (ms) => {
      dashboard.lastLatencyMs = ms;
      hud.textContent = `latency: ${ms.toFixed(1)} ms`;
    },
    onError: (message) => {
      banner.textContent = message;
      banner.style.display = "block";
    },
    onClose: () => {
      banner.textContent = "connection lost, reconnecting...";
      banner.style.display = "block";
    },
  });
  dashboard.client = client;

  for (const spec of CHART_SPECS) {
    const chart = new Histogram(
      {
        id: spec.id,
        title: spec.title,
        column: spec.column,
        scale: spec.scale,
        bins: spec.bins,
        binToValue: spec.binToValue,
        onBrush: (interval) => {
          if (interval === null) client.clauseRemove(SELECTION, spec.id);
          else client.clauseUpdate(clausePayload(spec, interval[0], interval[1]));
        },
        // Pointer enter announces the likely upcoming clause shape so the
        // server can start building materialized views speculatively.
        onActivate: () => {
          const [d0] = spec.scale.domain;
          const probe = spec.scale.pixelToValue(10);
          client.activate(clausePayload(spec, d0, probe));
        },
      },
      doc,
    );
    charts.set(spec.id, chart);
    config.container.appendChild(chart.root);
  }

  dashboard.ready = (async () => {
    await client.open();
    for (const spec of CHART_SPECS) {
      client.registerView(spec.id, spec.sql, SELECTION);
    }
  })();
  return dashboard;
}

declare global {
  interface Window {
    crossviewDashboard?: Dashboard;
  }
}

if (typeof window !== "undefined" && typeof document !== "undefined"
    && document.getElementById("app")) {
  const params = new URLSearchParams(window.location.search);
  const server = params.get("server")
    ?? `ws://${window.location.host}/session`;
  window.crossviewDashboard = mountDashboard({
    serverUrl: server,
    container: document.getElementById("app") as HTMLElement,
  });
}
